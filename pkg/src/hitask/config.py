"""Flow-graph configuration: a small line grammar plus the G1-G3 presets.

    # comments run to end of line
    node <id> <kind> [key=value ...]     kind: kernel | threaded | distsim
    edge <from> <to>
    root <id>

``threaded`` takes ``workers=N``; ``distsim`` takes ``ranks=P`` and an
optional ``grid=RxC``.  Unknown keys are errors.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

from .errors import ConfigurationError

KINDS = ("kernel", "threaded", "distsim")
_ID = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")


def _positive_int(value):
    if not re.fullmatch(r"[0-9]+", value) or int(value) < 1:
        raise ValueError("expected a positive integer")
    return int(value)


def _grid(value):
    m = re.fullmatch(r"([0-9]+)x([0-9]+)", value)
    if not m or int(m.group(1)) < 1 or int(m.group(2)) < 1:
        raise ValueError("expected RxC with positive integers")
    return int(m.group(1)), int(m.group(2))


_PARAMS = {
    "kernel": {},
    "threaded": {"workers": _positive_int},
    "distsim": {"ranks": _positive_int, "grid": _grid},
}


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FlowGraph:
    nodes: tuple
    edges: tuple
    root: str

    def node(self, node_id):
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def successor(self, node_id):
        for a, b in self.edges:
            if a == node_id:
                return b
        return None

    def path(self):
        """Node specs from the root down to the kernel sink."""
        out, cur = [], self.root
        while cur is not None:
            out.append(self.node(cur))
            cur = self.successor(cur)
        return out

    @property
    def depth(self):
        """Number of non-kernel nodes on the root-to-sink path."""
        return sum(1 for n in self.path() if n.kind != "kernel")

    def with_params(self, kind, **params):
        """Copy with ``params`` merged into every node of ``kind``."""
        nodes = tuple(NodeSpec(n.id, n.kind, {**n.params, **params}) if n.kind == kind else n
                      for n in self.nodes)
        return FlowGraph(nodes, self.edges, self.root)


def _format_param(key, value):
    if key == "grid":
        return f"grid={value[0]}x{value[1]}"
    return f"{key}={value}"


def render(g):
    lines = []
    for n in g.nodes:
        extra = "".join(" " + _format_param(k, v) for k, v in n.params.items())
        lines.append(f"node {n.id} {n.kind}{extra}")
    lines += [f"edge {a} {b}" for a, b in g.edges]
    lines.append(f"root {g.root}")
    return "\n".join(lines) + "\n"


def parse(text):
    """Parse and structurally validate a config document.

    Raises ConfigurationError whose ``diagnostics`` lists every problem found
    as ``(line, token, message)``.
    """
    diags = []
    nodes, node_line = {}, {}
    edges, edge_line = [], []
    roots = []
    last_line = 0

    for lineno, raw in enumerate(text.splitlines(), 1):
        last_line = lineno
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        head = words[0]
        if head == "node":
            if len(words) < 3:
                diags.append((lineno, head, "expected: node <id> <kind> [key=value...]"))
                continue
            nid, kind = words[1], words[2]
            if not _ID.match(nid):
                diags.append((lineno, nid, "invalid node id"))
                continue
            if nid == "dispatcher":
                diags.append((lineno, nid, "node id 'dispatcher' is reserved for the trace"))
                continue
            if kind not in KINDS:
                hint = " (GPU kernels are out of scope)" if kind.lower() in ("gpu", "gb", "cublas") else ""
                diags.append((lineno, kind, f"unknown node kind{hint}; expected one of {', '.join(KINDS)}"))
                continue
            if nid in nodes:
                diags.append((lineno, nid, f"duplicate node id (first declared on line {node_line[nid]})"))
                continue
            params = {}
            for tok in words[3:]:
                key, eq, value = tok.partition("=")
                if not eq:
                    diags.append((lineno, tok, "expected key=value"))
                elif key not in _PARAMS[kind]:
                    diags.append((lineno, tok, f"unknown key {key!r} for {kind} node"))
                elif key in params:
                    diags.append((lineno, tok, f"duplicate key {key!r}"))
                else:
                    try:
                        params[key] = _PARAMS[kind][key](value)
                    except ValueError as exc:
                        diags.append((lineno, tok, str(exc)))
            if "grid" in params:
                r, c = params["grid"]
                ranks = params.get("ranks", r * c)
                if r * c != ranks:
                    diags.append((lineno, _format_param("grid", params["grid"]),
                                  f"grid {r}x{c} does not match ranks={ranks}"))
            nodes[nid] = NodeSpec(nid, kind, params)
            node_line[nid] = lineno
        elif head == "edge":
            if len(words) != 3:
                diags.append((lineno, head, "expected: edge <from> <to>"))
                continue
            edges.append((words[1], words[2]))
            edge_line.append(lineno)
        elif head == "root":
            if len(words) != 2:
                diags.append((lineno, head, "expected: root <id>"))
                continue
            roots.append((lineno, words[1]))
        else:
            diags.append((lineno, head, "unknown directive"))

    for (a, b), ln in zip(edges, edge_line):
        for end in (a, b):
            if end not in nodes:
                diags.append((ln, end, "edge references undeclared node"))
    if not roots:
        diags.append((last_line + 1, "root", "missing root directive"))
    for ln, rid in roots[1:]:
        diags.append((ln, rid, "more than one root directive"))
    if roots and roots[0][1] not in nodes:
        diags.append((roots[0][0], roots[0][1], "root references undeclared node"))

    if diags:
        raise ConfigurationError(_summary(diags), diags)

    g = FlowGraph(tuple(nodes.values()), tuple(edges), roots[0][1])
    diags = _structural(g, node_line, edge_line, roots[0][0])
    if diags:
        raise ConfigurationError(_summary(diags), diags)
    return g


def _structural(g, node_line, edge_line, root_line):
    diags = []
    out = {}
    for (a, b), ln in zip(g.edges, edge_line):
        out.setdefault(a, []).append((b, ln))
    for n in g.nodes:
        succ = out.get(n.id, [])
        if n.kind == "kernel" and succ:
            diags.append((succ[0][1], n.id, "kernel node must not have outgoing edges"))
        elif n.kind != "kernel" and not succ:
            diags.append((node_line[n.id], n.id, f"{n.kind} node has no outgoing edge (non-kernel sink)"))
        elif len(succ) > 1:
            diags.append((succ[1][1], n.id,
                          "more than one outgoing edge; multi-terminal graphs (GPU/CPU kernel fan-out) are out of scope"))
    if diags:
        return diags

    seen, cur = [], g.root
    while cur is not None:
        if cur in seen:
            ln = next(ln for (a, _), ln in zip(g.edges, edge_line) if a == seen[-1])
            return [(ln, cur, "cycle in flow graph")]
        seen.append(cur)
        nxt = out.get(cur)
        cur = nxt[0][0] if nxt else None
    for n in g.nodes:
        if n.id not in seen:
            diags.append((node_line[n.id], n.id, "node is not reachable from the root"))
    return diags


def _summary(diags):
    return "invalid flow graph:\n" + "\n".join(f"  line {ln}: {tok!r}: {msg}" for ln, tok, msg in diags)


def default_workers():
    return os.cpu_count() or 1


def preset(name, workers=None, ranks=None):
    """Named graphs: G1 kernel only, G2 threaded->kernel, G3 distsim->threaded->kernel."""
    workers = workers or default_workers()
    key = name.upper()
    if key == "G1":
        text = "node cb kernel\nroot cb\n"
    elif key == "G2":
        text = f"node sg threaded workers={workers}\nnode cb kernel\nedge sg cb\nroot sg\n"
    elif key == "G3":
        text = (f"node dt distsim ranks={ranks or 4}\nnode sg threaded workers={workers}\n"
                "node cb kernel\nedge dt sg\nedge sg cb\nroot dt\n")
    elif key == "G4":
        raise ConfigurationError("preset G4 needs a GPU kernel node; GPU execution is out of scope")
    else:
        raise ConfigurationError(f"unknown preset {name!r}; expected G1, G2 or G3")
    return parse(text)


def load(spec, workers=None, ranks=None):
    """Resolve a preset name or a config file path, applying CLI overrides."""
    if spec.upper() in ("G1", "G2", "G3", "G4"):
        return preset(spec, workers=workers, ranks=ranks)
    try:
        with open(spec) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {spec!r}: {exc}") from None
    g = parse(text)
    if workers:
        g = g.with_params("threaded", workers=workers)
    if ranks:
        # an explicit grid from the file no longer applies
        g = g.with_params("distsim", ranks=ranks)
        nodes = tuple(NodeSpec(n.id, n.kind, {k: v for k, v in n.params.items() if k != "grid"})
                      if n.kind == "distsim" else n for n in g.nodes)
        g = FlowGraph(nodes, g.edges, g.root)
    return g


def check_partition_depth(g, levels):
    """Reject pairing a flow graph with a partition tree it cannot consume.

    The last non-kernel node forwards leaf tasks to the kernel unsplit and each
    node above it consumes one partition level; levels left over at the top are
    split by the dispatcher itself.  So a graph with ``d`` non-kernel nodes
    needs at least ``d - 1`` partition levels.
    """
    d = g.depth
    if levels < d - 1:
        raise ConfigurationError(
            f"flow graph has {d} non-kernel node(s) and needs at least {d - 1} partition level(s); "
            f"the data has {levels}")
