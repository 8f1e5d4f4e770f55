"""Offline verification of execution traces.

Checks, per task: the lifecycle state machine, single routing, and
conservation.  Per parent: level discipline and completion causality.  Per
scheduling node: epoch safety (no task starts before every task of earlier
epochs on its handles finished, epochs rebuilt from submission order).  On
a node that exchanged messages the epochs are per rank, and every remote
read must be preceded by exactly one transfer of the right data version.
"""
from __future__ import annotations

from collections import Counter, defaultdict

from .trace import read_trace

_PATTERNS = {
    ("submitted", "ready", "finished"),
    ("submitted", "run_start", "run_end", "finished"),
    ("submitted", "ready", "run_start", "run_end", "finished"),
}
_UNTRACKED_NODES = {"dispatcher"}


def parse_detail(detail):
    """``"A(1,0):R A(1,1):RW"`` -> ``[("A(1,0)", "R"), ("A(1,1)", "RW")]``."""
    out = []
    for tok in detail.split():
        label, _, mode = tok.rpartition(":")
        out.append((label, mode))
    return out


def parse_message(detail):
    route, rest = detail.split(",", 1)
    label, version = rest.rsplit(",", 1)
    src, dst = route.split("→")
    return int(src), int(dst), label, int(version)


class _TaskView:
    __slots__ = ("id", "events", "node", "parent", "level", "op", "args", "ctx")

    def __init__(self, ev):
        self.id = ev.task
        self.events = []
        self.node = None
        self.parent = ev.parent
        self.level = ev.level
        self.op = ev.op
        self.args = parse_detail(ev.detail)
        self.ctx = None

    def seq(self, kind):
        for ev in self.events:
            if ev.event == kind:
                return ev.seq
        return None

    @property
    def start(self):
        for ev in self.events:
            if ev.event in ("ready", "run_start"):
                return ev.seq
        return None

    @property
    def is_leaf(self):
        return any(ev.event == "run_start" for ev in self.events)


def _tasks(events):
    tasks = {}
    for ev in events:
        if ev.event == "message":
            continue
        tv = tasks.get(ev.task)
        if tv is None:
            tv = tasks[ev.task] = _TaskView(ev)
        tv.events.append(ev)
        if ev.event == "submitted" and tv.node is None:
            tv.node = ev.node
            tv.ctx = ev.ctx
    return tasks


def check_trace(events):
    """Return a list of human-readable violations (empty when the trace is clean)."""
    problems = []
    prev = None
    for ev in events:
        if prev is not None and ev.seq <= prev:
            problems.append(f"seq {ev.seq} does not increase (after {prev})")
        prev = ev.seq

    tasks = _tasks(events)
    for tv in tasks.values():
        kinds = tuple(ev.event for ev in tv.events)
        if kinds.count("submitted") != 1:
            problems.append(f"task {tv.id}: submitted {kinds.count('submitted')} times (single routing)")
        if kinds.count("finished") != kinds.count("submitted"):
            problems.append(f"task {tv.id}: {kinds.count('submitted')} submitted vs "
                            f"{kinds.count('finished')} finished events (conservation)")
        if kinds not in _PATTERNS:
            problems.append(f"task {tv.id}: illegal lifecycle {' -> '.join(kinds)}")
        if any(ev.parent != tv.parent or ev.level != tv.level for ev in tv.events):
            problems.append(f"task {tv.id}: parent/level changes between events")

    children = defaultdict(list)
    for tv in tasks.values():
        if tv.parent != -1:
            children[tv.parent].append(tv)
    for pid, kids in children.items():
        parent = tasks.get(pid)
        if parent is None:
            problems.append(f"tasks {[k.id for k in kids][:5]} name unknown parent {pid}")
            continue
        if parent.is_leaf:
            problems.append(f"task {pid} ran a kernel but also has children")
        p_ready, p_fin = parent.seq("ready"), parent.seq("finished")
        for kid in kids:
            if kid.level != parent.level + 1:
                problems.append(f"task {kid.id}: level {kid.level} under parent {pid} at level {parent.level}")
            k_sub, k_start, k_fin = kid.seq("submitted"), kid.start, kid.seq("finished")
            if p_ready is None or k_sub is None or k_sub < p_ready:
                problems.append(f"task {kid.id} submitted before its parent {pid} was ready")
            if p_ready is not None and k_start is not None and k_start < p_ready:
                problems.append(f"task {kid.id} started before its parent {pid} was ready")
            if k_fin is None or p_fin is None or p_fin < k_fin:
                problems.append(f"parent {pid} finished before child {kid.id}")

    messages = defaultdict(list)
    for ev in events:
        if ev.event == "message":
            try:
                messages[ev.node].append((ev.seq,) + parse_message(ev.detail))
            except ValueError:
                problems.append(f"seq {ev.seq}: malformed message detail {ev.detail!r}")

    by_node = defaultdict(list)
    for tv in tasks.values():
        if tv.node is not None and tv.node not in _UNTRACKED_NODES:
            by_node[tv.node].append(tv)
    for node, tvs in by_node.items():
        tvs.sort(key=lambda t: t.seq("submitted") or -1)
        if messages.get(node):
            problems += _check_ranked(node, tvs, messages[node])
        else:
            problems += _check_epochs(node, tvs)
    for node in messages:
        if node not in by_node:
            problems.append(f"node {node}: messages without any tasks")
    return problems


def _check_epochs(node, tvs, where=""):
    """Epoch safety over tasks already sorted by submission order."""
    problems = []
    state = {}  # label -> [finished-max of closed epochs, current epoch is_write, finished-max of current]
    for tv in tvs:
        start = tv.start
        fin = tv.seq("finished")
        if start is None or fin is None:
            continue
        for label, mode in tv.args:
            write = mode == "RW"
            st = state.get(label)
            if st is None:
                st = state[label] = [-1, None, -1]
            barrier, cur_write, cur_max = st
            if cur_write is None or write or cur_write:
                barrier = max(barrier, cur_max)
                cur_write, cur_max = write, -1
            if start < barrier:
                problems.append(f"node {node}{where}: task {tv.id} ({tv.op}) started on {label} at seq {start} "
                                f"before an earlier epoch finished (seq {barrier})")
            cur_max = max(cur_max, fin)
            state[label] = [barrier, cur_write, cur_max]
    return problems


def _check_ranked(node, tvs, msgs):
    problems = []
    per_rank = defaultdict(list)
    for tv in tvs:
        per_rank[tv.ctx].append(tv)
    for rank, group in per_rank.items():
        problems += _check_epochs(node, group, where=f" rank {rank}")

    owner, writers = {}, defaultdict(list)
    for tv in tvs:
        for label, mode in tv.args:
            if mode == "RW":
                writers[label].append(tv)
                if owner.setdefault(label, tv.ctx) != tv.ctx:
                    problems.append(f"node {node}: {label} written on ranks {owner[label]} and {tv.ctx}")
    for _, src, _, label, _ in msgs:
        owner.setdefault(label, src)

    index = {}
    for seq, src, dst, label, version in msgs:
        key = (label, version, dst)
        if key in index:
            problems.append(f"node {node}: duplicate transfer of {label} version {version} to rank {dst}")
            continue
        index[key] = (seq, src)
        if src == dst:
            problems.append(f"node {node}: message from rank {src} to itself")
        if owner.get(label) != src:
            problems.append(f"node {node}: {label} sent by rank {src} but owned by {owner.get(label)}")

    used = set()
    readers_by_label = defaultdict(set)
    for tv in tvs:
        for label, mode in tv.args:
            readers_by_label[label].add(tv.ctx)
    for label, ranks in readers_by_label.items():
        if label not in owner and len(ranks) > 1:
            problems.append(f"node {node}: {label} used on ranks {sorted(ranks)} without any transfer")

    for tv in tvs:
        sub, start = tv.seq("submitted"), tv.start
        for label, mode in tv.args:
            own = owner.get(label)
            if mode == "RW" or own is None or own == tv.ctx:
                continue
            ws = writers[label]
            version = sum(1 for w in ws if w.seq("submitted") < sub)
            key = (label, version, tv.ctx)
            if key not in index:
                problems.append(f"node {node}: task {tv.id} reads remote {label} version {version} "
                                f"on rank {tv.ctx} with no transfer")
                continue
            used.add(key)
            mseq = index[key][0]
            if start is not None and mseq > start:
                problems.append(f"node {node}: task {tv.id} started before {label} v{version} arrived")
            if version > 0 and mseq < (ws[version - 1].seq("finished") or -1):
                problems.append(f"node {node}: {label} v{version} sent before its producer finished")
            if version < len(ws) and (ws[version].start or 0) < mseq:
                problems.append(f"node {node}: {label} v{version} sent after the next writer started")
    for key in index:
        if key not in used:
            problems.append(f"node {node}: unnecessary transfer of {key[0]} version {key[1]} to rank {key[2]}")
    return problems


def leaf_multiset(events):
    """Counter of ``(op, (labels...))`` over every task that ran a kernel."""
    return Counter((tv.op, tuple(label for label, _ in tv.args))
                   for tv in _tasks(events).values() if tv.is_leaf)


def conflict_order(events):
    """Per leaf block, the observed sequence of write / read-group epochs.

    Two correct executions of the same program agree on this whatever their
    schedule, as long as all leaves read and write the same memory.
    """
    acc = defaultdict(list)
    for tv in _tasks(events).values():
        if not tv.is_leaf:
            continue
        key = (tv.op, tuple(label for label, _ in tv.args))
        for label, mode in tv.args:
            acc[label].append((tv.seq("run_start"), mode == "RW", key))
    out = {}
    for label, items in acc.items():
        items.sort()
        epochs = []
        for _, write, key in items:
            if write:
                epochs.append(("W", (key,)))
            elif epochs and epochs[-1][0] == "R":
                epochs[-1] = ("R", tuple(sorted(epochs[-1][1] + (key,))))
            else:
                epochs.append(("R", (key,)))
        out[label] = tuple(epochs)
    return out


def message_set(events):
    """``{(label, version, src, dst)}`` for every message event."""
    out = set()
    for ev in events:
        if ev.event == "message":
            src, dst, label, version = parse_message(ev.detail)
            out.add((label, version, src, dst))
    return out


def check_file(path):
    return check_trace(read_trace(path))
