"""Lifecycle trace events, collection, and the CSV trace file format."""
from __future__ import annotations

import csv
import itertools
import threading
import time
from dataclasses import dataclass, fields

EVENTS = ("submitted", "ready", "run_start", "run_end", "finished", "message")
HEADER = "seq,t_ns,node,ctx,task,parent,op,level,event,detail"
COLUMNS = HEADER.split(",")


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    t_ns: int
    node: str
    ctx: int
    task: int
    parent: int
    op: str
    level: int
    event: str
    detail: str

    def row(self):
        return [getattr(self, f.name) for f in fields(self)]


class Tracer:
    """Buffers events per thread; ``collect`` merges them by sequence number.

    The sequence number is taken when ``emit`` is called, so an event emitted
    before a causal action (releasing a successor, submitting a child) always
    orders before anything that action triggers.
    """

    def __init__(self):
        self._seq = itertools.count()
        self._local = threading.local()
        self._buffers = []
        self._lock = threading.Lock()

    def _buffer(self):
        buf = getattr(self._local, "buf", None)
        if buf is None:
            buf = self._local.buf = []
            with self._lock:
                self._buffers.append(buf)
        return buf

    @staticmethod
    def set_context(ctx):
        _ctx.value = ctx

    @staticmethod
    def context():
        return getattr(_ctx, "value", 0)

    def emit(self, node, event, task=None, ctx=None, detail=None):
        seq = next(self._seq)
        if ctx is None:
            ctx = getattr(_ctx, "value", 0)
        if task is not None:
            ev = TraceEvent(seq, time.monotonic_ns(), node, ctx, task.id, task.parent_id,
                            task.op, task.level, event, task.describe() if detail is None else detail)
        else:
            ev = TraceEvent(seq, time.monotonic_ns(), node, ctx, -1, -1, "", 0, event, detail or "")
        self._buffer().append(ev)
        return ev

    def emit_raw(self, **kw):
        ev = TraceEvent(seq=next(self._seq), t_ns=time.monotonic_ns(), **kw)
        self._buffer().append(ev)
        return ev

    def collect(self):
        """Merge and clear all buffers.  Call only when the runtime is quiescent."""
        with self._lock:
            events = [ev for buf in self._buffers for ev in buf]
            for buf in self._buffers:
                buf.clear()
        events.sort(key=lambda e: e.seq)
        return events


_ctx = threading.local()


def write_trace(events, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        for ev in events:
            w.writerow(ev.row())


def read_trace(path):
    """Parse a trace file; raises TraceFormatError on anything malformed."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise TraceFormatError(f"cannot read trace: {exc}") from None
    lines = text.splitlines()
    if not lines:
        raise TraceFormatError("empty trace file")
    if lines[0] != HEADER:
        raise TraceFormatError(f"bad header {lines[0]!r}")
    events = []
    for lineno, rec in enumerate(csv.reader(lines[1:]), 2):
        if len(rec) != len(COLUMNS):
            raise TraceFormatError(f"line {lineno}: expected {len(COLUMNS)} fields, got {len(rec)}")
        try:
            ev = TraceEvent(int(rec[0]), int(rec[1]), rec[2], int(rec[3]), int(rec[4]), int(rec[5]),
                            rec[6], int(rec[7]), rec[8], rec[9])
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
        if ev.event not in EVENTS:
            raise TraceFormatError(f"line {lineno}: unknown event {ev.event!r}")
        events.append(ev)
    return events
