"""Generic tasks, the operation registry, and access-epoch dependency tracking.

Dependencies follow a read-coalescing epoch model: per handle, consecutive
reads (in submission order) form one epoch and every read-write access is an
epoch of its own.  A task may start on a handle once every task in all
earlier epochs of that handle has finished.
"""
from __future__ import annotations

import enum
import itertools
import threading
from dataclasses import dataclass
from typing import Callable

from .errors import RegistryError, UsageError

_task_ids = itertools.count(1)


def next_task_id():
    return next(_task_ids)


class AccessMode(enum.Enum):
    READ = "R"
    READ_WRITE = "RW"

    def __str__(self):
        return self.value


R = AccessMode.READ
RW = AccessMode.READ_WRITE


class TaskState(enum.Enum):
    CREATED = "created"
    SUBMITTED = "submitted"
    READY = "ready"
    RUNNING = "running"
    AWAITING_CHILDREN = "awaiting_children"
    FINISHED = "finished"


_TRANSITIONS = {
    TaskState.CREATED: {TaskState.SUBMITTED},
    TaskState.SUBMITTED: {TaskState.READY},
    TaskState.READY: {TaskState.RUNNING},
    TaskState.RUNNING: {TaskState.FINISHED, TaskState.AWAITING_CHILDREN},
    TaskState.AWAITING_CHILDREN: {TaskState.FINISHED},
    TaskState.FINISHED: set(),
}


@dataclass(frozen=True)
class Operation:
    """A named pair of behaviours.

    ``split(task, emit)`` calls ``emit(op_name, [(handle, mode), ...])`` once
    per child; ``run(task)`` performs the leaf computation in place.
    """
    name: str
    split: Callable
    run: Callable


_registry: dict[str, Operation] = {}
_registry_lock = threading.Lock()


def register_operation(op, replace=False):
    with _registry_lock:
        if op.name in _registry and not replace:
            raise UsageError(f"operation {op.name!r} is already registered")
        _registry[op.name] = op
    return op


def get_operation(name):
    try:
        return _registry[name]
    except KeyError:
        raise RegistryError(f"unknown operation {name!r}") from None


def registered_operations():
    return sorted(_registry)


class Task:
    def __init__(self, id, op, parent, args, level):
        self.id = id
        self.op = op
        self.parent = parent
        self.args = args
        self.level = level
        self.state = TaskState.CREATED
        self.pending_children = 0
        self.node = None
        self.rank = None
        # store id -> array used instead of the store's own elements
        self.memory = None
        self._lock = threading.Lock()

    @property
    def parent_id(self):
        return self.parent.id if self.parent is not None else -1

    @property
    def operation(self):
        return get_operation(self.op)

    def advance(self, new_state):
        with self._lock:
            if new_state not in _TRANSITIONS[self.state]:
                raise UsageError(f"task {self.id}: illegal transition {self.state.value} -> {new_state.value}")
            self.state = new_state

    def child_done(self):
        """Decrement the outstanding-children count; True when it reaches zero."""
        with self._lock:
            if self.pending_children <= 0:
                raise UsageError(f"task {self.id} has no outstanding children")
            self.pending_children -= 1
            return self.pending_children == 0

    def region(self, h):
        """Array window for handle ``h`` as seen by this task."""
        mem = None if self.memory is None else self.memory.get(h.store.id)
        return h.view(mem)

    def describe(self):
        return " ".join(f"{h.label}:{m}" for h, m in self.args)

    def __repr__(self):
        return f"Task({self.id} {self.op} level={self.level} {self.describe()} {self.state.value})"


def create_task(op_name, parent, args):
    """Build a task; its level is one below its parent (0 without a parent)."""
    get_operation(op_name)
    args = tuple((h, AccessMode(m)) for h, m in args)
    seen = set()
    for h, _ in args:
        if h.id in seen:
            raise UsageError(f"handle {h.label} appears twice in the arguments of {op_name}")
        seen.add(h.id)
    level = 0 if parent is None else parent.level + 1
    return Task(next_task_id(), op_name, parent, args, level)


class _Epoch:
    __slots__ = ("write", "members", "done")

    def __init__(self, write):
        self.write = write
        self.members = []
        self.done = 0

    @property
    def complete(self):
        return self.done == len(self.members)


class EpochLedger:
    """Epoch list for one handle at one executor node."""

    def __init__(self):
        self.epochs = []
        self.index = {}
        self.head = 0  # first epoch with unfinished members

    def record(self, key, mode):
        if key in self.index:
            raise UsageError(f"task {key} already registered on this handle")
        write = AccessMode(mode) is AccessMode.READ_WRITE
        last = self.epochs[-1] if self.epochs else None
        if write or last is None or last.write:
            self.epochs.append(_Epoch(write))
        idx = len(self.epochs) - 1
        self.epochs[idx].members.append(key)
        if self.head > idx:
            # rejoining a finished trailing read group
            self.head = idx
        self.index[key] = idx
        return idx

    def is_clear(self, key):
        return self.index[key] <= self.head

    def complete(self, key):
        """Mark ``key`` finished; return the keys this newly unblocks."""
        idx = self.index[key]
        ep = self.epochs[idx]
        ep.done += 1
        if ep.done > len(ep.members):
            raise UsageError(f"task {key} completed twice")
        if idx != self.head or not ep.complete:
            return []
        while self.head < len(self.epochs) and self.epochs[self.head].complete:
            self.head += 1
        if self.head < len(self.epochs):
            return list(self.epochs[self.head].members)
        return []

    def blockers(self, key):
        """Unfinished keys in epochs before ``key``'s epoch (diagnostics only)."""
        idx = self.index[key]
        return [(i, self.epochs[i].members) for i in range(self.head, idx)]


def record_access(ledger, task, mode):
    return ledger.record(task.id, mode)


def is_ready(task, ledgers):
    """True iff every earlier epoch on each of ``task``'s handles has finished.

    ``ledgers`` maps handle id to that handle's ``EpochLedger`` at the node.
    """
    return all(ledgers[h.id].is_clear(task.id) for h, _ in task.args)


class DependencyTracker:
    """Per-node bookkeeping: one ledger per handle plus blocked counts per key.

    Keys are task ids (or ids of internal pseudo-tasks).  Not thread safe;
    callers hold their own lock.
    """

    def __init__(self):
        self.ledgers = {}
        self.blocked = {}
        self.handles = {}

    def register(self, key, accesses):
        hids = []
        blocked = 0
        for hid, mode in accesses:
            ledger = self.ledgers.get(hid)
            if ledger is None:
                ledger = self.ledgers[hid] = EpochLedger()
            ledger.record(key, mode)
            if not ledger.is_clear(key):
                blocked += 1
            hids.append(hid)
        self.handles[key] = hids
        self.blocked[key] = blocked
        return blocked == 0

    def release(self, key):
        """Finish ``key``; return newly ready keys in increasing key order."""
        try:
            hids = self.handles.pop(key)
        except KeyError:
            raise UsageError(f"unknown task {key}") from None
        del self.blocked[key]
        ready = []
        for hid in hids:
            for other in self.ledgers[hid].complete(key):
                self.blocked[other] -= 1
                if self.blocked[other] == 0:
                    ready.append(other)
        ready.sort()
        return ready

    def waiting(self, key):
        out = {}
        for hid in self.handles.get(key, ()):
            b = self.ledgers[hid].blockers(key)
            if b:
                out[hid] = b
        return out

    def __contains__(self, key):
        return key in self.handles
