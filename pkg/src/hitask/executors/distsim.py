"""Simulated distributed-memory scheduler.

Ranks are threads inside one process.  Every rank computes on a private
replica of each matrix in which blocks it does not own start out as NaN, so
a missing or premature transfer shows up in the result.  Blocks are owned
2D block-cyclically and each task runs on the owner of the block it writes.

A remote read of block ``h`` at data version ``v`` (the number of writes to
``h`` submitted before the reader) becomes one transfer, cached per
``(h, v, destination)``.  The transfer is two pseudo-tasks in the ledgers:
a *send* that reads ``h`` on the owner (after the v-th write, before the
next one) and a *receive* that writes ``h`` on the destination replica
(after earlier local readers of the old copy).
"""
from __future__ import annotations

import math
import queue
import threading
from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from ..tasks import R, RW, AccessMode, DependencyTracker, next_task_id
from ..trace import Tracer

_STOP = object()


def default_grid(ranks):
    """``(p_r, p_c)`` with ``p_r`` the largest divisor of ``ranks`` not above its square root."""
    pr = max(d for d in range(1, math.isqrt(ranks) + 1) if ranks % d == 0)
    return pr, ranks // pr


@dataclass(frozen=True)
class RankMap:
    p_rows: int
    p_cols: int

    @property
    def ranks(self):
        return self.p_rows * self.p_cols

    def owner(self, i, j):
        return (i % self.p_rows) * self.p_cols + (j % self.p_cols)

    def owner_of(self, h):
        return self.owner(*h.block_coords)


def assign_rank(task, rank_map):
    """Owner-computes: the rank owning the task's read-write argument."""
    owners = {rank_map.owner_of(h) for h, m in task.args if m is AccessMode.READ_WRITE}
    if not owners:
        raise UsageError(f"task {task.id} ({task.op}) has no read-write argument to place it by")
    if len(owners) > 1:
        raise UsageError(f"task {task.id} ({task.op}) writes blocks owned by ranks {sorted(owners)}")
    return owners.pop()


class _Transfer:
    __slots__ = ("send_key", "recv_key", "handle", "version", "src", "dst",
                 "consumer", "payload", "arrived", "clear")

    def __init__(self, handle, version, src, dst, consumer):
        self.send_key = next_task_id()
        self.recv_key = next_task_id()
        self.handle = handle
        self.version = version
        self.src = src
        self.dst = dst
        self.consumer = consumer
        self.payload = None
        self.arrived = False
        self.clear = False


class _Rank:
    def __init__(self, index):
        self.index = index
        self.tracker = DependencyTracker()
        self.inbox = queue.Queue()
        self.replicas = {}
        self.materialized = set()
        self.thread = None


class DistSimExecutor:
    kind = "distsim"

    def __init__(self, dispatcher, spec):
        self.dispatcher = dispatcher
        self.id = spec.id
        ranks = spec.params.get("ranks") or 1
        pr, pc = spec.params.get("grid") or default_grid(ranks)
        self.rank_map = RankMap(pr, pc)
        self.messages = 0
        self._lock = threading.Lock()
        self._ranks = [_Rank(i) for i in range(self.rank_map.ranks)]
        self._pending = {}
        self._versions = {}
        self._transfers = {}
        self._written = {}

    # -- lifecycle ----------------------------------------------------------

    def start(self):
        for rank in self._ranks:
            rank.thread = threading.Thread(target=self._rank_loop, args=(rank,),
                                           name=f"{self.id}-rank-{rank.index}", daemon=True)
            rank.thread.start()

    def shutdown(self):
        for rank in self._ranks:
            rank.inbox.put(_STOP)
        for rank in self._ranks:
            rank.thread.join()

    def flush(self):
        """Copy every written block from its owner's replica back into the matrix."""
        with self._lock:
            for h, r in self._written.values():
                h.view()[...] = h.view(self._ranks[r].replicas[h.store.id])
            self._written.clear()
            self._versions.clear()
            self._transfers.clear()
            for rank in self._ranks:
                rank.replicas.clear()
                rank.materialized.clear()

    # -- dispatcher-facing --------------------------------------------------

    def placement(self, task):
        r = assign_rank(task, self.rank_map)
        task.rank = r
        with self._lock:
            task.memory = {h.store.id: self._replica(r, h.store) for h, _ in task.args}
        return r

    def submit(self, task):
        r = task.rank
        rank = self._ranks[r]
        post = []
        with self._lock:
            local = []
            for h, mode in task.args:
                owner = self.rank_map.owner_of(h)
                if owner == r:
                    self._materialize(r, h)
                    if mode is AccessMode.READ_WRITE:
                        self._versions[h.id] = self._versions.get(h.id, 0) + 1
                        self._written[h.id] = (h, r)
                    local.append((h.id, mode))
                    continue
                version = self._versions.get(h.id, 0)
                key = (h.id, version, r)
                if key not in self._transfers:
                    tr = _Transfer(h, version, owner, r, task)
                    self._transfers[key] = tr
                    self._materialize(owner, h)
                    if self._ranks[owner].tracker.register(tr.send_key, [(h.id, R)]):
                        post.append((owner, ("send", tr)))
                    else:
                        self._pending[tr.send_key] = ("send", tr)
                    if rank.tracker.register(tr.recv_key, [(h.id, RW)]):
                        tr.clear = True
                    else:
                        self._pending[tr.recv_key] = ("recv", tr)
                local.append((h.id, AccessMode.READ))
            if rank.tracker.register(task.id, local):
                post.append((r, ("ready", task)))
            else:
                self._pending[task.id] = ("ready", task)
        self._post(post)

    def mark_finished(self, task):
        with self._lock:
            post = self._release(task.rank, task.id)
        self._post(post)

    def waiting(self, task):
        if task.rank is None:
            return []
        with self._lock:
            blocked = self._ranks[task.rank].tracker.waiting(task.id)
        return [f"rank {task.rank} handle {hid} epoch {idx} held by {sorted(members)}"
                for hid, eps in blocked.items() for idx, members in eps]

    # -- rank contexts ------------------------------------------------------

    def _rank_loop(self, rank):
        Tracer.set_context(rank.index)
        d = self.dispatcher
        while True:
            item = rank.inbox.get()
            if item is _STOP:
                return
            d.wait_gate()
            kind, obj = item
            try:
                if kind == "ready":
                    d.on_ready(self.id, obj)
                elif kind == "send":
                    self._send(obj)
                elif kind == "recv":
                    self._receive(obj)
                elif kind == "apply":
                    self._apply(obj)
            except Exception as exc:
                d.fail(obj if kind == "ready" else obj.consumer, exc)

    def _send(self, tr):
        src = self._ranks[tr.src]
        payload = np.array(tr.handle.view(src.replicas[tr.handle.store.id]), copy=True)
        with self._lock:
            self.messages += 1
        self.dispatcher.emit_message(self.id, tr.src, tr.dst, tr.handle, tr.version, tr.consumer)
        tr.payload = payload
        with self._lock:
            post = self._release(tr.src, tr.send_key)
        post.append((tr.dst, ("recv", tr)))
        self._post(post)

    def _receive(self, tr):
        with self._lock:
            tr.arrived = True
            ready = tr.clear
        if ready:
            self._apply(tr)

    def _apply(self, tr):
        dst = self._ranks[tr.dst]
        tr.handle.view(dst.replicas[tr.handle.store.id])[...] = tr.payload
        tr.payload = None
        with self._lock:
            post = self._release(tr.dst, tr.recv_key)
        self._post(post)

    # -- helpers (callers hold self._lock) ----------------------------------

    def _replica(self, r, store):
        reps = self._ranks[r].replicas
        if store.id not in reps:
            reps[store.id] = np.full((store.n_rows, store.n_cols), np.nan)
        return reps[store.id]

    def _materialize(self, r, h):
        rank = self._ranks[r]
        if h.id not in rank.materialized:
            h.view(self._replica(r, h.store))[...] = h.view()
            rank.materialized.add(h.id)

    def _release(self, r, key):
        post = []
        for k in self._ranks[r].tracker.release(key):
            kind, obj = self._pending.pop(k)
            if kind == "ready":
                post.append((r, ("ready", obj)))
            elif kind == "send":
                post.append((r, ("send", obj)))
            else:
                obj.clear = True
                if obj.arrived:
                    post.append((r, ("apply", obj)))
        return post

    def _post(self, items):
        for r, item in items:
            self._ranks[r].inbox.put(item)
