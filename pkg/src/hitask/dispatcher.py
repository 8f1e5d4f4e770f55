"""The dispatcher: routes program tasks through a flow graph of executors.

A task that becomes ready at a node whose successor is another scheduling
node is split by its operation, and the children are submitted to the
successor.  The node directly above the kernel forwards its (leaf) tasks to
the kernel unsplit.  When the data has more partition levels than the graph
can consume, the dispatcher splits the surplus top levels itself, in
program order, before anything enters the graph.

Completions travel back up: when the last child of a task finishes, the
parent finishes at its own node, which releases the parent's successors in
that node's ledgers.
"""
from __future__ import annotations

import threading
import time
from contextlib import contextmanager

from .config import check_partition_depth
from .errors import ConfigurationError, DeadlockError, TaskFailure, UsageError
from .executors import make_executor
from .tasks import TaskState, create_task
from .trace import Tracer

DISPATCHER = "dispatcher"


def _height(task):
    return min(h.height for h, _ in task.args) if task.args else 0


class Dispatcher:
    def __init__(self, graph, *, timeout=30.0, tracer=None, partition_levels=None):
        if partition_levels is not None:
            check_partition_depth(graph, partition_levels)
        self.graph = graph
        self.timeout = timeout
        self.tracer = tracer if tracer is not None else Tracer()
        self.depth = graph.depth
        self.root = graph.root
        self._succ = {n.id: graph.successor(n.id) for n in graph.nodes}
        self._cond = threading.Condition()
        self._gate = threading.Condition()
        self._submitting = 0
        self._closing = False
        self._outstanding = 0
        self._records = {}
        self._failure = None
        self._last_progress = time.monotonic()
        self.nodes = {}
        for spec in graph.path():
            self.nodes[spec.id] = make_executor(self, spec)
        self._kinds = {nid: node.kind for nid, node in self.nodes.items()}
        for node in self.nodes.values():
            node.start()
        self._running = True

    # -- program-facing API -------------------------------------------------

    def submit(self, task):
        if task.level != 0:
            raise UsageError(f"only level-0 tasks may be submitted by the program (task {task.id} is level {task.level})")
        if self._closing:
            raise UsageError("submit called while wait_all is draining")
        if not self._running:
            raise UsageError("dispatcher has been shut down")
        target = max(self.depth - 1, 0)
        if _height(task) < target:
            raise ConfigurationError(
                f"task {task.op} has {_height(task)} partition level(s); the flow graph needs {target}")
        with self._cond:
            self._outstanding += 1
        with self.batch():
            try:
                self._route(task, target)
            except Exception as exc:
                self.fail(task, exc)

    @contextmanager
    def batch(self):
        """Hold back workers while several root tasks are submitted.

        Used internally around every ``submit`` so a single-worker run sees
        each submission atomically, which keeps its schedule deterministic.
        """
        with self._gate:
            self._submitting += 1
        try:
            yield self
        finally:
            with self._gate:
                self._submitting -= 1
                if not self._submitting:
                    self._gate.notify_all()

    def wait_gate(self):
        if self._submitting:
            with self._gate:
                while self._submitting:
                    self._gate.wait()

    def wait_all(self):
        """Block until every submitted root task has finished.

        Raises TaskFailure if a split or kernel raised, DeadlockError if no
        runtime event happens for ``timeout`` seconds while work remains.
        """
        with self._cond:
            self._closing = True
            self._last_progress = time.monotonic()
            try:
                while self._outstanding and self._failure is None:
                    idle = time.monotonic() - self._last_progress
                    if idle >= self.timeout:
                        raise DeadlockError(
                            f"no progress for {self.timeout:.1f}s with {self._outstanding} root task(s) unfinished",
                            self.dump())
                    self._cond.wait(min(self.timeout - idle, 0.5))
            finally:
                self._closing = False
            failure = self._failure
        if failure is not None:
            task, exc = failure
            raise TaskFailure(task, exc) from exc
        for node in self.nodes.values():
            node.flush()

    def shutdown(self):
        if not self._running:
            return
        self._running = False
        for node in self.nodes.values():
            node.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def trace(self):
        """Events recorded since the last call (only meaningful when quiescent)."""
        return self.tracer.collect()

    @property
    def leaf_tasks(self):
        return sum(getattr(n, "leaf_tasks", 0) for n in self.nodes.values())

    @property
    def messages(self):
        return sum(getattr(n, "messages", 0) for n in self.nodes.values())

    @property
    def failed(self):
        return self._failure is not None

    # -- notifications from executors ---------------------------------------

    def emit(self, node, event, task, ctx=None):
        if ctx is None and task.rank is not None and node == task.node:
            ctx = task.rank
        self._last_progress = time.monotonic()
        self.tracer.emit(node, event, task, ctx=ctx)

    def emit_message(self, node, src, dst, handle, version, consumer):
        self._last_progress = time.monotonic()
        self.tracer.emit_raw(node=node, ctx=src, task=consumer.id, parent=consumer.parent_id,
                             op="transfer", level=consumer.level, event="message",
                             detail=f"{src}→{dst},{handle.label},{version}")

    def on_ready(self, node_id, task):
        """``task`` became dependency-ready at ``node_id``: split it downward or hand it to the kernel."""
        if self._failure is not None:
            return
        try:
            task.advance(TaskState.READY)
            self.emit(node_id, "ready", task)
            nxt = self._succ[node_id]
            if self._kinds[nxt] == "kernel":
                self.nodes[nxt].execute(task)
            else:
                self._split(task, lambda child: self._submit_to(nxt, child))
        except Exception as exc:
            self.fail(task, exc)

    def on_finished(self, node_id, task):
        """``task`` (a leaf, or a parent whose children all finished) is done."""
        while task is not None:
            if task.id not in self._records:
                raise UsageError(f"completion of unknown task {task.id}")
            task.advance(TaskState.FINISHED)
            self.emit(task.node, "finished", task)
            home = self.nodes.get(task.node)
            if home is not None:
                home.mark_finished(task)
            del self._records[task.id]
            parent = task.parent
            if parent is None:
                with self._cond:
                    self._outstanding -= 1
                    self._cond.notify_all()
                return
            task = parent if parent.child_done() else None

    def fail(self, task, exc):
        with self._cond:
            if self._failure is None:
                self._failure = (task, exc)
            self._cond.notify_all()

    # -- internals ----------------------------------------------------------

    def _route(self, task, target):
        if _height(task) > target:
            task.node = DISPATCHER
            self._records[task.id] = task
            task.advance(TaskState.SUBMITTED)
            self.emit(DISPATCHER, "submitted", task)
            task.advance(TaskState.READY)
            self.emit(DISPATCHER, "ready", task)
            self._split(task, lambda child: self._route(child, target))
        else:
            self._submit_to(self.root, task)

    def _submit_to(self, node_id, task):
        if self._failure is not None:
            return
        node = self.nodes[node_id]
        task.node = node_id
        self._records[task.id] = task
        ctx = node.placement(task)
        task.advance(TaskState.SUBMITTED)
        self.emit(node_id, "submitted", task, ctx=ctx)
        node.submit(task)

    def _split(self, task, forward):
        task.advance(TaskState.RUNNING)
        children = []

        def emit_child(op, args):
            child = create_task(op, task, args)
            child.memory = task.memory
            children.append(child)
            return child

        task.operation.split(task, emit_child)
        if not children:
            self.on_finished(task.node, task)
            return
        task.pending_children = len(children)
        task.advance(TaskState.AWAITING_CHILDREN)
        for child in children:
            if self._failure is not None:
                return
            forward(child)

    def dump(self):
        """Human-readable listing of unfinished tasks and what they wait for."""
        lines = []
        for task in sorted(list(self._records.values()), key=lambda t: t.id):
            lines.append(f"task {task.id} {task.op} [{task.describe()}] state={task.state.value} "
                         f"node={task.node} pending_children={task.pending_children}")
            node = self.nodes.get(task.node)
            if node is not None:
                for why in node.waiting(task):
                    lines.append("    waits on " + why)
        return "\n".join(lines) if lines else "(no unfinished tasks)"


def configure(graph, **kw):
    """Instantiate and start every executor of ``graph``; returns an idle Dispatcher."""
    return Dispatcher(graph, **kw)
