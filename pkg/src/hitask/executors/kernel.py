import threading

from ..tasks import TaskState


class KernelExecutor:
    """Runs each task's operation immediately, in the caller's thread.

    No queue and no dependency tracking: whoever hands a task to this node
    has already ordered it.
    """

    kind = "kernel"

    def __init__(self, dispatcher, spec):
        self.dispatcher = dispatcher
        self.id = spec.id
        self.leaf_tasks = 0
        self._lock = threading.Lock()

    def start(self):
        pass

    def shutdown(self):
        pass

    def flush(self):
        pass

    def placement(self, task):
        return None

    def submit(self, task):
        # tasks routed straight here (no scheduling node above) are ready on arrival
        task.advance(TaskState.READY)
        self.execute(task)

    def execute(self, task):
        d = self.dispatcher
        try:
            task.advance(TaskState.RUNNING)
            d.emit(self.id, "run_start", task)
            task.operation.run(task)
            d.emit(self.id, "run_end", task)
        except Exception as exc:
            d.fail(task, exc)
            return
        with self._lock:
            self.leaf_tasks += 1
        try:
            d.on_finished(self.id, task)
        except Exception as exc:
            d.fail(task, exc)

    def mark_finished(self, task):
        pass

    def waiting(self, task):
        return []
