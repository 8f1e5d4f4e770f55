import queue
import threading

from ..config import default_workers
from ..tasks import DependencyTracker
from ..trace import Tracer

_STOP = object()


class ThreadedExecutor:
    """Dependency-tracking scheduler with a pool of worker threads.

    Ready tasks go into one FIFO queue.  A worker that dequeues a task hands
    it to the dispatcher inline, so the split (or the kernel run below this
    node) executes on that worker.
    """

    kind = "threaded"

    def __init__(self, dispatcher, spec):
        self.dispatcher = dispatcher
        self.id = spec.id
        self.workers = spec.params.get("workers") or default_workers()
        self._lock = threading.Lock()
        self._tracker = DependencyTracker()
        self._parked = {}
        self._labels = {}
        self._queue = queue.Queue()
        self._threads = []

    def start(self):
        for i in range(self.workers):
            t = threading.Thread(target=self._worker_loop, args=(i,),
                                 name=f"{self.id}-worker-{i}", daemon=True)
            t.start()
            self._threads.append(t)

    def shutdown(self):
        for _ in self._threads:
            self._queue.put(_STOP)
        for t in self._threads:
            t.join()
        self._threads = []

    def flush(self):
        pass

    def placement(self, task):
        return None

    def submit(self, task):
        accesses = []
        for h, mode in task.args:
            accesses.append((h.id, mode))
            self._labels[h.id] = h.label
        with self._lock:
            ready = self._tracker.register(task.id, accesses)
            if not ready:
                self._parked[task.id] = task
        if ready:
            self._queue.put(task)

    def mark_finished(self, task):
        with self._lock:
            released = [self._parked.pop(k) for k in self._tracker.release(task.id)]
        for t in released:
            self._queue.put(t)

    def _worker_loop(self, index):
        Tracer.set_context(index)
        d = self.dispatcher
        while True:
            task = self._queue.get()
            if task is _STOP:
                return
            d.wait_gate()
            d.on_ready(self.id, task)

    def waiting(self, task):
        with self._lock:
            blocked = self._tracker.waiting(task.id)
        return [f"{self._labels.get(hid, hid)} epoch {idx} held by tasks {sorted(members)}"
                for hid, eps in blocked.items() for idx, members in eps]
