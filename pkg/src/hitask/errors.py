"""Exception hierarchy shared by the runtime, executors and CLI."""


class HitaskError(Exception):
    pass


class ConfigurationError(HitaskError):
    """Invalid partition spec, flow graph, or graph/data pairing.

    ``diagnostics`` holds ``(line, token, message)`` triples when the error
    comes from parsing a config document.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class UsageError(HitaskError, ValueError):
    pass


class RegistryError(HitaskError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NumericalError(HitaskError, ArithmeticError):
    """A kernel hit a non-positive (or zero) pivot.

    ``pivot`` is the index inside the block, ``global_pivot`` the row of the
    whole matrix when the block location is known.
    """

    def __init__(self, kernel, pivot, global_pivot=None, block=None):
        self.kernel = kernel
        self.pivot = pivot
        self.global_pivot = global_pivot
        self.block = block
        where = f" in block {block}" if block else ""
        glob = f" (matrix row {global_pivot})" if global_pivot is not None else ""
        super().__init__(f"{kernel}: non-positive pivot at index {pivot}{where}{glob}")


class TaskFailure(HitaskError):
    """Raised by ``Dispatcher.wait_all`` when a task's split or run raised."""

    def __init__(self, task, cause):
        self.task = task
        self.cause = cause
        super().__init__(f"task {task.id} ({task.op}) failed: {cause}")


class DeadlockError(HitaskError):
    def __init__(self, message, dump):
        self.dump = dump
        super().__init__(message + "\n" + dump)
