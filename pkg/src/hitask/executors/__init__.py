"""Executor backends: the kernel runner, the threaded scheduler, and the simulated distributed scheduler."""
from .distsim import DistSimExecutor, RankMap, assign_rank, default_grid
from .kernel import KernelExecutor
from .threaded import ThreadedExecutor

_KINDS = {
    "kernel": KernelExecutor,
    "threaded": ThreadedExecutor,
    "distsim": DistSimExecutor,
}


def make_executor(dispatcher, spec):
    return _KINDS[spec.kind](dispatcher, spec)


__all__ = ["KernelExecutor", "ThreadedExecutor", "DistSimExecutor", "RankMap",
           "assign_rank", "default_grid", "make_executor"]
