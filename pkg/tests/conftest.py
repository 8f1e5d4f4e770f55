import os
import sys
import threading

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import hitask as ht  # noqa: E402
from hitask.tasks import Operation, register_operation  # noqa: E402

MOD = 1000003
observations = {}
_obs_lock = threading.Lock()


def _probe_split(task, emit):
    raise AssertionError("probe tasks are leaves")


def probe_update(task_id, reads, value):
    return (value * 3 + task_id + sum(reads)) % MOD


def _probe_run(task):
    """Read every argument, then overwrite the read-write ones.

    The values read are recorded so tests can compare them against a
    sequential replay of the same program.
    """
    reads = [float(task.region(h)[0, 0]) for h, _ in task.args]
    with _obs_lock:
        observations[task.id] = tuple(reads)
    for h, m in task.args:
        if m is ht.RW:
            task.region(h)[0, 0] = probe_update(task.id, reads, task.region(h)[0, 0])


register_operation(Operation("probe", _probe_split, _probe_run), replace=True)


def factor(config, n, b1, b2=None, seed=3, **kw):
    """Run a Cholesky under ``config`` and return (factor, original, events, dispatcher)."""
    graph = config if isinstance(config, ht.FlowGraph) else ht.preset(config, **kw)
    a = ht.create_data(n, n, ht.PartitionSpec.square(b1, b2))
    ht.fill_spd(a, seed)
    orig = a.view().copy()
    with ht.configure(graph, timeout=20) as d:
        ht.cholesky(d, a)
        d.wait_all()
    return a.view().copy(), orig, d.trace(), d


@pytest.fixture
def spd():
    def make(n, seed=0):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((n, n))
        return m @ m.T + n * np.eye(n)
    return make


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("[", 1)[1].split("]", 1)[0])):
            terminalreporter.write_line(line)
