"""Dense matrix storage with a hierarchical partition tree.

Every handle in a tree aliases a window of one contiguous top-level array;
children never own copies.  ``A(r, c)`` on a handle returns the child at grid
position ``(r, c)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UsageError

_handle_ids = itertools.count()
_store_ids = itertools.count()


class PartitionSpec:
    """Block counts per partition level, outermost first.

    ``PartitionSpec([(2, 2), (4, 4)])`` splits the matrix into a 2x2 grid and
    each of those blocks into a 4x4 grid.
    """

    def __init__(self, levels=()):
        levels = tuple(tuple(lv) for lv in levels)
        for lv in levels:
            if len(lv) != 2:
                raise ConfigurationError(f"partition level {lv!r} must be (block_rows, block_cols)")
            for v in lv:
                if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                    raise ConfigurationError(f"block count must be a positive integer, got {v!r}")
        self.levels = tuple((int(a), int(b)) for a, b in levels)

    @classmethod
    def square(cls, *counts):
        """``square(b1, b2)`` is shorthand for ``[(b1, b1), (b2, b2)]``; ``None`` entries are dropped."""
        return cls([(b, b) for b in counts if b is not None])

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def __eq__(self, other):
        return isinstance(other, PartitionSpec) and self.levels == other.levels

    def __repr__(self):
        return f"PartitionSpec({list(self.levels)!r})"


class MatrixStore:
    """Row-major float64 storage backing one partition hierarchy."""

    def __init__(self, n_rows, n_cols, name="A"):
        self.id = next(_store_ids)
        self.name = name
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.elements = np.zeros((n_rows, n_cols), dtype=np.float64)
        self.handles = {}

    def __repr__(self):
        return f"MatrixStore({self.name!r}, {self.n_rows}x{self.n_cols})"


@dataclass(eq=False)
class DataHandle:
    id: int
    store: MatrixStore
    row_offset: int
    col_offset: int
    rows: int
    cols: int
    level: int
    parent: int | None = None
    grid: tuple | None = None
    index: tuple = (0, 0)
    children: tuple = ()

    def __call__(self, r, c):
        return get_partition(self, r, c)

    @property
    def name(self):
        return self.store.name

    @property
    def height(self):
        """Number of partition levels below this handle (0 for a leaf)."""
        h, node = 0, self
        while node.grid is not None:
            h += 1
            node = node.children[0]
        return h

    @property
    def block_coords(self):
        """Block row/column of this handle among all handles of its level."""
        return self.row_offset // self.rows, self.col_offset // self.cols

    @property
    def label(self):
        i, j = self.block_coords
        return f"{self.store.name}({i},{j})"

    def view(self, memory=None):
        """Writable window over ``memory`` (defaults to the store's own array)."""
        base = self.store.elements if memory is None else memory
        return base[self.row_offset:self.row_offset + self.rows,
                    self.col_offset:self.col_offset + self.cols]

    def walk(self):
        """Pre-order iteration over this handle and every descendant."""
        yield self
        for child in self.children:
            yield from child.walk()

    def __repr__(self):
        return (f"DataHandle({self.label} level={self.level} "
                f"rows={self.row_offset}:{self.row_offset + self.rows} "
                f"cols={self.col_offset}:{self.col_offset + self.cols})")


def _new_handle(store, row_offset, col_offset, rows, cols, level, parent, index):
    h = DataHandle(next(_handle_ids), store, row_offset, col_offset, rows, cols,
                   level, parent, index=index)
    store.handles[h.id] = h
    return h


def _partition(h, levels):
    if not levels:
        return
    pr, pc = levels[0]
    if h.rows % pr or h.cols % pc:
        raise ConfigurationError(
            f"{pr}x{pc} blocks do not evenly tile a {h.rows}x{h.cols} region (ragged edges are rejected)")
    br, bc = h.rows // pr, h.cols // pc
    kids = []
    for r in range(pr):
        for c in range(pc):
            child = _new_handle(h.store, h.row_offset + r * br, h.col_offset + c * bc,
                                br, bc, h.level + 1, h.id, (r, c))
            _partition(child, levels[1:])
            kids.append(child)
    h.grid = (pr, pc)
    h.children = tuple(kids)


def create_data(n_rows, n_cols, spec=None, name="A"):
    """Allocate a zeroed matrix and build its whole partition tree eagerly.

    Returns the level-0 handle.
    """
    if n_rows < 1 or n_cols < 1:
        raise UsageError(f"matrix extent must be positive, got {n_rows}x{n_cols}")
    if spec is None:
        spec = PartitionSpec()
    elif not isinstance(spec, PartitionSpec):
        spec = PartitionSpec(spec)
    store = MatrixStore(n_rows, n_cols, name)
    root = _new_handle(store, 0, 0, n_rows, n_cols, 0, None, (0, 0))
    _partition(root, spec.levels)
    return root


def get_partition(h, r, c):
    if h.grid is None:
        raise UsageError(f"{h.label} at level {h.level} is a leaf and has no partitions")
    pr, pc = h.grid
    if not (0 <= r < pr and 0 <= c < pc):
        raise UsageError(f"partition ({r},{c}) out of range for a {pr}x{pc} grid")
    return h.children[r * pc + c]


def num_partitions(h):
    return h.grid if h.grid is not None else (0, 0)


def fill_spd(h, seed):
    """Fill a square level-0 handle with a seeded, strictly diagonally dominant SPD matrix.

    Off-diagonal entries are uniform in [-1, 1) and mirrored; the diagonal is
    ``n + uniform[0, 1)``.
    """
    if h.level != 0:
        raise UsageError("fill_spd expects the level-0 handle")
    if h.rows != h.cols:
        raise UsageError(f"fill_spd needs a square matrix, got {h.rows}x{h.cols}")
    n = h.rows
    rng = np.random.default_rng(seed)
    lower = np.tril(rng.uniform(-1.0, 1.0, size=(n, n)), -1)
    a = lower + lower.T
    a[np.diag_indices(n)] = n + rng.uniform(0.0, 1.0, size=n)
    h.view()[...] = a


def read_region(h, memory=None):
    return np.array(h.view(memory), copy=True)


def write_region(h, block, memory=None):
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (h.rows, h.cols):
        raise UsageError(f"block of shape {block.shape} does not match {h.label} ({h.rows}x{h.cols})")
    h.view(memory)[...] = block
