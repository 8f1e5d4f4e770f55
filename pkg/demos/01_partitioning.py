"""Hierarchical partitioning and how one Cholesky task splits.

Run:  python3 demos/01_partitioning.py
"""
from collections import Counter

import hitask as ht

# An 8x8 matrix tiled twice: a 2x2 grid of 4x4 blocks, each a 2x2 grid of 2x2 blocks.
a = ht.create_data(8, 8, ht.PartitionSpec.square(2, 2))
handles = list(a.walk())
print(f"{len(handles)} handles in the tree (1 + 4 + 16)")
for h in handles[:6]:
    print("  ", h)

# Children alias the parent's storage; nothing is copied.
a(1, 0)(0, 1).view()[...] = 7.0
print("\nafter writing 7s into A(1,0)(0,1):")
print(a.view())

# A splittable task asks its operation for children over the next level.
for p in (1, 2, 3, 4):
    b = ht.create_data(p, p, ht.PartitionSpec.square(p))
    task = ht.create_task("potrf", None, [(b, ht.RW)])
    kids = []
    task.operation.split(task, lambda op, args: kids.append(op))
    print(f"potrf over a {p}x{p} grid -> {len(kids)} children {dict(Counter(kids))}")
