"""Wall time of the kernel-only graph against the threaded one.

On a single core the threaded graph only adds overhead; with four or more
physical cores it should win at this size.

Run:  python3 demos/04_speedup.py [n]
"""
import os
import sys

from hitask.cli import run_cholesky

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1024
print(f"n={n}, b1=8, b2=4, {os.cpu_count()} logical CPU(s)")
best = {}
for conf, workers in (("G1", None), ("G2", 2), ("G2", 4)):
    times = [run_cholesky(conf, n, 8, 4, threads=workers).row.wall_ms for _ in range(3)]
    best[(conf, workers)] = min(times)
    print(f"  {conf} W={workers or 1}: {min(times):8.1f} ms (min of 3)")
base = best[("G1", None)]
for (conf, w), t in best.items():
    if conf != "G1":
        print(f"  speedup G2 W={w}: {base / t:.2f}x")
