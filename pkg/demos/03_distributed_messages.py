"""Where the messages of a simulated distributed run come from.

Each level-1 task runs on the rank owning the block it writes.  Reading a
block owned elsewhere costs one transfer per (block, version, destination);
later readers on the same rank reuse it.

Run:  python3 demos/03_distributed_messages.py
"""
from collections import Counter

import hitask as ht
from hitask.executors.distsim import default_grid
from hitask.tracecheck import message_set

for ranks in (1, 2, 4):
    with ht.configure(ht.preset("G3", workers=2, ranks=ranks)) as d:
        a = ht.create_data(64, 64, ht.PartitionSpec.square(4, 2))
        ht.fill_spd(a, 0)
        ht.cholesky(d, a)
        d.wait_all()
        msgs = sorted(message_set(d.trace()))
    pr, pc = default_grid(ranks)
    print(f"P={ranks} ({pr}x{pc} grid): {len(msgs)} messages")
    per_link = Counter((src, dst) for _, _, src, dst in msgs)
    for (src, dst), k in sorted(per_link.items()):
        print(f"   rank {src} -> rank {dst}: {k}")
    for label, version, src, dst in msgs[:4]:
        print(f"   e.g. {label} after {version} write(s), {src} -> {dst}")
