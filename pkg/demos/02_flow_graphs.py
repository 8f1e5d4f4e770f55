"""One program, three executor configurations.

The Cholesky program below never changes.  Only the flow graph handed to
``configure`` does, and the kernels that end up running are the same set
every time.

Run:  python3 demos/02_flow_graphs.py
"""
import hitask as ht
from hitask.tracecheck import check_trace, leaf_multiset


def program(dispatcher, n=256, b1=4, b2=2, seed=1):
    a = ht.create_data(n, n, ht.PartitionSpec.square(b1, b2))
    ht.fill_spd(a, seed)
    original = a.view().copy()
    ht.cholesky(dispatcher, a)
    dispatcher.wait_all()
    return ht.residual(a.view(), original)


print(ht.render(ht.preset("G3", workers=4, ranks=2)))

leaves = {}
for name, graph in [("G1", ht.preset("G1")),
                    ("G2", ht.preset("G2", workers=4)),
                    ("G3", ht.preset("G3", workers=2, ranks=2))]:
    with ht.configure(graph) as d:
        res = program(d)
        events = d.trace()
        leaves[name] = leaf_multiset(events)
        print(f"{name}: residual {res:.1e}, {d.leaf_tasks} kernels, {d.messages} messages, "
              f"{len(events)} trace events, checker problems: {len(check_trace(events))}")

print("same kernels everywhere:", leaves["G1"] == leaves["G2"] == leaves["G3"])

# A hand-written graph works the same way as a preset.
custom = ht.parse("""
node dt distsim ranks=4 grid=4x1   # row-block-cyclic instead of 2x2
node cb kernel
edge dt cb
root dt
""")
with ht.configure(custom) as d:
    print(f"custom 4x1 grid: residual {program(d, b2=None):.1e}, {d.messages} messages")
