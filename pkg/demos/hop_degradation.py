"""How fast does video quality fall off with path length?

A camera streams over a straight chain of relays spaced 12 m apart. Chains
of 1, 3, 5 and 7 hops share seeds, so each row differs only in length.
"""

from wmsnsim.experiments import hop_degradation
from wmsnsim.video import FecPolicy

policies = {"none": FecPolicy.none(), "simple": FecPolicy.simple(), "qoe_aware": FecPolicy.qoe_aware()}
curves = {name: hop_degradation(p).curve() for name, p in policies.items()}

print("hops " + "".join(f"{name:>11}" for name in curves))
for i, (hops, _) in enumerate(curves["none"]):
    print(f"{hops:>4} " + "".join(f"{curve[i][1]:11.3f}" for curve in curves.values()))
