"""Does protecting I frames more than B frames pay off?

Runs the bundled scenario under no FEC, uniform FEC and importance-weighted
FEC with the same seeds, then compares the decodable frame rate of sessions
that crossed three or more hops and the redundancy each policy spent.

    python demos/fec_policies.py          # 5 seeds, about 20 s
    python demos/fec_policies.py 20       # the full 20-seed study
"""

import sys

from wmsnsim.experiments import compare_fec_policies, intrusion_config

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5
study = compare_fec_policies(intrusion_config(), range(1, n_seeds + 1), min_hops=3)

print(f"{n_seeds} seeds, {study.sessions_in_class()} sessions with >= 3 hops, {study.elapsed:.1f} s")
print(f"{'policy':<10} {'DFR':>6} {'gain':>8} {'redundancy':>12}")
for mode in ("none", "simple", "qoe_aware"):
    print(f"{mode:<10} {study.mean_dfr(mode):6.3f} {study.gain(mode) * 100:+7.1f}pp "
          f"{study.redundancy_bytes(mode):>10d} B")
print(f"qoe_aware spends {study.redundancy_ratio() * 100:.0f}% of the uniform policy's redundancy")
