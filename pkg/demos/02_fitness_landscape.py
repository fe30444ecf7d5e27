"""Why scoring only true positives is not enough.

With the score "matched anomalies" alone, widening a rule never hurts and
the generality term H rewards width, so the rule that matches everything
ties for the top. Subtracting matched normals (``penalized`` mode) sinks
the universal rule. The winner is then the widest box that still avoids
normal traffic, here "any address, ports 0-30", not the tight cluster box.
"""
from esrules import FitnessConfig, Rule, fitness, generate, load_scenario

ds = generate(load_scenario("s1", seed=7))
print(f"{len(ds)} records, {ds.n_anomalous} anomalous")

tight = Rule((81 << 24, (82 << 24) - 1), (ip := (100 << 24) + (11 << 16), ip + 65535), (20, 30))
wide_ports = Rule((0, 2**32 - 1), (0, 2**32 - 1), (0, 30))
everything = Rule.universe()

for mode in ("paper", "penalized"):
    cfg = FitnessConfig(match_mode=mode)
    print(f"\n{mode} mode")
    for name, r in (("tight cluster box", tight), ("all IPs, ports 0-30", wide_ports), ("universe", everything)):
        res = fitness(r, ds, cfg)
        print(f"  {name:22s} anomalies={res.matched_anomalous:3d} normals={res.matched_normal:3d} "
              f"H={res.h:.4g} fitness={res.fitness:.4g}")
