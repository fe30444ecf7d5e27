"""A single (1+1)-ES run on the planted-cluster scenario S1."""
from esrules import EsConfig, FitnessConfig, decode, detection_metrics, generate, run
from esrules.conn_model import decimal_to_ip
from esrules.synth import load_scenario

ds = generate(load_scenario("s1", seed=1))
res = run(EsConfig(seed=4), ds, FitnessConfig())
rule = decode(res.best.genome)

print(f"stopped by {res.terminated_by} after {len(res.trace) - 1} generations")
for rec in res.trace[:: max(1, len(res.trace) // 10)]:
    print(f"  gen {rec.generation:5d}  best {rec.best_fitness:.4g}  sigma {rec.sigma:.3g}")

(a, b), (c, d), (p, q) = rule.ranges
print(f"rule: src {decimal_to_ip(a)}-{decimal_to_ip(b)}, dst {decimal_to_ip(c)}-{decimal_to_ip(d)}, ports {p}-{q}")
print("DR=%.3f FPR=%.3f" % detection_metrics([rule], ds))
