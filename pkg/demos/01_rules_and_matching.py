"""Encoding connections and rules as numbers.

IPv4 addresses become 32-bit integers, and a rule becomes three inclusive
integer ranges. The evolution strategy does not search those ranges
directly: it moves six genes in [0, 1], which are scaled per attribute.
"""
from esrules import Rule, RuleGenome, decode, encode, ip_to_decimal, decimal_to_ip, matches
from esrules.conn_model import ConnectionRecord, Label

# %% addresses as integers
for addr in ("81.20.10.1", "100.11.10.1", "255.255.255.255"):
    print(f"{addr:>16} -> {ip_to_decimal(addr)}")
print(decimal_to_ip(1360267777))

# %% a rule: src 81.20.10.1 .. 110.225.87.65, dst exactly 100.11.10.1, ports 1200-3150
rule = Rule((1360267777, 1860267777), (1678445057, 1678445057), (1200, 3150))
print(rule.to_json())

conn = ConnectionRecord(src_ip=1500000000, dst_ip=1678445057, src_port=40000, dst_port=2000,
                        duration=12, state=1, protocol=2, bytes_src=800, bytes_dst=9000,
                        label=Label.ANOMALOUS)
print("matches:", matches(rule, conn))

# %% genotype <-> phenotype
genome = encode(rule)
print("genes:", [round(g, 6) for g in genome.genes])
assert decode(genome) == rule

# a disordered pair is repaired by swapping its bounds
print(decode(RuleGenome((0.6, 0.4, 0.0, 1.0, 0.0, 1.0))).src_ip_range)
