"""Evolution-strategy rule mining for network intrusion detection.

Rules are boxes over (source IP, destination IP, destination port). An
evolution strategy searches a normalized six-gene encoding of those boxes,
scored against expert-labeled connection records, and sequential covering
assembles the winners into a rule base.
"""
from esrules.conn_model import (
    ConnectionRecord,
    Dataset,
    IngestError,
    IpParseError,
    Label,
    decimal_to_ip,
    ip_to_decimal,
    load_dataset,
    summarize,
    write_dataset,
)
from esrules.es_engine import (
    ConfigError,
    EsConfig,
    EvolutionResult,
    Individual,
    adapt_sigma,
    evolve,
    init_population,
    mutate,
    recombine,
    run,
    select,
)
from esrules.fitness import (
    EvalResult,
    FitnessConfig,
    detection_metrics,
    fitness,
    generality,
    match_score,
)
from esrules.rule_model import (
    BOUNDS,
    DEFAULT_ACTION,
    AttributeBounds,
    Rule,
    RuleGenome,
    decode,
    encode,
    matches,
)
from esrules.rulebase import (
    CoveringConfig,
    RuleBase,
    RuleBaseError,
    RuleEntry,
    apply,
    load,
    save,
    sequential_covering,
)
from esrules.synth import ClusterSpec, ScenarioSpec, generate, load_scenario

__version__ = "0.1.0"
