"""Algorithm configuration records and the flat ``key=value`` file format."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .localsearch import FI, IALT, IMP, LocalSearchConfig
from .localsearch import NONE as LS_NONE
from .neighborhoods import CLOSE, NEAR, QUAD, RAND
from .neighborhoods import NONE as SHAKE_NONE

ALGORITHMS = ("GA", "ILS", "PSO", "SA", "VNS")

NP5, P100, N2_100, M1 = "NP5", "P100", "N2_100", "M1"
GEN_RAND, GEN_RAND100, GEN_START = "RAND", "RAND100", "START"


class ConfigError(ValueError):
    """Bad key or value in an algorithm configuration."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def iteration_budget(kind, n: int, p: int) -> int:
    """Iteration count for a named budget (or pass an int through)."""
    if n < 1 or p < 1:
        raise ValueError("N and p must be >= 1")
    if isinstance(kind, int):
        return kind
    if kind == NP5:
        return (n * p) // 5
    if kind == P100:
        return 100 * p
    if kind == N2_100:
        return max(2 * n, 100)
    if kind == M1:
        return 1_000_000
    raise ValueError(f"unknown iteration budget {kind!r}")


@dataclass
class AlgorithmConfig:
    algorithm: str
    iter_budget: object = M1  # budget name or explicit int
    time_budget_s: float = 60.0
    generation: str = GEN_RAND
    domain: Optional[tuple] = None  # (NEAR|QUAD, d)
    localsearch: LocalSearchConfig = field(default_factory=LocalSearchConfig)
    localsearch2: LocalSearchConfig = field(default_factory=LocalSearchConfig)
    shake_mode: str = RAND
    # GA
    population: int = 14
    lam: int = 10
    selection: str = "RAND"
    crossover: str = "ONEPOINT"
    mutation_mode: str = RAND
    mutation_prob: float = 0.1
    replacement: str = "PLUS"
    # ILS
    npert: int = 1
    # SA / VNS
    next: str = "SEQ"
    t0: float = 10.0
    cooling: str = "EXP"
    cooling_opt: float = 0.9
    # PSO
    omega: float = 0.5
    phi_p: float = 0.5
    phi_g: float = 0.5
    # VNS
    k_max: int = 5
    K: int = 10
    accept: str = "ELITIST"
    accept_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}", key)

        need(self.algorithm in ALGORITHMS, "algorithm", f"must be one of {ALGORITHMS}")
        need(
            self.iter_budget in (NP5, P100, N2_100, M1) or (isinstance(self.iter_budget, int) and self.iter_budget >= 0),
            "iter",
            "must be Np/5, 100p, 2N100, 1M or a non-negative integer",
        )
        need(self.time_budget_s > 0, "time_budget", "must be > 0")
        need(self.generation in (GEN_RAND, GEN_RAND100, GEN_START), "generation", "must be RAND, 100RAND or START")
        if self.domain is not None:
            need(self.domain[0] in (NEAR, QUAD), "domain", "must be NEAR or QUAD")
            need(self.domain[1] >= 1, "d", "must be >= 1")
        need(self.shake_mode in (CLOSE, RAND, SHAKE_NONE), "shake", "must be CLOSE, RAND or NONE")
        need(self.mutation_mode in (CLOSE, RAND), "mutation", "must be CLOSE or RAND")
        need(self.population >= 1, "population", "must be >= 1")
        need(self.algorithm != "GA" or 1 <= self.lam <= self.population, "lambda", "must be between 1 and population")
        need(self.selection in ("RAND", "BETTER", "WORSE"), "selection", "must be RAND, BETTER or WORSE")
        need(self.crossover in ("MERGING", "ONEPOINT", "CUPCAP", "RANDPARENT"), "crossover", "unknown operator")
        need(0.0 <= self.mutation_prob <= 1.0, "mutation_prob", "must be in [0, 1]")
        need(self.replacement in ("COMMA", "PLUS"), "replacement", "must be (mu,lambda) or (mu+lambda)")
        need(1 <= self.npert <= 20, "npert", "must be in [1, 20]")
        need(self.next in ("SEQ", "DVNS"), "next", "must be SEQ or DVNS")
        need(1.0 <= self.t0 <= 100.0, "t0", "must be in [1, 100]")
        need(self.cooling in ("LIN", "EXP", "NONE"), "cooling", "must be LIN, EXP or NONE")
        for key in ("omega", "phi_p", "phi_g", "accept_prob"):
            need(0.0 <= getattr(self, key) <= 1.0, key, "must be in [0, 1]")
        need(1 <= self.k_max <= 50, "kmax", "must be in [1, 50]")
        need(1 <= self.K <= 100, "K", "must be in [1, 100]")
        need(self.accept in ("ELITIST", "WALK", "PROB"), "accept", "must be ELITIST, WALK or PROB")
        if self.algorithm == "GA":
            need(self.population >= 2 or self.selection != "RAND", "population", "RAND selection needs >= 2 individuals")
        uses_domain = (
            self.shake_mode == CLOSE and self.algorithm in ("ILS", "SA", "VNS")
            or self.mutation_mode == CLOSE and self.algorithm == "GA"
            or IMP in (self.localsearch.kind, self.localsearch2.kind)
        )
        need(not uses_domain or self.domain is not None, "domain", "CLOSE moves and IMP need a domain model")

    def replace(self, **changes) -> "AlgorithmConfig":
        return dataclasses.replace(self, **changes)


def _norm_key(key: str) -> str:
    key = key.strip()
    if key in ("K",):
        return "K"
    return re.sub(r"[^a-z0-9]", "", key.lower())


_ITER = {"NP/5": NP5, "NP5": NP5, "100P": P100, "P100": P100, "2N100": N2_100, "N2_100": N2_100, "1M": M1, "M1": M1}
_GEN = {"RAND": GEN_RAND, "100RAND": GEN_RAND100, "RAND100": GEN_RAND100, "START": GEN_START}
_SELECTION = {"RAND": "RAND", "BETTER": "BETTER", "BETTERS": "BETTER", "WORSE": "WORSE", "WORSES": "WORSE"}
_CROSSOVER = {
    "MERGING": "MERGING",
    "1POINT": "ONEPOINT",
    "ONEPOINT": "ONEPOINT",
    "CUPCAP": "CUPCAP",
    "1RANDPARENT": "RANDPARENT",
    "RANDPARENT": "RANDPARENT",
}
_REPLACEMENT = {"(MU,LAMBDA)": "COMMA", "COMMA": "COMMA", "(MU+LAMBDA)": "PLUS", "PLUS": "PLUS"}


def _choice(table):
    def parse(text):
        key = text.strip().upper().replace(" ", "")
        if key not in table:
            raise ValueError(f"{text!r} not one of {sorted(set(table))}")
        return table[key]

    return parse


def _upper(allowed):
    return _choice({a: a for a in allowed})


def _iter(text):
    t = text.strip()
    if re.fullmatch(r"\d+", t):
        return int(t)
    return _choice(_ITER)(t)


# normalized key -> (field name, parser)
_FIELDS = {
    "algorithm": ("algorithm", _upper(ALGORITHMS)),
    "iter": ("iter_budget", _iter),
    "timebudget": ("time_budget_s", float),
    "generation": ("generation", _choice(_GEN)),
    "domain": ("domain_kind", _upper((NEAR, QUAD))),
    "domainm": ("domain_kind", _upper((NEAR, QUAD))),
    "domainmodel": ("domain_kind", _upper((NEAR, QUAD))),
    "d": ("domain_d", int),
    "localsearch": ("ls1_kind", _upper((FI, IALT, IMP, LS_NONE))),
    "laux": ("ls1_laux", int),
    "laux1": ("ls1_laux", int),
    "impparam": ("ls1_imp", int),
    "impparam1": ("ls1_imp", int),
    "localsearch2": ("ls2_kind", _upper((FI, IALT, IMP, LS_NONE))),
    "laux2": ("ls2_laux", int),
    "impparam2": ("ls2_imp", int),
    "shake": ("shake_mode", _upper((CLOSE, RAND, SHAKE_NONE))),
    "npert": ("npert", int),
    "next": ("next", _upper(("SEQ", "DVNS"))),
    "t0": ("t0", float),
    "cooling": ("cooling", _upper(("LIN", "EXP", "NONE"))),
    "coolingopt": ("cooling_opt", float),
    "kmax": ("k_max", int),
    "K": ("K", int),
    "accept": ("accept", _upper(("ELITIST", "WALK", "PROB"))),
    "acceptprob": ("accept_prob", float),
    "population": ("population", int),
    "lambda": ("lam", int),
    "selection": ("selection", _choice(_SELECTION)),
    "crossover": ("crossover", _choice(_CROSSOVER)),
    "mutation": ("mutation_mode", _upper((CLOSE, RAND))),
    "mutationprob": ("mutation_prob", float),
    "mutprob": ("mutation_prob", float),
    "replacement": ("replacement", _choice(_REPLACEMENT)),
    "omega": ("omega", float),
    "phip": ("phi_p", float),
    "phig": ("phi_g", float),
    "seed": ("seed", int),
}


def parse_config(text: str, source: str = "<config>", **overrides) -> AlgorithmConfig:
    """Parse ``key=value`` lines (``#`` comments, blank lines allowed).

    Unknown keys raise :class:`ConfigError` carrying the offending key.
    Table-style placeholders (``---``) are skipped.
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        norm = _norm_key(key)
        if norm not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}", key)
        if value in ("---", "-", ""):
            continue
        name, parse = _FIELDS[norm]
        try:
            values[name] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}", key) from exc
    values.update(overrides)
    return build_config(values, source)


def build_config(values: dict, source: str = "<config>") -> AlgorithmConfig:
    values = dict(values)
    if "algorithm" not in values:
        raise ConfigError(f"{source}: missing 'algorithm'", "algorithm")
    kw = {}
    dk, dd = values.pop("domain_kind", None), values.pop("domain_d", None)
    if dk is not None:
        kw["domain"] = (dk, dd if dd is not None else 10)
    ls = {}
    for prefix in ("ls1", "ls2"):
        kind = values.pop(f"{prefix}_kind", LS_NONE)
        laux = values.pop(f"{prefix}_laux", 1)
        imp = values.pop(f"{prefix}_imp", 1)
        ls[prefix] = LocalSearchConfig(kind, laux, imp)
    kw["localsearch"], kw["localsearch2"] = ls["ls1"], ls["ls2"]
    kw.update(values)
    try:
        return AlgorithmConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path, **overrides) -> AlgorithmConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path), **overrides)


PRESETS = ("GA", "ILS", "PSO", "SA", "VNS")


def preset_text(name: str) -> str:
    name = name.upper()
    if name not in PRESETS:
        raise ConfigError(f"no preset named {name!r}")
    return resources.files("pmedian").joinpath("presets", f"{name.lower()}.cfg").read_text(encoding="utf-8")


def load_preset(name: str, **overrides) -> AlgorithmConfig:
    """One of the five tuned configurations shipped with the package."""
    return parse_config(preset_text(name), f"preset:{name.upper()}", **overrides)


def resolve_config(spec: str, **overrides) -> AlgorithmConfig:
    """A config file path, or ``preset:NAME`` / a bare preset name."""
    if spec.lower().startswith("preset:"):
        return load_preset(spec.split(":", 1)[1], **overrides)
    if not Path(spec).exists() and spec.upper() in PRESETS:
        return load_preset(spec, **overrides)
    return load_config(spec, **overrides)


def config_to_text(cfg: AlgorithmConfig) -> str:
    """Serialize back to the key=value format (round-trips through parse_config)."""
    iter_names = {NP5: "Np/5", P100: "100p", N2_100: "2N100", M1: "1M"}
    gen_names = {GEN_RAND: "RAND", GEN_RAND100: "100RAND", GEN_START: "START"}
    rows = [
        ("algorithm", cfg.algorithm),
        ("iter", iter_names.get(cfg.iter_budget, cfg.iter_budget)),
        ("time_budget", repr(cfg.time_budget_s)),
        ("generation", gen_names[cfg.generation]),
    ]
    if cfg.domain is not None:
        rows += [("domain", cfg.domain[0]), ("d", cfg.domain[1])]
    rows += [
        ("localsearch", cfg.localsearch.kind),
        ("Laux1", cfg.localsearch.laux),
        ("IMPparam", cfg.localsearch.imp_param),
        ("localsearch2", cfg.localsearch2.kind),
        ("Laux2", cfg.localsearch2.laux),
        ("IMPparam2", cfg.localsearch2.imp_param),
        ("shake", cfg.shake_mode),
        ("npert", cfg.npert),
        ("next", cfg.next),
        ("t0", repr(cfg.t0)),
        ("cooling", cfg.cooling),
        ("coolingOpt", repr(cfg.cooling_opt)),
        ("kmax", cfg.k_max),
        ("K", cfg.K),
        ("accept", cfg.accept),
        ("acceptProb", repr(cfg.accept_prob)),
        ("population", cfg.population),
        ("lambda", cfg.lam),
        ("selection", cfg.selection),
        ("crossover", cfg.crossover),
        ("mutation", cfg.mutation_mode),
        ("mutation_prob", repr(cfg.mutation_prob)),
        ("replacement", cfg.replacement),
        ("omega", repr(cfg.omega)),
        ("phi_p", repr(cfg.phi_p)),
        ("phi_g", repr(cfg.phi_g)),
        ("seed", cfg.seed),
    ]
    return "".join(f"{k}={v}\n" for k, v in rows)
