"""Experiment configuration files.

Grammar (INI as read by :mod:`configparser`, interpolation off)::

    [defaults]            ; optional, merged under every experiment
    seed = 20240101

    [my-experiment]       ; one section per experiment, name = id
    kind = dichotomy-poisson
    alpha = 0.3
    zeta = 0.7071067811865476   ; or: word = RL
    tau = 1                     ; comma-separated list
    n = 50000                   ; comma-separated list; 1e5 and 10^4.5 allowed
    replicas = 2000

Keys are case-insensitive; ``#`` and ``;`` start comments. See
:data:`KEYS` for every recognised key and its default.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..mpmap import SQRT5_MINUS_2, BranchWord

KINDS = (
    "dichotomy-poisson",
    "dichotomy-compound",
    "zero-classical",
    "zero-adjusted",
    "induced-compare",
    "measure-asymptotics",
    "dprime",
    "ulam-bound",
    "duality",
)

# kinds whose verdict rests on replica distributions
DISTRIBUTIONAL = {"dichotomy-poisson", "dichotomy-compound", "zero-classical", "zero-adjusted", "induced-compare"}
MIN_REPLICAS = 200


class ConfigError(ValueError):
    """Raised with every violated rule listed, one per line."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def _floats(s):
    out = []
    for tok in str(s).replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "^" in tok:
            b, e = tok.split("^", 1)
            out.append(float(b) ** float(e))
        else:
            out.append(float(tok))
    return out


def _ints(s):
    vals = _floats(s)
    out = [int(round(v)) for v in vals]
    return out


def _count(s):
    vals = _ints(s)
    if len(vals) != 1:
        raise ValueError(s)
    return vals[0]


# key -> (parser, default)
KEYS = {
    "kind": (str, None),
    "alpha": (float, None),
    "zeta": (float, None),
    "word": (str, None),
    "tau": (_floats, [1.0]),
    "n": (_ints, []),
    "replicas": (_count, 0),
    "seed": (int, 0),
    "replica_offset": (int, 0),
    "backend": (str, "ulam"),
    "n_cells": (_count, 4096),
    "grading": (float, 1.02),
    "window": (float, 2.0),
    "q": (int, -1),
    "orbit_length": (_count, 10**8),
    "samples": (_count, 10**5),
    "b": (_floats, []),
    "j_max": (_count, 0),
    "workers": (int, 1),
    "tv_tol": (float, 0.05),
    "ks_tol": (float, 0.05),
    "ei_tol": (float, 0.05),
    "evl_tol": (float, 0.05),
    "evl_min": (float, 0.95),
    "ei_max": (float, 0.05),
    "gap_tol": (float, 0.05),
    "slope_tol": (float, 0.05),
    "kac_tol": (float, 0.02),
    "flat_tol": (float, 0.10),
    "mesh_tol": (float, 0.10),
    "synthetic_tol": (float, 0.03),
    "dprime_const": (float, 2.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One validated experiment section."""

    name: str
    kind: str
    alpha: float
    zeta: float | None = None
    word: str | None = None
    tau: tuple = (1.0,)
    n: tuple = ()
    replicas: int = 0
    seed: int = 0
    replica_offset: int = 0
    backend: str = "ulam"
    n_cells: int = 4096
    grading: float = 1.02
    window: float = 2.0
    q: int = -1
    orbit_length: int = 10**8
    samples: int = 10**5
    b: tuple = ()
    j_max: int = 0
    workers: int = 1
    tolerances: dict = field(default_factory=dict)

    def tol(self, key):
        return self.tolerances.get(key, KEYS[key][1])

    def canonical(self) -> dict:
        """Everything that determines the results (workers excluded)."""
        d = asdict(self)
        d.pop("workers")
        d["tolerances"] = dict(sorted(d["tolerances"].items()))
        return d

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def replica_ids(self):
        return range(self.replica_offset, self.replica_offset + self.replicas)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        d = {k: v for k, v in vars(self).items()}
        d.update({k: v for k, v in kw.items() if v is not None})
        return validate(ExperimentConfig(**d))


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check every rule and raise a single ConfigError listing all failures."""
    p = []
    if cfg.kind not in KINDS:
        p.append(f"[{cfg.name}] kind {cfg.kind!r} is not one of {', '.join(KINDS)}")
    a = cfg.alpha
    if a is None or not math.isfinite(a) or not 0.0 < a < 1.0:
        p.append(f"[{cfg.name}] alpha must lie in (0, 1), got {a!r}")
    elif cfg.kind == "zero-adjusted" and not a < SQRT5_MINUS_2:
        p.append(f"[{cfg.name}] zero-adjusted needs alpha < sqrt(5) - 2 = {SQRT5_MINUS_2:.5f}, got {a}")
    if cfg.kind in DISTRIBUTIONAL and cfg.replicas < MIN_REPLICAS:
        p.append(f"[{cfg.name}] replicas must be >= {MIN_REPLICAS} for {cfg.kind}, got {cfg.replicas}")
    if cfg.replicas < 0 or cfg.replica_offset < 0:
        p.append(f"[{cfg.name}] replicas and replica_offset must be non-negative")
    if any(not t > 0 for t in cfg.tau):
        p.append(f"[{cfg.name}] every tau must be positive, got {list(cfg.tau)}")
    if any(n < 1 for n in cfg.n):
        p.append(f"[{cfg.name}] every n must be >= 1, got {list(cfg.n)}")
    if cfg.kind not in ("measure-asymptotics", "duality") and not cfg.n:
        p.append(f"[{cfg.name}] n grid is empty")
    if cfg.zeta is not None and cfg.word is not None:
        p.append(f"[{cfg.name}] give either zeta or word, not both")
    if cfg.zeta is not None and not 0.0 <= cfg.zeta <= 1.0:
        p.append(f"[{cfg.name}] zeta must lie in [0, 1], got {cfg.zeta}")
    if cfg.word is not None:
        try:
            w = BranchWord(cfg.word)
            if w.all_left:
                p.append(f"[{cfg.name}] word {w.word!r} collapses onto 0")
        except ValueError as e:
            p.append(f"[{cfg.name}] {e}")
    if cfg.kind in ("dichotomy-poisson", "dichotomy-compound", "induced-compare") and cfg.zeta is None and cfg.word is None:
        p.append(f"[{cfg.name}] {cfg.kind} needs zeta or word")
    if cfg.backend not in ("ulam", "empirical"):
        p.append(f"[{cfg.name}] backend must be ulam or empirical, got {cfg.backend!r}")
    if cfg.n_cells < 1:
        p.append(f"[{cfg.name}] n_cells must be >= 1")
    if cfg.grading < 1.0:
        p.append(f"[{cfg.name}] grading must be >= 1")
    if not cfg.window > 0:
        p.append(f"[{cfg.name}] window must be positive")
    if cfg.workers < 1:
        p.append(f"[{cfg.name}] workers must be >= 1")
    if cfg.orbit_length < 10**5:
        p.append(f"[{cfg.name}] orbit_length must be >= 1e5")
    if cfg.kind == "duality" and any(not 0 < b < 0.5 for b in cfg.b):
        p.append(f"[{cfg.name}] every b must lie in (0, 1/2)")
    if p:
        raise ConfigError(p)
    return cfg


def _section_to_config(name, sec, defaults) -> ExperimentConfig:
    problems = []
    merged = dict(defaults)
    merged.update(sec)
    values = {}
    tolerances = {}
    for key, raw in merged.items():
        key = key.strip().lower()
        if key not in KEYS:
            problems.append(f"[{name}] unknown key {key!r}")
            continue
        parser = KEYS[key][0]
        try:
            val = parser(raw.strip())
        except (TypeError, ValueError):
            problems.append(f"[{name}] cannot parse {key} = {raw!r}")
            continue
        if key.endswith("_tol") or key in ("evl_min", "ei_max", "dprime_const"):
            tolerances[key] = val
        else:
            values[key] = val
    if "kind" not in values:
        problems.append(f"[{name}] missing key 'kind'")
    if "alpha" not in values:
        problems.append(f"[{name}] missing key 'alpha'")
    if problems:
        raise ConfigError(problems)
    for k in ("tau", "n", "b"):
        if k in values:
            values[k] = tuple(values[k])
    if "word" in values:
        values["word"] = values["word"].upper()
    return ExperimentConfig(name=name, tolerances=tolerances, **values)


def parse_config(text: str) -> list[ExperimentConfig]:
    """Parse and validate every experiment section of a config text."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), default_section="defaults")
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError([f"syntax error: {e}"]) from None
    defaults = dict(cp.defaults())
    out, problems = [], []
    for name in cp.sections():
        sec = {k: v for k, v in cp.items(name, raw=True) if k not in defaults or cp.get(name, k, raw=True) != defaults[k]}
        try:
            out.append(validate(_section_to_config(name, sec, defaults)))
        except ConfigError as e:
            problems.extend(e.problems)
    if problems:
        raise ConfigError(problems)
    return out


def load_config(path) -> list[ExperimentConfig]:
    return parse_config(Path(path).read_text(encoding="utf-8"))
