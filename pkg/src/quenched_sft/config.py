"""Run configuration: a JSON document plus command-line overrides.

Keys (all optional except ``seed``, which may come from ``--seed``)::

    scenario       "example5" | "bernoulli" | "markov" | {inline definition}
    r              rotation angle (default sqrt(2) - 1)
    psi            "zero" | "tilt" | {"breakpoints": [...], "values": [...], "depth": 1|2}
    markov_weights 2x2 positive weights for the markov scenario
    omega          anchor base point (default 0.1)
    word           designated word (default: the scenario's word)
    n              word length for the point-process runs (default 6)
    n_range        [lo, hi] inclusive range for the decay estimators
    R              list of [lo, hi] open intervals
    mc             {"N": int, "chunk": int}
    tolerances     per-check tolerance overrides
    seed           unsigned 64-bit integer
    csv_paths      number of per-path realisations written by ``simulate``
    tamper         {"table_scale": float} fault injection for negative controls

An inline scenario is ``{"name": str, "b": int, "breakpoints": [...],
"matrices": [[[0/1, ...], ...], ...], "word": [...]}``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .base import IntervalPartition
from .errors import ValidationError
from .gibbs import PotentialSpec
from .process import IntervalUnion
from .scenario import (
    DEFAULT_ANCHOR,
    DEFAULT_R,
    Scenario,
    build_bernoulli_oracle,
    build_example5,
    build_markov_oracle,
)
from .sft import RandomSFT, as_word
from .base import BaseRotation

PROFILES = {
    "smoke": {
        "N": 4000, "exp_law_n": [3], "n_range": [2, 6], "gaps": [0, 4], "symmetry_n": 4,
        "beta_n": [2, 5], "delta_k": 6, "grid_ppc": 2, "engine_n": 5, "nonmix_ppc": 2,
    },
    "full": {
        "N": 20_000, "exp_law_n": [3, 5, 7], "n_range": [2, 10], "gaps": [0, 8], "symmetry_n": 6,
        "beta_n": [2, 8], "delta_k": 12, "grid_ppc": 2, "engine_n": 8, "nonmix_ppc": 4,
    },
}

KNOWN_KEYS = {
    "scenario", "r", "psi", "markov_weights", "omega", "word", "n", "n_range", "R", "mc",
    "tolerances", "seed", "csv_paths", "tamper", "profile", "exp_law_n", "phi", "bernoulli_b",
}


class ConfigError(ValidationError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _line_of(text: str, key: str) -> Optional[int]:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    omega: float
    word: tuple
    n: int
    n_range: tuple
    R: IntervalUnion
    seed: int
    profile: str = "smoke"
    N: int = 4000
    chunk: int = 1024
    workers: int = 1
    tolerances: dict = field(default_factory=dict)
    exp_law_n: tuple = (3,)
    gaps: tuple = (0, 4)
    phi_nm: tuple = (3, 3)
    csv_paths: int = 0
    tamper: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    def setting(self, key):
        return self.settings[key]


def _scenario(raw: dict, text: str, r: float, anchor: float) -> Scenario:
    spec = raw.get("scenario", "example5")
    psi_spec = raw.get("psi", "zero")
    if isinstance(spec, str):
        if spec == "example5":
            psi = psi_spec if isinstance(psi_spec, str) else None
            sc = build_example5(r, psi or "zero", anchor=anchor)
        elif spec == "bernoulli":
            sc = build_bernoulli_oracle(int(raw.get("bernoulli_b", 3)), r)
        elif spec == "markov":
            sc = build_markov_oracle(raw.get("markov_weights", [[1.0, 2.0], [0.5, 1.5]]), r)
        else:
            raise ConfigError(f"unknown scenario {spec!r}", _line_of(text, "scenario"))
    elif isinstance(spec, dict):
        try:
            part = IntervalPartition(tuple(spec["breakpoints"]))
            sft = RandomSFT(BaseRotation(r), int(spec["b"]), part, np.array(spec["matrices"]))
            word = as_word(spec.get("word", [1]), sft.b)
        except KeyError as exc:
            raise ConfigError(f"inline scenario is missing {exc}", _line_of(text, "scenario")) from None
        except ValidationError as exc:
            raise ConfigError(f"inline scenario: {exc}", _line_of(text, "scenario")) from None
        sc = Scenario(str(spec.get("name", "inline")), sft, PotentialSpec.zero(sft.b), word)
    else:
        raise ConfigError("scenario must be a name or an object", _line_of(text, "scenario"))
    if isinstance(psi_spec, dict):
        try:
            psi = PotentialSpec(IntervalPartition(tuple(psi_spec.get("breakpoints", [0.0]))),
                                np.array(psi_spec["values"], dtype=float), int(psi_spec.get("depth", 2)))
        except (KeyError, ValidationError) as exc:
            raise ConfigError(f"psi: {exc}", _line_of(text, "psi")) from None
        sc = sc.with_psi(psi)
    elif psi_spec not in ("zero", "tilt"):
        raise ConfigError(f"unknown potential {psi_spec!r}", _line_of(text, "psi"))
    elif psi_spec == "tilt" and sc.name != "example5":
        raise ConfigError("the tilt potential is defined for example5 only", _line_of(text, "psi"))
    return sc


def parse_config(text: str, seed: Optional[int] = None, workers: Optional[int] = None,
                 profile: Optional[str] = None) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", 1)
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", _line_of(text, unknown[0]))

    profile = profile or raw.get("profile", "smoke")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}", _line_of(text, "profile"))
    prof = dict(PROFILES[profile])

    if seed is None:
        seed = raw.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (config key 'seed' or --seed)")
    if not isinstance(seed, int) or not (0 <= seed < 2**64):
        raise ConfigError("seed must be an unsigned 64-bit integer", _line_of(text, "seed"))

    def number(key, default, kind=float, lo=None, hi=None):
        v = raw.get(key, default)
        try:
            v = kind(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a {kind.__name__}", _line_of(text, key)) from None
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ConfigError(f"{key}={v} out of range", _line_of(text, key))
        return v

    r = number("r", DEFAULT_R, float, 0.0, 1.0)
    omega = number("omega", DEFAULT_ANCHOR, float, 0.0, 1.0)
    if omega >= 1.0:
        raise ConfigError("omega must lie in [0, 1)", _line_of(text, "omega"))
    try:
        sc = _scenario(raw, text, r, omega)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc), _line_of(text, "scenario") or _line_of(text, "r")) from None

    try:
        word = as_word(raw["word"], sc.b) if "word" in raw else sc.word
    except ValidationError as exc:
        raise ConfigError(str(exc), _line_of(text, "word")) from None
    n = number("n", 6, int, 1, 14)
    if n > len(word):
        raise ConfigError(f"n={n} exceeds the word length {len(word)}", _line_of(text, "n"))

    n_range = raw.get("n_range", prof["n_range"])
    if (not isinstance(n_range, list) or len(n_range) != 2 or not all(isinstance(v, int) for v in n_range)
            or not 1 <= n_range[0] <= n_range[1] <= 14):
        raise ConfigError("n_range must be [lo, hi] with 1 <= lo <= hi <= 14", _line_of(text, "n_range"))

    try:
        R = IntervalUnion(tuple(tuple(iv) for iv in raw.get("R", [[0, 1], [1, 2]])))
    except (ValidationError, TypeError, ValueError) as exc:
        raise ConfigError(f"R: {exc}", _line_of(text, "R")) from None

    mc = raw.get("mc", {})
    if not isinstance(mc, dict):
        raise ConfigError("mc must be an object", _line_of(text, "mc"))
    N = mc.get("N", prof["N"])
    chunk = mc.get("chunk", 1024)
    if not (isinstance(N, int) and N >= 1 and isinstance(chunk, int) and chunk >= 1):
        raise ConfigError("mc.N and mc.chunk must be positive integers", _line_of(text, "mc"))

    tolerances = raw.get("tolerances", {})
    if not isinstance(tolerances, dict) or not all(isinstance(v, (int, float)) for v in tolerances.values()):
        raise ConfigError("tolerances must map names to numbers", _line_of(text, "tolerances"))

    exp_n = raw.get("exp_law_n", prof["exp_law_n"])
    if not (isinstance(exp_n, list) and exp_n and all(isinstance(v, int) and 1 <= v <= len(word) for v in exp_n)):
        raise ConfigError("exp_law_n must be a list of word lengths", _line_of(text, "exp_law_n"))

    phi = raw.get("phi", {})
    gaps = phi.get("gaps", prof["gaps"]) if isinstance(phi, dict) else None
    if not (isinstance(gaps, list) and len(gaps) == 2 and 0 <= gaps[0] <= gaps[1]):
        raise ConfigError("phi.gaps must be [lo, hi]", _line_of(text, "phi"))
    phi_nm = (int(phi.get("n", 3)), int(phi.get("m", 3)))

    tamper = raw.get("tamper", {})
    if not isinstance(tamper, dict):
        raise ConfigError("tamper must be an object", _line_of(text, "tamper"))

    if workers is not None and workers < 1:
        raise ConfigError("--workers must be at least 1")

    return RunConfig(
        scenario=sc, omega=omega, word=tuple(word), n=n, n_range=tuple(n_range), R=R, seed=seed,
        profile=profile, N=N, chunk=chunk, workers=workers or 1, tolerances=dict(tolerances),
        exp_law_n=tuple(exp_n), gaps=tuple(gaps), phi_nm=phi_nm,
        csv_paths=number("csv_paths", 0, int, 0), tamper=dict(tamper), settings=prof,
    )


def load_config(path: Optional[str], **overrides) -> RunConfig:
    text = "{}"
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return parse_config(text, **overrides)
