"""Harness configuration: INI files, flag overrides, and seed derivation.

Configuration lives in an INI file with three sections (``experiment``,
``chain``, ``prior``); every key has a default, so an empty or absent file is
valid. Command-line flags are merged as ``section.key`` overrides before
parsing, keeping one validation path. The default master seed is a fixed
constant — never the clock — so every run is reproducible unless the caller
asks otherwise.

Independent random streams are derived from the master seed through a spawn
tree, and each stream's first 64-bit word is recorded in outputs as its
fingerprint.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

import numpy as np

from .inference import ChainConfig
from .priors import LengthScalePriorSpec, MaxIntensityPriorSpec, SgcpPrior, get_link


class ConfigError(ValueError):
    """Bad configuration file, key, or value."""


_DEFAULTS = {
    "experiment": {
        "truth": "sin1d",
        "ns": "25, 50, 100, 200, 400",
        "replicates": "8",
        "resolution": "64",
        "seed": "20240601",
        "radius_constant": "2.0",
    },
    "chain": {
        "n_iter": "20000",
        "n_burn": "5000",
        "thin": "5",
        "step_log_ell": "0.3",
        "step_log_lambda": "0.3",
        "adapt": "true",
        "adapt_target": "0.3",
    },
    "prior": {
        "link": "logistic",
        "ell_shape": "1.0",
        "ell_rate": "1.0",
        "lam_shape": "2.0",
        "lam_rate": "1.0",
    },
}

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def rng_for(master_seed: int, *path: int) -> np.random.Generator:
    """Independent generator for one node of the seed tree."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(path)))


def seed_fingerprint(master_seed: int, *path: int) -> int:
    """First 64-bit word of the stream at this tree node, for reproducibility logs."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected an integer, got {raw!r}") from None


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected a number, got {raw!r}") from None


def _parse_bool(section: str, key: str, raw: str) -> bool:
    try:
        return _BOOL[raw.strip().lower()]
    except KeyError:
        raise ConfigError(f"{section}.{key}: expected a boolean, got {raw!r}") from None


def _parse_ns(section: str, key: str, raw: str) -> tuple:
    try:
        ns = tuple(int(part.strip()) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected comma-separated integers, got {raw!r}") from None
    if len(ns) < 2:
        raise ConfigError(f"{section}.{key}: need at least two design sizes")
    if list(ns) != sorted(set(ns)):
        raise ConfigError(f"{section}.{key}: design sizes must be strictly increasing")
    return ns


@dataclass(frozen=True)
class HarnessConfig:
    """Fully parsed configuration with typed fields."""

    truth: str
    ns: tuple
    replicates: int
    resolution: int
    seed: int
    radius_constant: float
    n_iter: int
    n_burn: int
    thin: int
    step_log_ell: float
    step_log_lambda: float
    adapt: bool
    adapt_target: float
    link: str
    ell_shape: float
    ell_rate: float
    lam_shape: float
    lam_rate: float
    raw: tuple  # canonical (section.key, value) pairs, for fingerprinting

    def chain_config(self, **overrides) -> ChainConfig:
        kwargs = dict(
            n_iter=self.n_iter,
            n_burn=self.n_burn,
            thin=self.thin,
            resolution=self.resolution,
            step_log_ell=self.step_log_ell,
            step_log_lambda=self.step_log_lambda,
            adapt=self.adapt,
            adapt_target=self.adapt_target,
        )
        kwargs.update(overrides)
        try:
            return ChainConfig(**kwargs)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def prior(self, dim: int) -> SgcpPrior:
        try:
            return SgcpPrior(
                dim=dim,
                link=get_link(self.link),
                ell_prior=LengthScalePriorSpec(dim=dim, shape=self.ell_shape, rate=self.ell_rate),
                lam_prior=MaxIntensityPriorSpec(shape=self.lam_shape, rate=self.lam_rate),
            )
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def fingerprint(self) -> str:
        """Stable 12-hex digest of the canonical key-value listing."""
        text = "\n".join(f"{k}={v}" for k, v in self.raw)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def load_config(path: str | None = None, overrides: dict | None = None) -> HarnessConfig:
    """Merge defaults, an optional INI file, and ``section.key`` overrides."""
    merged = {sec: dict(vals) for sec, vals in _DEFAULTS.items()}

    if path is not None:
        parser = configparser.ConfigParser()
        try:
            read = parser.read(path)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {path}: {e}") from None
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for section in parser.sections():
            if section not in merged:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in merged[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                merged[section][key] = value

    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in merged or key not in merged[section]:
            raise ConfigError(f"unknown config key {dotted}")
        merged[section][key] = str(value)

    raw = tuple(sorted((f"{sec}.{key}", val.strip())
                       for sec, vals in merged.items() for key, val in vals.items()))
    e, c, p = merged["experiment"], merged["chain"], merged["prior"]
    cfg = HarnessConfig(
        truth=e["truth"].strip(),
        ns=_parse_ns("experiment", "ns", e["ns"]),
        replicates=_parse_int("experiment", "replicates", e["replicates"]),
        resolution=_parse_int("experiment", "resolution", e["resolution"]),
        seed=_parse_int("experiment", "seed", e["seed"]),
        radius_constant=_parse_float("experiment", "radius_constant", e["radius_constant"]),
        n_iter=_parse_int("chain", "n_iter", c["n_iter"]),
        n_burn=_parse_int("chain", "n_burn", c["n_burn"]),
        thin=_parse_int("chain", "thin", c["thin"]),
        step_log_ell=_parse_float("chain", "step_log_ell", c["step_log_ell"]),
        step_log_lambda=_parse_float("chain", "step_log_lambda", c["step_log_lambda"]),
        adapt=_parse_bool("chain", "adapt", c["adapt"]),
        adapt_target=_parse_float("chain", "adapt_target", c["adapt_target"]),
        link=p["link"].strip(),
        ell_shape=_parse_float("prior", "ell_shape", p["ell_shape"]),
        ell_rate=_parse_float("prior", "ell_rate", p["ell_rate"]),
        lam_shape=_parse_float("prior", "lam_shape", p["lam_shape"]),
        lam_rate=_parse_float("prior", "lam_rate", p["lam_rate"]),
        raw=raw,
    )
    # fail fast on values the dataclasses would reject
    cfg.chain_config()
    cfg.prior(1)
    if cfg.replicates < 1:
        raise ConfigError("experiment.replicates must be positive")
    if cfg.resolution < 2:
        raise ConfigError("experiment.resolution must be at least 2")
    return cfg
