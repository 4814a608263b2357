"""INI run configuration.

One file drives the CLI end to end. Recognized sections:

    [sbm_source]    block generator for the source domain
    [sbm_target]    block generator for the target domain
    [model]         architecture hyperparameters
    [train]         optimizer schedule and ablation switch
    [discrepancy]   distribution-distance settings
    [bound]         error-bound inputs

Every key must name a field of the backing dataclass; unknown keys are
rejected so typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from .model import ModelConfig
from .sbm import SbmConfig
from .training import TrainConfig

SECTIONS = ("sbm_source", "sbm_target", "model", "train", "discrepancy", "bound")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DiscrepancyConfig:
    depth_m: int = 3
    base: str = "wasserstein_exact"
    p: int = 1
    epsilon: float = 1e-3
    bandwidth: float = 0.0
    rho: float = 1.0
    r_lipschitz: float = 0.0
    pair_cap: int = 10_000


@dataclass(frozen=True)
class BoundConfig:
    which: str = "theorem1"
    eps_src: tuple[float, ...] = (0.0,)
    eps_tgt: tuple[float, ...] = (0.0,)
    dyn_w: float = 0.0
    rademacher: float = 0.0
    rho: float = 1.0
    r_lipschitz: float = 0.0
    complexity_b: float = 1.0
    delta: float = 0.05
    n_tilde: int = 100
    big_o_constant: float = 1.0
    lambda_tilde: float = 0.0
    m_total: int = 100


@dataclass
class RunConfig:
    sbm_source: SbmConfig = field(default_factory=SbmConfig)
    sbm_target: SbmConfig = field(default_factory=SbmConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    discrepancy: DiscrepancyConfig = field(default_factory=DiscrepancyConfig)
    bound: BoundConfig = field(default_factory=BoundConfig)


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _convert(raw: str, type_name: str, key: str, section: str):
    raw = raw.strip()
    if type_name.startswith("tuple[float"):
        try:
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        except ValueError:
            raise ConfigError(
                f"[{section}] {key}: expected comma-separated numbers, got {raw!r}")
    if type_name == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected integer, got {raw!r}")
    if type_name == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected number, got {raw!r}")
    if type_name == "bool":
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"[{section}] {key}: expected boolean, got {raw!r}")
    if type_name == "str":
        return raw
    raise ConfigError(f"[{section}] {key}: unsupported field type {type_name}")


def _fill(cls, section: str, items: dict[str, str], skip: frozenset[str] = frozenset()):
    by_name = {f.name: f for f in dataclasses.fields(cls) if f.name not in skip}
    kwargs = {}
    for key, raw in items.items():
        if key not in by_name:
            known = ", ".join(sorted(by_name))
            raise ConfigError(f"[{section}] unknown key {key!r}; known keys: {known}")
        f = by_name[key]
        # Annotations are stored as strings; strip optional qualifiers.
        tname = f.type.split("|")[0].strip()
        kwargs[key] = _convert(raw, tname, key, section)
    return cls(**kwargs)


def load_run_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive field names
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}")

    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(
                f"unknown section [{section}]; known sections: {', '.join(SECTIONS)}")

    def items(name: str) -> dict[str, str]:
        return dict(parser.items(name)) if parser.has_section(name) else {}

    try:
        sbm_source = _fill(SbmConfig, "sbm_source", items("sbm_source"))
        sbm_target = _fill(SbmConfig, "sbm_target", items("sbm_target"))
        model = _fill(ModelConfig, "model", items("model"))
        train = _fill(TrainConfig, "train", items("train"),
                      skip=frozenset({"model"}))
        train = dataclasses.replace(train, model=model)
        discrepancy = _fill(DiscrepancyConfig, "discrepancy", items("discrepancy"))
        bound = _fill(BoundConfig, "bound", items("bound"))
    except TypeError as exc:
        raise ConfigError(str(exc))

    cfg = RunConfig(sbm_source=sbm_source, sbm_target=sbm_target, model=model,
                    train=train, discrepancy=discrepancy, bound=bound)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    try:
        cfg.sbm_source.validate()
        cfg.sbm_target.validate()
        cfg.train.validate()
    except ValueError as exc:
        raise ConfigError(str(exc))
    if cfg.discrepancy.base not in ("wasserstein_exact", "wasserstein_sinkhorn", "mmd"):
        raise ConfigError(f"[discrepancy] base {cfg.discrepancy.base!r} unknown")
    if cfg.discrepancy.depth_m < 0:
        raise ConfigError("[discrepancy] depth_m must be >= 0")
    if cfg.discrepancy.p not in (1, 2):
        raise ConfigError("[discrepancy] p must be 1 or 2")
    if cfg.bound.which not in ("theorem1", "eq1"):
        raise ConfigError("[bound] which must be theorem1 or eq1")
    if not (0.0 < cfg.bound.delta < 1.0):
        raise ConfigError("[bound] delta must lie in (0, 1)")
