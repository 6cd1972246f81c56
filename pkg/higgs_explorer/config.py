import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from higgs_explorer.bundles import make_bundle
from higgs_explorer.errors import ConfigError, DomainError
from higgs_explorer.geometry import build_grid, grid_for_degree
from higgs_explorer.higgs import higgs_from_mapping, make_params
from higgs_explorer.models import BundleSpec, HiggsSpec, QuadGrid, QuantizationParams, SubbundleSpec
from higgs_explorer.stability import make_subbundle

THREADS_ENV = "HIGGS_EXPLORER_THREADS"


def load_yaml(filename: str) -> Any:
    with open(filename, "r") as file:
        return yaml.safe_load(file)


DEFAULTS = load_yaml(str(Path(__file__).resolve().parent.parent / "config.yaml"))


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_config(overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    if overrides is not None and not isinstance(overrides, dict):
        raise ConfigError(f"Config must be a mapping, got {type(overrides).__name__}")
    unknown = set(overrides or {}) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"Unknown config keys: {sorted(unknown)}")
    return _merge(DEFAULTS, overrides or {})


@dataclass
class ExperimentConfig:
    degrees: List[int]
    twist: int
    higgs: Dict[str, List[Any]]
    k: int
    k_range: List[int]
    tau: float
    alpha: Optional[float]
    beta: Optional[float]
    n_t: Optional[int]
    n_theta: Optional[int]
    balance: Dict[str, Any]
    flow: Dict[str, Any]
    weight: Dict[str, Any]
    bergman: Dict[str, Any]
    gram_oracle: Dict[str, Any]
    seed: Optional[int]
    threads: int
    resolved: Dict[str, Any] = field(default_factory=dict)

    def bundle(self) -> BundleSpec:
        return make_bundle(self.degrees, self.twist)

    def higgs_field(self) -> HiggsSpec:
        return higgs_from_mapping(self.bundle(), self.higgs)

    def params(self, k: Optional[int] = None) -> QuantizationParams:
        return make_params(self.k if k is None else k, len(self.degrees), self.tau, self.alpha, self.beta)

    def grid(self, max_k: Optional[int] = None) -> QuadGrid:
        if self.n_t is not None and self.n_theta is not None:
            return build_grid(self.n_t, self.n_theta)
        top = max(self.degrees) + (max(self.k_range + [self.k]) if max_k is None else max_k) + abs(self.twist)
        auto = grid_for_degree(top)
        return build_grid(self.n_t or auto.n_t, self.n_theta or auto.n_theta)

    def subbundle(self) -> Optional[SubbundleSpec]:
        spec = self.weight.get("subbundle")
        if spec is None:
            return None
        return make_subbundle(self.bundle(), int(spec["degree"]), spec["embedding"])


def _grid_size(value: Any, name: str) -> Optional[int]:
    if value in (None, "auto"):
        return None
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"grid.{name} must be an integer or 'auto', got {value!r}")
    return value


def _positive(value: Any, name: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def _integer(value: Any, name: str, minimum: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def validate_config(resolved: Dict[str, Any]) -> ExperimentConfig:
    """Check every module precondition up front; raises ConfigError."""
    try:
        degrees = [int(a) for a in resolved["degrees"]]
        k_range = sorted(int(k) for k in resolved["k_range"])
        config = ExperimentConfig(
            degrees=degrees,
            twist=int(resolved["twist"]),
            higgs=resolved.get("higgs") or {},
            k=int(resolved["k"]),
            k_range=k_range,
            tau=_positive(resolved["tau"], "tau"),
            alpha=resolved.get("alpha"),
            beta=resolved.get("beta"),
            n_t=_grid_size(resolved["grid"].get("n_t"), "n_t"),
            n_theta=_grid_size(resolved["grid"].get("n_theta"), "n_theta"),
            balance=resolved["balance"],
            flow=resolved["flow"],
            weight=resolved["weight"],
            bergman=resolved["bergman"],
            gram_oracle=resolved["gram_oracle"],
            seed=resolved.get("seed"),
            threads=int(1 if resolved.get("threads") is None else resolved["threads"]),
            resolved=resolved,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed config: {e}")

    if not config.k_range:
        raise ConfigError("k_range must not be empty")
    for section in ("balance", "flow", "weight", "bergman", "gram_oracle"):
        if not isinstance(resolved[section], dict):
            raise ConfigError(f"{section} must be a mapping, got {resolved[section]!r}")
    damping = _positive(config.balance.get("damping", 1.0), "balance.damping")
    if damping > 1:
        raise ConfigError(f"balance.damping must lie in (0, 1], got {damping}")
    _positive(config.balance.get("tol"), "balance.tol")
    _positive(config.flow.get("dt"), "flow.dt")
    _positive(config.flow.get("tol"), "flow.tol")
    _integer(config.balance.get("max_iter"), "balance.max_iter", 1)
    _integer(config.flow.get("max_steps"), "flow.max_steps", 1)
    _integer(config.gram_oracle.get("max_k"), "gram_oracle.max_k", max([-a for a in config.degrees] + [0]))
    t_list = config.weight.get("t_list")
    if not isinstance(t_list, list) or not t_list or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in t_list):
        raise ConfigError(f"weight.t_list must be a non-empty list of numbers, got {t_list!r}")
    if config.threads < 1:
        raise ConfigError(f"threads must be at least 1, got {config.threads}")
    try:
        config.higgs_field()
        for k in set(config.k_range + [config.k]):
            config.params(k)
            if k < -min(config.degrees):
                raise DomainError(f"Level k={k} is below the base-point-free threshold {-min(config.degrees)}")
        config.grid()
        config.subbundle()
    except DomainError as e:
        raise ConfigError(str(e))
    return config


def resolve_threads(flag: Optional[int], config: ExperimentConfig) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}")
    return config.threads
