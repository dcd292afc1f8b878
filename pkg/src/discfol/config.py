"""Run configuration (TOML)."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List, Optional

try:
    import tomllib as _toml
except ImportError:  # Python < 3.11
    import tomli as _toml

from .induction import InductionConfig
from .labyrinth import default_rho
from .mover import MoverConfig


class ConfigError(ValueError):
    pass


DEFAULT_RHO = [0.1, 0.2, 0.35, 0.6, 0.9]


@dataclass
class LabyrinthConfig:
    density: int = 1
    thickness_frac: float = 0.01
    per_sphere: int = 8
    radius_frac: float = 0.03
    tilt: float = 0.05
    grid_step: Optional[float] = None  # default: half the plate thickness
    delta_min: float = 0.05  # required certified length increment per shell


@dataclass
class SamplingConfig:
    n_sphere: int = 10000
    heldout: int = 4
    n_slab: int = 20000
    n_local: int = 20000
    n_plate: int = 2000
    R_trunc: float = 10.0


@dataclass
class LeafConfig:
    # each anchor is (Re c_1, Im c_1, ..., Re zeta0, Im zeta0)
    anchors: List[List[float]] = field(default_factory=lambda: [[0.0, 0.0, 0.0, 0.0]])
    step: float = 0.005
    budget: int = 20000
    n_partition: int = 1000  # random points for the round-trip check
    partition_stage: int = 2  # sample B_k with k = min(I, partition_stage); Phi_I^{-1} of larger balls is ill-conditioned
    rel_tol: float = 0.1  # completeness bound tolerance, relative


@dataclass
class RunConfig:
    seed: int
    n: int = 2
    stages: int = 4
    eps0: float = 0.05
    rho: List[float] = field(default_factory=lambda: list(DEFAULT_RHO))
    labyrinth: LabyrinthConfig = field(default_factory=LabyrinthConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    mover: MoverConfig = field(default_factory=MoverConfig)
    leaves: LeafConfig = field(default_factory=LeafConfig)

    def induction_config(self) -> InductionConfig:
        s = self.sampling
        return InductionConfig(eps0=self.eps0, seed=self.seed, R_trunc=s.R_trunc, n_sphere=s.n_sphere,
                               heldout=s.heldout, n_slab=s.n_slab, n_local=s.n_local, n_plate=s.n_plate,
                               mover=self.mover)

    def to_dict(self) -> dict:
        return asdict(self)


def _section(cls, data: dict, name: str):
    known = set(cls.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise ConfigError(f"[{name}] unknown keys: {sorted(extra)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def from_dict(d: dict) -> RunConfig:
    d = dict(d)
    if "seed" not in d:
        raise ConfigError("seed is mandatory")
    rule = d.pop("rho_rule", None)
    if rule is not None:
        if "rho" in d:
            raise ConfigError("give either rho or rho_rule")
        if rule != "harmonic":
            raise ConfigError(f"unknown rho_rule {rule!r}")
        d["rho"] = default_rho(int(d.get("stages", 4)) + 1)
    subs = {
        "labyrinth": LabyrinthConfig,
        "sampling": SamplingConfig,
        "mover": MoverConfig,
        "leaves": LeafConfig,
    }
    for k, cls in subs.items():
        if k in d:
            if not isinstance(d[k], dict):
                raise ConfigError(f"[{k}] must be a table")
            d[k] = _section(cls, d[k], k)
    cfg = _section(RunConfig, d, "top level")
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except (OSError, _toml.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return from_dict(data)


def validate(cfg: RunConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(isinstance(cfg.seed, int) and not isinstance(cfg.seed, bool), "seed must be an integer")
    need(isinstance(cfg.n, int) and cfg.n >= 2, "n must be an integer >= 2")
    need(isinstance(cfg.stages, int) and cfg.stages >= 0, "stages must be a non-negative integer")
    need(isinstance(cfg.eps0, (int, float)) and cfg.eps0 > 0, "eps0 must be positive")
    rho = cfg.rho
    need(len(rho) >= cfg.stages + 1, "rho needs at least stages + 1 radii")
    need(all(0 < r < 1 for r in rho) and all(b > a for a, b in zip(rho, rho[1:])), "invalid radius schedule")
    L = cfg.labyrinth
    need(L.density >= 1 and L.per_sphere >= 1, "density and per_sphere must be >= 1")
    need(0 < L.thickness_frac < 0.5 and 0 < L.radius_frac < 0.5, "plate fractions out of range")
    need(L.delta_min > 0, "delta_min must be positive")
    need(L.grid_step is None or L.grid_step > 0, "grid_step must be positive")
    S = cfg.sampling
    need(min(S.n_sphere, S.heldout, S.n_slab, S.n_local, S.n_plate) >= 1 and S.R_trunc > 0,
         "sampling sizes must be positive")
    M = cfg.mover
    need(M.on_tol > 0 and M.k0_margin > 0 and M.plate_margin >= 0, "mover tolerances out of range")
    need(0 <= M.direction < cfg.n - 1, "mover direction must index one of z_1..z_{n-1}")
    need(M.max_degree >= 1, "max_degree must be >= 1")
    for a in cfg.leaves.anchors:
        need(len(a) == 2 * cfg.n, "each anchor needs 2n reals")
    need(cfg.leaves.partition_stage >= 1 and cfg.leaves.n_partition >= 1, "partition settings out of range")
    need(cfg.leaves.step > 0 and cfg.leaves.budget >= 2, "leaf step/budget out of range")
