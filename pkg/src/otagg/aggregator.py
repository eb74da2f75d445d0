"""Descriptor pipeline: scores, transport, pooling, concatenation.

A feature map of n = H * W local vectors plus one global token becomes a
single unit-norm descriptor of length m * l + g_dim:

1. a two-layer score network rates every token against m clusters,
2. optional geometric compatibility is added with weight ``lambda_g``,
3. a constant dustbin row absorbs low-scoring tokens,
4. a transport solver turns scores into assignment mass,
5. projected token features are pooled per cluster and the projected
   global token is appended before one global L2 normalization.

Projection widths are read from the parameter bundle, not hard-coded, so
the same code serves every descriptor-size configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import geometry, ot_core
from .errors import ConfigError, DegenerateError, DimensionError
from .ot_core import LogMarginals, SolverConfig
from .tensor_io import ParamBundle

DESCRIPTOR_NORM_TOL = 1e-5

# tensors every run needs; the geometry group is only consulted when the
# geometric term is enabled
CORE_PARAM_NAMES = (
    "phi_c.w1", "phi_c.b1", "phi_c.w2", "phi_c.b2",
    "phi_t.w1", "phi_t.b1", "phi_t.w2", "phi_t.b2",
    "phi_s.w1", "phi_s.b1", "psi_s.w2", "psi_s.b2",
    "dustbin_z",
)
GEO_PARAM_NAMES = ("phi_g.weight", "phi_g.bias", "cluster_geo", "lambda_g")


@dataclass(frozen=True)
class FeatureMap:
    """Local features (d, H, W) plus a global token (d,)."""

    local: np.ndarray
    global_token: np.ndarray

    def __post_init__(self) -> None:
        local = np.asarray(self.local)
        token = np.asarray(self.global_token)
        if local.ndim != 3 or min(local.shape) < 1:
            raise DimensionError(f"local features must be (d, H, W), got {local.shape}")
        if token.shape != (local.shape[0],):
            raise DimensionError(
                f"global token must have length {local.shape[0]}, got {token.shape}")
        if not (np.all(np.isfinite(local)) and np.all(np.isfinite(token))):
            raise ConfigError("feature map contains NaN or Inf")
        object.__setattr__(self, "local", local)
        object.__setattr__(self, "global_token", token)

    @property
    def depth(self) -> int:
        return self.local.shape[0]

    @property
    def grid(self) -> tuple[int, int]:
        return self.local.shape[1], self.local.shape[2]

    def tokens(self) -> np.ndarray:
        """Flatten to (d, n) columns in coord-grid (x-major) order."""
        d, h, w = self.local.shape
        return self.local.reshape(d, h * w)


@dataclass(frozen=True)
class PipelineConfig:
    """Descriptor layout, ablation switches, and solver settings."""

    m: int = 64
    l: int = 128
    g_dim: int = 256
    d_g: int = 16
    lambda_g_enabled: bool = True
    asymmetric_enabled: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)
    dustbin_mass_rho: float | None = None

    def __post_init__(self) -> None:
        if min(self.m, self.l, self.g_dim, self.d_g) < 1:
            raise ConfigError(
                f"m, l, g_dim, d_g must all be >= 1, got "
                f"{self.m}, {self.l}, {self.g_dim}, {self.d_g}")
        rho = self.effective_rho
        if not 0.0 <= rho < 1.0:
            raise ConfigError(f"dustbin mass share must be in [0, 1), got {rho}")

    @property
    def effective_rho(self) -> float:
        """Dustbin share of source mass; defaults to the uniform 1/(m+1)."""
        if self.dustbin_mass_rho is None:
            return 1.0 / (self.m + 1)
        return self.dustbin_mass_rho

    @property
    def descriptor_dim(self) -> int:
        return self.m * self.l + self.g_dim

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "l": self.l,
            "g_dim": self.g_dim,
            "d_g": self.d_g,
            "lambda_g_enabled": self.lambda_g_enabled,
            "asymmetric_enabled": self.asymmetric_enabled,
            "solver": {
                "tau": self.solver.tau,
                "iters": self.solver.iters,
                "epsilon": self.solver.epsilon,
            },
            "dustbin_mass_rho": self.dustbin_mass_rho,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("pipeline config must be a JSON object")
        known = {"m", "l", "g_dim", "d_g", "lambda_g_enabled", "asymmetric_enabled",
                 "solver", "dustbin_mass_rho"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown pipeline config keys: {sorted(unknown)}")
        kwargs = {k: doc[k] for k in known - {"solver"} if k in doc}
        if "solver" in doc:
            solver_doc = doc["solver"]
            if not isinstance(solver_doc, dict):
                raise ConfigError("solver config must be a JSON object")
            unknown = set(solver_doc) - {"tau", "iters", "epsilon"}
            if unknown:
                raise ConfigError(f"unknown solver config keys: {sorted(unknown)}")
            kwargs["solver"] = SolverConfig(**solver_doc)
        return cls(**kwargs)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"pipeline config is not valid JSON: {exc}") from exc
        return cls.from_json_dict(doc)


def required_param_names(cfg: PipelineConfig) -> tuple[str, ...]:
    names = CORE_PARAM_NAMES
    if cfg.lambda_g_enabled:
        names = names + GEO_PARAM_NAMES
    return names


def validate_params(params: ParamBundle, cfg: PipelineConfig) -> None:
    """Check presence and shape consistency of every tensor a run will touch."""
    missing = [n for n in required_param_names(cfg) if n not in params]
    if missing:
        raise ConfigError(f"parameter bundle is missing tensors: {missing}")

    def shape(name):
        return tuple(params[name].shape)

    for prefix, out_dim in (("phi_c", cfg.l), ("phi_t", cfg.g_dim)):
        _check_two_layer(params, prefix + ".w1", prefix + ".b1",
                         prefix + ".w2", prefix + ".b2", out_dim)
    _check_two_layer(params, "phi_s.w1", "phi_s.b1", "psi_s.w2", "psi_s.b2", cfg.m)
    for name in ("dustbin_z",):
        if params[name].size != 1:
            raise ConfigError(f"{name} must be a scalar tensor, got shape {shape(name)}")
    if cfg.lambda_g_enabled:
        if params["lambda_g"].size != 1:
            raise ConfigError(f"lambda_g must be a scalar tensor, got shape "
                              f"{shape('lambda_g')}")
        w = params["phi_g.weight"]
        if w.ndim != 2 or w.shape != (cfg.d_g, 2):
            raise ConfigError(f"phi_g.weight must be ({cfg.d_g}, 2), got {shape('phi_g.weight')}")
        if shape("phi_g.bias") != (cfg.d_g,):
            raise ConfigError(f"phi_g.bias must be ({cfg.d_g},), got {shape('phi_g.bias')}")
        if shape("cluster_geo") != (cfg.m, cfg.d_g):
            raise ConfigError(f"cluster_geo must be ({cfg.m}, {cfg.d_g}), "
                              f"got {shape('cluster_geo')}")


def _check_two_layer(params: ParamBundle, w1: str, b1: str, w2: str, b2: str,
                     out_dim: int) -> None:
    shapes = {name: tuple(params[name].shape) for name in (w1, b1, w2, b2)}
    if params[w1].ndim != 2 or params[w2].ndim != 2:
        raise ConfigError(f"{w1} and {w2} must be 2-D, got {shapes[w1]} and {shapes[w2]}")
    hidden = shapes[w1][0]
    if shapes[b1] != (hidden,):
        raise ConfigError(f"{b1} must be ({hidden},), got {shapes[b1]}")
    if shapes[w2][1] != hidden:
        raise ConfigError(f"{w2} input width {shapes[w2][1]} does not match "
                          f"{w1} output width {hidden}")
    if shapes[w2][0] != out_dim:
        raise ConfigError(f"{w2} must have {out_dim} output rows, got {shapes[w2][0]}")
    if shapes[b2] != (out_dim,):
        raise ConfigError(f"{b2} must be ({out_dim},), got {shapes[b2]}")


def mlp_apply(x: np.ndarray, w1: np.ndarray, b1: np.ndarray,
              w2: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """Column-wise affine -> ReLU -> affine; the per-location two-layer net."""
    x = np.asarray(x, dtype=np.float64)
    w1 = np.asarray(w1, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    b1 = np.asarray(b1, dtype=np.float64)
    b2 = np.asarray(b2, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"input must be (in_dim, n), got {x.shape}")
    if w1.ndim != 2 or w1.shape[1] != x.shape[0]:
        raise ConfigError(f"first weight {w1.shape} does not accept input width "
                          f"{x.shape[0]}")
    if b1.shape != (w1.shape[0],):
        raise ConfigError(f"first bias must be ({w1.shape[0]},), got {b1.shape}")
    if w2.ndim != 2 or w2.shape[1] != w1.shape[0]:
        raise ConfigError(f"second weight {w2.shape} does not accept hidden width "
                          f"{w1.shape[0]}")
    if b2.shape != (w2.shape[0],):
        raise ConfigError(f"second bias must be ({w2.shape[0]},), got {b2.shape}")
    hidden = np.maximum(w1 @ x + b1[:, None], 0.0)
    return w2 @ hidden + b2[:, None]


def project_local(fm: FeatureMap, params: ParamBundle) -> np.ndarray:
    """(l, n) projected token features, columns in coord-grid order."""
    return mlp_apply(fm.tokens(), params["phi_c.w1"], params["phi_c.b1"],
                     params["phi_c.w2"], params["phi_c.b2"])


def project_global(fm: FeatureMap, params: ParamBundle) -> np.ndarray:
    """(g_dim,) projection of the global token."""
    col = np.asarray(fm.global_token, dtype=np.float64)[:, None]
    return mlp_apply(col, params["phi_t.w1"], params["phi_t.b1"],
                     params["phi_t.w2"], params["phi_t.b2"])[:, 0]


def feature_scores(fm: FeatureMap, params: ParamBundle) -> np.ndarray:
    """(m, n) cluster similarity scores from the two-layer score network."""
    return mlp_apply(fm.tokens(), params["phi_s.w1"], params["phi_s.b1"],
                     params["psi_s.w2"], params["psi_s.b2"])


def append_dustbin(scores: np.ndarray, z: float) -> np.ndarray:
    """Add a constant catch-all row below the m cluster rows."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise DimensionError(f"scores must be 2-D, got shape {scores.shape}")
    return np.vstack([scores, np.full((1, scores.shape[1]), float(z))])


def default_marginals(m: int, n: int, rho: float) -> LogMarginals:
    """Uniform column mass; rows share (1 - rho) evenly with rho for the dustbin."""
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"dustbin mass share must be in [0, 1), got {rho}")
    if m < 1 or n < 1:
        raise DimensionError(f"marginal sizes must be >= 1, got m={m}, n={n}")
    log_a = np.empty(m + 1)
    log_a[:m] = np.log((1.0 - rho) / m)
    log_a[m] = np.log(rho) if rho > 0.0 else -np.inf
    log_b = np.full(n, -np.log(n))
    return LogMarginals(log_a, log_b)


def aggregate_clusters(log_p: np.ndarray, projected: np.ndarray) -> np.ndarray:
    """(m, l) mass-weighted sums of projected features; dustbin row dropped."""
    log_p = np.asarray(log_p, dtype=np.float64)
    projected = np.asarray(projected, dtype=np.float64)
    if log_p.ndim != 2 or projected.ndim != 2:
        raise DimensionError("plan and features must be 2-D")
    if log_p.shape[0] < 1:
        raise DimensionError("plan must at least carry the dustbin row")
    if log_p.shape[1] != projected.shape[1]:
        raise DimensionError(f"plan has {log_p.shape[1]} tokens but features have "
                             f"{projected.shape[1]}")
    return np.exp(log_p[:-1, :]) @ projected.T


def build_descriptor(cluster_desc: np.ndarray, global_desc: np.ndarray) -> np.ndarray:
    """Concatenate row-major cluster block with the global block, L2-normalize."""
    cluster_desc = np.asarray(cluster_desc, dtype=np.float64)
    global_desc = np.asarray(global_desc, dtype=np.float64)
    if cluster_desc.ndim != 2 or global_desc.ndim != 1:
        raise DimensionError("expected an (m, l) cluster block and a (g,) global block")
    if not (np.all(np.isfinite(cluster_desc)) and np.all(np.isfinite(global_desc))):
        raise ConfigError("descriptor blocks contain NaN or Inf")
    q = np.concatenate([cluster_desc.reshape(-1), global_desc])
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise DegenerateError("descriptor has zero norm; direction undefined")
    return q / norm


def run_pipeline(fm: FeatureMap, params: ParamBundle, cfg: PipelineConfig) -> np.ndarray:
    """Full chain from one feature map to a unit-norm descriptor."""
    validate_params(params, cfg)
    h, w = fm.grid
    n = h * w

    scores = feature_scores(fm, params)
    if cfg.lambda_g_enabled:
        grid = geometry.coord_grid(h, w)
        embeddings = geometry.embed_coords(grid, params["phi_g.weight"],
                                           params["phi_g.bias"])
        geo = geometry.geo_scores(embeddings, params["cluster_geo"])
        scores = geometry.fuse_scores(scores, geo, float(params["lambda_g"].reshape(-1)[0]))

    affinity = append_dustbin(scores, float(params["dustbin_z"].reshape(-1)[0]))
    marginals = default_marginals(cfg.m, n, cfg.effective_rho)
    if cfg.asymmetric_enabled:
        log_p = ot_core.asymmetric_transport(affinity, marginals, cfg.solver)
    else:
        log_p = ot_core.sinkhorn_baseline(affinity, marginals, cfg.solver)

    pooled = aggregate_clusters(log_p, project_local(fm, params))
    return build_descriptor(pooled, project_global(fm, params))


def disable_geometry(cfg: PipelineConfig) -> PipelineConfig:
    return replace(cfg, lambda_g_enabled=False)


def disable_asymmetric(cfg: PipelineConfig) -> PipelineConfig:
    return replace(cfg, asymmetric_enabled=False)
