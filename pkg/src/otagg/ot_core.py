"""Log-domain entropic transport solvers and diagnostics.

Two solvers share a log-affinity representation (higher = better match):

* :func:`asymmetric_transport` runs a fixed number of averaged row/column
  normalization steps, then a one-shot source-then-target calibration. Only
  the target (column) marginal comes out exact; the leftover row error is
  the point of the method, letting the plan adapt when source and target
  distributions are unbalanced.
* :func:`sinkhorn_baseline` is the classical alternating log-domain scaling
  that enforces both marginals given enough iterations.

All reductions accumulate in float64 so the stated residual tolerances are
reachable; inputs may arrive as float32. Both solvers run their configured
iteration count with no early stopping, so outputs are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

MAX_ITERS = 10_000


def logsumexp(v: np.ndarray) -> float:
    """Stable log(sum(exp(v))) of a vector with finite or -inf entries."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"logsumexp needs a nonempty vector, got shape {arr.shape}")
    m = float(np.max(arr))
    if m == -np.inf:
        return -np.inf
    return m + float(np.log(np.sum(np.exp(arr - m))))


def row_logsumexp(z: np.ndarray) -> np.ndarray:
    """Per-row logsumexp (reduction over columns)."""
    return _lse(z, axis=1)


def col_logsumexp(z: np.ndarray) -> np.ndarray:
    """Per-column logsumexp (reduction over rows)."""
    return _lse(z, axis=0)


def _lse(z: np.ndarray, axis: int) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    m = np.max(z, axis=axis, keepdims=True)
    shifted = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(z - shifted), axis=axis)) + np.squeeze(shifted, axis=axis)
    return np.where(np.isfinite(np.squeeze(m, axis=axis)), out, -np.inf)


@dataclass(frozen=True)
class SolverConfig:
    """Temperature, iteration count, and stability clamp for both solvers."""

    tau: float = 1.0
    iters: int = 3
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if not 0 <= self.iters <= MAX_ITERS:
            raise ConfigError(f"iters must be in 0..{MAX_ITERS}, got {self.iters}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True)
class LogMarginals:
    """Normalized log-probability vectors over rows (log_a) and columns (log_b).

    Entries may be -inf (zero mass); each vector must logsumexp to 0.
    """

    log_a: np.ndarray
    log_b: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "log_a", _check_log_prob(self.log_a, "log_a"))
        object.__setattr__(self, "log_b", _check_log_prob(self.log_b, "log_b"))

    @classmethod
    def uniform(cls, rows: int, cols: int) -> "LogMarginals":
        if rows < 1 or cols < 1:
            raise DimensionError(f"marginal sizes must be >= 1, got {rows}x{cols}")
        return cls(np.full(rows, -np.log(rows)), np.full(cols, -np.log(cols)))


def _check_log_prob(v: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"{name} must be a nonempty vector, got shape {arr.shape}")
    if np.any(np.isnan(arr)) or np.any(arr == np.inf):
        raise ConfigError(f"{name} entries must be finite or -inf")
    total = logsumexp(arr)
    if abs(total) > 1e-6:
        raise ConfigError(f"{name} must be log-normalized (logsumexp = 0), "
                          f"got {total:.3e}")
    return arr


def _check_scores(m: np.ndarray) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"log-affinity matrix must be 2-D and nonempty, "
                             f"got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("log-affinity matrix entries must be finite")
    return arr


def _check_shapes(z: np.ndarray, marginals: LogMarginals) -> None:
    rows, cols = z.shape
    if marginals.log_a.shape[0] != rows or marginals.log_b.shape[0] != cols:
        raise DimensionError(
            f"marginal sizes ({marginals.log_a.shape[0]}, {marginals.log_b.shape[0]}) "
            f"do not match matrix shape {rows}x{cols}")


def init_plan(m: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Temperature-scaled starting point: M / max(tau, epsilon)."""
    arr = _check_scores(m)
    return arr / max(cfg.tau, cfg.epsilon)


def rc_average_step(z: np.ndarray) -> np.ndarray:
    """Mean of the row-normalized and column-normalized log matrices."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {z.shape}")
    z_r = z - row_logsumexp(z)[:, None]
    z_c = z - col_logsumexp(z)[None, :]
    return 0.5 * (z_r + z_c)


def calibrate_marginals(z: np.ndarray, marginals: LogMarginals) -> np.ndarray:
    """Shift rows to hit log_a, then columns to hit log_b.

    The column correction runs last, so exp-column-sums of the result equal
    exp(log_b) exactly (up to float rounding) while row sums keep whatever
    error the column step reintroduced.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {z.shape}")
    _check_shapes(z, marginals)
    u = marginals.log_a - row_logsumexp(z)
    z_prime = z + u[:, None]
    v = marginals.log_b - col_logsumexp(z_prime)
    return z_prime + v[None, :]


def asymmetric_transport(m: np.ndarray, marginals: LogMarginals,
                         cfg: SolverConfig | None = None) -> np.ndarray:
    """Averaged normalizations followed by independent marginal calibration."""
    cfg = cfg or SolverConfig()
    z = init_plan(m, cfg)
    _check_shapes(z, marginals)
    for _ in range(cfg.iters):
        z = rc_average_step(z)
    return calibrate_marginals(z, marginals)


def sinkhorn_baseline(m: np.ndarray, marginals: LogMarginals,
                      cfg: SolverConfig | None = None) -> np.ndarray:
    """Alternating row/column scaling; enforces both marginals at convergence."""
    cfg = cfg or SolverConfig()
    z = init_plan(m, cfg)
    _check_shapes(z, marginals)
    u = np.zeros(z.shape[0])
    v = np.zeros(z.shape[1])
    for _ in range(cfg.iters):
        u = marginals.log_a - row_logsumexp(z + v[None, :])
        v = marginals.log_b - col_logsumexp(z + u[:, None])
    return z + u[:, None] + v[None, :]


@dataclass(frozen=True)
class MarginalResiduals:
    """Worst absolute row/column mass errors of a plan."""

    row_linf: float
    col_linf: float


def marginal_residuals(log_p: np.ndarray, marginals: LogMarginals) -> MarginalResiduals:
    """Compare exp-row/column sums of a log plan against the target marginals."""
    log_p = np.asarray(log_p, dtype=np.float64)
    if log_p.ndim != 2:
        raise DimensionError(f"expected a 2-D plan, got shape {log_p.shape}")
    _check_shapes(log_p, marginals)
    p = np.exp(log_p)
    row = float(np.max(np.abs(p.sum(axis=1) - np.exp(marginals.log_a))))
    col = float(np.max(np.abs(p.sum(axis=0) - np.exp(marginals.log_b))))
    return MarginalResiduals(row_linf=row, col_linf=col)


def plan_entropy(log_p: np.ndarray) -> float:
    """Shannon entropy -sum(p log p) of the plan mass."""
    log_p = np.asarray(log_p, dtype=np.float64)
    p = np.exp(log_p)
    terms = np.where(p > 0.0, p * log_p, 0.0)
    return float(-terms.sum())
