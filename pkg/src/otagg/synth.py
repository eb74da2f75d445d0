"""Seeded synthetic places, views, and parameter bundles.

Every draw comes from a named PCG64 stream: ``stream(seed, name)`` seeds
``numpy.random.PCG64`` with ``SeedSequence([seed, *sha256(name)[:16]])``,
so each tensor and each place owns an independent, reproducible stream
and regenerating with the same seed is bit-identical.

A "place" is a latent prototype feature map assembled from a small pool
of shared prototype vectors; its views are the prototype plus Gaussian
noise. View 0 goes to the database, the rest become queries whose only
positive is their place's database entry.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .aggregator import FeatureMap, PipelineConfig
from .errors import ConfigError
from .tensor_io import GroundTruth, ParamBundle

WEIGHT_SIGMA = 0.02
LAMBDA_G_INIT = 0.15
DUSTBIN_Z_INIT = 1.0


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for (seed, name); stable across runs and platforms."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    words = struct.unpack("<4I", digest[:16])
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *words])))


@dataclass(frozen=True)
class SynthSpec:
    """Size and noise knobs for a generated dataset."""

    seed: int = 0
    n_places: int = 20
    views_per_place: int = 3
    h: int = 8
    w: int = 8
    d: int = 64
    noise_sigma: float = 0.05
    cluster_structure: int = 8

    def __post_init__(self) -> None:
        if self.n_places < 1 or self.views_per_place < 1:
            raise ConfigError("need at least one place and one view per place")
        if min(self.h, self.w, self.d) < 1:
            raise ConfigError("h, w, d must all be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        if self.cluster_structure < 1:
            raise ConfigError("need at least one latent prototype")


@dataclass(frozen=True)
class SynthDataset:
    database: tuple[tuple[str, FeatureMap], ...]
    queries: tuple[tuple[str, FeatureMap], ...]
    gt: GroundTruth = field(default_factory=GroundTruth)


def gen_dataset(spec: SynthSpec) -> SynthDataset:
    """Deterministic database/query split with per-place ground truth."""
    n = spec.h * spec.w
    proto_rng = stream(spec.seed, "prototypes")
    prototypes = proto_rng.standard_normal((spec.cluster_structure, spec.d))

    database: list[tuple[str, FeatureMap]] = []
    queries: list[tuple[str, FeatureMap]] = []
    positives: dict[str, list[str]] = {}

    for p in range(spec.n_places):
        place_rng = stream(spec.seed, f"place/{p}")
        assignment = place_rng.integers(0, spec.cluster_structure, size=n)
        base = prototypes[assignment].T + 0.25 * place_rng.standard_normal((spec.d, n))
        base_local = base.reshape(spec.d, spec.h, spec.w)
        base_token = place_rng.standard_normal(spec.d)
        db_id = f"place_{p:04d}"

        for v in range(spec.views_per_place):
            view_rng = stream(spec.seed, f"place/{p}/view/{v}")
            local = base_local + spec.noise_sigma * view_rng.standard_normal(base_local.shape)
            token = base_token + spec.noise_sigma * view_rng.standard_normal(spec.d)
            fm = FeatureMap(local.astype(np.float32), token.astype(np.float32))
            if v == 0:
                database.append((db_id, fm))
            else:
                qid = f"{db_id}_view_{v}"
                queries.append((qid, fm))
                positives[qid] = [db_id]

    if not positives:
        # single-view specs still need a nonempty ground truth; queries are
        # then the database views themselves
        for db_id, fm in database:
            qid = f"{db_id}_view_0"
            queries.append((qid, fm))
            positives[qid] = [db_id]

    return SynthDataset(database=tuple(database), queries=tuple(queries),
                        gt=GroundTruth(positives))


def gen_params(seed: int, cfg: PipelineConfig, feature_dim: int = 768,
               hidden_c: int | None = None, hidden_t: int | None = None,
               hidden_s: int | None = None) -> ParamBundle:
    """Reproducible parameter bundle matching a pipeline config.

    Weights draw N(0, 0.02^2) from per-tensor streams, biases start at zero,
    the geometric weight starts at 0.15 and the dustbin score at 1.0. Hidden
    widths default to each network's output width.
    """
    if feature_dim < 1:
        raise ConfigError(f"feature dim must be >= 1, got {feature_dim}")
    hidden_c = hidden_c or cfg.l
    hidden_t = hidden_t or cfg.g_dim
    hidden_s = hidden_s or cfg.m

    def gaussian(name: str, shape: tuple[int, ...]) -> np.ndarray:
        g = stream(seed, f"params/{name}")
        return (WEIGHT_SIGMA * g.standard_normal(shape)).astype(np.float32)

    def zeros(shape: tuple[int, ...]) -> np.ndarray:
        return np.zeros(shape, dtype=np.float32)

    params: ParamBundle = {
        "phi_c.w1": gaussian("phi_c.w1", (hidden_c, feature_dim)),
        "phi_c.b1": zeros((hidden_c,)),
        "phi_c.w2": gaussian("phi_c.w2", (cfg.l, hidden_c)),
        "phi_c.b2": zeros((cfg.l,)),
        "phi_t.w1": gaussian("phi_t.w1", (hidden_t, feature_dim)),
        "phi_t.b1": zeros((hidden_t,)),
        "phi_t.w2": gaussian("phi_t.w2", (cfg.g_dim, hidden_t)),
        "phi_t.b2": zeros((cfg.g_dim,)),
        "phi_s.w1": gaussian("phi_s.w1", (hidden_s, feature_dim)),
        "phi_s.b1": zeros((hidden_s,)),
        "psi_s.w2": gaussian("psi_s.w2", (cfg.m, hidden_s)),
        "psi_s.b2": zeros((cfg.m,)),
        "phi_g.weight": gaussian("phi_g.weight", (cfg.d_g, 2)),
        "phi_g.bias": zeros((cfg.d_g,)),
        "cluster_geo": gaussian("cluster_geo", (cfg.m, cfg.d_g)),
        "lambda_g": np.array([LAMBDA_G_INIT], dtype=np.float32),
        "dustbin_z": np.array([DUSTBIN_Z_INIT], dtype=np.float32),
    }
    return params
