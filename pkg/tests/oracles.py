"""Independent reference implementations used as test oracles.

Everything here is written as plainly as possible (probability-domain
arithmetic, explicit loops, no shared helpers with the package under test) so
that agreement between an oracle and the production path is meaningful
evidence. Keep these slow and obvious; do not "fix" them to match the
package.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------------------
# transport solvers, probability domain
# ---------------------------------------------------------------------------


def rc_average_reference(z: np.ndarray) -> np.ndarray:
    """Average of row- and column-normalized log matrices, via exp/log."""
    z = np.asarray(z, dtype=np.float64)
    rows, cols = z.shape
    out = np.empty_like(z)
    for i in range(rows):
        for j in range(cols):
            row_sum = math.fsum(math.exp(z[i, jj]) for jj in range(cols))
            col_sum = math.fsum(math.exp(z[ii, j]) for ii in range(rows))
            zr = z[i, j] - math.log(row_sum)
            zc = z[i, j] - math.log(col_sum)
            out[i, j] = 0.5 * (zr + zc)
    return out


def calibrate_reference(z: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Source-then-target marginal correction, computed in probability space.

    ``a`` and ``b`` are probability vectors (not logs).
    """
    z = np.asarray(z, dtype=np.float64)
    rows, cols = z.shape
    zp = np.empty_like(z)
    for i in range(rows):
        row_sum = math.fsum(math.exp(z[i, j]) for j in range(cols))
        u = math.log(a[i]) - math.log(row_sum) if a[i] > 0 else -math.inf
        for j in range(cols):
            zp[i, j] = z[i, j] + u
    log_p = np.empty_like(z)
    for j in range(cols):
        col_sum = math.fsum(math.exp(zp[i, j]) for i in range(rows))
        v = math.log(b[j]) - math.log(col_sum) if b[j] > 0 else -math.inf
        for i in range(rows):
            log_p[i, j] = zp[i, j] + v
    return log_p


def asymmetric_reference(
    m: np.ndarray, a: np.ndarray, b: np.ndarray, tau: float, iters: int, eps: float = 1e-6
) -> np.ndarray:
    """Scale, averaged normalizations, then the two-step calibration."""
    z = np.asarray(m, dtype=np.float64) / max(tau, eps)
    for _ in range(iters):
        z = rc_average_reference(z)
    return calibrate_reference(z, a, b)


def sinkhorn_reference(
    m: np.ndarray, a: np.ndarray, b: np.ndarray, tau: float, iters: int, eps: float = 1e-6
) -> np.ndarray:
    """Classical Sinkhorn scaling in probability space.

    Alternates source scaling then target scaling starting from unit
    potentials, mirroring the log-domain update order (u first, then v).
    Returns the log of the scaled plan.
    """
    z = np.asarray(m, dtype=np.float64) / max(tau, eps)
    k = np.exp(z)
    rows, cols = k.shape
    phi = np.ones(rows)
    psi = np.ones(cols)
    for _ in range(iters):
        for i in range(rows):
            denom = math.fsum(k[i, j] * psi[j] for j in range(cols))
            phi[i] = a[i] / denom
        for j in range(cols):
            denom = math.fsum(k[i, j] * phi[i] for i in range(rows))
            psi[j] = b[j] / denom
    log_p = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            log_p[i, j] = z[i, j] + math.log(phi[i]) + math.log(psi[j])
    return log_p


def residuals_reference(log_p: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Worst absolute row/column mass error of a log-domain plan."""
    p = np.exp(np.asarray(log_p, dtype=np.float64))
    row = max(abs(math.fsum(p[i, :]) - a[i]) for i in range(p.shape[0]))
    col = max(abs(math.fsum(p[:, j]) - b[j]) for j in range(p.shape[1]))
    return row, col


# ---------------------------------------------------------------------------
# descriptor pipeline, single monolithic function
# ---------------------------------------------------------------------------


def pipeline_reference(
    local: np.ndarray,
    token: np.ndarray,
    params: dict[str, np.ndarray],
    m: int,
    tau: float,
    iters: int,
    rho: float,
    geometric: bool,
    asymmetric: bool = True,
) -> np.ndarray:
    """One-function re-derivation of the whole descriptor chain.

    ``local`` is (d, H, W), ``token`` is (d,). Scores, the transport solve,
    pooling, concatenation and normalization are all inlined here with loops
    kept where they stay readable.
    """
    local = np.asarray(local, dtype=np.float64)
    token = np.asarray(token, dtype=np.float64)
    d, h, w = local.shape
    n = h * w
    flat = local.reshape(d, n)

    def two_layer(x, w1, b1, w2, b2):
        hidden = np.maximum(w1 @ x + b1[:, None], 0.0)
        return w2 @ hidden + b2[:, None]

    sf = two_layer(
        flat,
        params["phi_s.w1"].astype(np.float64),
        params["phi_s.b1"].astype(np.float64),
        params["psi_s.w2"].astype(np.float64),
        params["psi_s.b2"].astype(np.float64),
    )

    if geometric:
        coords = np.zeros((n, 2))
        for x in range(h):
            for y in range(w):
                cx = 0.0 if h == 1 else 2.0 * x / (h - 1) - 1.0
                cy = 0.0 if w == 1 else 2.0 * y / (w - 1) - 1.0
                coords[x * w + y] = (cx, cy)
        g = coords @ params["phi_g.weight"].astype(np.float64).T + params["phi_g.bias"].astype(
            np.float64
        )
        sg = params["cluster_geo"].astype(np.float64) @ g.T
        scores = sf + float(params["lambda_g"][0]) * sg
    else:
        scores = sf

    z_bin = float(params["dustbin_z"][0])
    m_mat = np.vstack([scores, np.full((1, n), z_bin)])

    a = np.empty(m + 1)
    a[:m] = (1.0 - rho) / m
    a[m] = rho
    b = np.full(n, 1.0 / n)

    if asymmetric:
        log_p = asymmetric_reference(m_mat, a, b, tau, iters)
    else:
        log_p = sinkhorn_reference(m_mat, a, b, tau, iters)
    plan = np.exp(log_p)

    fbar = two_layer(
        flat,
        params["phi_c.w1"].astype(np.float64),
        params["phi_c.b1"].astype(np.float64),
        params["phi_c.w2"].astype(np.float64),
        params["phi_c.b2"].astype(np.float64),
    )
    l_dim = fbar.shape[0]
    v = np.zeros((m, l_dim))
    for j in range(m):
        for i in range(n):
            v[j] += plan[j, i] * fbar[:, i]

    gt = two_layer(
        token[:, None],
        params["phi_t.w1"].astype(np.float64),
        params["phi_t.b1"].astype(np.float64),
        params["phi_t.w2"].astype(np.float64),
        params["phi_t.b2"].astype(np.float64),
    )[:, 0]

    q = np.concatenate([v.reshape(-1), gt])
    return q / math.sqrt(math.fsum(float(x) * float(x) for x in q))


# ---------------------------------------------------------------------------
# retrieval
# ---------------------------------------------------------------------------


def search_reference(
    ids: list[str], matrix: np.ndarray, query: np.ndarray, k: int
) -> list[tuple[str, float]]:
    """Full sort over exact L2 distances, ties broken by insertion order."""
    dists = []
    for row in np.asarray(matrix, dtype=np.float64):
        diff = row - np.asarray(query, dtype=np.float64)
        dists.append(math.sqrt(math.fsum(float(x) * float(x) for x in diff)))
    order = sorted(range(len(ids)), key=lambda i: (dists[i], i))
    return [(ids[i], dists[i]) for i in order[:k]]


def recall_reference(
    rankings: dict[str, list[str]], positives: dict[str, list[str]], ks: list[int]
) -> dict[int, float]:
    """Fraction of queries with a positive among the top k retrieved ids."""
    out = {}
    for k in ks:
        hits = 0
        for qid, ranked in rankings.items():
            pos = set(positives[qid])
            if any(r in pos for r in ranked[:k]):
                hits += 1
        out[k] = hits / len(rankings)
    return out
