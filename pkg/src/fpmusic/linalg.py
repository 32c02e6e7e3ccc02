"""Small dense linear algebra in full double precision.

Householder economy QR, one-sided Jacobi SVD and a cyclic Jacobi symmetric
eigensolver, all deterministic (fixed sweep order, no pivot randomness) so
repeated runs are bit-identical. Sized for the desk-scale matrices this
package works with (tens of rows); none of it tries to be blocked or fast.

randomized_svd is the rank-K sketch driver: the two O(M^2 K) products run
through the finite-precision matmul under the caller's scheme, everything
downstream of them (QR, the small SVD, the basis recombination) stays in
double.
"""

from __future__ import annotations

import numpy as np

from .kernels import CostLedger, Scheme, matmul_finite

__all__ = [
    "RankDeficiencyError",
    "economy_qr",
    "economy_svd",
    "symmetric_eig",
    "randomized_svd",
]

_JACOBI_TOL = 1e-14
_MAX_SWEEPS = 60


class RankDeficiencyError(RuntimeError):
    """A sketch column collapsed below tolerance during orthogonalization."""


def economy_qr(b: np.ndarray, min_rank: int | None = None) -> np.ndarray:
    """Orthonormal basis of range(b) via Householder reflections.

    b is M x K with M >= K >= 1; returns the M x K thin Q factor. A reduced
    column norm below 1e-12 * ||b||_F counts as collapsed; by default any
    collapsed column raises RankDeficiencyError (degenerate sketch). With
    min_rank set, collapsed columns are skipped instead (their reflector is
    the identity, so Q stays orthonormal and still contains range(b)) and
    the error fires only when fewer than min_rank columns survive.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise ValueError("economy_qr expects a 2-D matrix")
    m, k = b.shape
    if not m >= k >= 1:
        raise ValueError(f"need M >= K >= 1, got {b.shape}")
    if min_rank is None:
        min_rank = k
    scale = np.linalg.norm(b)
    r = b.copy()
    reflectors: list[tuple[int, np.ndarray]] = []
    for j in range(k):
        x = r[j:, j]
        normx = np.linalg.norm(x)
        if normx <= 1e-12 * scale:
            if min_rank == k:
                raise RankDeficiencyError(
                    f"column {j} is dependent (norm {normx:.3e})"
                )
            continue
        v = x.copy()
        v[0] += normx if x[0] >= 0 else -normx
        v /= np.linalg.norm(v)
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        reflectors.append((j, v))
    if len(reflectors) < min_rank:
        raise RankDeficiencyError(
            f"only {len(reflectors)} independent columns, need {min_rank}"
        )
    # Accumulate the thin Q by applying the reflectors to I(M,K) in reverse.
    q = np.eye(m, k)
    for j, v in reversed(reflectors):
        q[j:, :] -= 2.0 * np.outer(v, v @ q[j:, :])
    return q


def economy_svd(d: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Economy SVD of a K x M matrix (K <= M) by one-sided Jacobi.

    Returns (u, s, v) with d = u @ diag(s) @ v.T, u K x K and v M x K
    orthonormal, s nonnegative descending. Rotations orthogonalize the
    columns of d.T; exactly zero columns keep canonical basis vectors in v.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError("economy_svd expects a 2-D matrix")
    k, m = d.shape
    if k > m:
        raise ValueError(f"need K <= M, got {d.shape}")
    w = d.T.copy()  # M x K, columns to orthogonalize
    u = np.eye(k)
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                app = w[:, p] @ w[:, p]
                aqq = w[:, q] @ w[:, q]
                apq = w[:, p] @ w[:, q]
                if abs(apq) <= _JACOBI_TOL * np.sqrt(app * aqq):
                    continue
                rotated = True
                zeta = (aqq - app) / (2.0 * apq)
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                if zeta == 0.0:
                    t = 1.0
                cs = 1.0 / np.hypot(1.0, t)
                sn = cs * t
                wp = w[:, p].copy()
                w[:, p] = cs * wp - sn * w[:, q]
                w[:, q] = sn * wp + cs * w[:, q]
                up = u[:, p].copy()
                u[:, p] = cs * up - sn * u[:, q]
                u[:, q] = sn * up + cs * u[:, q]
        if not rotated:
            break
    else:
        raise RuntimeError("one-sided Jacobi SVD failed to converge")
    s = np.linalg.norm(w, axis=0)
    v = np.eye(m, k)
    nz = s > 0.0
    v[:, nz] = w[:, nz] / s[nz]
    order = np.argsort(-s, kind="stable")
    return u[:, order], s[order], v[:, order]


def symmetric_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi.

    Returns (eigenvalues descending, eigenvectors as columns).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("symmetric_eig expects a square matrix")
    n = a.shape[0]
    w = a.copy()
    v = np.eye(n)
    off_scale = np.linalg.norm(a) + 1.0
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(w[p, q]) <= _JACOBI_TOL * off_scale:
                    continue
                rotated = True
                zeta = (w[q, q] - w[p, p]) / (2.0 * w[p, q])
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                if zeta == 0.0:
                    t = 1.0
                cs = 1.0 / np.hypot(1.0, t)
                sn = cs * t
                rp, rq = w[p, :].copy(), w[q, :].copy()
                w[p, :] = cs * rp - sn * rq
                w[q, :] = sn * rp + cs * rq
                cp, cq = w[:, p].copy(), w[:, q].copy()
                w[:, p] = cs * cp - sn * cq
                w[:, q] = sn * cp + cs * cq
                vp = v[:, p].copy()
                v[:, p] = cs * vp - sn * v[:, q]
                v[:, q] = sn * vp + cs * v[:, q]
        if not rotated:
            break
    else:
        raise RuntimeError("Jacobi eigensolver failed to converge")
    vals = np.diag(w).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], v[:, order]


def randomized_svd(
    c: np.ndarray,
    k: int,
    scheme: Scheme,
    ledger: CostLedger | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Rank-K randomized SVD of a symmetric M x M matrix.

    Sketches with a fresh M x K standard-normal test matrix (no oversampling
    or power iterations), orthonormalizes, projects, and solves the small
    SVD. Only the sketch product and the projection run under the given
    finite-precision scheme (ledger metered). Returns (u_k, singular_values)
    where u_k is M x K with columns ordered by descending singular value.

    A rank-deficient sketch triggers one redraw of the test matrix. A second
    deficiency means the input itself has rank below K (not a sampling
    fluke); the basis is then completed through the skip-tolerant QR, the
    extra directions surfacing as ~zero singular values. Only a rank-zero
    sketch is unrecoverable.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("randomized_svd expects a square matrix")
    m = c.shape[0]
    if not 1 <= k < m:
        raise ValueError(f"need 1 <= K < M, got K={k}, M={m}")
    if rng is None:
        rng = np.random.default_rng()
    t = None
    for attempt in range(2):
        omega = rng.standard_normal((m, k))
        sketch = matmul_finite(c, omega, scheme, ledger)
        try:
            t = economy_qr(sketch)
            break
        except RankDeficiencyError:
            if attempt == 1:
                t = economy_qr(sketch, min_rank=1)
    proj = matmul_finite(t.T, c, scheme, ledger)
    u_small, s, _ = economy_svd(proj)
    return t @ u_small, s
