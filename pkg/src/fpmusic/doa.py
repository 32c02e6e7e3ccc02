"""Array signal model and MUSIC-family direction-of-arrival estimators.

Covers the half-wavelength ULA signal model, sample covariance, the sparse
unitary transform to a real symmetric covariance, complex and real spectrum
evaluation, peak picking, and three estimator front-ends:

* music    -- complex covariance, full Hermitian eigendecomposition,
              classic signal-subspace spectrum (full precision);
* u_music  -- real transformed covariance, full Jacobi eigendecomposition,
              real spectrum evaluated with double-precision kernels;
* ru_music -- real transformed covariance, rank-K randomized SVD with the
              two big matrix products and the whole spectrum search running
              under a caller-chosen finite-precision scheme.

The real steering vector ties the complex model to the transformed domain:
with phi = pi*sin(theta)/2 and even M,

    a_r(theta) = sqrt(2) * [cos((M-1)phi), cos((M-3)phi), ..., cos(phi),
                            sin((M-1)phi), sin((M-3)phi), ..., sin(phi)]

which equals exp(+j(M-1)phi) * Q^H a(theta) entrywise to machine precision
(both blocks run over descending odd multiples; the sign convention is
pinned by that identity, and the spectrum is invariant to it anyway).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .fpemu import builtin_formats
from .kernels import CostLedger, Scheme, UniformScheme, scheme_dot

__all__ = [
    "ArrayConfig",
    "Spectrum",
    "UnsupportedGeometryError",
    "steering_complex",
    "steering_real",
    "build_unitary_q",
    "synthesize_snapshots",
    "sample_covariance",
    "unitary_transform",
    "spectrum_classic",
    "spectrum_real",
    "find_peaks",
    "estimate",
    "METHODS",
]

METHODS = ("music", "u_music", "ru_music")

_FP64 = builtin_formats()["fp64"]


class UnsupportedGeometryError(ValueError):
    """Array geometry outside what an operation supports (e.g. odd M)."""


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array: M sensors at half-wavelength spacing."""

    sensors: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.sensors < 2:
            raise ValueError("need at least 2 sensors")
        if self.spacing_over_wavelength != 0.5:
            raise ValueError("only half-wavelength spacing is supported")


@dataclass(frozen=True)
class Spectrum:
    """Pseudo-spectrum samples over a search grid (values strictly positive)."""

    angles_deg: np.ndarray
    values: np.ndarray


def _denominator_floor(m: int) -> float:
    # The search function is singular when the steering vector lies in the
    # estimated signal subspace; flooring keeps peaks finite without
    # disturbing their ordering.
    return 1e-12 * m


def steering_complex(theta_deg, cfg: ArrayConfig) -> np.ndarray:
    """Complex ULA steering vector(s), entry m = exp(-j*pi*m*sin(theta)).

    theta_deg may be a scalar or an array; output shape is (..., M) with
    the first entry exactly 1 and ||a||^2 = M.
    """
    theta = np.radians(np.asarray(theta_deg, dtype=np.float64))
    m = np.arange(cfg.sensors)
    phase = -1j * 2.0 * np.pi * cfg.spacing_over_wavelength
    return np.exp(phase * np.sin(theta)[..., None] * m)


def steering_real(theta_deg, cfg: ArrayConfig) -> np.ndarray:
    """Real steering vector(s) for the transformed covariance domain.

    Requires even M (the odd-M geometry has no closed form here; go through
    build_unitary_q numerically if needed). Shape (..., M), ||a_r||^2 = M.
    """
    m = cfg.sensors
    if m % 2 != 0:
        raise UnsupportedGeometryError(
            "closed-form real steering needs an even sensor count"
        )
    theta = np.radians(np.asarray(theta_deg, dtype=np.float64))
    phi = 0.5 * np.pi * np.sin(theta)[..., None]
    mult = np.arange(m - 1, 0, -2)  # M-1, M-3, ..., 1
    args = mult * phi
    return np.sqrt(2.0) * np.concatenate([np.cos(args), np.sin(args)], axis=-1)


def build_unitary_q(m: int) -> np.ndarray:
    """The sparse unitary Q mapping Hermitian R to real symmetric Re(Q^H R Q).

    Two-block form for even M, three-block with a unit center for odd M.
    """
    if m < 2:
        raise ValueError("need at least 2 sensors")
    h = m // 2
    eye = np.eye(h)
    exch = np.fliplr(eye)
    q = np.zeros((m, m), dtype=np.complex128)
    q[:h, :h] = eye
    q[:h, m - h:] = 1j * eye
    q[m - h:, :h] = exch
    q[m - h:, m - h:] = -1j * exch
    if m % 2 == 1:
        q[h, h] = np.sqrt(2.0)
    return q / np.sqrt(2.0)


def synthesize_snapshots(
    true_doas_deg,
    snapshots: int,
    snr_db: float,
    cfg: ArrayConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw an M x T snapshot matrix x(t) = A s(t) + n(t).

    Sources are incoherent unit-variance circular complex Gaussians; the
    noise is circular complex Gaussian with variance 10^(-snr_db/10) per
    sensor. Signal draws precede noise draws, so a fixed rng state gives a
    bit-identical matrix.
    """
    doas = np.atleast_1d(np.asarray(true_doas_deg, dtype=np.float64))
    n = doas.size
    if n >= cfg.sensors:
        raise ValueError("need fewer sources than sensors")
    if snapshots < 1:
        raise ValueError("need at least one snapshot")
    a = steering_complex(doas, cfg).T  # M x N
    s = (
        rng.standard_normal((n, snapshots)) + 1j * rng.standard_normal((n, snapshots))
    ) / np.sqrt(2.0)
    sigma = np.sqrt(10.0 ** (-snr_db / 10.0))
    noise = sigma * (
        rng.standard_normal((cfg.sensors, snapshots))
        + 1j * rng.standard_normal((cfg.sensors, snapshots))
    ) / np.sqrt(2.0)
    return a @ s + noise


def sample_covariance(x: np.ndarray) -> np.ndarray:
    """R = X X^H / T, Hermitian positive semidefinite by construction."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("expected an M x T snapshot matrix")
    return (x @ x.conj().T) / x.shape[1]


def unitary_transform(r: np.ndarray) -> np.ndarray:
    """Real symmetric C = Re(Q^H R Q) through Q's sparsity.

    Every column of Q has at most two nonzeros, so each entry of C touches
    at most four entries of R; the computation gathers those directly
    instead of forming Q.
    """
    r = np.asarray(r, dtype=np.complex128)
    m = r.shape[0]
    if r.ndim != 2 or r.shape[1] != m:
        raise ValueError("expected a square covariance matrix")
    h = m // 2
    rows = np.empty((m, 2), dtype=np.intp)
    vals = np.zeros((m, 2), dtype=np.complex128)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in range(h):
        rows[i] = (i, m - 1 - i)
        vals[i] = (inv_sqrt2, inv_sqrt2)
        rows[m - h + i] = (i, m - 1 - i)
        vals[m - h + i] = (1j * inv_sqrt2, -1j * inv_sqrt2)
    if m % 2 == 1:
        rows[h] = (h, h)
        vals[h] = (1.0, 0.0)
    c = np.zeros((m, m))
    for s in range(2):
        for t in range(2):
            gathered = r[rows[:, s][:, None], rows[:, t][None, :]]
            c += (vals[:, s].conj()[:, None] * gathered * vals[:, t][None, :]).real
    return c


def _check_orthonormal(u: np.ndarray, tol: float = 1e-6) -> None:
    gram = u.conj().T @ u
    if np.linalg.norm(gram - np.eye(u.shape[1])) > tol:
        raise ValueError("subspace columns are not orthonormal")


def spectrum_classic(
    subspace: np.ndarray,
    mode: str,
    grid_deg: np.ndarray,
    cfg: ArrayConfig,
) -> Spectrum:
    """Classic MUSIC spectrum from a signal or noise subspace (full double).

    mode "signal": P = 1/(a^H (I - U U^H) a); mode "noise": P = 1/||U^H a||^2.
    """
    subspace = np.asarray(subspace)
    if mode not in ("signal", "noise"):
        raise ValueError(f"mode must be 'signal' or 'noise', got {mode!r}")
    _check_orthonormal(subspace)
    grid = np.asarray(grid_deg, dtype=np.float64)
    a = steering_complex(grid, cfg)  # F x M
    proj = np.abs(a.conj() @ subspace) ** 2
    energy = proj.sum(axis=1)
    if mode == "signal":
        denom = cfg.sensors - energy
    else:
        denom = energy
    denom = np.maximum(denom, _denominator_floor(cfg.sensors))
    return Spectrum(grid, 1.0 / denom)


def spectrum_real(
    e_s: np.ndarray,
    grid_deg: np.ndarray,
    scheme: Scheme,
    ledger: CostLedger | None,
    cfg: ArrayConfig,
) -> Spectrum:
    """Real-valued signal-subspace spectrum under a finite-precision scheme.

    Per angle: v = E_s^T a_r (N length-M dots), s1 = a_r^T a_r (one length-M
    dot), s2 = v^T v (one length-N dot), P = 1/max(s1 - s2, floor) -- N+2
    scheme dots per angle, all metered. The steering values themselves are
    computed in double; the scheme dots round them on entry.
    """
    e_s = np.asarray(e_s, dtype=np.float64)
    if e_s.ndim != 2 or e_s.shape[0] != cfg.sensors:
        raise ValueError("signal subspace must be M x N")
    if np.any(e_s):
        _check_orthonormal(e_s)
    # else: all-zero subspace projects out nothing; P = 1/||a_r||^2 = 1/M.
    grid = np.asarray(grid_deg, dtype=np.float64)
    a = steering_real(grid, cfg)  # F x M
    v = np.stack(
        [scheme_dot(a, e_s[:, j], scheme, ledger) for j in range(e_s.shape[1])],
        axis=-1,
    )  # F x N
    s1 = scheme_dot(a, a, scheme, ledger)
    s2 = scheme_dot(v, v, scheme, ledger)
    denom = np.maximum(s1 - s2, _denominator_floor(cfg.sensors))
    return Spectrum(grid, 1.0 / denom)


def find_peaks(spec: Spectrum, n: int) -> np.ndarray:
    """The n most prominent spectrum peaks, as sorted grid angles.

    Candidates are strict interior local maxima (boundary points count when
    they beat their single neighbor); if fewer than n exist, the largest
    unselected grid values fill the remaining slots. Ties resolve toward the
    smaller angle index.
    """
    values = np.asarray(spec.values, dtype=np.float64)
    f = values.size
    if n < 1:
        raise ValueError("need n >= 1")
    if f < 3:
        raise ValueError("need a grid of at least 3 angles")
    interior = (values[1:-1] > values[:-2]) & (values[1:-1] > values[2:])
    is_peak = np.zeros(f, dtype=bool)
    is_peak[1:-1] = interior
    is_peak[0] = values[0] > values[1]
    is_peak[-1] = values[-1] > values[-2]
    order = np.lexsort((np.arange(f), -values))  # by value desc, then index
    peaks = [i for i in order if is_peak[i]][:n]
    if len(peaks) < n:
        chosen = set(peaks)
        fillers = (i for i in order if i not in chosen)
        for i in fillers:
            peaks.append(i)
            if len(peaks) == n:
                break
    return np.sort(np.asarray(spec.angles_deg)[peaks])


def _signal_subspace(method, x, n, k, scheme, ledger, rng, cfg):
    r = sample_covariance(x)
    if method == "music":
        _, vecs = np.linalg.eigh(r)
        return vecs[:, -n:]  # eigh sorts ascending
    c = unitary_transform(r)
    if method == "u_music":
        _, vecs = linalg.symmetric_eig(c)
        return vecs[:, :n]
    u_k, _ = linalg.randomized_svd(c, k, scheme, ledger, rng)
    return u_k[:, :n]


def method_spectrum(
    method: str,
    x: np.ndarray,
    n: int,
    k: int,
    grid_deg: np.ndarray,
    scheme: Scheme,
    ledger: CostLedger | None,
    rng: np.random.Generator | None,
    cfg: ArrayConfig,
) -> Spectrum:
    """The search spectrum an estimator would scan (see estimate)."""
    _validate_estimate_args(method, x, n, k, cfg)
    subspace = _signal_subspace(method, x, n, k, scheme, ledger, rng, cfg)
    if method == "music":
        return spectrum_classic(subspace, "signal", grid_deg, cfg)
    if method == "u_music":
        return spectrum_real(subspace, grid_deg, UniformScheme(_FP64), ledger, cfg)
    return spectrum_real(subspace, grid_deg, scheme, ledger, cfg)


def _validate_estimate_args(method, x, n, k, cfg):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    x = np.asarray(x)
    if x.shape[0] != cfg.sensors:
        raise ValueError("snapshot matrix row count must equal sensor count")
    if not 1 <= n < cfg.sensors:
        raise ValueError("need 1 <= N < M")
    if method in ("u_music", "ru_music") and cfg.sensors % 2 != 0:
        raise UnsupportedGeometryError(f"{method} needs an even sensor count")
    if method == "ru_music" and not n < k < cfg.sensors:
        raise ValueError("ru_music needs N < K < M")


def estimate(
    method: str,
    x: np.ndarray,
    n: int,
    k: int,
    grid_deg: np.ndarray,
    scheme: Scheme,
    ledger: CostLedger | None,
    rng: np.random.Generator | None,
    cfg: ArrayConfig,
) -> np.ndarray:
    """Estimate n DOAs (sorted, degrees) from snapshots with one estimator.

    The scheme applies to ru_music only (its two sketch products and its
    spectrum search); music and u_music are full-precision baselines,
    u_music's spectrum running through the double-precision kernels so its
    operation count is metered too. rng feeds the randomized sketch and is
    unused by the other methods.
    """
    spec = method_spectrum(method, x, n, k, grid_deg, scheme, ledger, rng, cfg)
    return find_peaks(spec, n)
