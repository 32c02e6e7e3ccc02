"""Finite-precision inner products and their weighted-cost accounting.

Three dot-product kernels share one elementary-operation model (fpemu):

* uniform      -- every multiply/add rounded in a single format;
* mixed (MP)   -- contiguous blocks of size B accumulated in a low format,
                  block results combined sequentially in a high format;
* adaptive (AP)-- elements routed to one of p precision levels by magnitude
                  thresholds gamma*S/u_k (S = |b|^T|c|), per-level partial
                  sums combined at the finest level.

All kernels accept stacked inputs: the last axis is the reduction axis and
any leading axes are independent dot products evaluated in lock-step, so a
single dot is just the batch-of-one case (bit-identical results). The
accumulation order is strictly sequential left-to-right within blocks and
groups and across partial sums.

Costs are metered in exact rational arithmetic: an operation in a format of
cost weight q adds q to the matching counter. The adaptive kernel's O(M)
selection pass (computing S and the thresholds) is metered separately in
``overhead`` at the double-precision weight and never mixed into the
primary counters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fpemu import PrecisionFormat, parse_format, round_to_format, rounded_add, rounded_mul

__all__ = [
    "CostLedger",
    "LedgerMismatchError",
    "MpConfig",
    "ApConfig",
    "GroupAssignment",
    "UniformScheme",
    "MpScheme",
    "ApScheme",
    "dot_uniform",
    "dot_mp",
    "dot_ap",
    "assign_groups",
    "ap_error_bound",
    "ap_error_bound_apriori",
    "matmul_finite",
    "scheme_dot",
    "predicted_costs",
    "parse_scheme",
    "scheme_label",
]

# Weight of the double-precision ops in the AP selection pass.
_SELECTION_WEIGHT = Fraction(4)


class LedgerMismatchError(RuntimeError):
    """A kernel's ledger delta disagreed with the closed-form cost."""


@dataclass
class CostLedger:
    """Monotone counters of weighted arithmetic operations.

    ``verify=True`` makes every metered kernel call recompute its delta
    entry-by-entry through predicted_costs and raise LedgerMismatchError on
    any disagreement (exact Fraction comparison).
    """

    weighted_adds: Fraction = Fraction(0)
    weighted_muls: Fraction = Fraction(0)
    overhead: Fraction = Fraction(0)
    verify: bool = False
    calls: int = 0

    def charge(self, adds, muls, overhead=0) -> None:
        adds, muls, overhead = Fraction(adds), Fraction(muls), Fraction(overhead)
        if adds < 0 or muls < 0 or overhead < 0:
            raise ValueError("ledger charges must be nonnegative")
        self.weighted_adds += adds
        self.weighted_muls += muls
        self.overhead += overhead
        self.calls += 1

    def snapshot(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.weighted_adds, self.weighted_muls, self.overhead)


@dataclass(frozen=True)
class MpConfig:
    """Mixed-precision parameters: block size B, low/high formats."""

    low: PrecisionFormat
    high: PrecisionFormat
    block_size: int

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        # Equal formats are the degenerate single-precision configuration.
        if self.low.unit_roundoff < self.high.unit_roundoff:
            raise ValueError("low format must not be finer than high format")


@dataclass(frozen=True)
class ApConfig:
    """Adaptive-precision parameters: levels finest-first, target accuracy."""

    levels: tuple[PrecisionFormat, ...]
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ValueError("need at least one precision level")
        us = [f.unit_roundoff for f in self.levels]
        if any(a >= b for a, b in zip(us, us[1:])):
            raise ValueError("unit roundoffs must be strictly increasing")
        if self.gamma < us[0]:
            raise ValueError("target accuracy gamma must be >= u_1")

    @property
    def num_levels(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class GroupAssignment:
    """Magnitude-threshold partition of dot-product indices into levels.

    group_of holds 1-based level indices, shape (..., M); group_sizes holds
    the per-level counts m_1..m_p along the last axis; magnitude_sum is
    S = |b|^T|c| per dot.
    """

    group_of: np.ndarray
    group_sizes: np.ndarray
    magnitude_sum: np.ndarray


# ---------------------------------------------------------------------------
# scheme descriptors


@dataclass(frozen=True)
class UniformScheme:
    fmt: PrecisionFormat


@dataclass(frozen=True)
class MpScheme:
    cfg: MpConfig


@dataclass(frozen=True)
class ApScheme:
    cfg: ApConfig


Scheme = UniformScheme | MpScheme | ApScheme


def parse_scheme(text: str) -> Scheme:
    """Parse a scheme descriptor string.

    Grammar: "uniform:<fmt>" or a bare format name, "mp:<low>:<high>:B=<n>",
    "ap:<fmt>,<fmt>,...:gamma=<g>" where <g> accepts "2^-16" or a float
    literal. Composite descriptors take builtin format names; custom
    "t:emin:emax:q" formats are available through the uniform form.
    """
    t = text.strip()
    if t.startswith("uniform:"):
        return UniformScheme(parse_format(t[len("uniform:"):]))
    if t.startswith("mp:"):
        parts = t[len("mp:"):].split(":")
        if len(parts) != 3 or not parts[2].startswith("B="):
            raise ValueError(f"bad MP descriptor {text!r}: want mp:<low>:<high>:B=<n>")
        return MpScheme(
            MpConfig(parse_format(parts[0]), parse_format(parts[1]), int(parts[2][2:]))
        )
    if t.startswith("ap:"):
        body, _, gpart = t[len("ap:"):].rpartition(":")
        if not body or not gpart.startswith("gamma="):
            raise ValueError(
                f"bad AP descriptor {text!r}: want ap:<fmt>,...:gamma=<g>"
            )
        levels = tuple(parse_format(p) for p in body.split(","))
        return ApScheme(ApConfig(levels, _parse_gamma(gpart[len("gamma="):])))
    return UniformScheme(parse_format(t))


def _parse_gamma(text: str) -> float:
    if text.startswith("2^"):
        return 2.0 ** int(text[2:])
    return float(text)


def _render_gamma(g: float) -> str:
    e = math.log2(g)
    if e == int(e):
        return f"2^{int(e)}"
    return repr(g)


def scheme_label(scheme: Scheme) -> str:
    """Canonical descriptor string for a scheme (parse round-trips)."""
    if isinstance(scheme, UniformScheme):
        return f"uniform:{scheme.fmt.name}"
    if isinstance(scheme, MpScheme):
        c = scheme.cfg
        return f"mp:{c.low.name}:{c.high.name}:B={c.block_size}"
    c = scheme.cfg
    names = ",".join(f.name for f in c.levels)
    return f"ap:{names}:gamma={_render_gamma(c.gamma)}"


# ---------------------------------------------------------------------------
# kernel internals


def _prepare(b, c) -> tuple[np.ndarray, np.ndarray, int]:
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if b.shape[-1:] != c.shape[-1:]:
        raise ValueError(f"length mismatch: {b.shape[-1]} vs {c.shape[-1]}")
    b, c = np.broadcast_arrays(b, c)
    m = b.shape[-1]
    if m < 1:
        raise ValueError("dot product needs at least one element")
    return b, c, m


def _maybe_scalar(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def _uniform_core(b: np.ndarray, c: np.ndarray, fmt: PrecisionFormat) -> np.ndarray:
    prods = rounded_mul(round_to_format(b, fmt), round_to_format(c, fmt), fmt)
    acc = prods[..., 0]
    for i in range(1, b.shape[-1]):
        acc = rounded_add(acc, prods[..., i], fmt)
    return np.asarray(acc)


def dot_uniform(b, c, fmt: PrecisionFormat, ledger: CostLedger | None = None):
    """Sequential dot product with every elementary operation in fmt.

    Inputs are rounded to fmt before multiplying. Satisfies
    |y_hat - y| <= M*u*(1+u)^2 * |b|^T|c| absent overflow.
    """
    b, c, m = _prepare(b, c)
    acc = _uniform_core(b, c, fmt)
    if ledger is not None:
        n = acc.size
        adds, muls = predicted_costs(m, UniformScheme(fmt))
        ledger.charge(adds * n, muls * n)
    return _maybe_scalar(acc)


def dot_mp(b, c, cfg: MpConfig, ledger: CostLedger | None = None):
    """Blocked mixed-precision dot product.

    Indices split into p = ceil(M/B) contiguous blocks; block partial sums
    run in cfg.low, the p partials combine sequentially in cfg.high. When
    low == high the blocking is value-irrelevant by intent and the kernel
    canonicalizes to flat sequential accumulation (bit-identical to
    dot_uniform); the cost formula collapses to the uniform one in that case.
    """
    b, c, m = _prepare(b, c)
    B = cfg.block_size
    p = -(-m // B)
    if cfg.low == cfg.high:
        acc = _uniform_core(b, c, cfg.low)
    else:
        prods = rounded_mul(
            round_to_format(b, cfg.low), round_to_format(c, cfg.low), cfg.low
        )
        partials = []
        for k in range(p):
            lo, hi = k * B, min((k + 1) * B, m)
            y = prods[..., lo]
            for i in range(lo + 1, hi):
                y = rounded_add(y, prods[..., i], cfg.low)
            partials.append(y)
        acc = partials[0]
        for y in partials[1:]:
            acc = rounded_add(acc, y, cfg.high)
        acc = np.asarray(acc)
    if ledger is not None:
        n = acc.size
        adds, muls = predicted_costs(m, MpScheme(cfg))
        ledger.charge(adds * n, muls * n)
    return _maybe_scalar(acc)


def _partition(b: np.ndarray, c: np.ndarray, cfg: ApConfig):
    """Group indices by |b_i c_i| against the thresholds gamma*S/u_k.

    Returns (group_of 1-based, group_sizes, S, absprod); S accumulates
    left-to-right in double so batched and single calls agree bitwise.
    Entries with S == 0 get the all-in-coarsest assignment; callers that
    care must mask them.
    """
    absprod = np.abs(b * c)
    s = absprod[..., 0].copy()
    for i in range(1, b.shape[-1]):
        s = s + absprod[..., i]
    p = cfg.num_levels
    if p == 1:
        g = np.ones(b.shape, dtype=np.int64)
    else:
        g = np.ones(b.shape, dtype=np.int64)
        for k in range(2, p + 1):
            thresh = cfg.gamma * s / cfg.levels[k - 1].unit_roundoff
            g += absprod <= thresh[..., None]
    sizes = np.stack([(g == k).sum(axis=-1) for k in range(1, p + 1)], axis=-1)
    return g, sizes, np.asarray(s), absprod


def assign_groups(b, c, cfg: ApConfig) -> GroupAssignment:
    """Partition per the magnitude intervals (gamma*S/u_{k+1}, gamma*S/u_k].

    Group 1 is open above, group p is closed at zero. Requires S > 0 for
    every dot in the batch; all-zero product vectors are degenerate (the
    adaptive dot kernel short-circuits them to 0 instead).
    """
    b, c, _ = _prepare(b, c)
    g, sizes, s, _ = _partition(b, c, cfg)
    if np.any(s == 0.0):
        raise ValueError("degenerate input: |b|^T|c| == 0")
    return GroupAssignment(g, sizes, _maybe_scalar(s))


def dot_ap(b, c, cfg: ApConfig, ledger: CostLedger | None = None):
    """Adaptive-precision dot product over cfg.levels (finest first).

    Each element's product is computed and accumulated in its group's
    format; nonempty partial sums combine in the finest format. All-zero
    inputs short-circuit to 0 with main counters untouched (the selection
    pass is still metered in overhead).
    """
    b, c, m = _prepare(b, c)
    g, sizes, s, _ = _partition(b, c, cfg)
    p = cfg.num_levels
    zero_mask = s == 0.0

    if p == 1:
        acc = _uniform_core(b, c, cfg.levels[0])
    else:
        finest = cfg.levels[0]
        partials = []
        for k in range(1, p + 1):
            fmt = cfg.levels[k - 1]
            any_members = bool(np.any(sizes[..., k - 1] > 0))
            if not any_members:
                partials.append(None)
                continue
            mask = g == k
            bk = round_to_format(np.where(mask, b, 0.0), fmt)
            ck = round_to_format(np.where(mask, c, 0.0), fmt)
            prods = rounded_mul(bk, ck, fmt)
            y = np.zeros(b.shape[:-1])
            for i in range(m):
                y = rounded_add(y, prods[..., i], fmt)
            partials.append(y)
        acc = np.zeros(b.shape[:-1])
        for k in range(1, p + 1):
            if partials[k - 1] is None:
                continue
            addend = np.where(sizes[..., k - 1] > 0, partials[k - 1], 0.0)
            acc = rounded_add(acc, addend, finest)
        acc = np.asarray(acc)

    if ledger is not None:
        n = acc.size
        eff = np.where(zero_mask[..., None], 0, sizes)
        adds, muls = _ap_aggregate_costs(cfg, eff)
        overhead = _SELECTION_WEIGHT * (2 * m - 1) * n
        if ledger.verify:
            _verify_ap_charge(cfg, eff, m, adds, muls)
        ledger.charge(adds, muls, overhead)
    return _maybe_scalar(acc)


def _ap_aggregate_costs(cfg: ApConfig, sizes: np.ndarray):
    """Exact weighted (adds, muls) totals from per-dot group sizes."""
    flat = sizes.reshape(-1, cfg.num_levels)
    adds = Fraction(0)
    muls = Fraction(0)
    for k, fmt in enumerate(cfg.levels):
        col = flat[:, k]
        muls += fmt.cost_weight * int(col.sum())
        adds += fmt.cost_weight * int(np.maximum(col - 1, 0).sum())
    nonempty = (flat > 0).sum(axis=1)
    adds += cfg.levels[0].cost_weight * int(np.maximum(nonempty - 1, 0).sum())
    return adds, muls


def _verify_ap_charge(cfg, sizes, m, adds, muls):
    flat = sizes.reshape(-1, cfg.num_levels)
    scheme = ApScheme(cfg)
    want_adds = Fraction(0)
    want_muls = Fraction(0)
    for row in flat:
        if row.sum() == 0:  # short-circuited dot, uncharged
            continue
        a, mu = predicted_costs(m, scheme, group_sizes=tuple(int(v) for v in row))
        want_adds += a
        want_muls += mu
    if (want_adds, want_muls) != (adds, muls):
        raise LedgerMismatchError(
            f"AP ledger delta ({adds}, {muls}) != closed form ({want_adds}, {want_muls})"
        )


def ap_error_bound(assignment: GroupAssignment, cfg: ApConfig, b, c):
    """A-posteriori relative-error certificate for the adaptive dot.

    Returns eps + (1+eps) * sum_k m_k u_k (1+u_k)^2 beta_k with
    eps = (p-1)u_1 and beta_k the fraction of |b|^T|c| carried by group k.
    The observed |y_hat - y| / |b|^T|c| never exceeds this absent overflow.
    """
    b, c, _ = _prepare(b, c)
    s = np.asarray(assignment.magnitude_sum)
    if np.any(s == 0.0):
        raise ValueError("bound undefined for |b|^T|c| == 0")
    absprod = np.abs(b * c)
    eps = (cfg.num_levels - 1) * cfg.levels[0].unit_roundoff
    total = np.zeros(s.shape)
    for k, fmt in enumerate(cfg.levels, start=1):
        u = fmt.unit_roundoff
        mass = np.where(assignment.group_of == k, absprod, 0.0).sum(axis=-1)
        mk = assignment.group_sizes[..., k - 1]
        total = total + mk * u * (1.0 + u) ** 2 * (mass / s)
    return _maybe_scalar(np.asarray(eps + (1.0 + eps) * total))


def ap_error_bound_apriori(assignment: GroupAssignment, cfg: ApConfig):
    """A-priori form eps + c*gamma with c = (1+eps) sum_k m_k^2 (1+u_k)^2."""
    eps = (cfg.num_levels - 1) * cfg.levels[0].unit_roundoff
    mk = np.asarray(assignment.group_sizes, dtype=np.float64)
    us = np.array([f.unit_roundoff for f in cfg.levels])
    csum = ((1.0 + eps) * (mk**2 * (1.0 + us) ** 2)).sum(axis=-1)
    return _maybe_scalar(np.asarray(eps + csum * cfg.gamma))


# ---------------------------------------------------------------------------
# scheme dispatch, matrix products, closed-form costs


def scheme_dot(b, c, scheme: Scheme, ledger: CostLedger | None = None):
    """Dot product under a scheme descriptor (batched like the kernels)."""
    if isinstance(scheme, UniformScheme):
        return dot_uniform(b, c, scheme.fmt, ledger)
    if isinstance(scheme, MpScheme):
        return dot_mp(b, c, scheme.cfg, ledger)
    if isinstance(scheme, ApScheme):
        return dot_ap(b, c, scheme.cfg, ledger)
    raise TypeError(f"not a scheme: {scheme!r}")


def matmul_finite(a, b, scheme: Scheme, ledger: CostLedger | None = None) -> np.ndarray:
    """Matrix product with every output entry a scheme dot product.

    Entry (i, j) is the scheme dot of row i of a with column j of b; the
    ledger accumulates across all entries.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul_finite expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
    rows = a[:, None, :]
    cols = b.T[None, :, :]
    out = scheme_dot(rows, cols, scheme, ledger)
    return np.asarray(out)


def predicted_costs(
    m: int, scheme: Scheme, group_sizes: tuple[int, ...] | None = None
) -> tuple[Fraction, Fraction]:
    """Closed-form weighted (adds, muls) of one length-m scheme dot.

    Uniform: q(m-1), q*m. Mixed with p = ceil(m/B) blocks:
    q_l(m-p) + q_h(p-1) adds and q_l*m muls, which equal the per-block
    forms p*q_l*(B-1) + q_h*(p-1) and p*q_l*B exactly when B divides m
    (the per-block multiplication count q_l*B is the one-block reading).
    Adaptive needs the observed group sizes: sum_k q_k*max(m_k-1, 0) +
    q_1*(p'-1) adds over p' nonempty groups and sum_k q_k*m_k muls.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if isinstance(scheme, UniformScheme):
        q = scheme.fmt.cost_weight
        return q * (m - 1), q * m
    if isinstance(scheme, MpScheme):
        cfg = scheme.cfg
        p = -(-m // cfg.block_size)
        ql, qh = cfg.low.cost_weight, cfg.high.cost_weight
        return ql * (m - p) + qh * (p - 1), ql * m
    if isinstance(scheme, ApScheme):
        cfg = scheme.cfg
        if group_sizes is None:
            raise ValueError("adaptive costs need the observed group sizes")
        if len(group_sizes) != cfg.num_levels or sum(group_sizes) != m:
            raise ValueError("group sizes must cover all m indices")
        adds = Fraction(0)
        muls = Fraction(0)
        for mk, fmt in zip(group_sizes, cfg.levels):
            adds += fmt.cost_weight * max(mk - 1, 0)
            muls += fmt.cost_weight * mk
        nonempty = sum(1 for mk in group_sizes if mk > 0)
        adds += cfg.levels[0].cost_weight * max(nonempty - 1, 0)
        return adds, muls
    raise TypeError(f"not a scheme: {scheme!r}")
