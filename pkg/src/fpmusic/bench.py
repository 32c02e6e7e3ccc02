"""Monte-Carlo benchmark harness: scenario sampling, SNR sweeps, reporting.

A sweep runs L independent trials per SNR level. Within one trial every
method/scheme combination sees the identical snapshot matrix and the
identical sketch draw (paired comparison): the per-trial random streams are
derived from (master_seed, snr_index, trial_index, purpose) counters, and
each estimator call gets a fresh generator seeded with the same counters,
so results are reproducible bit-for-bit regardless of execution order.

Methods "music" and "u_music" are full-precision baselines and produce one
row each (scheme column "uniform:fp64"); "ru_music" produces one row per
configured scheme. Weighted-operation columns cover the metered
finite-precision kernels only, so the complex baseline reports zeros.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .doa import ArrayConfig, estimate, method_spectrum, synthesize_snapshots
from .kernels import CostLedger, parse_scheme, scheme_label

__all__ = [
    "SweepConfig",
    "TrialResult",
    "SweepRow",
    "InfeasibleSamplingError",
    "sample_doas",
    "run_trial",
    "rmse",
    "run_sweep",
    "emit",
    "read_results_csv",
    "dump_spectrum",
    "RESULTS_JSON_SCHEMA",
    "DEFAULT_SNR_GRID_DB",
    "DEFAULT_SCHEMES",
]

DEFAULT_SNR_GRID_DB = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
DEFAULT_SCHEMES = (
    "uniform:fp64",
    "uniform:fp16",
    "mp:fp16:fp64:B=2",
    "ap:fp64,fp32,fp16:gamma=2^-16",
)
_MAX_REJECTIONS = 10**6

RESULTS_JSON_SCHEMA = {
    "type": "object",
    "required": ["rows"],
    "properties": {
        "config": {"type": "object"},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "snr_db",
                    "method",
                    "scheme",
                    "rmse_deg",
                    "failures",
                    "weighted_adds",
                    "weighted_muls",
                    "overhead",
                ],
                "properties": {
                    "snr_db": {"type": "number"},
                    "method": {"type": "string"},
                    "scheme": {"type": "string"},
                    "rmse_deg": {"type": ["number", "null"]},
                    "failures": {"type": "integer", "minimum": 0},
                    "weighted_adds": {"type": "number", "minimum": 0},
                    "weighted_muls": {"type": "number", "minimum": 0},
                    "overhead": {"type": "number", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
    },
}


class InfeasibleSamplingError(RuntimeError):
    """Rejection sampling failed to find an admissible DOA set."""


@dataclass(frozen=True)
class SweepConfig:
    """Experiment parameters for one Monte-Carlo sweep."""

    m: int = 20
    n: int = 5
    t: int = 40
    k: int = 10
    f: int = 1500
    snr_db_list: tuple[float, ...] = DEFAULT_SNR_GRID_DB
    trials: int = 200
    grid_bounds_deg: tuple[float, float] = (-90.0, 90.0)
    doa_range_deg: tuple[float, float] = (-60.0, 60.0)
    min_separation_deg: float = 10.0
    methods: tuple[str, ...] = ("music", "u_music", "ru_music")
    schemes: tuple[str, ...] = DEFAULT_SCHEMES
    master_seed: int = 12345
    verify_ledgers: bool = False

    def __post_init__(self):
        if not 1 <= self.n < self.k < self.m:
            raise ValueError("need 1 <= N < K < M")
        lo, hi = self.doa_range_deg
        if self.min_separation_deg * (self.n - 1) >= hi - lo:
            raise ValueError("separation constraint leaves no room to sample")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.f < 3:
            raise ValueError("need at least 3 grid angles")

    @property
    def array(self) -> ArrayConfig:
        return ArrayConfig(self.m)

    @property
    def grid_deg(self) -> np.ndarray:
        lo, hi = self.grid_bounds_deg
        return np.linspace(lo, hi, self.f)


@dataclass
class TrialResult:
    """One trial's ground truth, per-variant estimates and ledgers."""

    true_doas: np.ndarray
    estimates: dict[tuple[str, str], np.ndarray | None]
    ledgers: dict[tuple[str, str], CostLedger]
    snapshot_digest: str
    sketch_digest: str


@dataclass
class SweepRow:
    snr_db: float
    method: str
    scheme: str
    rmse_deg: float | None
    failures: int
    weighted_adds: Fraction
    weighted_muls: Fraction
    overhead: Fraction


def sample_doas(
    n: int,
    range_deg: tuple[float, float],
    min_sep_deg: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """n sorted angles, i.i.d. uniform, accepted when all gaps >= min_sep."""
    lo, hi = range_deg
    if min_sep_deg * (n - 1) >= hi - lo:
        raise ValueError("separation constraint leaves no room to sample")
    for _ in range(_MAX_REJECTIONS):
        draw = np.sort(rng.uniform(lo, hi, n))
        if n == 1 or np.diff(draw).min() >= min_sep_deg:
            return draw
    raise InfeasibleSamplingError(
        f"no admissible draw in {_MAX_REJECTIONS} attempts"
    )


def _stream(cfg: SweepConfig, snr_index: int, trial_index: int, purpose: int):
    seq = np.random.SeedSequence(
        (cfg.master_seed, snr_index, trial_index, purpose)
    )
    return np.random.default_rng(seq)


def _digest(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()


def _variants(cfg: SweepConfig):
    """(method, scheme_label, scheme) rows in fixed report order."""
    out = []
    for method in cfg.methods:
        if method == "ru_music":
            for text in cfg.schemes:
                scheme = parse_scheme(text)
                out.append((method, scheme_label(scheme), scheme))
        else:
            scheme = parse_scheme("uniform:fp64")
            out.append((method, scheme_label(scheme), scheme))
    return out


def run_trial(cfg: SweepConfig, snr_db: float, snr_index: int, trial_index: int) -> TrialResult:
    """One paired trial: shared scenario and snapshots across all variants.

    Estimator failures are recorded as None estimates rather than raised, so
    a sweep keeps going; the failure count surfaces in the report rows.
    """
    doas = sample_doas(
        cfg.n, cfg.doa_range_deg, cfg.min_separation_deg,
        _stream(cfg, snr_index, trial_index, 0),
    )
    x = synthesize_snapshots(
        doas, cfg.t, snr_db, cfg.array, _stream(cfg, snr_index, trial_index, 1)
    )
    # Every ru_music call below re-creates this generator, so each scheme
    # consumes the identical sketch draw.
    omega = _stream(cfg, snr_index, trial_index, 2).standard_normal((cfg.m, cfg.k))
    grid = cfg.grid_deg
    estimates: dict[tuple[str, str], np.ndarray | None] = {}
    ledgers: dict[tuple[str, str], CostLedger] = {}
    for method, label, scheme in _variants(cfg):
        ledger = CostLedger(verify=cfg.verify_ledgers)
        rng = _stream(cfg, snr_index, trial_index, 2)
        try:
            est = estimate(
                method, x, cfg.n, cfg.k, grid, scheme, ledger, rng, cfg.array
            )
        except Exception:
            est = None
        estimates[(method, label)] = est
        ledgers[(method, label)] = ledger
    return TrialResult(doas, estimates, ledgers, _digest(x), _digest(omega))


def rmse(results: list[TrialResult], key: tuple[str, str]) -> tuple[float | None, int]:
    """Root mean square DOA error for one variant, with its failure count.

    Truth and estimates pair by ascending sort order. Failed trials are
    excluded; all-failed yields (None, count).
    """
    if not results:
        raise ValueError("no trials")
    total = 0.0
    used = 0
    failures = 0
    for tr in results:
        est = tr.estimates[key]
        if est is None:
            failures += 1
            continue
        err = np.sort(est) - np.sort(tr.true_doas)
        total += float((err**2).sum())
        used += 1
    if used == 0:
        return None, failures
    n = results[0].true_doas.size
    return float(np.sqrt(total / (used * n))), failures


def run_sweep(cfg: SweepConfig) -> list[SweepRow]:
    """The full grid of (SNR, method, scheme) rows, costs averaged per trial."""
    rows: list[SweepRow] = []
    for si, snr in enumerate(cfg.snr_db_list):
        results = [run_trial(cfg, snr, si, ti) for ti in range(cfg.trials)]
        for method, label, _ in _variants(cfg):
            key = (method, label)
            err, failures = rmse(results, key)
            adds = sum((tr.ledgers[key].weighted_adds for tr in results), Fraction(0))
            muls = sum((tr.ledgers[key].weighted_muls for tr in results), Fraction(0))
            over = sum((tr.ledgers[key].overhead for tr in results), Fraction(0))
            l = len(results)
            rows.append(
                SweepRow(snr, method, label, err, failures, adds / l, muls / l, over / l)
            )
    return rows


_CSV_FIELDS = (
    "snr_db",
    "method",
    "scheme",
    "rmse_deg",
    "failures",
    "weighted_adds",
    "weighted_muls",
    "overhead",
)


def _row_record(row: SweepRow) -> dict:
    return {
        "snr_db": row.snr_db,
        "method": row.method,
        "scheme": row.scheme,
        "rmse_deg": row.rmse_deg,
        "failures": row.failures,
        "weighted_adds": float(row.weighted_adds),
        "weighted_muls": float(row.weighted_muls),
        "overhead": float(row.overhead),
    }


def emit(rows: list[SweepRow], fmt: str, path, config: dict | None = None) -> None:
    """Write sweep rows as "csv" or "json" (schema: RESULTS_JSON_SCHEMA)."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
            writer.writeheader()
            for row in rows:
                rec = _row_record(row)
                if rec["rmse_deg"] is None:
                    rec["rmse_deg"] = "nan"
                writer.writerow(rec)
    elif fmt == "json":
        doc = {"rows": [_row_record(r) for r in rows]}
        if config is not None:
            doc["config"] = config
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_results_csv(path) -> list[SweepRow]:
    """Parse a CSV written by emit back into SweepRow records."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            err = float(rec["rmse_deg"])
            rows.append(
                SweepRow(
                    float(rec["snr_db"]),
                    rec["method"],
                    rec["scheme"],
                    None if np.isnan(err) else err,
                    int(rec["failures"]),
                    Fraction(rec["weighted_adds"]),
                    Fraction(rec["weighted_muls"]),
                    Fraction(rec["overhead"]),
                )
            )
    return rows


def dump_spectrum(cfg: SweepConfig, snr_db: float, path) -> None:
    """Single-trial spectrum dump: CSV angle_deg,value,method,scheme.

    Values are normalized per variant so each maximum sits at 0 dB.
    """
    grid = cfg.grid_deg
    doas = sample_doas(
        cfg.n, cfg.doa_range_deg, cfg.min_separation_deg, _stream(cfg, 0, 0, 0)
    )
    x = synthesize_snapshots(doas, cfg.t, snr_db, cfg.array, _stream(cfg, 0, 0, 1))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg", "value", "method", "scheme"])
        for method, label, scheme in _variants(cfg):
            rng = _stream(cfg, 0, 0, 2)
            spec = method_spectrum(
                method, x, cfg.n, cfg.k, grid, scheme, None, rng, cfg.array
            )
            db = 10.0 * np.log10(spec.values / spec.values.max())
            for angle, val in zip(grid, db):
                writer.writerow([repr(float(angle)), repr(float(val)), method, label])
