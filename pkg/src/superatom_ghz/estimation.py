"""Count-based fidelity witness, error bars, scaling fits and corrections."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import DataError, InvalidArgumentError, NoSignalError, UndefinedValueError
from .measurement import CoincidenceTable, correlation_estimate


@dataclass(frozen=True)
class Estimate:
    value: float
    error: float = 0.0

    def __post_init__(self):
        if self.error < 0 or math.isnan(self.error):
            raise InvalidArgumentError("error must be nonnegative")

    def __iter__(self):
        yield self.value
        yield self.error

    def __str__(self) -> str:
        return f"{self.value:.4f} +- {self.error:.4f}"


def poisson_error(count: float, total: float) -> float:
    """Standard error of ``count / total`` with Poisson counts (first order)."""
    if total <= 0:
        raise UndefinedValueError("total must be positive")
    r = count / total
    return math.sqrt(max(r * (1.0 - r), 0.0) / total)


def eigen_fidelity(table: CoincidenceTable) -> Estimate:
    if not table.setting.is_eigen:
        raise DataError("eigen fidelity needs an eigen-basis table")
    total = table.total
    if total <= 0:
        raise UndefinedValueError("eigen table has no coincidences")
    if table.m == 1:
        # E and L span the qubit, so the projector is the identity
        return Estimate(1.0, 0.0)
    good = table.counts.get("E" * table.m, 0) + table.counts.get("L" * table.m, 0)
    return Estimate(good / total, poisson_error(good, total))


def superposition_fidelity(correlations: Sequence) -> Estimate:
    """Alternating-sign mean of the m parity correlations ``<M_i>``, i = 0..m-1."""
    vals = [c if isinstance(c, Estimate) else Estimate(*c) if isinstance(c, tuple) else Estimate(float(c))
            for c in correlations]
    m = len(vals)
    if m == 0:
        raise InvalidArgumentError("need m >= 1 correlation values")
    value = sum((-1) ** i * c.value for i, c in enumerate(vals)) / m
    err = math.sqrt(sum(c.error**2 for c in vals)) / m
    return Estimate(value, err)


def total_fidelity(f_e, f_s) -> Estimate:
    f_e = f_e if isinstance(f_e, Estimate) else Estimate(*f_e) if isinstance(f_e, tuple) else Estimate(float(f_e))
    f_s = f_s if isinstance(f_s, Estimate) else Estimate(*f_s) if isinstance(f_s, tuple) else Estimate(float(f_s))
    return Estimate(0.5 * (f_e.value + f_s.value), 0.5 * math.hypot(f_e.error, f_s.error))


@dataclass
class FidelityReport:
    m: int
    F_e: Estimate
    correlations: list[tuple[int, Estimate]]
    F_s: Estimate
    F: Estimate
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "F_e": asdict(self.F_e),
            "correlations": [{"i": i, **asdict(c)} for i, c in self.correlations],
            "F_s": asdict(self.F_s),
            "F": asdict(self.F),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "FidelityReport":
        try:
            return cls(
                int(d["m"]),
                Estimate(**d["F_e"]),
                [(int(c["i"]), Estimate(c["value"], c["error"])) for c in d["correlations"]],
                Estimate(**d["F_s"]),
                Estimate(**d["F"]),
                dict(d.get("metadata", {})),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed fidelity report: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "FidelityReport":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = [f"m = {self.m}", f"F_e = {self.F_e}"]
        for i, c in self.correlations:
            lines.append(f"  <M_{i}> = {c.value:+.4f} +- {c.error:.4f}")
        lines += [f"F_s = {self.F_s}", f"F   = {self.F}"]
        return "\n".join(lines) + "\n"


def analyze_tables(tables: Sequence[CoincidenceTable]) -> FidelityReport:
    """Fidelity report from one eigen table and the m superposition tables."""
    if not tables:
        raise DataError("no tables given")
    ms = {t.m for t in tables}
    if len(ms) != 1:
        raise DataError(f"tables disagree on m: {sorted(ms)}")
    m = ms.pop()
    eigen = None
    by_index: dict[int, CoincidenceTable] = {}
    for t in tables:
        if t.setting.is_eigen:
            eigen = t if eigen is None else eigen.merge(t)
            continue
        i = t.setting.index
        if i is None:
            i = round(t.setting.angle * m / math.pi)
            if not math.isclose(i * math.pi / m, t.setting.angle, abs_tol=1e-9):
                raise DataError(f"angle {t.setting.angle} is not an M_i setting for m={m}")
        by_index[i] = by_index[i].merge(t) if i in by_index else t
    missing = ([] if eigen is not None else ["eigen"]) + [f"mi:{i}" for i in range(m) if i not in by_index]
    if missing:
        raise DataError("missing settings: " + ", ".join(missing))
    f_e = eigen_fidelity(eigen)
    corr = [(i, Estimate(*correlation_estimate(by_index[i]))) for i in range(m)]
    f_s = superposition_fidelity([c for _, c in corr])
    return FidelityReport(m, f_e, corr, f_s, total_fidelity(f_e, f_s))


@dataclass
class ScalingFit:
    alpha: float
    beta_res: float
    residuals: list[float]
    m_values: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _as_map(values, name: str) -> dict[int, float]:
    if isinstance(values, Mapping):
        out = {int(k): float(v.value if isinstance(v, Estimate) else v) for k, v in values.items()}
    else:
        # a plain list is taken to start at m = 1
        out = {k + 1: float(v.value if isinstance(v, Estimate) else v) for k, v in enumerate(values)}
    if any(v <= 0 for v in out.values()):
        raise InvalidArgumentError(f"{name} must be positive for a log fit")
    return out


def _slope_through_origin(x: np.ndarray, y: np.ndarray) -> float:
    denom = float(x @ x)
    if denom == 0:
        raise InvalidArgumentError("fit needs at least one point with nonzero abscissa")
    return float(x @ y) / denom


def fit_scaling(f_e_by_m, f_s_by_m, beta_phi_by_m) -> ScalingFit:
    """Fit ``F_e = alpha^(m-1)`` and ``F_s = F_e * beta_phi * beta_res^m``.

    Arguments are ``{m: value}`` maps (or lists starting at m = 1).  Both fits
    are unweighted least squares of the logarithms, constrained through the
    origin.
    """
    fe = _as_map(f_e_by_m, "F_e")
    fs = _as_map(f_s_by_m, "F_s")
    bp = _as_map(beta_phi_by_m, "beta_phi")
    ms = sorted(set(fe) & set(fs) & set(bp))
    if len(ms) < 2:
        raise InvalidArgumentError("need at least two m values")
    m = np.array(ms, dtype=float)
    ln_fe = np.log([fe[k] for k in ms])
    ln_alpha = _slope_through_origin(m - 1.0, ln_fe)
    ln_ratio = np.log([fs[k] / (fe[k] * bp[k]) for k in ms])
    ln_beta = _slope_through_origin(m, ln_ratio)
    resid = np.concatenate([ln_fe - ln_alpha * (m - 1.0), ln_ratio - ln_beta * m])
    return ScalingFit(
        min(math.exp(ln_alpha), 1.0), min(math.exp(ln_beta), 1.0), [float(r) for r in resid], ms
    )


def afterpulse_correct(table: CoincidenceTable, p_afterpulse: float) -> CoincidenceTable:
    """Remove the expected afterpulse contribution from the m-fold counts.

    A true (m-1)-fold event whose empty window k follows a click in window
    k-1 turns into a fake m-fold count with probability ``p_afterpulse``,
    repeating the symbol of window k-1.  The corrected counts are floats.
    """
    if not 0.0 <= p_afterpulse <= 1.0:
        raise InvalidArgumentError("p_afterpulse must be a probability")
    if p_afterpulse == 0.0:
        return table
    counts = {}
    for outcome, c in table.counts.items():
        fake = 0.0
        for k in range(1, table.m):
            if outcome[k] == outcome[k - 1]:
                fake += table.partial.get(outcome[:k] + "0" + outcome[k + 1:], 0)
        counts[outcome] = max(c - p_afterpulse * fake, 0.0)
    meta = dict(table.metadata)
    meta["afterpulse_corrected"] = p_afterpulse
    return CoincidenceTable(
        table.m, table.setting, counts, dict(table.partial), table.partial_other, table.total_cycles, meta
    )


def even_parity_probability(table: CoincidenceTable) -> float:
    total = table.total
    if total <= 0:
        raise UndefinedValueError("table has no coincidences")
    return sum(v for k, v in table.counts.items() if k.count("-") % 2 == 0) / total


def phase_calibration(sweep: Sequence[tuple[float, CoincidenceTable]]) -> float:
    """Phase setting that maximises the even-parity weight of an angle-0 sweep.

    Fits ``p_even(phi) = a cos(phi) + b sin(phi) + c`` by linear least
    squares and returns ``atan2(b, a)`` wrapped into ``(-pi, pi]``.
    """
    if len(sweep) < 5:
        raise InvalidArgumentError("phase sweep needs at least 5 points")
    phis = np.array([float(p) for p, _ in sweep])
    for _, t in sweep:
        if t.setting.is_eigen or t.setting.angle != 0.0:
            raise DataError("phase sweep tables must use angle-0 settings")
    wrapped = np.sort(np.mod(phis, 2 * math.pi))
    gaps = np.diff(np.concatenate([wrapped, [wrapped[0] + 2 * math.pi]]))
    if gaps.max() >= math.pi:
        raise InvalidArgumentError("phase sweep does not cover a full period")
    y = np.array([even_parity_probability(t) for _, t in sweep])
    design = np.column_stack([np.cos(phis), np.sin(phis), np.ones_like(phis)])
    (a, b, c), *_ = np.linalg.lstsq(design, y, rcond=None)
    amp = math.hypot(a, b)
    resid = y - design @ np.array([a, b, c])
    noise = float(np.std(resid)) if len(y) > 3 else 0.0
    if amp < 1e-9 or amp < 2.0 * noise:
        raise NoSignalError("phase sweep shows no parity oscillation")
    return math.atan2(b, a)


def analytic_chain(m: int, avg_flip: float, beta_phi_m: float, beta_res: float = 1.0) -> tuple[float, float, float]:
    """(F_e, F_s, F) from the scaling model ``F_e = (1-avg)^(m-1)``, ``F_s = F_e beta_phi beta_res^m``."""
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    f_e = (1.0 - avg_flip) ** (m - 1)
    f_s = f_e * beta_phi_m * beta_res**m
    return f_e, f_s, 0.5 * (f_e + f_s)


def bootstrap_fidelity(tables: Sequence[CoincidenceTable], n_boot: int = 200, seed: int = 0) -> Estimate:
    """Bootstrap cross-check of F: multinomial resampling of each table."""
    rng = np.random.default_rng(seed)
    base = analyze_tables(tables)
    vals = []
    for _ in range(n_boot):
        resampled = []
        for t in tables:
            keys = sorted(t.counts)
            n = int(round(t.total))
            p = np.array([t.counts[k] for k in keys], dtype=float)
            draw = rng.multinomial(n, p / p.sum())
            resampled.append(CoincidenceTable(t.m, t.setting, dict(zip(keys, draw.tolist()))))
        try:
            vals.append(analyze_tables(resampled).F.value)
        except UndefinedValueError:
            continue
    return Estimate(base.F.value, float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)
