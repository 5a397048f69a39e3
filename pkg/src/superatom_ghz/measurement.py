"""Time-bin qubit analysis, outcome distributions and coincidence tables.

A superposition setting with angle theta projects each qubit onto
``|+-> = (|E> +- e^{i theta} |L>)/sqrt(2)``, the eigenvectors of
``cos(theta) sigma_x + sin(theta) sigma_y``.  Photons leave the analyser in
one of two output modes (SPD1 / SPD2); a window holding both photons of a
double emission bunches into a single output in superposition bases and
lights both detectors in the eigen basis.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import DataError, InvalidArgumentError, InvalidStateError, UndefinedValueError
from .protocol import TwoBranchState

EIGEN = "eigen"
SUPERPOSITION = "superposition"

# Output photon configurations (n at SPD1, n at SPD2) a single window can hold.
CONFIGS: tuple[tuple[int, int], ...] = ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1))
CONFIG_INDEX = {c: k for k, c in enumerate(CONFIGS)}


@dataclass(frozen=True)
class MeasurementSetting:
    kind: str
    angle: float = 0.0
    index: int | None = None

    def __post_init__(self):
        if self.kind not in (EIGEN, SUPERPOSITION):
            raise InvalidArgumentError(f"unknown setting kind {self.kind!r}")
        if not 0.0 <= self.angle < math.pi:
            raise InvalidArgumentError("setting angle must lie in [0, pi)")

    @property
    def is_eigen(self) -> bool:
        return self.kind == EIGEN

    @property
    def symbols(self) -> tuple[str, str]:
        return ("E", "L") if self.is_eigen else ("+", "-")

    @property
    def label(self) -> str:
        if self.is_eigen:
            return "eigen"
        if self.index is not None:
            return f"mi:{self.index}"
        return f"angle:{self.angle!r}"


def make_setting(i: int, m: int) -> MeasurementSetting:
    """Setting ``M_i`` of the m+1 setting decomposition; ``i == m`` is the eigen basis."""
    if m < 1 or not 0 <= i <= m:
        raise InvalidArgumentError(f"setting index {i} out of range for m={m}")
    if i == m:
        return MeasurementSetting(EIGEN)
    return MeasurementSetting(SUPERPOSITION, i * math.pi / m, i)


def parse_setting_label(label: str, m: int) -> MeasurementSetting:
    label = label.strip().lower()
    if label == "eigen":
        return make_setting(m, m)
    if label.startswith("mi:") or label.startswith("mi_"):
        try:
            i = int(label[3:])
        except ValueError:
            raise InvalidArgumentError(f"bad setting label {label!r}") from None
        if i >= m:
            raise InvalidArgumentError(f"mi:{i} out of range for m={m}")
        return make_setting(i, m)
    raise InvalidArgumentError(f"bad setting label {label!r} (use eigen or mi:<i>)")


def amplitude_row(content: tuple[int, int], setting: MeasurementSetting) -> np.ndarray:
    """Output-configuration amplitudes (over CONFIGS) for one window.

    ``content`` is the (early, late) photon number of a branch in that window.
    """
    row = np.zeros(len(CONFIGS), dtype=complex)
    if content == (0, 0):
        row[0] = 1.0
        return row
    phase = np.exp(-1j * setting.angle)
    s = 1.0 / math.sqrt(2.0)
    if content == (1, 0):
        if setting.is_eigen:
            row[1] = 1.0
        else:
            row[1] = row[2] = s
    elif content == (0, 1):
        if setting.is_eigen:
            row[2] = 1.0
        else:
            row[1], row[2] = s * phase, -s * phase
    elif content == (1, 1):
        if setting.is_eigen:
            row[5] = 1.0
        else:
            row[3], row[4] = s * phase, -s * phase
    else:
        raise InvalidArgumentError(f"unsupported window content {content}")
    return row


def window_contents(emission: Sequence[int]) -> list[tuple[int, int]]:
    return [(emission[k], emission[k + 1]) for k in range(0, len(emission), 2)]


def _settings_for(state: TwoBranchState, settings) -> list[MeasurementSetting]:
    if isinstance(settings, MeasurementSetting):
        return [settings] * state.m_target
    settings = list(settings)
    if len(settings) != state.m_target:
        raise InvalidArgumentError("need one setting per qubit")
    return settings


def branches_coherent(state: TwoBranchState) -> bool:
    """Branches interfere only when their photon records differ.

    Identical records can arise from an error that re-routes one branch onto
    the other's pattern; such components are added as probabilities so that
    the trajectory stays normalised.
    """
    return state.branch_a.emission != state.branch_b.emission


def output_distribution(state: TwoBranchState, settings) -> dict[tuple[int, ...], float]:
    """Exact probabilities of every output configuration (indices into CONFIGS per window)."""
    if not state.complete:
        raise InvalidStateError("state is not complete")
    settings = _settings_for(state, settings)
    rows = []
    for br in state.branches:
        rows.append([amplitude_row(c, s) for c, s in zip(window_contents(br.emission), settings)])
    amp = [br.amplitude_mag for br in state.branches]
    phase = np.exp(1j * state.relative_phase)
    coherent = branches_coherent(state)

    def branch_amps(k):
        out = {}
        supports = [np.nonzero(r)[0] for r in rows[k]]
        for cfg in itertools.product(*supports):
            a = amp[k]
            for r, c in zip(rows[k], cfg):
                a = a * r[c]
            out[cfg] = a
        return out

    a_amps = branch_amps(0)
    b_amps = {cfg: v * phase for cfg, v in branch_amps(1).items()}
    probs: dict[tuple[int, ...], float] = {}
    for cfg in set(a_amps) | set(b_amps):
        a = a_amps.get(cfg, 0.0)
        b = b_amps.get(cfg, 0.0)
        p = abs(a + b) ** 2 if coherent else abs(a) ** 2 + abs(b) ** 2
        if p > 1e-300:
            probs[cfg] = float(p)
    return probs


def config_label(cfg: Sequence[int], settings: Sequence[MeasurementSetting]) -> str | None:
    """Outcome string if every window holds exactly one photon, else None."""
    out = []
    for c, s in zip(cfg, settings):
        if c == 1:
            out.append(s.symbols[0])
        elif c == 2:
            out.append(s.symbols[1])
        else:
            return None
    return "".join(out)


def all_outcomes(m: int, setting: MeasurementSetting) -> list[str]:
    return ["".join(t) for t in itertools.product(setting.symbols, repeat=m)]


@dataclass
class OutcomeDistribution:
    m: int
    probs: dict[str, float]
    partial: dict[str, float] = field(default_factory=dict)  # (m-1)-fold records, '0' marks the empty window
    other: float = 0.0  # everything else

    @property
    def total(self) -> float:
        return float(sum(self.probs.values()))

    def normalized(self) -> dict[str, float]:
        t = self.total
        if t <= 0:
            raise UndefinedValueError("distribution carries no coincidence probability")
        return {k: v / t for k, v in self.probs.items()}

    def get(self, outcome: str) -> float:
        return self.probs.get(outcome, 0.0)


def outcome_distribution(state: TwoBranchState, settings) -> OutcomeDistribution:
    """m-fold outcome probabilities under ideal (lossless, noiseless) detection.

    Configurations that are not one photon per window (dead branch, double
    emission) are reported as the remaining ``other`` weight.
    """
    settings = _settings_for(state, settings)
    probs = {k: 0.0 for k in all_outcomes(state.m_target, settings[0])} if len({s for s in settings}) == 1 else {}
    other = 0.0
    for cfg, p in output_distribution(state, settings).items():
        lab = config_label(cfg, settings)
        if lab is None:
            other += p
        else:
            probs[lab] = probs.get(lab, 0.0) + p
    return OutcomeDistribution(state.m_target, probs, {}, other)


@dataclass(frozen=True)
class PartialEvent:
    record: str  # one symbol per window; '0' = no click, 'X' = both detectors


def record_string(observed: Sequence[int], settings: Sequence[MeasurementSetting]) -> str:
    out = []
    for o, s in zip(observed, settings):
        out.append("0" if o == 0 else s.symbols[0] if o == 1 else s.symbols[1] if o == 2 else "X")
    return "".join(out)


def sample_outcome(state: TwoBranchState, settings, params, rng: np.random.Generator):
    """Draw an ideal output configuration, then push it through the detectors."""
    from .channels import detect_batch

    settings = _settings_for(state, settings)
    dist = output_distribution(state, settings)
    cfgs = sorted(dist)
    p = np.array([dist[c] for c in cfgs])
    k = rng.choice(len(cfgs), p=p / p.sum())
    photons = np.array([[CONFIGS[c] for c in cfgs[k]]])
    observed, _ = detect_batch(photons, params, rng)
    rec = record_string(observed[0], settings)
    if set(rec) & {"0", "X"}:
        return PartialEvent(rec)
    return rec


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) or float(v).is_integer():
        return str(int(v))
    return repr(float(v))


@dataclass
class CoincidenceTable:
    m: int
    setting: MeasurementSetting
    counts: dict[str, float]
    partial: dict[str, float] = field(default_factory=dict)
    partial_other: int = 0
    total_cycles: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        allowed = set(self.setting.symbols)
        for k in self.counts:
            if len(k) != self.m or not set(k) <= allowed:
                raise DataError(f"outcome {k!r} does not match m={self.m}, setting {self.setting.label}")
        for k in self.partial:
            if len(k) != self.m or k.count("0") != 1 or not set(k) <= allowed | {"0"}:
                raise DataError(f"partial record {k!r} is not an (m-1)-fold record")
        for k in all_outcomes(self.m, self.setting):
            self.counts.setdefault(k, 0)

    @classmethod
    def empty(cls, m: int, setting: MeasurementSetting) -> "CoincidenceTable":
        return cls(m, setting, {})

    @property
    def total(self) -> float:
        return sum(self.counts.values())

    @property
    def n_partial(self) -> float:
        return sum(self.partial.values()) + self.partial_other

    def normalized(self) -> dict[str, float]:
        t = self.total
        if t <= 0:
            raise UndefinedValueError("table has no coincidences")
        return {k: v / t for k, v in self.counts.items()}

    def merge(self, other: "CoincidenceTable") -> "CoincidenceTable":
        if other.m != self.m or other.setting != self.setting:
            raise DataError("cannot merge tables with different m or setting")
        counts = Counter(self.counts)
        counts.update(other.counts)
        partial = Counter(self.partial)
        partial.update(other.partial)
        return CoincidenceTable(
            self.m, self.setting, dict(counts), dict(partial),
            self.partial_other + other.partial_other,
            self.total_cycles + other.total_cycles, dict(self.metadata),
        )

    # serialisation ---------------------------------------------------------
    def _header(self) -> dict:
        s = self.setting
        return {
            "m": self.m,
            "setting": {"kind": s.kind, "angle": s.angle, "index": s.index, "label": s.label},
            "partial_other": self.partial_other,
            "total_cycles": self.total_cycles,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        d = self._header()
        d["counts"] = {k: self.counts[k] for k in sorted(self.counts)}
        d["partial"] = {k: self.partial[k] for k in sorted(self.partial)}
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self._header(), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["outcome", "count"])
        for k in sorted(self.counts):
            w.writerow([k, _fmt(self.counts[k])])
        for k in sorted(self.partial):
            w.writerow([k, _fmt(self.partial[k])])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: Mapping) -> "CoincidenceTable":
        s = d["setting"]
        setting = MeasurementSetting(s["kind"], float(s.get("angle", 0.0)), s.get("index"))
        return cls(
            int(d["m"]), setting, dict(d["counts"]), dict(d.get("partial", {})),
            int(d.get("partial_other", 0)), int(d.get("total_cycles", 0)), dict(d.get("metadata", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "CoincidenceTable":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_csv(cls, text: str, setting_label: str | None = None) -> "CoincidenceTable":
        """Parse a table written by :meth:`to_csv` or typed in by hand.

        Hand-written tables may use the basis letters D/A (angle 0) or C/P
        (angle pi/2) instead of +/-, and need no header comment.
        """
        header = None
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                try:
                    header = json.loads(line[1:])
                except json.JSONDecodeError:
                    pass
                continue
            if line.strip():
                rows.append(line)
        reader = csv.reader(rows)
        data = []
        for rec in reader:
            if not rec or rec[0].strip().lower() == "outcome":
                continue
            if len(rec) < 2:
                raise DataError(f"malformed CSV row {rec}")
            key = rec[0].strip().upper()
            val = float(rec[1])
            data.append((key, int(val) if val.is_integer() else val))
        if not data:
            raise DataError("CSV holds no outcome rows")
        m = len(data[0][0])
        letters = set("".join(k for k, _ in data)) - {"0"}
        if header is not None:
            m = int(header["m"])
            s = header["setting"]
            setting = MeasurementSetting(s["kind"], float(s.get("angle", 0.0)), s.get("index"))
        elif setting_label is not None:
            setting = parse_setting_label(setting_label, m)
        elif letters <= {"E", "L"}:
            setting = make_setting(m, m)
        elif letters <= {"D", "A"}:
            setting = make_setting(0, m)
        elif letters <= {"C", "P"}:
            if m % 2:
                raise DataError("C/P letters need an even m (angle pi/2 = M_{m/2})")
            setting = make_setting(m // 2, m)
        else:
            raise DataError("cannot infer the measurement setting; pass one explicitly")
        trans = str.maketrans({"D": "+", "A": "-", "C": "+", "P": "-"})
        counts, partial = {}, {}
        for key, val in data:
            key = key.translate(trans) if not setting.is_eigen else key
            target = partial if "0" in key else counts
            target[key] = target.get(key, 0) + val
        return cls(
            m, setting, counts, partial,
            int(header.get("partial_other", 0)) if header else 0,
            int(header.get("total_cycles", 0)) if header else 0,
            dict(header.get("metadata", {})) if header else {},
        )


def tabulate(samples: Iterable, m: int | None = None, setting: MeasurementSetting | None = None) -> CoincidenceTable:
    """Accumulate outcome strings and partial events into a table.

    ``m`` and ``setting`` default to what the first sample implies (eigen for
    E/L strings, angle 0 for +/- strings).
    """
    counts: Counter = Counter()
    partial: Counter = Counter()
    other = 0
    for s in samples:
        rec = s.record if isinstance(s, PartialEvent) else str(s)
        if m is None:
            m = len(rec)
        if setting is None:
            letters = set(rec) - {"0", "X"}
            if letters & {"E", "L"}:
                setting = make_setting(m, m)
            elif letters & {"+", "-"}:
                setting = make_setting(0, m)
        if len(rec) != m:
            raise DataError(f"sample {rec!r} has wrong length for m={m}")
        alphabet = set(setting.symbols) if setting is not None else set()
        if setting is not None and not set(rec) <= alphabet | {"0", "X"}:
            raise DataError(f"sample {rec!r} does not belong to setting {setting.label}")
        if "0" not in rec and "X" not in rec:
            counts[rec] += 1
        elif rec.count("0") == 1 and "X" not in rec and m > 1:
            partial[rec] += 1
        else:
            other += 1
    if m is None:
        raise DataError("cannot tabulate an empty stream without m and setting")
    if setting is None:
        setting = make_setting(m, m)
    return CoincidenceTable(m, setting, dict(counts), dict(partial), other)


def _parity_sign(outcome: str) -> int:
    return -1 if outcome.count("-") % 2 else 1


def correlation_value(table: CoincidenceTable) -> float:
    return correlation_estimate(table)[0]


def correlation_estimate(table: CoincidenceTable) -> tuple[float, float]:
    """Parity expectation value and its Poisson standard error."""
    if table.setting.is_eigen:
        raise DataError("parity correlation needs a superposition-basis table")
    total = table.total
    if total <= 0:
        raise UndefinedValueError("table has no coincidences")
    even = sum(v for k, v in table.counts.items() if _parity_sign(k) > 0)
    odd = total - even
    value = (even - odd) / total
    err = 2.0 * math.sqrt(max(even, 0) * max(odd, 0) / total**3)
    return value, err


def g2_estimate(p_s1s2: float, p_s1: float, p_s2: float) -> float:
    if p_s1 <= 0 or p_s2 <= 0:
        raise UndefinedValueError("g2 needs nonzero single-detector probabilities")
    return p_s1s2 / (p_s1 * p_s2)


def hbt_probabilities(p_signal: float, p_dark: float) -> tuple[float, float, float]:
    """(p_s1s2, p_s1, p_s2) for a single photon split 50:50 onto two noisy detectors."""
    half = 0.5 * p_signal
    p_single = 1.0 - (1.0 - half) * (1.0 - p_dark)
    p_both = 2.0 * half * p_dark + (1.0 - p_signal) * p_dark**2
    return p_both, p_single, p_single
