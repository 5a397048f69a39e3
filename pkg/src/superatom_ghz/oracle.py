"""Exact coincidence distributions for small m by exhaustive enumeration.

Every sequence of iteration events (at most one failure per iteration) is
enumerated with its probability, every output photon configuration is
expanded with explicit amplitudes, and the detector chain is summed exactly.
Gaussian phase noise multiplies the interference terms analytically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channels import ErrorModelParams
from .events import IterationEvents
from .exceptions import InvalidArgumentError
from .measurement import (
    CONFIGS,
    MeasurementSetting,
    OutcomeDistribution,
    all_outcomes,
    amplitude_row,
    make_setting,
    window_contents,
)
from .phase import PhaseNoiseParams, total_sigma
from .protocol import TwoBranchState, evolve

MAX_M = 4


@dataclass(frozen=True)
class EventPath:
    events: tuple[IterationEvents, ...]
    weight: float
    state: TwoBranchState

    @property
    def patterns(self) -> tuple[str, str]:
        return self.state.branch_a.pattern, self.state.branch_b.pattern


def _event_weights(params: ErrorModelParams) -> list[tuple[IterationEvents, float]]:
    fail = (1.0 - sum(params.failure_probs),) + params.failure_probs
    out = []
    for code in range(10):
        ev = IterationEvents.from_code(code)
        w = fail[int(ev.failure)] * (params.p_accum if ev.accum_triggered else 1.0 - params.p_accum)
        out.append((ev, w))
    return out


def enumerate_events(m: int, params: ErrorModelParams, keep_zero: bool = False) -> list[EventPath]:
    """All event sequences for an m-qubit run with their probabilities."""
    if m < 1 or m > MAX_M:
        raise InvalidArgumentError(f"enumeration supports 1 <= m <= {MAX_M}, got {m}")
    per_iter = _event_weights(params)
    paths = []
    for combo in itertools.product(per_iter, repeat=m - 1):
        w = math.prod(p for _, p in combo)
        if w == 0.0 and not keep_zero:
            continue
        events = tuple(e for e, _ in combo)
        paths.append(EventPath(events, w, evolve(m, events)))
    return paths


def _branch_amplitudes(emission, settings) -> dict[tuple[int, ...], complex]:
    rows = [amplitude_row(c, s) for c, s in zip(window_contents(emission), settings)]
    out = {}
    for cfg in itertools.product(*[np.nonzero(r)[0] for r in rows]):
        amp = complex(1.0)
        for r, c in zip(rows, cfg):
            amp *= r[c]
        out[tuple(int(c) for c in cfg)] = amp
    return out


def _config_probabilities(state: TwoBranchState, settings, coherence: complex) -> dict[tuple[int, ...], float]:
    """Output-configuration probabilities with the cross term scaled by ``coherence``.

    ``coherence`` is the average of ``exp(i phi)`` over the phase noise.
    """
    a_br, b_br = state.branch_a, state.branch_b
    a = _branch_amplitudes(a_br.emission, settings)
    b = _branch_amplitudes(b_br.emission, settings)
    wa, wb = a_br.amplitude_mag, b_br.amplitude_mag
    interfere = a_br.emission != b_br.emission
    out: dict[tuple[int, ...], float] = {}
    for cfg in set(a) | set(b):
        x, y = wa * a.get(cfg, 0.0), wb * b.get(cfg, 0.0)
        p = abs(x) ** 2 + abs(y) ** 2
        if interfere:
            p += 2.0 * (coherence * np.conj(x) * y).real
        if p > 1e-300:
            out[cfg] = float(p)
    return out


@lru_cache(maxsize=4096)
def _detection_distribution(cfg: tuple[int, ...], eta: float, p_dark: float, p_ap: float):
    """Exact distribution of observed window codes for one photon configuration."""
    windows = [CONFIGS[c] for c in cfg]
    # prefix of observed codes, previous window's real clicks -> probability
    layer = {((), (0, 0)): 1.0}
    for n0, n1 in windows:
        s0 = 1.0 - (1.0 - eta) ** n0
        s1 = 1.0 - (1.0 - eta) ** n1
        nxt: dict = {}
        for (prefix, prev), p in layer.items():
            for r0, r1 in itertools.product((0, 1), repeat=2):
                pr = (s0 if r0 else 1.0 - s0) * (s1 if r1 else 1.0 - s1)
                if pr == 0.0:
                    continue
                # probability of a click on each SPD given its real click
                c_prob = []
                for r, pv in ((r0, prev[0]), (r1, prev[1])):
                    if r:
                        c_prob.append(1.0)
                    else:
                        c_prob.append(1.0 - (1.0 - p_dark) * (1.0 - (p_ap if pv else 0.0)))
                for c0, c1 in itertools.product((0, 1), repeat=2):
                    pc = (c_prob[0] if c0 else 1.0 - c_prob[0]) * (c_prob[1] if c1 else 1.0 - c_prob[1])
                    if pc == 0.0:
                        continue
                    key = (prefix + (c0 + 2 * c1,), (r0, r1))
                    nxt[key] = nxt.get(key, 0.0) + p * pr * pc
        layer = nxt
    out: dict[tuple[int, ...], float] = {}
    for (prefix, _), p in layer.items():
        out[prefix] = out.get(prefix, 0.0) + p
    return out


def _settings_list(m: int, settings) -> list[MeasurementSetting]:
    if isinstance(settings, MeasurementSetting):
        return [settings] * m
    settings = list(settings)
    if len(settings) != m:
        raise InvalidArgumentError("need one setting per qubit")
    return settings


def exact_distribution(
    m: int,
    params: ErrorModelParams,
    phase: PhaseNoiseParams,
    settings,
    phi: float = 0.0,
    detection: bool = True,
) -> OutcomeDistribution:
    """Exact per-trajectory probability of every observed record.

    ``probs`` covers the 2^m m-fold outcomes, ``partial`` the (m-1)-fold
    records (one '0' window, no ambiguous window) and ``other`` the rest.
    With ``detection=False`` photons are detected perfectly and noiselessly.
    """
    settings = _settings_list(m, settings)
    if m > MAX_M:
        raise InvalidArgumentError(f"exact enumeration supports m <= {MAX_M}")
    coherence = complex(math.cos(phi), math.sin(phi)) * math.exp(-0.5 * total_sigma(m, phase) ** 2)
    if detection:
        eta, p_dark, p_ap = params.efficiency, params.p_dark, params.p_afterpulse
    else:
        eta, p_dark, p_ap = 1.0, 0.0, 0.0

    # many event paths end in the same trajectory state
    state_weight: dict[tuple, float] = {}
    state_of: dict[tuple, TwoBranchState] = {}
    for path in enumerate_events(m, params):
        key = (path.state.branch_a.emission, path.state.branch_b.emission)
        state_weight[key] = state_weight.get(key, 0.0) + path.weight
        state_of[key] = path.state

    obs_prob: dict[tuple[int, ...], float] = {}
    for key in sorted(state_weight):
        w = state_weight[key]
        for cfg, pc in _config_probabilities(state_of[key], settings, coherence).items():
            for obs, po in _detection_distribution(cfg, eta, p_dark, p_ap).items():
                obs_prob[obs] = obs_prob.get(obs, 0.0) + w * pc * po

    uniform = len(set(settings)) == 1
    probs = {k: 0.0 for k in all_outcomes(m, settings[0])} if uniform else {}
    partial: dict[str, float] = {}
    other = 0.0
    for obs in sorted(obs_prob):
        p = obs_prob[obs]
        if 3 in obs or obs.count(0) > 1 or (m == 1 and 0 in obs):
            other += p
            continue
        label = "".join("0" if o == 0 else s.symbols[o - 1] for o, s in zip(obs, settings))
        if 0 in obs:
            partial[label] = partial.get(label, 0.0) + p
        else:
            probs[label] = probs.get(label, 0.0) + p
    return OutcomeDistribution(m, probs, partial, other)


def exact_fidelity(
    m: int,
    params: ErrorModelParams,
    phase: PhaseNoiseParams,
    beta_res: float = 1.0,
    detection: bool = False,
) -> tuple[float, float, float]:
    """(F_e, F_s, F) of the post-selected m-fold coincidences.

    ``beta_res`` is a per-photon residual visibility factor applied to F_s.
    Detector noise is left out by default because the fitted residual
    factor already absorbs it; pass ``detection=True`` to include it.
    """
    if not 0.0 < beta_res <= 1.0:
        raise InvalidArgumentError("beta_res must lie in (0, 1]")
    eig = exact_distribution(m, params, phase, make_setting(m, m), detection=detection).normalized()
    f_e = 1.0 if m == 1 else eig["E" * m] + eig["L" * m]
    f_s = 0.0
    for i in range(m):
        dist = exact_distribution(m, params, phase, make_setting(i, m), detection=detection).normalized()
        corr = sum(p * (-1 if k.count("-") % 2 else 1) for k, p in dist.items())
        f_s += (-1) ** i * corr
    f_s = f_s / m * beta_res**m
    return f_e, f_s, 0.5 * (f_e + f_s)
