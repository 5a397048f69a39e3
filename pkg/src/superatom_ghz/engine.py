"""Monte Carlo campaigns producing coincidence tables.

Two samplers share the same trajectory model:

``physical``
    every cycle is simulated: event sequence, phase offset, output photon
    configuration (sampled window by window with the exact two-branch
    interference), loss, dark counts and afterpulses.

``heralded``
    only the cycles that end in an m-fold or an (m-1)-fold record are
    generated.  For each distinct event sequence the record probabilities
    ``p(o | phi) = D(o) + Re(exp(i phi) K(o))`` are computed exactly with a
    forward pass over the windows, and records are drawn by rejection
    sampling.  The number of cycles represented is tracked so rates stay
    meaningful.  This is what makes 6-fold statistics affordable at a 1e-7
    coincidence probability.

Both samplers split the work into fixed-size blocks with their own seeded
streams and merge the blocks in order, so results do not depend on the
thread count.
"""

from __future__ import annotations

import itertools
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import ErrorModelParams, detect_batch, sample_event_codes
from .events import IterationEvents
from .exceptions import InvalidArgumentError
from .measurement import CONFIGS, CoincidenceTable, MeasurementSetting, amplitude_row, window_contents
from .phase import PhaseNoiseParams, sample_phase_offsets
from .protocol import TwoBranchState, evolve

PHYSICAL_BLOCK = 1 << 16
HERALDED_BLOCK = 1 << 18
_CONFIG_PHOTONS = np.array(CONFIGS, dtype=np.int64)


def sequence_keys(codes: np.ndarray) -> np.ndarray:
    """Encode each row of event codes as one integer (base 10)."""
    n, it = codes.shape
    weights = 10 ** np.arange(it, dtype=np.int64)
    return codes.astype(np.int64) @ weights if it else np.zeros(n, dtype=np.int64)


def decode_key(key: int, iterations: int) -> list[IterationEvents]:
    return [IterationEvents.from_code((int(key) // 10**k) % 10) for k in range(iterations)]


def _groups(keys: np.ndarray):
    """Yield ``(key, indices)`` for each distinct key, in increasing key order."""
    order = np.argsort(keys, kind="stable")
    uniq, start = np.unique(keys[order], return_index=True)
    bounds = list(start[1:]) + [len(keys)]
    for key, a, b in zip(uniq.tolist(), start.tolist(), bounds):
        yield key, order[a:b]


def _setting_stream(setting: MeasurementSetting, m: int) -> int:
    if setting.is_eigen:
        return m
    if setting.index is not None:
        return setting.index
    return 1000 + int(round(setting.angle * 1e9))


def _block_rng(seed: int, stream: Sequence[int], block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream) + (block,)))


# --------------------------------------------------------------------------
# exact record probabilities for one trajectory state
# --------------------------------------------------------------------------

def _noise_matrix(params: ErrorModelParams) -> np.ndarray:
    """N[r_prev, r, obs]: observed code given real clicks now and in the previous window."""
    pd, pa = params.p_dark, params.p_afterpulse
    out = np.zeros((4, 4, 4))
    for rp, r, o in itertools.product(range(4), repeat=3):
        p = 1.0
        for s in (0, 1):
            real, prev, click = (r >> s) & 1, (rp >> s) & 1, (o >> s) & 1
            q = 1.0 if real else 1.0 - (1.0 - pd) * (1.0 - (pa if prev else 0.0))
            p *= q if click else 1.0 - q
        out[rp, r, o] = p
    return out


def _thinning_matrix(params: ErrorModelParams) -> np.ndarray:
    """Th[config, r]: real-click pattern given the photons of a configuration."""
    eta = params.efficiency
    out = np.zeros((len(CONFIGS), 4))
    for x, (n0, n1) in enumerate(CONFIGS):
        s0 = 1.0 - (1.0 - eta) ** n0
        s1 = 1.0 - (1.0 - eta) ** n1
        for r in range(4):
            out[x, r] = (s0 if r & 1 else 1.0 - s0) * (s1 if r & 2 else 1.0 - s1)
    return out


def heralded_records(m: int) -> np.ndarray:
    """All m-fold records followed by the (m-1)-fold records, as code arrays."""
    full = np.array(list(itertools.product((1, 2), repeat=m)), dtype=np.int8).reshape(-1, m)
    parts = [full]
    if m > 1:
        sub = np.array(list(itertools.product((1, 2), repeat=m - 1)), dtype=np.int8)
        for j in range(m):
            parts.append(np.insert(sub, j, 0, axis=1))
    return np.concatenate(parts)


def record_terms(state: TwoBranchState, settings: Sequence[MeasurementSetting], params: ErrorModelParams,
                 records: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(D, K)`` for each record so that ``p(o | phi) = D + Re(exp(i phi) K)``."""
    noise = _noise_matrix(params)
    thin = _thinning_matrix(params)
    n_o = records.shape[0]
    a_br, b_br = state.branch_a, state.branch_b
    a_rows = [amplitude_row(c, s) for c, s in zip(window_contents(a_br.emission), settings)]
    b_rows = [amplitude_row(c, s) for c, s in zip(window_contents(b_br.emission), settings)]
    fwd = np.zeros((3, n_o, 4), dtype=complex)
    fwd[:, :, 0] = np.array([a_br.amplitude_mag**2, b_br.amplitude_mag**2,
                             a_br.amplitude_mag * b_br.amplitude_mag])[:, None]
    for k, (ra, rb) in enumerate(zip(a_rows, b_rows)):
        factors = np.stack([np.abs(ra) ** 2, np.abs(rb) ** 2, np.conj(ra) * rb])  # (3, configs)
        w = factors @ thin  # (3, 4)
        n_sel = noise[:, :, records[:, k]].transpose(2, 0, 1)  # (n_o, r_prev, r)
        fwd = np.einsum("tor,ors->tos", fwd, n_sel) * w[:, None, :]
    p = fwd.sum(axis=2)
    d = (p[0] + p[1]).real
    k = 2.0 * p[2] if a_br.emission != b_br.emission else np.zeros(n_o, dtype=complex)
    return np.maximum(d, 0.0), k


# --------------------------------------------------------------------------
# campaign
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Campaign:
    m: int
    params: ErrorModelParams
    phase: PhaseNoiseParams
    seed: int
    mode: str = "heralded"
    phi: float = 0.0  # mean relative phase (radians) on top of the noise
    threads: int = 1
    stream: tuple[int, ...] = ()

    def __post_init__(self):
        if self.mode not in ("heralded", "physical"):
            raise InvalidArgumentError(f"unknown mode {self.mode!r}")
        if self.m < 1:
            raise InvalidArgumentError("m must be >= 1")
        if self.threads < 1:
            raise InvalidArgumentError("threads must be >= 1")


class _StateCache:
    def __init__(self, m: int):
        self.m = m
        self._states: dict[int, TwoBranchState] = {}
        self._terms: dict[tuple, tuple] = {}
        self._lock = threading.Lock()

    def state(self, key: int) -> TwoBranchState:
        st = self._states.get(key)
        if st is None:
            st = evolve(self.m, decode_key(key, self.m - 1))
            with self._lock:
                self._states[key] = st
        return st

    def terms(self, key: int, settings, params, records):
        st = self.state(key)
        tkey = (st.branch_a.emission, st.branch_b.emission)
        val = self._terms.get(tkey)
        if val is None:
            d, k = record_terms(st, settings, params, records)
            ds = float(d.sum())
            cdf = np.cumsum(d) / ds if ds > 0 else None
            ratio = np.divide(k, d, out=np.zeros_like(k), where=d > 0)
            val = (ds, cdf, ratio)
            with self._lock:
                self._terms[tkey] = val
        return val


def heralded_bound(m: int, params: ErrorModelParams) -> float:
    """Upper bound on the probability that at least m-1 windows click."""
    g = 1.0 - ((1.0 - params.efficiency) * (1.0 - params.p_dark) * (1.0 - params.p_afterpulse)) ** 2
    bound = g**m + (m * g ** (m - 1) * (1.0 - g) if m > 1 else 0.0)
    return min(bound, 1.0)


def _encode(obs: np.ndarray) -> np.ndarray:
    m = obs.shape[1]
    return obs.astype(np.int64) @ (4 ** np.arange(m, dtype=np.int64))


def _label(code: int, m: int, setting: MeasurementSetting) -> str:
    out = []
    for _ in range(m):
        o = code % 4
        code //= 4
        out.append("0" if o == 0 else "X" if o == 3 else setting.symbols[o - 1])
    return "".join(out)


def _merge_codes(acc: dict, codes: np.ndarray):
    vals, counts = np.unique(codes, return_counts=True)
    for v, c in zip(vals.tolist(), counts.tolist()):
        acc[v] = acc.get(v, 0) + c


def _physical_block(c: Campaign, setting, settings, cache: _StateCache, rng, n: int) -> dict:
    m = c.m
    codes = sample_event_codes(c.params, rng, n, m - 1)
    keys = sequence_keys(codes)
    phis = c.phi + sample_phase_offsets(m, c.phase, rng, n)
    u = rng.random((n, m))
    cfg = np.zeros((n, m), dtype=np.int64)
    for key, idx in _groups(keys):
        st = cache.state(key)
        a_rows = np.array([amplitude_row(w, s) for w, s in zip(window_contents(st.branch_a.emission), settings)])
        b_rows = np.array([amplitude_row(w, s) for w, s in zip(window_contents(st.branch_b.emission), settings)])
        coherent = st.branch_a.emission != st.branch_b.emission
        diff = [wa != wb for wa, wb in zip(window_contents(st.branch_a.emission),
                                             window_contents(st.branch_b.emission))]
        last_diff = max((j for j, d in enumerate(diff) if d), default=-1)
        pa = np.full(len(idx), st.branch_a.amplitude_mag**2)
        pb = np.full(len(idx), st.branch_b.amplitude_mag**2)
        cross = np.full(len(idx), st.branch_a.amplitude_mag * st.branch_b.amplitude_mag, dtype=complex)
        rot = np.exp(1j * phis[idx])
        for j in range(m):
            ra, rb = a_rows[j], b_rows[j]
            w = pa[:, None] * np.abs(ra) ** 2 + pb[:, None] * np.abs(rb) ** 2
            if coherent and j >= last_diff:
                # the remaining windows carry identical content, so the
                # branches still overlap after this window
                w = w + 2.0 * (rot[:, None] * cross[:, None] * (np.conj(ra) * rb)[None, :]).real
            w = np.maximum(w, 0.0)
            cdf = np.cumsum(w, axis=1)
            pick = (u[idx, j, None] * cdf[:, -1:] >= cdf).sum(axis=1)
            pick = np.minimum(pick, len(CONFIGS) - 1)
            cfg[idx, j] = pick
            pa = pa * np.abs(ra[pick]) ** 2
            pb = pb * np.abs(rb[pick]) ** 2
            cross = cross * np.conj(ra[pick]) * rb[pick]
    photons = _CONFIG_PHOTONS[cfg]
    observed, _ = detect_batch(photons, c.params, rng)
    acc: dict = {}
    _merge_codes(acc, _encode(observed))
    return {"codes": acc, "cycles": n, "proposals": n}


def _heralded_block(c: Campaign, setting, settings, cache: _StateCache, rng, n: int, records, bound) -> dict:
    m = c.m
    codes = sample_event_codes(c.params, rng, n, m - 1)
    keys = sequence_keys(codes)
    phis = c.phi + sample_phase_offsets(m, c.phase, rng, n)
    u_rec = rng.random(n)
    u_acc = rng.random(n)
    chosen = np.full(n, -1, dtype=np.int64)
    for key, idx in _groups(keys):
        ds, cdf, ratio = cache.terms(key, settings, c.params, records)
        if cdf is None:
            continue
        rec = np.minimum(np.searchsorted(cdf, u_rec[idx], side="right"), len(cdf) - 1)
        accept = ds * (1.0 + (np.exp(1j * phis[idx]) * ratio[rec]).real) / (2.0 * bound)
        ok = u_acc[idx] < accept
        chosen[idx[ok]] = rec[ok]
    chosen = chosen[chosen >= 0]
    acc: dict = {}
    if chosen.size:
        _merge_codes(acc, _encode(records[chosen]))
    return {"codes": acc, "proposals": n}


def run_setting(c: Campaign, setting: MeasurementSetting, trajectories: int,
                settings_override: Sequence[MeasurementSetting] | None = None) -> CoincidenceTable:
    """Simulate ``trajectories`` cycles for one measurement setting."""
    if trajectories <= 0:
        raise InvalidArgumentError("trajectories must be > 0")
    m = c.m
    settings = list(settings_override) if settings_override is not None else [setting] * m
    cache = _StateCache(m)
    stream = (_setting_stream(setting, m),) + tuple(c.stream)

    if c.mode == "physical":
        block = PHYSICAL_BLOCK
        total = int(trajectories)
        sizes = [min(block, total - s) for s in range(0, total, block)]

        def work(b):
            return _physical_block(c, setting, settings, cache, _block_rng(c.seed, stream, b), sizes[b])
    else:
        records = heralded_records(m)
        bound = heralded_bound(m, c.params)
        total = max(int(round(2.0 * bound * trajectories)), 1)
        block = HERALDED_BLOCK
        sizes = [min(block, total - s) for s in range(0, total, block)]

        def work(b):
            return _heralded_block(c, setting, settings, cache, _block_rng(c.seed, stream, b), sizes[b],
                                   records, bound)

    if c.threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=c.threads) as pool:
            results = list(pool.map(work, range(len(sizes))))
    else:
        results = [work(b) for b in range(len(sizes))]

    merged: dict = {}
    for r in results:
        for k, v in r["codes"].items():
            merged[k] = merged.get(k, 0) + v
    counts: dict[str, int] = {}
    partial: dict[str, int] = {}
    other = 0
    for code in sorted(merged):
        label = _label(code, m, setting if settings_override is None else settings[0])
        n = merged[code]
        if "X" in label or label.count("0") > 1 or (m == 1 and "0" in label):
            other += n
        elif "0" in label:
            partial[label] = partial.get(label, 0) + n
        else:
            counts[label] = counts.get(label, 0) + n
    # heralded proposals stand for this many cycles on average
    cycles = int(trajectories)
    meta = {"mode": c.mode, "seed": c.seed, "phi": c.phi}
    if c.mode == "heralded":
        meta["proposals"] = total
    return CoincidenceTable(m, setting, counts, partial, other, cycles, meta)


def run_campaign(c: Campaign, settings: Sequence[MeasurementSetting], trajectories: int) -> list[CoincidenceTable]:
    return [run_setting(c, s, trajectories) for s in settings]


def predicted_rate(m: int, params: ErrorModelParams, cycle_rate: float) -> float:
    """m-fold coincidences per hour if every photon is detected independently."""
    return cycle_rate * 3600.0 * params.efficiency**m


def simulated_rate(table: CoincidenceTable, cycle_rate: float) -> float:
    if table.total_cycles <= 0:
        return 0.0
    return cycle_rate * 3600.0 * table.total / table.total_cycles


def expected_total_coincidences(m: int, params: ErrorModelParams, trajectories: int) -> float:
    return trajectories * params.efficiency**m
