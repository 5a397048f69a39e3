"""Property-based checks of model invariants."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superatom_ghz.channels import ErrorModelParams
from superatom_ghz.config import SimConfig, emit_config, parse_config
from superatom_ghz.engine import Campaign, run_setting
from superatom_ghz.estimation import analyze_tables, fit_scaling
from superatom_ghz.events import IterationEvents
from superatom_ghz.measurement import CoincidenceTable, MeasurementSetting, make_setting, outcome_distribution
from superatom_ghz.oracle import enumerate_events, exact_distribution, exact_fidelity
from superatom_ghz.phase import PhaseNoiseParams
from superatom_ghz.protocol import evolve, ideal_state

FAST = settings(max_examples=40, deadline=None)

prob = st.floats(0.0, 0.2)
m_small = st.integers(1, 4)
angles = st.floats(0.0, math.pi, exclude_max=True)
phases = st.floats(-2 * math.pi, 2 * math.pi)


@st.composite
def event_sequences(draw, max_m=6):
    m = draw(st.integers(1, max_m))
    codes = draw(st.lists(st.integers(0, 9), min_size=m - 1, max_size=m - 1))
    return m, [IterationEvents.from_code(c) for c in codes]


@st.composite
def error_params(draw):
    return ErrorModelParams(
        p_patch_fail=draw(st.floats(0, 0.1)), p_unexp_rv1=draw(prob), p_unexp_rv2=draw(prob),
        p_accum=draw(prob), eta_f=draw(st.floats(0.05, 1)), eta_t=draw(st.floats(0.05, 1)),
        eta_d=draw(st.floats(0.05, 1)), p_dark=draw(st.floats(0, 0.05)), p_afterpulse=draw(st.floats(0, 0.05)),
    )


@FAST
@given(event_sequences(), angles, phases)
def test_distribution_never_exceeds_one(seq, theta, phi):
    m, events = seq
    state = evolve(m, events, phi)
    d = outcome_distribution(state, MeasurementSetting("superposition", theta))
    assert all(p >= -1e-15 for p in d.probs.values())
    assert d.total <= 1.0 + 1e-12
    assert d.total + d.other == pytest.approx(1.0, abs=1e-12)


@FAST
@given(event_sequences(), phases, phases)
def test_eigen_basis_blind_to_phase(seq, phi1, phi2):
    m, events = seq
    s = make_setting(m, m)
    a = outcome_distribution(evolve(m, events, phi1), s)
    b = outcome_distribution(evolve(m, events, phi2), s)
    assert a.probs == pytest.approx(b.probs, abs=1e-12)


@FAST
@given(st.integers(1, 7), angles, phases)
def test_ideal_parity_is_cosine(m, theta, phi):
    d = outcome_distribution(ideal_state(m).with_phase(phi), MeasurementSetting("superposition", theta))
    corr = sum(p * (-1) ** k.count("-") for k, p in d.probs.items())
    assert corr == pytest.approx(math.cos(phi - m * theta), abs=1e-12)


@FAST
@given(angles, phases)
def test_single_qubit_unitarity(theta, phi):
    d = outcome_distribution(ideal_state(1).with_phase(phi), MeasurementSetting("superposition", theta))
    assert d.probs["+"] + d.probs["-"] == pytest.approx(1.0)
    assert d.probs["+"] == pytest.approx(math.cos((phi - theta) / 2) ** 2)


@FAST
@given(m_small, error_params())
def test_event_weights_partition_unity(m, params):
    total = sum(p.weight for p in enumerate_events(m, params, keep_zero=True))
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), error_params(), st.integers(0, 3))
def test_oracle_probability_conservation(m, params, i):
    s = make_setting(min(i, m), m)
    d = exact_distribution(m, params, PhaseNoiseParams(), s)
    assert d.total + sum(d.partial.values()) + d.other == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 3), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_higher_efficiency_more_coincidences(m, e1, e2):
    lo, hi = sorted((e1, e2))
    base = ErrorModelParams(p_dark=0.0, p_afterpulse=0.0, eta_t=1.0, eta_d=1.0)
    s = make_setting(m, m)
    d_lo = exact_distribution(m, base.replace(eta_f=lo), PhaseNoiseParams(), s)
    d_hi = exact_distribution(m, base.replace(eta_f=hi), PhaseNoiseParams(), s)
    assert d_lo.total <= d_hi.total + 1e-15


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 3), st.floats(0.05, 1.0), st.integers(0, 3))
def test_loss_is_erased_by_postselection(m, eta, i):
    # with no dark counts, afterpulses or double-photon windows, pure loss only
    # rescales coincidences
    base = ErrorModelParams(p_dark=0.0, p_afterpulse=0.0, p_unexp_rv1=0.0)
    s = make_setting(min(i, m), m)
    lossy = exact_distribution(m, base.replace(eta_f=eta, eta_t=1, eta_d=1), PhaseNoiseParams(), s).normalized()
    clean = exact_distribution(m, base, PhaseNoiseParams(), s, detection=False).normalized()
    assert lossy == pytest.approx(clean, abs=1e-12)


@FAST
@given(st.integers(1, 3), st.floats(0.0, 0.2), st.floats(0.0, 0.2))
def test_fs_bounded_by_fe(m, p_fail, p_rv):
    params = ErrorModelParams.ideal(p_patch_fail=p_fail, p_unexp_rv1=p_rv, p_unexp_rv2=p_rv / 2)
    f_e, f_s, _ = exact_fidelity(m, params, PhaseNoiseParams())
    assert f_s <= f_e + 1e-12


count_dicts = st.dictionaries(st.sampled_from(["++", "+-", "-+", "--"]), st.integers(0, 50))


@FAST
@given(count_dicts, count_dicts, count_dicts)
def test_merge_associative(a, b, c):
    s = make_setting(0, 2)
    ta, tb, tc = (CoincidenceTable(2, s, x) for x in (a, b, c))
    assert ta.merge(tb).merge(tc).counts == ta.merge(tb.merge(tc)).counts
    assert ta.merge(tb).counts == tb.merge(ta).counts


@FAST
@given(st.lists(st.integers(1, 500), min_size=12, max_size=12), st.integers(2, 50))
def test_estimator_scale_invariance(counts, k):
    eig = CoincidenceTable(2, make_setting(2, 2), dict(zip(["EE", "EL", "LE", "LL"], counts[:4])))
    m0 = CoincidenceTable(2, make_setting(0, 2), dict(zip(["++", "+-", "-+", "--"], counts[4:8])))
    m1 = CoincidenceTable(2, make_setting(1, 2), dict(zip(["++", "+-", "-+", "--"], counts[8:])))
    tabs = [eig, m0, m1]
    scaled = [CoincidenceTable(2, t.setting, {o: k * v for o, v in t.counts.items()}) for t in tabs]
    assert analyze_tables(scaled).F.value == pytest.approx(analyze_tables(tabs).F.value, abs=1e-12)
    r = analyze_tables(tabs)
    assert r.F.value == pytest.approx((r.F_e.value + r.F_s.value) / 2)


@FAST
@given(st.floats(0.85, 1.0), st.floats(0.85, 1.0), st.floats(0.0, 20.0))
def test_fit_recovers_parameters(alpha, beta_res, sigma_deg):
    ms = range(1, 7)
    bp = {m: math.exp(-m * math.radians(sigma_deg) ** 2 / 2) for m in ms}
    fe = {m: alpha ** (m - 1) for m in ms}
    fs = {m: fe[m] * bp[m] * beta_res**m for m in ms}
    fit = fit_scaling(fe, fs, bp)
    assert fit.alpha == pytest.approx(alpha, rel=1e-9)
    assert fit.beta_res == pytest.approx(beta_res, rel=1e-9)


@FAST
@given(st.integers(1, 10), st.integers(1, 10**9), st.integers(0, 2**64 - 1), st.floats(0.0, 30.0),
       st.floats(-180.0, 180.0), st.sampled_from(["heralded", "physical"]))
def test_config_roundtrip(m, n, seed, sigma, phase_deg, mode):
    cfg = SimConfig(m=m, trajectories=n, master_seed=seed, phase=PhaseNoiseParams(sigma, 7.4),
                    phase_deg=phase_deg, mode=mode, params=ErrorModelParams(p_dark=sigma / 1000))
    assert parse_config(emit_config(cfg)) == cfg


@settings(max_examples=6, deadline=None)
@given(st.integers(2, 3), st.integers(0, 2**32))
def test_simulated_fs_not_above_fe(m, seed):
    camp = Campaign(m, ErrorModelParams(), PhaseNoiseParams(), seed, "heralded")
    settings_ = [make_setting(i, m) for i in range(m + 1)]
    r = analyze_tables([run_setting(camp, s, 3 * 10**6) for s in settings_])
    assert r.F_s.value <= r.F_e.value + 3 * math.hypot(r.F_s.error, r.F_e.error)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 4))
def test_no_dark_counts_means_only_real_clicks(seed, m):
    # with no dark counts or afterpulses every click stems from a photon, so a
    # lossless ideal run yields only parity-even outcomes at angle 0
    p = ErrorModelParams.ideal(eta_f=0.5)
    tab = run_setting(Campaign(m, p, PhaseNoiseParams.none(), seed, "physical"), make_setting(0, m), 2000)
    assert all(v == 0 for k, v in tab.counts.items() if k.count("-") % 2)
    assert tab.partial_other + tab.total + sum(tab.partial.values()) <= 2000
