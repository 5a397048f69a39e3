import math

import numpy as np
import pytest

from superatom_ghz.channels import (
    AMBIGUOUS,
    CLICK_0,
    CLICK_1,
    NO_CLICK,
    ErrorModelParams,
    analytic_flip_rates,
    apply_accumulation,
    detect,
    detect_batch,
    sample_event_codes,
    sample_iteration_events,
)
from superatom_ghz.events import Failure, IterationEvents
from superatom_ghz.exceptions import InvalidArgumentError
from superatom_ghz.protocol import prepare_initial


def test_defaults_and_efficiency():
    p = ErrorModelParams()
    assert p.efficiency == pytest.approx(0.272 * 0.508 * 0.68)
    assert round(p.efficiency, 3) == 0.094


@pytest.mark.parametrize("field", ["p_dark", "eta_f", "p_accum"])
def test_params_reject_non_probabilities(field):
    with pytest.raises(InvalidArgumentError):
        ErrorModelParams(**{field: 1.2})
    with pytest.raises(InvalidArgumentError):
        ErrorModelParams(**{field: -0.1})


def test_failure_probabilities_must_fit():
    with pytest.raises(InvalidArgumentError):
        ErrorModelParams(p_patch_fail=0.5, p_unexp_rv1=0.1)


def test_zero_rates_never_fail():
    rng = np.random.default_rng(1)
    p = ErrorModelParams.ideal()
    for _ in range(200):
        assert sample_iteration_events(p, rng) == IterationEvents()


def test_forced_patch_failure():
    rng = np.random.default_rng(2)
    p = ErrorModelParams.ideal(p_patch_fail=0.5)
    seen = {sample_iteration_events(p, rng).failure for _ in range(200)}
    assert seen == {Failure.P1, Failure.P2}


def test_p1_frequency_matches_binomial():
    rng = np.random.default_rng(3)
    n = 1_000_000
    codes = sample_event_codes(ErrorModelParams(), rng, n, 1)[:, 0]
    freq = np.mean(codes // 2 == Failure.P1)
    assert abs(freq - 0.02) < 3 * math.sqrt(0.02 * 0.98 / n)
    acc = np.mean(codes % 2 == 1)
    assert abs(acc - 0.02) < 3 * math.sqrt(0.02 * 0.98 / n)


def test_scalar_and_batch_samplers_agree():
    p = ErrorModelParams()
    a = [sample_iteration_events(p, np.random.default_rng(s)).code for s in range(50)]
    b = [int(sample_event_codes(p, np.random.default_rng(s), 1, 1)[0, 0]) for s in range(50)]
    assert a == b


def test_analytic_flip_rates():
    assert analytic_flip_rates(ErrorModelParams()) == pytest.approx((0.01, 0.08, 0.045))
    assert analytic_flip_rates(ErrorModelParams.ideal()) == (0.0, 0.0, 0.0)
    p = ErrorModelParams(p_unexp_rv1=0.05)
    assert analytic_flip_rates(p) == pytest.approx((0.01, 0.12, 0.065))


def test_flip_rate_scaling_law():
    avg = analytic_flip_rates(ErrorModelParams())[2]
    assert (1 - avg) ** 5 == pytest.approx(0.955**5)


def test_apply_accumulation():
    st = prepare_initial(3)
    assert apply_accumulation(st, IterationEvents()) is st
    assert apply_accumulation(st, IterationEvents(accum_triggered=True)).blocked


def test_perfect_detection():
    rng = np.random.default_rng(4)
    rec = detect([(1, 0), (0, 1), (1, 0)], ErrorModelParams.ideal(), rng)
    assert rec.detectors == (0, 1, 0)
    assert rec.complete and all(rec.real)


def test_single_photon_detection_probability():
    rng = np.random.default_rng(5)
    p = ErrorModelParams(p_dark=0.0, p_afterpulse=0.0)
    n = 400_000
    obs, _ = detect_batch(np.tile([[[1, 0]]], (n, 1, 1)), p, rng)
    freq = np.mean(obs[:, 0] == CLICK_0)
    assert abs(freq - p.efficiency) < 4 * math.sqrt(p.efficiency / n)


def test_dark_counts_only():
    rng = np.random.default_rng(6)
    p = ErrorModelParams.ideal(p_dark=0.01)
    n = 200_000
    obs, real = detect_batch(np.zeros((n, 2, 2), dtype=int), p, rng)
    click0 = np.mean((obs[:, 0] == CLICK_0) | (obs[:, 0] == AMBIGUOUS))
    assert abs(click0 - 0.01) < 4 * math.sqrt(0.01 / n)
    assert not real.any()


def test_afterpulse_follows_real_click():
    rng = np.random.default_rng(7)
    p = ErrorModelParams.ideal(p_afterpulse=0.5)
    n = 20_000
    photons = np.zeros((n, 2, 2), dtype=int)
    photons[:, 0, 1] = 1
    obs, real = detect_batch(photons, p, rng)
    assert np.all(obs[:, 0] == CLICK_1)
    frac = np.mean(obs[:, 1] == CLICK_1)
    assert abs(frac - 0.5) < 0.02
    assert np.all(obs[:, 1] != CLICK_0)
    assert not real[:, 1].any()


def test_no_noise_means_every_count_is_real():
    rng = np.random.default_rng(8)
    p = ErrorModelParams(p_dark=0.0, p_afterpulse=0.0)
    photons = rng.integers(0, 2, size=(5000, 4, 2))
    obs, real = detect_batch(photons, p, rng)
    single = (obs == CLICK_0) | (obs == CLICK_1)
    assert np.all(real[single])
    assert np.all(photons.sum(axis=2)[obs != NO_CLICK] > 0)


def test_window_count_decay_with_accumulation():
    # fraction of trajectories not yet blocked after k iterations
    rng = np.random.default_rng(9)
    p = ErrorModelParams()
    codes = sample_event_codes(p, rng, 200_000, 5)
    alive = np.cumprod(codes % 2 == 0, axis=1).mean(axis=0)
    expected = 0.98 ** np.arange(1, 6)
    assert np.allclose(alive, expected, atol=0.003)
