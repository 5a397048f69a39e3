"""Iteration error sampling and the photon detection chain."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from .events import Failure, IterationEvents
from .exceptions import InvalidArgumentError
from .protocol import TwoBranchState

# Observed-window codes used throughout the detection code.
NO_CLICK, CLICK_0, CLICK_1, AMBIGUOUS = 0, 1, 2, 3


@dataclass(frozen=True)
class ErrorModelParams:
    p_patch_fail: float = 0.02
    p_unexp_rv1: float = 0.03  # Rv2 also retrieves R1
    p_unexp_rv2: float = 0.01  # Rv1 also retrieves R2
    p_accum: float = 0.02
    eta_f: float = 0.272
    eta_t: float = 0.508
    eta_d: float = 0.68
    p_dark: float = 0.001
    p_afterpulse: float = 0.001

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 <= v <= 1.0:
                raise InvalidArgumentError(f"{f.name}={v} is not a probability")
        if sum(self.failure_probs) > 1.0:
            raise InvalidArgumentError("failure probabilities sum above 1")

    @property
    def efficiency(self) -> float:
        """Probability that one emitted photon produces a detector click."""
        return self.eta_f * self.eta_t * self.eta_d

    @property
    def failure_probs(self) -> tuple[float, float, float, float]:
        """Probabilities of Rv1, P1, Rv2, P2 failures, in Failure order."""
        return (self.p_unexp_rv2, self.p_patch_fail, self.p_unexp_rv1, self.p_patch_fail)

    @classmethod
    def ideal(cls, **overrides) -> "ErrorModelParams":
        """No operation errors, lossless and noiseless detection."""
        base = dict(
            p_patch_fail=0.0, p_unexp_rv1=0.0, p_unexp_rv2=0.0, p_accum=0.0,
            eta_f=1.0, eta_t=1.0, eta_d=1.0, p_dark=0.0, p_afterpulse=0.0,
        )
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "ErrorModelParams":
        return replace(self, **changes)


def _failure_edges(params: ErrorModelParams) -> np.ndarray:
    return np.cumsum(params.failure_probs)


def sample_iteration_events(params: ErrorModelParams, rng: np.random.Generator) -> IterationEvents:
    u_fail, u_acc = rng.random(2)
    idx = int(np.searchsorted(_failure_edges(params), u_fail, side="right"))
    failure = Failure(idx + 1) if idx < 4 else Failure.NONE
    return IterationEvents(failure, bool(u_acc < params.p_accum))


def sample_event_codes(params: ErrorModelParams, rng: np.random.Generator, n: int, iterations: int) -> np.ndarray:
    """Draw ``n`` event sequences as an ``(n, iterations)`` array of codes 0..9.

    Uses the same inverse-CDF mapping as :func:`sample_iteration_events`.
    """
    u = rng.random((n, iterations, 2))
    idx = np.searchsorted(_failure_edges(params), u[..., 0], side="right")
    failure = np.where(idx < 4, idx + 1, 0)
    accum = u[..., 1] < params.p_accum
    return (2 * failure + accum).astype(np.int8)


def analytic_flip_rates(params: ErrorModelParams) -> tuple[float, float, float]:
    """Per-iteration flip probabilities of the L-side and E-side components.

    The Rv2 failure on the E side releases an extra photon, so it is counted
    twice.
    """
    p1 = params.p_unexp_rv2
    p2 = params.p_patch_fail + 2.0 * params.p_unexp_rv1
    return p1, p2, 0.5 * (p1 + p2)


def apply_accumulation(state: TwoBranchState, events: IterationEvents) -> TwoBranchState:
    """Block all later patching once an accumulated component was created.

    Excitations already present are still retrieved, so the trajectory loses
    the photons of the following iterations but not the ones in flight.
    """
    if events.accum_triggered and not state.blocked:
        return replace(state, blocked=True)
    return state


@dataclass(frozen=True)
class DetectionRecord:
    detectors: tuple[int | None, ...]  # 0 / 1 for SPD1 / SPD2, None for no or ambiguous click
    real: tuple[bool, ...]
    ambiguous: tuple[bool, ...]

    @property
    def complete(self) -> bool:
        return all(d is not None for d in self.detectors)


def detect_batch(photons: np.ndarray, params: ErrorModelParams, rng: np.random.Generator):
    """Detection chain for a batch of windows.

    ``photons`` holds integer photon numbers arriving at each SPD,
    shape ``(n, m, 2)``.  Returns ``(observed, real)``: the observed code per
    window (NO_CLICK, CLICK_0, CLICK_1, AMBIGUOUS) and whether a single click
    came from a real photon.
    """
    photons = np.asarray(photons)
    n, m, _ = photons.shape
    surv = rng.binomial(photons, params.efficiency)
    real = surv > 0
    click = real | (rng.random((n, m, 2)) < params.p_dark)
    if m > 1 and params.p_afterpulse > 0:
        fake = real[:, :-1, :] & (rng.random((n, m - 1, 2)) < params.p_afterpulse)
        click[:, 1:, :] |= fake
    observed = click[..., 0].astype(np.int8) + 2 * click[..., 1].astype(np.int8)
    single_real = np.where(observed == CLICK_0, real[..., 0], real[..., 1])
    return observed, single_real & ((observed == CLICK_0) | (observed == CLICK_1))


def detect(photons: Sequence[Sequence[int]], params: ErrorModelParams, rng: np.random.Generator) -> DetectionRecord:
    """Detect one trajectory; ``photons[j]`` gives the photon numbers at (SPD1, SPD2) in window j."""
    arr = np.asarray(photons, dtype=np.int64).reshape(1, -1, 2)
    observed, real = detect_batch(arr, params, rng)
    dets = tuple(None if o in (NO_CLICK, AMBIGUOUS) else int(o) - 1 for o in observed[0])
    return DetectionRecord(dets, tuple(bool(r) for r in real[0]), tuple(bool(o == AMBIGUOUS) for o in observed[0]))
