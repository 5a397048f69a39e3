"""Two-branch trajectory model of the retrieve/patch GHZ generation sequence.

The superatom starts in ``(|0>_1|1>_2 + |1>_1|0>_2)/sqrt(2)``.  Each branch is
followed classically: which Rydberg level is occupied, and how many photons
were released into each temporal mode.  Modes ``2j-1`` and ``2j`` form the
early and late halves of time-bin qubit ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .events import IDEAL_EVENTS, Failure, IterationEvents
from .exceptions import InvalidArgumentError, InvalidStateError

AMP = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class Branch:
    atom_occ: tuple[int, int]
    emission: tuple[int, ...] = ()
    amplitude_mag: float = AMP
    dead: bool = False

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.atom_occ):
            raise InvalidArgumentError(f"occupation bits must be 0/1, got {self.atom_occ}")
        if not 0.0 <= self.amplitude_mag <= 1.0:
            raise InvalidArgumentError("amplitude_mag must lie in [0, 1]")
        if any(n not in (0, 1, 2) for n in self.emission):
            raise InvalidArgumentError("photon count per mode must be 0, 1 or 2")

    @property
    def pattern(self) -> str:
        return to_time_bin(self.emission)


@dataclass(frozen=True)
class TwoBranchState:
    branch_a: Branch
    branch_b: Branch
    m_target: int
    relative_phase: float = 0.0
    blocked: bool = False  # accumulated component present: patching has no effect
    complete: bool = False

    @property
    def modes_emitted(self) -> int:
        return len(self.branch_a.emission)

    @property
    def branches(self) -> tuple[Branch, Branch]:
        return self.branch_a, self.branch_b

    def with_phase(self, phase: float) -> "TwoBranchState":
        return replace(self, relative_phase=phase)


def prepare_initial(m_target: int) -> TwoBranchState:
    if int(m_target) != m_target or m_target < 1:
        raise InvalidArgumentError(f"m_target must be a positive integer, got {m_target!r}")
    return TwoBranchState(Branch((1, 0)), Branch((0, 1)), int(m_target))


def _iterate_branch(branch: Branch, failure: Failure, blocked: bool) -> Branch:
    # Rv1 -> P1 -> Rv2 -> P2 on one branch.  Patching only excites when the
    # superatom is empty (blockade) and no accumulated component is present.
    if branch.dead:
        return replace(branch, emission=branch.emission + (0, 0))
    r1, r2 = branch.atom_occ
    early = late = 0

    if r1:
        early += 1
        r1 = 0
    if failure is Failure.RV1 and r2:
        early += 1
        r2 = 0

    if not blocked and failure is not Failure.P1 and not (r1 or r2):
        r1 = 1

    if r2:
        late += 1
        r2 = 0
    if failure is Failure.RV2 and r1:
        late += 1
        r1 = 0

    if not blocked and failure is not Failure.P2 and not (r1 or r2):
        r2 = 1

    return replace(
        branch,
        atom_occ=(r1, r2),
        emission=branch.emission + (early, late),
        dead=not (r1 or r2),
    )


def run_iteration(state: TwoBranchState, events: IterationEvents = IDEAL_EVENTS) -> TwoBranchState:
    """Apply one retrieve/patch iteration (two temporal modes) to both branches.

    The same event is applied to each branch according to that branch's own
    occupation.
    """
    if state.complete:
        raise InvalidStateError("state is already complete")
    if state.modes_emitted >= 2 * (state.m_target - 1):
        raise InvalidStateError(
            f"all {state.m_target - 1} iterations already applied; call finalize()"
        )
    failure = Failure(events.failure)
    return replace(
        state,
        branch_a=_iterate_branch(state.branch_a, failure, state.blocked),
        branch_b=_iterate_branch(state.branch_b, failure, state.blocked),
    )


def _retrieve_all(branch: Branch) -> Branch:
    r1, r2 = branch.atom_occ
    return replace(branch, atom_occ=(0, 0), emission=branch.emission + (r1, r2))


def finalize(state: TwoBranchState) -> TwoBranchState:
    """Retrieve both atomic qubits in order, emitting the last mode pair."""
    if state.complete:
        raise InvalidStateError("state is already complete")
    expected = 2 * (state.m_target - 1)
    if state.modes_emitted != expected:
        raise InvalidStateError(
            f"finalize needs {expected} emitted modes, found {state.modes_emitted}"
        )
    return replace(
        state,
        branch_a=_retrieve_all(state.branch_a),
        branch_b=_retrieve_all(state.branch_b),
        complete=True,
    )


def to_time_bin(emission: Sequence[int]) -> str:
    """Map mode pairs to time-bin symbols: (1,0)->E, (0,1)->L, else X."""
    if len(emission) % 2:
        raise InvalidArgumentError("emission list must have even length")
    out = []
    for k in range(0, len(emission), 2):
        pair = (emission[k], emission[k + 1])
        out.append("E" if pair == (1, 0) else "L" if pair == (0, 1) else "X")
    return "".join(out)


def ideal_state(m: int) -> TwoBranchState:
    if int(m) != m or m < 1:
        raise InvalidArgumentError(f"m must be a positive integer, got {m!r}")
    m = int(m)
    a = Branch((0, 0), (1, 0) * m)
    b = Branch((0, 0), (0, 1) * m)
    return TwoBranchState(a, b, m, complete=True)


def evolve(m: int, events: Iterable[IterationEvents], phase: float = 0.0) -> TwoBranchState:
    """Run the whole sequence for ``m`` qubits given ``m - 1`` iteration events.

    Accumulated components triggered in an iteration block every later
    patching operation.
    """
    from .channels import apply_accumulation

    events = list(events)
    if len(events) != m - 1:
        raise InvalidArgumentError(f"need {m - 1} iteration events, got {len(events)}")
    state = prepare_initial(m)
    for ev in events:
        state = run_iteration(state, ev)
        state = apply_accumulation(state, ev)
    return finalize(state).with_phase(phase)
