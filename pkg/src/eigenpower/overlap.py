"""Overlaps between pipeline states: exact inner products and Hadamard tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LayoutMismatch, ValidationError
from .linalg import HermitianMatrix
from .pipeline import (
    InitialVector,
    PipelineConfig,
    PipelineState,
    apply_once,
    build_phi_k,
    draw_initial_vector,
    mark_flags,
)
from .statevector import HADAMARD, S_DAGGER, Circuit, inner_product, make_rng, measure_register


@dataclass(frozen=True)
class OverlapEstimate:
    """``value`` estimates ``<a|b>``; ``shots == 0`` marks an exact evaluation."""

    value: complex
    shots: int = 0
    std_error: float = 0.0
    std_error_imag: float = 0.0
    seed: int | None = None

    @property
    def exact(self) -> bool:
        return self.shots == 0

    def to_dict(self) -> dict:
        return {
            "value": [self.value.real, self.value.imag],
            "shots": self.shots,
            "std_error": self.std_error,
            "std_error_imag": self.std_error_imag,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class HadamardEstimate:
    estimate: float
    std_error: float
    shots: int
    basis: str
    seed: int


def derive_seed(seed: int, *tags: int) -> int:
    """Independent 63-bit child seed for a (seed, tags...) batch."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in tags))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _analytic_branches(state: PipelineState) -> dict:
    w = state.rot_width
    branches = {("0" * w, "00"): state.success}
    for i, g in enumerate(state.garbage):
        pattern = "".join("1" if j == i else "0" for j in range(w))
        branches[(pattern, state.garbage_flags)] = g
    return branches


def _check_pair(a: PipelineState, b: PipelineState) -> None:
    if a.backend != b.backend:
        raise LayoutMismatch(f"cannot overlap {a.backend} and {b.backend} states")
    if a.backend == "analytic":
        if a.rot_width != b.rot_width or a.cfg.variant != b.cfg.variant:
            raise LayoutMismatch("analytic states differ in ancilla width or variant")
        if a.eig is not b.eig and not np.array_equal(a.eig.eigenvalues, b.eig.eigenvalues):
            raise LayoutMismatch("analytic states were built from different matrices")
    elif a.layout != b.layout:
        raise LayoutMismatch("circuit states have different register layouts")


def exact_overlap(a: PipelineState, b: PipelineState) -> OverlapEstimate:
    """``<a|b>`` over the full state, garbage branches included."""
    _check_pair(a, b)
    if a.backend == "circuit":
        return OverlapEstimate(inner_product(a.state, b.state))
    ba, bb = _analytic_branches(a), _analytic_branches(b)
    total = 0j
    for key in sorted(ba.keys() & bb.keys()):
        total += np.vdot(ba[key], bb[key])
    return OverlapEstimate(complex(total))


def _std_error(estimate: float, shots: int) -> float:
    return math.sqrt(max(1.0 - estimate * estimate, 0.0) / shots)


def hadamard_circuit(prep_a: Circuit, prep_b: Circuit, basis: str) -> Circuit:
    """``|0><0| (x) U_a + |1><1| (x) U_b`` on ``|+>|0...0>``, then the basis change."""
    if prep_a.layout != prep_b.layout:
        raise LayoutMismatch("state preparations act on different layouts")
    if basis not in ("X", "Y"):
        raise ValidationError(f"basis must be 'X' or 'Y', got {basis!r}")
    layout = prep_a.layout.extend("hadamard", 1)
    anc = layout["hadamard"].offset
    circ = Circuit(layout)
    circ.add(HADAMARD, [anc], label="h")
    circ.extend(prep_a.controlled(anc, 0))
    circ.extend(prep_b.controlled(anc, 1))
    if basis == "Y":
        circ.add(S_DAGGER, [anc], label="sdg")
    circ.add(HADAMARD, [anc], label="h")
    return circ


def hadamard_test(prep_a: Circuit, prep_b: Circuit, shots: int, basis: str = "X", seed: int = 0) -> HadamardEstimate:
    """Sample the ancilla; X estimates ``Re<a|b>``, Y estimates ``Im<a|b>``."""
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    final = hadamard_circuit(prep_a, prep_b, basis).run()
    counts = measure_register(final, "hadamard", shots, seed)
    est = (counts.get(0, 0) - counts.get(1, 0)) / shots
    return HadamardEstimate(est, _std_error(est, shots), shots, basis, seed)


def _sample_component(exact_value: float, shots: int, seed: int) -> tuple[float, float]:
    """Ancilla sampling for a known expectation (analytic backend shot mode)."""
    p0 = min(max((1.0 + exact_value) / 2.0, 0.0), 1.0)
    c0, c1 = make_rng(seed).multinomial(shots, [p0, 1.0 - p0])
    est = (int(c0) - int(c1)) / shots
    return est, _std_error(est, shots)


def overlap(a: PipelineState, b: PipelineState, shots: int = 0, seed: int = 0) -> OverlapEstimate:
    """Exact overlap when ``shots == 0``, otherwise X and Y Hadamard tests."""
    if shots == 0:
        return exact_overlap(a, b)
    if shots < 0:
        raise ValidationError("shots must be >= 0")
    seed_re, seed_im = derive_seed(seed, 0), derive_seed(seed, 1)
    if a.backend == "circuit":
        _check_pair(a, b)
        re = hadamard_test(a.circuit, b.circuit, shots, "X", seed_re)
        im = hadamard_test(a.circuit, b.circuit, shots, "Y", seed_im)
        return OverlapEstimate(complex(re.estimate, im.estimate), shots, re.std_error, im.std_error, seed)
    z = exact_overlap(a, b).value
    re, se_re = _sample_component(z.real, shots, seed_re)
    im, se_im = _sample_component(z.imag, shots, seed_im)
    return OverlapEstimate(complex(re, im), shots, se_re, se_im, seed)


@dataclass(frozen=True)
class PairStates:
    """Flagged states whose overlaps give numerator and denominator of the ratio.

    ``next_second``: depth ``k+1``, garbage flagged ``01``.
    ``cur_first``: depth ``k`` with an idle ancilla, garbage flagged ``10``.
    ``cur_second``: depth ``k`` with an idle ancilla, garbage flagged ``01``.
    ``core``: the unflagged depth-``k`` state (resource counters live here).
    """

    next_second: PipelineState
    cur_first: PipelineState
    cur_second: PipelineState
    core: PipelineState


def pair_states(a: HermitianMatrix, x0: InitialVector, cfg: PipelineConfig) -> PairStates:
    core = build_phi_k(a, x0, cfg, depth=cfg.k, rot_width=cfg.k + 1)
    nxt = apply_once(core, a, cfg)
    return PairStates(
        next_second=mark_flags(nxt, "second_bit"),
        cur_first=mark_flags(core, "first_bit"),
        cur_second=mark_flags(core, "second_bit"),
        core=core,
    )


def overlaps_from_pair(pair: PairStates, shots: int = 0, seed: int = 0) -> tuple[OverlapEstimate, OverlapEstimate]:
    num = overlap(pair.next_second, pair.cur_first, shots, derive_seed(seed, 10))
    den = overlap(pair.cur_first, pair.cur_second, shots, derive_seed(seed, 11))
    return num, den


def estimate_pair_overlaps(
    a: HermitianMatrix,
    cfg: PipelineConfig,
    shots: int = 0,
    x0: InitialVector | None = None,
    seed: int = 0,
) -> tuple[OverlapEstimate, OverlapEstimate]:
    """Numerator ``C^{2k+1} x_{k+1}^* x_k`` and denominator ``C^{2k} x_k^* x_k``."""
    if x0 is None:
        x0 = draw_initial_vector(a.n, cfg.x0_seed, a.eig)
    return overlaps_from_pair(pair_states(a, x0, cfg), shots, seed)
