"""Repeated coherent application of ``A`` through phase estimation and rotations.

After ``r`` applications a pipeline state has the branch structure

    C^r |A^r x0| |A^r x0> |0...0>  +  sum_i |G_i> |one-hot(i)>

on the rotation ancillas. Two backends produce it:

* ``circuit``: full statevector simulation of the gates.
* ``analytic``: the same branches tracked as eigenbasis coefficient vectors,
  computed from the reference eigendecomposition (exact phase estimation).

Two variants apply ``A``:

* ``naive``: phase estimation, rotation, then uncompute the phase estimation,
  once per application.
* ``improved``: one phase estimation up front; each application is only a new
  rotation controlled on the retained clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CapacityExceeded,
    DimensionMismatch,
    ExhaustedRedraws,
    FlagsAlreadySet,
    ValidationError,
)
from .linalg import EigenDecomposition, HermitianMatrix, pad_to_power_of_two
from .qpe import PhaseConfig, decoded_eigenvalues, qpe_gates, uncompute_qpe_gates
from .statevector import (
    PAULI_X,
    Circuit,
    RegisterLayout,
    StateVector,
    init_zero,
    make_rng,
    qubit_cap,
    state_preparation_unitary,
)

VARIANTS = ("naive", "improved")
BACKENDS = ("circuit", "analytic")
FLAG_BITS = {"first_bit": 0, "second_bit": 1}
OVERLAP_FLOOR = 1e-6
MAX_REDRAWS = 64


@dataclass(frozen=True)
class PipelineConfig:
    k: int
    phase: PhaseConfig
    C: float | None = None
    variant: str = "improved"
    backend: str = "analytic"
    x0_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.C is None:
            object.__setattr__(self, "C", 1.0 / self.phase.D)
        if not self.C > 0:
            raise ValidationError(f"C must be positive, got {self.C}")
        if self.C * self.phase.D > 1 + 1e-12:
            raise ValidationError(f"C*D = {self.C * self.phase.D:.6g} > 1: rotation amplitude invalid")
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.backend not in BACKENDS:
            raise ValidationError(f"backend must be one of {BACKENDS}, got {self.backend!r}")

    @property
    def D(self) -> float:
        return self.phase.D


@dataclass(frozen=True)
class InitialVector:
    vector: np.ndarray
    seed: int
    attempts: int = 1


def draw_initial_vector(n: int, seed: int, oracle: EigenDecomposition | None = None) -> InitialVector:
    """Complex Gaussian unit vector; re-drawn with ``seed + 1`` while ``|<E_n, x0>| < 1e-6``."""
    if n < 1:
        raise DimensionMismatch(f"dimension must be >= 1, got {n}")
    for attempt in range(MAX_REDRAWS):
        rng = make_rng(seed + attempt)
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = z / np.linalg.norm(z)
        if oracle is None or abs(np.vdot(oracle.eigenvectors[:, -1], x)) >= OVERLAP_FLOOR:
            x.setflags(write=False)
            return InitialVector(x, seed + attempt, attempt + 1)
    raise ExhaustedRedraws(f"no draw with |c_n| >= {OVERLAP_FLOOR} after {MAX_REDRAWS} attempts")


def initial_vector_from(x) -> InitialVector:
    v = np.asarray(x, dtype=np.complex128)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValidationError("initial vector is zero")
    v = v / norm
    v.setflags(write=False)
    return InitialVector(v, seed=-1)


@dataclass
class Counters:
    evolutions: int = 0
    uncompute_evolutions: int = 0
    rotations: int = 0
    qft_calls: int = 0
    clock_preparations: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PipelineState:
    """A pipeline state on either backend.

    ``garbage_flags`` is the flag pattern written on garbage branches
    (``"00"`` until :func:`mark_flags` runs), first bit then second bit.
    """

    cfg: PipelineConfig
    x0: InitialVector
    depth: int
    rot_width: int
    counters: Counters = field(default_factory=Counters)
    garbage_flags: str = "00"
    # analytic payload: eigenbasis coefficient vectors
    eig: EigenDecomposition | None = None
    success: np.ndarray | None = None
    garbage: list[np.ndarray] = field(default_factory=list)
    # circuit payload
    matrix: HermitianMatrix | None = None
    circuit: Circuit | None = None
    state: StateVector | None = None

    @property
    def backend(self) -> str:
        return self.cfg.backend

    @property
    def layout(self) -> RegisterLayout | None:
        return None if self.circuit is None else self.circuit.layout

    def success_amplitude(self) -> float:
        """Norm of the all-ancillas-zero branch, ideally ``C^r |A^r x0|``."""
        if self.backend == "analytic":
            return float(np.linalg.norm(self.success))
        return float(np.linalg.norm(self._success_mask_amplitudes(self.state)))

    def garbage_norms(self) -> list[float]:
        if self.backend == "analytic":
            return [float(np.linalg.norm(g)) for g in self.garbage]
        s = self.state
        rot = s.register_values("rot")
        probs = np.abs(s.amplitudes) ** 2
        return [float(np.sqrt(probs[rot == (1 << i)].sum())) for i in range(self.depth)]

    def _success_mask_amplitudes(self, s: StateVector) -> np.ndarray:
        mask = (s.register_values("rot") == 0) & (s.register_values("flags") == 0)
        return s.amplitudes[mask]

    def success_branch(self) -> np.ndarray:
        """Unnormalized success-branch vector on the ``n`` system coordinates.

        For the improved circuit variant the retained clock is uncomputed on a
        copy first so the branch can be read with the clock at ``|0>``.
        """
        if self.backend == "analytic":
            return self.eig.eigenvectors @ self.success
        s = self.state
        if self.cfg.variant == "improved":
            undo = Circuit(s.layout)
            uncompute_qpe_gates(undo, self.matrix, self.cfg.phase)
            s = undo.run(s)
        mask = (
            (s.register_values("rot") == 0)
            & (s.register_values("flags") == 0)
            & (s.register_values("clock") == 0)
        )
        vec = s.amplitudes[mask]  # system register is the lowest bits
        return vec[: self.x0.vector.size].copy()


def _pipeline_layout(system_width: int, b: int, rot_width: int) -> RegisterLayout:
    return RegisterLayout.build([("system", system_width), ("clock", b), ("rot", rot_width), ("flags", 2)])


def pipeline_qubits(n: int, cfg: PipelineConfig, rot_width: int) -> int:
    system_width = max(0, (n - 1).bit_length())
    return system_width + cfg.phase.b + rot_width + 2


def initial_state(a: HermitianMatrix, x0: InitialVector, cfg: PipelineConfig, rot_width: int) -> PipelineState:
    if x0.vector.size != a.n:
        raise DimensionMismatch(f"x0 has {x0.vector.size} entries for a {a.n}x{a.n} matrix")
    if cfg.backend == "analytic":
        eig = a.eig
        beta = eig.coefficients(x0.vector)
        return PipelineState(cfg, x0, 0, rot_width, eig=eig, success=beta)
    padded = pad_to_power_of_two(a)
    width = max(0, (padded.n - 1).bit_length())
    layout = _pipeline_layout(width, cfg.phase.b, rot_width)
    if layout.num_qubits > qubit_cap():
        raise CapacityExceeded(f"circuit needs {layout.num_qubits} qubits, cap is {qubit_cap()}")
    circ = Circuit(layout)
    if width:
        vec = np.zeros(padded.n, dtype=np.complex128)
        vec[: a.n] = x0.vector
        circ.add(state_preparation_unitary(vec), "system", label="x0_prep")
        state = circ.run(init_zero(layout))
    else:
        # One-dimensional system: x0 is a global phase, kept on the amplitude.
        amps = np.zeros(1 << layout.num_qubits, dtype=np.complex128)
        amps[0] = x0.vector[0]
        state = StateVector(layout, amps)
    return PipelineState(cfg, x0, 0, rot_width, matrix=padded, circuit=circ, state=state)


def rotation_matrix(cfg: PipelineConfig) -> np.ndarray:
    """Block-diagonal rotation on ``(ancilla, clock)``; index = ancilla + 2*clock.

    Clock value ``y`` decodes to ``lam_y`` and sends ``|0>`` to
    ``C lam_y |0> + sqrt(1 - C^2 lam_y^2) |1>``, keeping the sign of ``lam_y``.
    """
    lam = decoded_eigenvalues(cfg.phase)
    cos = np.clip(cfg.C * lam, -1.0, 1.0)
    sin = np.sqrt(1.0 - cos**2)
    T = lam.size
    m = np.zeros((2 * T, 2 * T), dtype=np.complex128)
    for y in range(T):
        m[2 * y : 2 * y + 2, 2 * y : 2 * y + 2] = [[cos[y], -sin[y]], [sin[y], cos[y]]]
    return m


def apply_once(state: PipelineState, a: HermitianMatrix, cfg: PipelineConfig | None = None) -> PipelineState:
    """Multiply ``A`` into the success branch once more, spending one rotation ancilla."""
    cfg = state.cfg if cfg is None else cfg
    r = state.depth
    if r >= state.rot_width:
        raise CapacityExceeded(f"all {state.rot_width} rotation ancillas already used")
    if state.garbage_flags != "00":
        raise FlagsAlreadySet("cannot apply A after flags were marked")
    counters = replace(state.counters)
    first_qpe = cfg.variant == "naive" or r == 0
    if first_qpe:
        counters.evolutions += 1
        counters.qft_calls += 1
        counters.clock_preparations += 1
    counters.rotations += 1
    if cfg.variant == "naive":
        counters.uncompute_evolutions += 1
        counters.qft_calls += 1
        counters.clock_preparations += 1

    if cfg.backend == "analytic":
        lam = state.eig.eigenvalues
        c_lam = cfg.C * lam
        garbage = state.success * np.sqrt(np.clip(1.0 - c_lam**2, 0.0, None))
        return replace(
            state,
            depth=r + 1,
            counters=counters,
            success=state.success * c_lam,
            garbage=state.garbage + [garbage],
        )

    matrix = state.matrix
    circ = Circuit(state.layout)
    if first_qpe:
        qpe_gates(circ, matrix, cfg.phase)
    rot = state.layout["rot"]
    clock = state.layout["clock"]
    controls = [(rot.offset + j, 0) for j in range(r)]
    circ.add(rotation_matrix(cfg), (rot.offset + r,) + clock.qubits, controls, label="rotation")
    if cfg.variant == "naive":
        uncompute_qpe_gates(circ, matrix, cfg.phase)
    new_state = circ.run(state.state)
    full = state.circuit.copy()
    full.extend(circ.gates)
    return replace(state, depth=r + 1, counters=counters, circuit=full, state=new_state)


def build_phi_k(
    a: HermitianMatrix,
    x0: InitialVector,
    cfg: PipelineConfig,
    depth: int | None = None,
    rot_width: int | None = None,
) -> PipelineState:
    """``depth`` (default ``cfg.k``) applications of ``A`` starting from ``x0``.

    ``rot_width`` reserves extra (unused, zero) rotation ancillas so states of
    different depth share one register layout.
    """
    depth = cfg.k if depth is None else depth
    rot_width = depth if rot_width is None else rot_width
    if rot_width < depth:
        raise DimensionMismatch(f"rot_width {rot_width} < depth {depth}")
    state = initial_state(a, x0, cfg, rot_width)
    for _ in range(depth):
        state = apply_once(state, a, cfg)
    return state


def mark_flags(state: PipelineState, which: str) -> PipelineState:
    """Set flag bit ``which`` to 1 on every branch with some rotation ancilla set."""
    if which not in FLAG_BITS:
        raise ValidationError(f"which must be one of {tuple(FLAG_BITS)}, got {which!r}")
    if state.garbage_flags != "00":
        raise FlagsAlreadySet(f"flags already marked as {state.garbage_flags}")
    pattern = "10" if which == "first_bit" else "01"
    if state.backend == "analytic":
        return replace(state, garbage_flags=pattern)
    s = state.state
    flags_reg = state.layout["flags"]
    rot = state.layout["rot"]
    flag_probs = np.abs(s.amplitudes[s.register_values("flags") != 0]) ** 2
    if flag_probs.sum() > 1e-12:
        raise FlagsAlreadySet("flag register is not zeroed")
    flag_qubit = flags_reg.offset + FLAG_BITS[which]
    circ = Circuit(state.layout)
    # OR over ancillas: flip unconditionally, then flip back when all are 0.
    circ.add(PAULI_X, [flag_qubit], label="flag")
    circ.add(PAULI_X, [flag_qubit], [(q, 0) for q in rot.qubits], label="flag")
    full = state.circuit.copy()
    full.extend(circ.gates)
    return replace(state, garbage_flags=pattern, circuit=full, state=circ.run(s))


def analytic_success_amplitude(a: HermitianMatrix, x0: InitialVector, C: float, r: int) -> float:
    """Closed form ``C^r |A^r x0|`` by repeated multiplication."""
    v = np.asarray(x0.vector, dtype=np.complex128)
    data = np.asarray(a.data)
    for _ in range(r):
        v = data @ v
    return C**r * float(np.linalg.norm(v))
