"""Phase estimation of a Hermitian matrix with a signed eigenvalue window.

Conventions
-----------
For clock value ``tau`` the system evolves under ``exp(-i A tau t0)``, so an
eigenvalue ``lam`` advances the clock phase by ``lam * t0`` per step. A forward
QFT on the clock then peaks at ``idx = lam * t0 * T / (2 pi) mod T``. Indices in
the upper half of the window decode to negative eigenvalues (two's complement),
which needs ``t0 * D / (2 pi) <= 1/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OutOfBound, ValidationError
from .linalg import HermitianMatrix, matrix_exponential_unitary
from .statevector import (
    Circuit,
    RegisterLayout,
    StateVector,
    dft_matrix,
    init_zero,
    state_preparation_unitary,
)

CLOCK_STATES = ("sine", "uniform")


@dataclass(frozen=True)
class PhaseConfig:
    """Clock register settings.

    ``clock="sine"`` prepares the leakage-suppressing sine-weighted clock;
    ``clock="uniform"`` is textbook QPE (``H`` on every clock qubit), which puts
    exactly representable eigenvalues on a single index.
    """

    b: int
    D: float
    t0: float | None = None
    clock: str = "sine"

    def __post_init__(self):
        if self.b < 2:
            raise ValidationError(f"phase register needs b >= 2 qubits, got {self.b}")
        if not self.D > 0:
            raise ValidationError(f"spectral bound D must be positive, got {self.D}")
        if self.t0 is None:
            object.__setattr__(self, "t0", math.pi / self.D)
        if not self.t0 > 0:
            raise ValidationError(f"t0 must be positive, got {self.t0}")
        if self.t0 * self.D / (2 * math.pi) > 0.5 + 1e-12:
            raise ValidationError(
                f"t0*D/(2pi) = {self.t0 * self.D / (2 * math.pi):.6g} > 1/2: signed phases would wrap"
            )
        if self.clock not in CLOCK_STATES:
            raise ValidationError(f"clock must be one of {CLOCK_STATES}, got {self.clock!r}")

    @property
    def T(self) -> int:
        return 1 << self.b

    @property
    def resolution(self) -> float:
        """Eigenvalue spacing between neighbouring clock indices."""
        return 2 * math.pi / (self.t0 * self.T)


def sine_clock_amplitudes(bits: int) -> np.ndarray:
    """``sqrt(2/T) sin(pi (tau + 1/2) / T)`` for ``tau = 0..T-1``."""
    T = 1 << bits
    tau = np.arange(T)
    return np.sqrt(2.0 / T) * np.sin(np.pi * (tau + 0.5) / T)


def clock_amplitudes(cfg: PhaseConfig) -> np.ndarray:
    if cfg.clock == "uniform":
        return np.full(cfg.T, 1.0 / math.sqrt(cfg.T))
    return sine_clock_amplitudes(cfg.b)


def clock_preparation(cfg: PhaseConfig) -> np.ndarray:
    """Unitary taking clock ``|0>`` to the configured clock state."""
    return state_preparation_unitary(clock_amplitudes(cfg))


def prepare_clock_state(cfg: PhaseConfig) -> StateVector:
    layout = RegisterLayout.build([("clock", cfg.b)])
    return StateVector(layout, clock_amplitudes(cfg).astype(np.complex128))


def phase_index_of_eigenvalue(lam: float, cfg: PhaseConfig) -> int:
    if abs(lam) >= cfg.D:
        raise OutOfBound(f"|lambda| = {abs(lam):.6g} >= D = {cfg.D:.6g}")
    return int(round(lam * cfg.t0 * cfg.T / (2 * math.pi))) % cfg.T


def eigenvalue_of_phase_index(idx: int, cfg: PhaseConfig) -> float:
    if not 0 <= idx < cfg.T:
        raise OutOfBound(f"phase index {idx} outside [0, {cfg.T})")
    signed = idx if idx < cfg.T // 2 else idx - cfg.T
    return 2 * math.pi * signed / (cfg.t0 * cfg.T)


def decoded_eigenvalues(cfg: PhaseConfig) -> np.ndarray:
    return np.array([eigenvalue_of_phase_index(i, cfg) for i in range(cfg.T)])


def evolution_gates(
    circuit: Circuit, a: HermitianMatrix, cfg: PhaseConfig, clock: str, system: str, inverse: bool = False
) -> None:
    """Append ``sum_tau |tau><tau| (x) exp(-i A tau t0)`` (or its inverse).

    Built as one controlled ``exp(-i A 2^j t0)`` per clock qubit ``j``; the
    product over clock bits reproduces every ``tau`` exactly.
    """
    sys_reg = circuit.layout[system]
    clk_reg = circuit.layout[clock]
    if 1 << sys_reg.width != a.n:
        raise DimensionMismatch(f"system register holds {1 << sys_reg.width} amplitudes, matrix is {a.n}x{a.n}")
    if clk_reg.width != cfg.b:
        raise DimensionMismatch(f"clock register width {clk_reg.width} != b = {cfg.b}")
    powers = [matrix_exponential_unitary(a, (1 << j) * cfg.t0) for j in range(cfg.b)]
    order = range(cfg.b - 1, -1, -1) if inverse else range(cfg.b)
    for j in order:
        u = powers[j].conj().T if inverse else powers[j]
        circuit.add(u, system, [(clk_reg.offset + j, 1)], label="evolution_dg" if inverse else "evolution")


def controlled_evolution(
    s: StateVector, a: HermitianMatrix, cfg: PhaseConfig, clock: str = "clock", system: str = "system"
) -> StateVector:
    circ = Circuit(s.layout)
    evolution_gates(circ, a, cfg, clock, system)
    return circ.run(s)


def qpe_gates(circuit: Circuit, a: HermitianMatrix, cfg: PhaseConfig, clock: str = "clock", system: str = "system") -> None:
    """Clock preparation, controlled evolution, then the clock Fourier transform."""
    circuit.add(clock_preparation(cfg), clock, label="clock_prep")
    evolution_gates(circuit, a, cfg, clock, system)
    circuit.add(dft_matrix(cfg.b), clock, label="qft")


def uncompute_qpe_gates(
    circuit: Circuit, a: HermitianMatrix, cfg: PhaseConfig, clock: str = "clock", system: str = "system"
) -> None:
    circuit.add(dft_matrix(cfg.b, inverse=True), clock, label="qft_dg")
    evolution_gates(circuit, a, cfg, clock, system, inverse=True)
    circuit.add(clock_preparation(cfg).conj().T, clock, label="clock_prep_dg")


def run_qpe(a: HermitianMatrix, system_state: StateVector, cfg: PhaseConfig) -> StateVector:
    """Phase-estimate ``system_state`` (a single-register state) against ``a``.

    Returns a state on layout ``(system, clock)``.
    """
    if len(system_state.layout.registers) != 1:
        raise DimensionMismatch("run_qpe expects a state on a single system register")
    width = system_state.num_qubits
    layout = RegisterLayout.build([("system", width), ("clock", cfg.b)])
    start = np.zeros(1 << layout.num_qubits, dtype=np.complex128)
    start[: 1 << width] = system_state.amplitudes
    init_zero(layout)  # capacity check
    circ = Circuit(layout)
    qpe_gates(circ, a, cfg)
    return circ.run(StateVector(layout, start))
