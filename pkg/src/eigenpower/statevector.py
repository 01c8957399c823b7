"""Dense statevector simulation over named qubit registers.

Qubit ``j`` is bit ``j`` of the basis-state index (register 0 occupies the
least significant bits). A register's value reads its qubits LSB first, and a
gate matrix acting on a qubit list is indexed by that value.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    LayoutMismatch,
    NotUnitary,
    OverlappingRegisters,
    TooManyQubits,
)

DEFAULT_QUBIT_CAP = 26
UNITARY_TOL = 1e-8


def qubit_cap() -> int:
    """Statevector qubit cap; ``EIGENPOWER_QUBIT_CAP`` overrides the default."""
    raw = os.environ.get("EIGENPOWER_QUBIT_CAP")
    return int(raw) if raw else DEFAULT_QUBIT_CAP


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class Register:
    name: str
    offset: int
    width: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(range(self.offset, self.offset + self.width))


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[Register, ...]

    @classmethod
    def build(cls, spec: Iterable[tuple[str, int]]) -> "RegisterLayout":
        regs, offset = [], 0
        for name, width in spec:
            if width < 0:
                raise DimensionMismatch(f"register {name!r} has negative width")
            regs.append(Register(name, offset, width))
            offset += width
        names = [r.name for r in regs]
        if len(set(names)) != len(names):
            raise OverlappingRegisters(f"duplicate register names in {names}")
        return cls(tuple(regs))

    @property
    def num_qubits(self) -> int:
        return sum(r.width for r in self.registers)

    def __getitem__(self, name: str) -> Register:
        for r in self.registers:
            if r.name == name:
                return r
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(r.name == name for r in self.registers)

    def extend(self, name: str, width: int) -> "RegisterLayout":
        return RegisterLayout.build([(r.name, r.width) for r in self.registers] + [(name, width)])


Target = Union[str, Register, Sequence[int]]


def resolve_qubits(layout: RegisterLayout, target: Target) -> tuple[int, ...]:
    if isinstance(target, str):
        return layout[target].qubits
    if isinstance(target, Register):
        return target.qubits
    qubits = tuple(int(q) for q in target)
    if len(set(qubits)) != len(qubits):
        raise OverlappingRegisters(f"repeated qubit in target {qubits}")
    for q in qubits:
        if not 0 <= q < layout.num_qubits:
            raise DimensionMismatch(f"qubit {q} outside layout of {layout.num_qubits} qubits")
    return qubits


@dataclass(frozen=True, eq=False)
class StateVector:
    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.layout.num_qubits,):
            raise DimensionMismatch(
                f"{self.amplitudes.shape} amplitudes for {self.layout.num_qubits} qubits"
            )
        self.amplitudes.setflags(write=False)

    @property
    def num_qubits(self) -> int:
        return self.layout.num_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def register_values(self, target: Target) -> np.ndarray:
        """Value of the target register for every basis index."""
        idx = np.arange(self.amplitudes.size)
        out = np.zeros_like(idx)
        for bit, q in enumerate(resolve_qubits(self.layout, target)):
            out |= ((idx >> q) & 1) << bit
        return out

    def to_json(self) -> str:
        amps = [[float(z.real), float(z.imag)] for z in self.amplitudes]
        return json.dumps({"q": self.num_qubits, "amps": amps})


def init_zero(layout: RegisterLayout, cap: int | None = None) -> StateVector:
    cap = qubit_cap() if cap is None else cap
    if layout.num_qubits > cap:
        raise TooManyQubits(f"{layout.num_qubits} qubits exceeds cap {cap}")
    amps = np.zeros(1 << layout.num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(layout, amps)


def from_amplitudes(layout: RegisterLayout, amps) -> StateVector:
    return StateVector(layout, np.array(amps, dtype=np.complex128))


def _check_unitary(u: np.ndarray, dim: int) -> None:
    if u.shape != (dim, dim):
        raise DimensionMismatch(f"gate shape {u.shape} does not match target dimension {dim}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(dim)))
    if err > UNITARY_TOL:
        raise NotUnitary(f"gate deviates from unitarity by {err:.3e}")


def apply_gate_inplace(
    amps: np.ndarray,
    num_qubits: int,
    u: np.ndarray,
    qubits: Sequence[int],
    controls: Sequence[tuple[int, int]] = (),
) -> None:
    """Kernel: apply ``u`` to ``qubits`` on basis states matching ``controls``.

    Amplitudes violating the control pattern are never touched.
    """
    q = num_qubits
    w = len(qubits)
    psi = amps.reshape((2,) * q)
    index: list = [slice(None)] * q
    control_axes = set()
    for qubit, bit in controls:
        ax = q - 1 - qubit
        index[ax] = int(bit)
        control_axes.add(ax)
    remaining = [ax for ax in range(q) if ax not in control_axes]
    pos = {ax: i for i, ax in enumerate(remaining)}
    # Matrix index is MSB first, so the highest target qubit leads.
    taxes = [pos[q - 1 - t] for t in reversed(qubits)]
    sub = psi[tuple(index)]
    moved = np.moveaxis(sub, taxes, range(w))
    shape = moved.shape
    out = (u @ moved.reshape(1 << w, -1)).reshape(shape)
    psi[tuple(index)] = np.moveaxis(out, range(w), taxes)


def _controls_ok(layout: RegisterLayout, qubits: Sequence[int], controls) -> list[tuple[int, int]]:
    ctrl = [(int(c), int(b)) for c, b in controls]
    cq = [c for c, _ in ctrl]
    if len(set(cq)) != len(cq) or set(cq) & set(qubits):
        raise OverlappingRegisters(f"controls {cq} overlap each other or the target {list(qubits)}")
    for c, b in ctrl:
        if not 0 <= c < layout.num_qubits:
            raise DimensionMismatch(f"control qubit {c} outside layout")
        if b not in (0, 1):
            raise DimensionMismatch(f"control bit must be 0 or 1, got {b}")
    return ctrl


def apply_unitary(s: StateVector, u, target: Target) -> StateVector:
    return apply_controlled_unitary(s, u, target, ())


def apply_controlled_unitary(
    s: StateVector, u, target: Target, controls: Sequence[tuple[int, int]]
) -> StateVector:
    """Apply ``u`` to ``target`` where every ``(qubit, bit)`` control matches.

    A control with ``bit == 0`` is an anti-control.
    """
    qubits = resolve_qubits(s.layout, target)
    u = np.asarray(u, dtype=np.complex128)
    _check_unitary(u, 1 << len(qubits))
    ctrl = _controls_ok(s.layout, qubits, controls)
    amps = s.amplitudes.copy()
    apply_gate_inplace(amps, s.num_qubits, u, qubits, ctrl)
    return StateVector(s.layout, amps)


def dft_matrix(width: int, inverse: bool = False) -> np.ndarray:
    """``QFT|x> = T^{-1/2} sum_y exp(2 pi i x y / T)|y>`` with ``T = 2**width``."""
    dim = 1 << width
    k = np.arange(dim)
    sign = -1.0 if inverse else 1.0
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / dim) / np.sqrt(dim)


def qft(s: StateVector, target: Target, inverse: bool = False) -> StateVector:
    qubits = resolve_qubits(s.layout, target)
    if not qubits:
        raise DimensionMismatch("QFT target is empty")
    amps = s.amplitudes.copy()
    apply_gate_inplace(amps, s.num_qubits, dft_matrix(len(qubits), inverse), qubits)
    return StateVector(s.layout, amps)


def marginal_probabilities(s: StateVector, target: Target) -> np.ndarray:
    qubits = resolve_qubits(s.layout, target)
    probs = np.abs(s.amplitudes) ** 2
    values = s.register_values(qubits)
    out = np.bincount(values, weights=probs, minlength=1 << len(qubits))
    total = out.sum()
    return out / total if total > 0 else out


def measure_register(s: StateVector, target: Target, shots: int, seed: int) -> dict[int, int]:
    """Sample ``shots`` outcomes of ``target``; returns ``{value: count}`` (nonzero only)."""
    if shots < 1:
        raise DimensionMismatch("shots must be >= 1")
    probs = marginal_probabilities(s, target)
    probs = np.clip(probs, 0.0, None)
    counts = make_rng(seed).multinomial(int(shots), probs / probs.sum())
    return {int(v): int(c) for v, c in enumerate(counts) if c}


def inner_product(a: StateVector, b: StateVector) -> complex:
    """``<a|b> = sum conj(a_i) b_i``."""
    if a.layout != b.layout:
        raise LayoutMismatch("inner product of states with different register layouts")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


# -- gate lists ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Gate:
    matrix: np.ndarray
    qubits: tuple[int, ...]
    controls: tuple[tuple[int, int], ...] = ()
    label: str = ""

    def with_control(self, qubit: int, bit: int) -> "Gate":
        return Gate(self.matrix, self.qubits, self.controls + ((qubit, bit),), self.label)

    def dagger(self) -> "Gate":
        return Gate(self.matrix.conj().T, self.qubits, self.controls, self.label + "_dg")


@dataclass(eq=False)
class Circuit:
    """An ordered gate list over a fixed layout, runnable on a :class:`StateVector`.

    Controlling a circuit adds the control to every gate, which is how the
    Hadamard test builds its ancilla-selected state preparations.
    """

    layout: RegisterLayout
    gates: list[Gate] = field(default_factory=list)

    def add(self, matrix, target: Target, controls: Sequence[tuple[int, int]] = (), label: str = "") -> None:
        qubits = resolve_qubits(self.layout, target)
        m = np.asarray(matrix, dtype=np.complex128)
        _check_unitary(m, 1 << len(qubits))
        ctrl = _controls_ok(self.layout, qubits, controls)
        self.gates.append(Gate(m, qubits, tuple(ctrl), label))

    def extend(self, gates: Iterable[Gate]) -> None:
        self.gates.extend(gates)

    def copy(self) -> "Circuit":
        return Circuit(self.layout, list(self.gates))

    def on_layout(self, layout: RegisterLayout) -> "Circuit":
        """Same gates on a layout that extends this one with extra registers."""
        if layout.registers[: len(self.layout.registers)] != self.layout.registers:
            raise LayoutMismatch("target layout does not extend the circuit layout")
        return Circuit(layout, list(self.gates))

    def controlled(self, qubit: int, bit: int = 1) -> list[Gate]:
        return [g.with_control(qubit, bit) for g in self.gates]

    def run(self, state: StateVector | None = None) -> StateVector:
        if state is None:
            state = init_zero(self.layout)
        elif state.layout != self.layout:
            raise LayoutMismatch("state layout differs from circuit layout")
        amps = state.amplitudes.copy()
        for g in self.gates:
            apply_gate_inplace(amps, self.layout.num_qubits, g.matrix, g.qubits, g.controls)
        return StateVector(self.layout, amps)

    def count(self, label: str) -> int:
        return sum(1 for g in self.gates if g.label == label)


HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
S_DAGGER = np.array([[1, 0], [0, -1j]], dtype=np.complex128)


def state_preparation_unitary(vector) -> np.ndarray:
    """A unitary whose first column is the unit vector ``vector``."""
    v = np.asarray(vector, dtype=np.complex128)
    dim = v.size
    m = np.eye(dim, dtype=np.complex128)
    m[:, 0] = v
    # Pick the identity column least aligned with v to keep QR well-posed.
    j = int(np.argmax(np.abs(v)))
    if j != 0:
        m[:, j] = np.eye(dim)[:, 0]
    q, r = np.linalg.qr(m)
    q[:, 0] *= r[0, 0]
    return q
