"""Dense complex linear algebra for Hermitian matrices.

The eigendecomposition here is the brute-force reference used to check every
quantum-pipeline result, so it is a self-contained cyclic Jacobi solver rather
than a LAPACK call.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConvergenceFailure, NotHermitian, NotSquare, SingularMatrix

JACOBI_TOL = 1e-14
DEGENERACY_RTOL = 1e-9
SINGULAR_RTOL = 1e-10


def as_complex_matrix(m) -> np.ndarray:
    """Coerce ``m`` to a square complex128 array or raise :class:`NotSquare`."""
    arr = np.array(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise NotSquare(f"expected a non-empty square matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted by ascending magnitude (ties: ascending signed value).

    ``eigenvectors[:, i]`` is the unit eigenvector for ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def dominant(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def top_degenerate(self) -> bool:
        if self.n < 2:
            return False
        top = abs(self.eigenvalues[-1])
        return top - abs(self.eigenvalues[-2]) < DEGENERACY_RTOL * top

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        """Components ``c_i = <E_i, x>`` of ``x`` in the eigenbasis."""
        return self.eigenvectors.conj().T @ np.asarray(x, dtype=np.complex128)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """A validated Hermitian matrix. Build through :func:`validate_hermitian`."""

    data: np.ndarray
    tol: float = 1e-12

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @cached_property
    def eig(self) -> EigenDecomposition:
        return eigendecompose(self)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def validate_hermitian(m, tol: float = 1e-12) -> HermitianMatrix:
    arr = as_complex_matrix(m)
    asym = float(np.max(np.abs(arr - arr.conj().T)))
    if asym > tol:
        raise NotHermitian(asym, tol)
    # Store the exactly-Hermitian part so downstream algebra sees no drift.
    sym = (arr + arr.conj().T) / 2
    sym.setflags(write=False)
    return HermitianMatrix(sym, tol)


def _jacobi(a: np.ndarray, tol: float, max_rotations: int) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi sweeps on a Hermitian matrix.

    Each rotation zeroes one off-diagonal pair after a diagonal phase turns the
    2x2 block real-symmetric. Stops when the off-diagonal Frobenius norm falls
    below ``tol * ||A||_F``.
    """
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.real(np.diag(a)).copy(), v
    threshold = tol * scale
    rotations = 0
    while True:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= threshold * 1e-3:
                    a[p, q] = a[q, p] = 0.0
                    continue
                if rotations >= max_rotations:
                    raise ConvergenceFailure(
                        f"Jacobi did not converge within {max_rotations} rotations (off-norm {off:.3e})"
                    )
                rotations += 1
                phase = apq / r
                theta = (a[q, q].real - a[p, p].real) / (2.0 * r)
                t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                # rot = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                rot = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ rot
    return np.real(np.diag(a)).copy(), v


def eigendecompose(a: HermitianMatrix) -> EigenDecomposition:
    n = a.n
    w, v = _jacobi(np.asarray(a.data), JACOBI_TOL, 100 * n * n)
    order = sorted(range(n), key=lambda i: (abs(w[i]), w[i]))
    w = w[order]
    v = v[:, order]
    # Fix each eigenvector's global phase: largest component real positive.
    for i in range(n):
        j = int(np.argmax(np.abs(v[:, i])))
        v[:, i] *= abs(v[j, i]) / v[j, i]
    w.setflags(write=False)
    v.setflags(write=False)
    return EigenDecomposition(w, v)


def spectral_function(a: HermitianMatrix, f) -> np.ndarray:
    """``sum_i f(lambda_i) |E_i><E_i|`` built from the Jacobi eigenpairs."""
    e = a.eig
    vals = np.asarray([f(lam) for lam in e.eigenvalues], dtype=np.complex128)
    return (e.eigenvectors * vals) @ e.eigenvectors.conj().T


def matrix_exponential_unitary(a: HermitianMatrix, t: float) -> np.ndarray:
    """Return ``exp(-i A t)``."""
    if t == 0:
        return np.eye(a.n, dtype=np.complex128)
    return spectral_function(a, lambda lam: np.exp(-1j * lam * t))


def inverse(a: HermitianMatrix, singular_tol: float | None = None) -> HermitianMatrix:
    """Inverse of ``a``; ``singular_tol`` defaults to ``1e-10 * |lambda_n|``."""
    e = a.eig
    if singular_tol is None:
        singular_tol = SINGULAR_RTOL * abs(e.dominant)
    if abs(e.eigenvalues[0]) <= singular_tol:
        raise SingularMatrix(
            f"smallest |eigenvalue| {abs(e.eigenvalues[0]):.3e} <= singular_tol {singular_tol:.3e}"
        )
    return validate_hermitian(spectral_function(a, lambda lam: 1.0 / lam), tol=np.inf)


def hermitian_embedding(m) -> HermitianMatrix:
    """``[[0, A], [A^dagger, 0]]`` for a square, possibly non-Hermitian ``A``."""
    arr = as_complex_matrix(m)
    n = arr.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    out[:n, n:] = arr
    out[n:, :n] = arr.conj().T
    return validate_hermitian(out, tol=1e-14)


def shift(a: HermitianMatrix, c: float) -> HermitianMatrix:
    """``A - c I``."""
    return validate_hermitian(np.asarray(a.data) - c * np.eye(a.n), tol=np.inf)


def pad_to_power_of_two(a: HermitianMatrix) -> HermitianMatrix:
    """Zero-pad ``a`` to the next power-of-two dimension."""
    n = a.n
    size = 1 << max(0, (n - 1).bit_length())
    if size == n:
        return a
    out = np.zeros((size, size), dtype=np.complex128)
    out[:n, :n] = a.data
    return validate_hermitian(out, tol=np.inf)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> HermitianMatrix:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return validate_hermitian(scale * (z + z.conj().T) / 2, tol=np.inf)


def hermitian_from_spectrum(eigenvalues, unitary: np.ndarray) -> HermitianMatrix:
    vals = np.asarray(eigenvalues, dtype=float)
    return validate_hermitian((unitary * vals) @ unitary.conj().T, tol=np.inf)
