"""Matrix files and deterministic test matrices.

File format: ``{"n": n, "entries": [[re, im], ...]}`` with ``n*n`` entries in
row-major order. Floats are written with Python's shortest round-trip repr,
so reading a file back reproduces every entry bit for bit.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import BadParams, InputError, MatrixFileNotFound, ParseError
from .linalg import HermitianMatrix, hermitian_from_spectrum, random_hermitian, random_unitary, validate_hermitian
from .statevector import make_rng

FIXTURE_KINDS = ("diagonal", "random_hermitian", "gapped")
MAX_FIXTURE_N = 64


def matrix_to_json(m) -> str:
    data = np.asarray(m.data if isinstance(m, HermitianMatrix) else m, dtype=np.complex128)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise BadParams(f"expected a square matrix, got shape {data.shape}")
    entries = [[float(z.real), float(z.imag)] for z in data.ravel()]
    return json.dumps({"n": data.shape[0], "entries": entries}, sort_keys=True) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"matrix file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "n" not in obj or "entries" not in obj:
        raise ParseError('matrix file must be an object with "n" and "entries"')
    n, entries = obj["n"], obj["entries"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ParseError(f'"n" must be a positive integer, got {n!r}')
    if not isinstance(entries, list) or len(entries) != n * n:
        raise ParseError(f'"entries" must list n*n = {n * n} [re, im] pairs')
    out = np.empty(n * n, dtype=np.complex128)
    for i, e in enumerate(entries):
        ok = (
            isinstance(e, list)
            and len(e) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in e)
        )
        if not ok or not all(math.isfinite(v) for v in e):
            raise ParseError(f"entry {i} is not a finite [re, im] pair: {e!r}")
        out[i] = complex(e[0], e[1])
    return out.reshape(n, n)


def load_matrix(path, tol: float = 1e-12) -> HermitianMatrix:
    """Read and validate a matrix file."""
    p = Path(path)
    try:
        text = p.read_text()
    except FileNotFoundError as exc:
        raise MatrixFileNotFound(f"matrix file not found: {p}") from exc
    except (IsADirectoryError, PermissionError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read matrix file {p}: {exc}") from exc
    return validate_hermitian(parse_matrix(text), tol=tol)


def write_text_atomic(path, text: str) -> None:
    """Write via a temporary file in the target directory, so failures leave nothing behind."""
    p = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=p.parent if str(p.parent) else ".", prefix=f".{p.name}.", suffix=".tmp")
    except OSError as exc:
        raise InputError(f"cannot write {p}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_matrix(path, m) -> None:
    write_text_atomic(path, matrix_to_json(m))


def _gapped_spectrum(n: int, p: float, top: float, rng: np.random.Generator) -> np.ndarray:
    """``lambda_n = top``, ``lambda_{n-1} = p top``; the rest have random signs and
    magnitudes in ``[0.05, 0.9] p top``, strictly inside the gap."""
    rest = rng.uniform(0.05, 0.9, size=n - 2) * p * top
    signs = rng.choice([-1.0, 1.0], size=n - 2)
    return np.concatenate([rest * signs, [p * top, top]])


def generate_fixture(kind: str, n: int, seed: int = 0, params: dict | None = None) -> HermitianMatrix:
    """Deterministic matrix of the requested kind.

    ``diagonal``: ``params["values"]`` on the diagonal.
    ``random_hermitian``: Gaussian Hermitian, ``params["scale"]`` (default 1).
    ``gapped``: Haar-random eigenvectors with ``|lambda_{n-1} / lambda_n| = params["p"]``
    and ``lambda_n = params.get("top", 1)``.
    """
    params = dict(params or {})
    if kind not in FIXTURE_KINDS:
        raise BadParams(f"unknown fixture kind {kind!r}; choose from {FIXTURE_KINDS}")
    if not 1 <= n <= MAX_FIXTURE_N:
        raise BadParams(f"fixture size must be in [1, {MAX_FIXTURE_N}], got {n}")
    rng = make_rng(seed)
    if kind == "diagonal":
        values = params.get("values")
        if values is None or len(values) != n:
            raise BadParams(f"diagonal fixture needs {n} values")
        return validate_hermitian(np.diag(np.asarray(values, dtype=float)))
    if kind == "random_hermitian":
        return random_hermitian(n, rng, float(params.get("scale", 1.0)))
    p = params.get("p")
    top = float(params.get("top", 1.0))
    if n < 2:
        raise BadParams("gapped fixture needs n >= 2")
    if p is None or not 0 < p < 1:
        raise BadParams(f"gapped fixture needs 0 < p < 1, got {p!r}")
    if not top > 0:
        raise BadParams(f"top eigenvalue must be positive, got {top}")
    spectrum = _gapped_spectrum(n, float(p), top, rng)
    return hermitian_from_spectrum(spectrum, random_unitary(n, rng))
