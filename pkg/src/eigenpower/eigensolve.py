"""Eigenvalue estimators built on the pipeline, plus their classical references."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import (
    BadParams,
    DegenerateSpectrumWarning,
    DenominatorTooSmall,
    IllConditionedKrylov,
    OutOfBound,
    ZeroVector,
)
from .linalg import EigenDecomposition, HermitianMatrix, eigendecompose, inverse, shift, validate_hermitian
from .overlap import OverlapEstimate, derive_seed, overlap, overlaps_from_pair, pair_states
from .pipeline import (
    InitialVector,
    PipelineConfig,
    apply_once,
    draw_initial_vector,
    initial_state,
    mark_flags,
    pipeline_qubits,
)
from .qpe import PhaseConfig
from .statevector import make_rng

SCHEMA_VERSION = 1
DEGENERATE_P = 1 - 1e-12
KRYLOV_COND_RTOL = 1e-10
MAX_AUTO_K = 256


@dataclass(frozen=True)
class ConvergenceBound:
    """Iteration count making ``(n-1) K p^(2k) < delta``.

    ``p = |lambda_{n-1} / lambda_n|`` and ``K = max_{i<n} |c_i / c_n|`` for the
    eigen-components ``c_i`` of the starting vector.
    """

    p: float
    K: float
    n: int
    delta: float
    k_required: int
    degenerate: bool = False

    def value(self, k: int) -> float:
        return (self.n - 1) * self.K * self.p ** (2 * k)

    def to_dict(self) -> dict:
        return asdict(self)


def convergence_bound(oracle: EigenDecomposition, x0: InitialVector, delta: float) -> ConvergenceBound:
    if not delta > 0:
        raise BadParams(f"delta must be positive, got {delta}")
    n = oracle.n
    if n == 1:
        return ConvergenceBound(0.0, 0.0, 1, delta, 1)
    lam = oracle.eigenvalues
    c = np.abs(oracle.coefficients(x0.vector))
    degenerate = oracle.top_degenerate
    if degenerate:
        warnings.warn("largest-magnitude eigenvalue is degenerate", DegenerateSpectrumWarning, stacklevel=2)
        p = DEGENERATE_P
    else:
        p = abs(lam[-2] / lam[-1])
    K = float(np.max(c[:-1]) / c[-1])
    k = 1
    if p > 0 and (n - 1) * K > delta:
        # Strict inequality: the smallest integer above x, not ceil(x).
        x = math.log((n - 1) * K / delta) / (2 * math.log(1 / p))
        k = max(1, math.floor(x) + 1)
        if k > 1 and (n - 1) * K * p ** (2 * (k - 1)) < delta:
            k -= 1
    return ConvergenceBound(float(p), K, n, float(delta), int(k), bool(degenerate))


def classical_power_method(a: HermitianMatrix, x0: InitialVector, k: int) -> tuple[float, np.ndarray]:
    """``k`` explicit multiplications, then the Rayleigh quotient of the iterate."""
    if k < 1:
        raise BadParams(f"k must be >= 1, got {k}")
    data = np.asarray(a.data)
    v = np.asarray(x0.vector, dtype=np.complex128)
    for _ in range(k):
        v = data @ v
        norm = np.linalg.norm(v)
        if not np.isfinite(norm) or norm == 0.0:
            raise ZeroVector("power iterate vanished")
        v = v / norm
    lam = np.vdot(data @ v, v).real / np.vdot(v, v).real
    return float(lam), v


@dataclass
class EigenReport:
    mode: str
    lambda_estimates: list[float]
    oracle_values: list[float]
    multiplicative_error: float
    k_used: int
    bound: ConvergenceBound | None
    resources: dict
    seeds: dict
    warnings: list[str] = field(default_factory=list)
    std_error: float = 0.0
    details: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "lambda_estimates": [float(x) for x in self.lambda_estimates],
            "oracle_values": [float(x) for x in self.oracle_values],
            "multiplicative_error": float(self.multiplicative_error),
            "k_used": int(self.k_used),
            "bound": None if self.bound is None else self.bound.to_dict(),
            "resources": self.resources,
            "seeds": self.seeds,
            "warnings": list(self.warnings),
            "std_error": float(self.std_error),
            "details": self.details,
            "config": self.config,
            "sparsity": None,
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        obj = obj.item()
        if not isinstance(obj, complex):
            return obj
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def config_dict(cfg: PipelineConfig) -> dict:
    ph = cfg.phase
    return {
        "k": cfg.k,
        "C": cfg.C,
        "D": ph.D,
        "b": ph.b,
        "t0": ph.t0,
        "clock": ph.clock,
        "variant": cfg.variant,
        "backend": cfg.backend,
        "x0_seed": cfg.x0_seed,
    }


def with_bound(cfg: PipelineConfig, D: float) -> PipelineConfig:
    """Same settings against a new spectral bound, with default ``C`` and ``t0``."""
    phase = PhaseConfig(b=cfg.phase.b, D=D, clock=cfg.phase.clock)
    return replace(cfg, phase=phase, C=None)


def _check_bound(a: HermitianMatrix, cfg: PipelineConfig) -> None:
    top = abs(a.eig.dominant)
    if top >= cfg.D:
        raise OutOfBound(f"spectral radius {top:.6g} is not below D = {cfg.D:.6g}")


def _rel_error(est: float, ref: float) -> float:
    if ref == 0:
        return abs(est)
    return abs(est / ref - 1.0)


def _resources(core_counters, cfg: PipelineConfig, n: int, shots_used: int) -> dict:
    out = core_counters.as_dict()
    out["shots"] = int(shots_used)
    if cfg.backend == "circuit":
        out["qubits"] = pipeline_qubits(n, cfg, cfg.k + 1) + (1 if shots_used else 0)
    return out


def _degenerate_warning(eig: EigenDecomposition) -> list[str]:
    return ["DegenerateSpectrum"] if eig.top_degenerate else []


def quantum_estimate_max(
    a: HermitianMatrix,
    cfg: PipelineConfig,
    shots: int = 0,
    x0: InitialVector | None = None,
    seed: int = 0,
    delta: float = 1e-2,
) -> EigenReport:
    """Ratio of the two flagged overlaps divided by ``C``."""
    _check_bound(a, cfg)
    eig = a.eig
    if x0 is None:
        x0 = draw_initial_vector(a.n, cfg.x0_seed, eig)
    pair = pair_states(a, x0, cfg)
    num, den = overlaps_from_pair(pair, shots, seed)

    warn = _degenerate_warning(eig)
    den_abs = abs(den.value)
    sigma_den = math.hypot(den.std_error, den.std_error_imag)
    if den_abs == 0.0 or (shots and den_abs < 5 * sigma_den):
        raise DenominatorTooSmall(
            f"|denominator| = {den_abs:.3e} vs std_error {sigma_den:.3e}: increase shots or C"
        )
    ratio = num.value / den.value
    lam = ratio.real / cfg.C
    imag = ratio.imag / cfg.C
    sigma = 0.0
    if shots:
        num_abs = abs(num.value)
        rel_num = num.std_error / num_abs if num_abs > 0 else math.inf
        sigma = abs(lam) * math.hypot(rel_num, den.std_error / den_abs)
        if abs(imag) >= 5 * sigma:
            warn.append("ImaginaryPartAboveNoise")
    elif abs(imag) > 1e-9 * max(abs(lam), 1e-300):
        warn.append("ImaginaryPartAboveNoise")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSpectrumWarning)
        bound = convergence_bound(eig, x0, delta)
    oracle = eig.dominant
    return EigenReport(
        mode="max",
        lambda_estimates=[lam],
        oracle_values=[oracle],
        multiplicative_error=_rel_error(lam, oracle),
        k_used=cfg.k,
        bound=bound,
        resources=_resources(pair.core.counters, cfg, a.n, 4 * shots),
        seeds={"x0_seed": x0.seed, "shot_seed": seed},
        warnings=warn,
        std_error=sigma,
        details={
            "numerator": num.to_dict(),
            "denominator": den.to_dict(),
            "imag_part": imag,
            "success_amplitude": pair.core.success_amplitude(),
        },
        config=config_dict(cfg),
    )


def quantum_estimate_min(
    a: HermitianMatrix,
    cfg: PipelineConfig,
    shots: int = 0,
    d_inverse: float | None = None,
    x0: InitialVector | None = None,
    seed: int = 0,
    delta: float = 1e-2,
) -> EigenReport:
    """Smallest-magnitude eigenvalue as the reciprocal of the dominant one of ``A^-1``.

    The inverse's bound defaults to ``1.25 / |lambda_1|`` from the reference
    eigendecomposition; ``C`` and ``t0`` follow from it.
    """
    a_inv = inverse(a)
    if d_inverse is None:
        d_inverse = 1.25 * abs(a_inv.eig.dominant)
    inv_cfg = with_bound(cfg, d_inverse)
    inner = quantum_estimate_max(a_inv, inv_cfg, shots, x0=x0, seed=seed, delta=delta)
    lam_min = 1.0 / inner.lambda_estimates[0]
    sigma = inner.std_error * lam_min**2

    details = {
        "label": "smallest magnitude eigenvalue",
        "inverse_estimate": inner.lambda_estimates[0],
        "inverse_D": d_inverse,
        "inverse_details": inner.details,
    }
    warn = list(inner.warnings)
    try:
        outer = quantum_estimate_max(a, cfg, shots, x0=x0, seed=derive_seed(seed, 1), delta=delta)
        details["lambda_max_estimate"] = outer.lambda_estimates[0]
        details["kappa"] = abs(outer.lambda_estimates[0] / lam_min)
    except OutOfBound:
        warn.append("KappaUnavailable")

    oracle = float(a.eig.eigenvalues[0])
    return EigenReport(
        mode="min",
        lambda_estimates=[lam_min],
        oracle_values=[oracle],
        multiplicative_error=_rel_error(lam_min, oracle),
        k_used=cfg.k,
        bound=inner.bound,
        resources=inner.resources,
        seeds=inner.seeds,
        warnings=warn,
        std_error=sigma,
        details=details,
        config=config_dict(inv_cfg),
    )


def quantum_estimate_shifted(
    a: HermitianMatrix,
    c: float,
    cfg: PipelineConfig,
    shots: int = 0,
    x0: InitialVector | None = None,
    seed: int = 0,
    delta: float = 1e-2,
) -> EigenReport:
    """Dominant eigenvalue of ``A - cI``, mapped back to the spectrum of ``A``.

    ``cfg.D`` must bound ``max |lambda_i - c|``.
    """
    shifted = shift(a, c)
    inner = quantum_estimate_max(shifted, cfg, shots, x0=x0, seed=seed, delta=delta)
    lam_shift = inner.lambda_estimates[0]
    recovered = lam_shift + c
    lam = a.eig.eigenvalues
    oracle = float(lam[int(np.argmax(np.abs(lam - c)))])
    details = dict(inner.details)
    details.update(
        {
            "shift": c,
            "lambda_shifted": lam_shift,
            "max_abs_shifted": abs(lam_shift),
            "recovered": recovered,
            "label": "lowest eigenvalue" if lam_shift < 0 else "highest eigenvalue",
        }
    )
    return EigenReport(
        mode="shift",
        lambda_estimates=[recovered],
        oracle_values=[oracle],
        multiplicative_error=_rel_error(recovered, oracle),
        k_used=cfg.k,
        bound=inner.bound,
        resources=inner.resources,
        seeds=inner.seeds,
        warnings=inner.warnings,
        std_error=inner.std_error,
        details=details,
        config=inner.config,
    )


def _ritz_values(S: np.ndarray, H: np.ndarray, cond_rtol: float) -> tuple[np.ndarray, int]:
    """Eigenvalues of the pencil ``(H, S)`` on the numerically nonsingular part of ``S``."""
    s_eig = eigendecompose(validate_hermitian(S, tol=np.inf))
    sig = s_eig.eigenvalues
    keep = sig > cond_rtol * np.max(sig)
    q = s_eig.eigenvectors[:, keep] / np.sqrt(sig[keep])
    hp = q.conj().T @ H @ q
    theta = eigendecompose(validate_hermitian((hp + hp.conj().T) / 2, tol=np.inf)).eigenvalues
    return theta, int(np.count_nonzero(~keep))


def krylov_few_eigenvalues(
    a: HermitianMatrix,
    cfg: PipelineConfig,
    m: int,
    shots: int = 0,
    blocks: int = 1,
    x0s: list[InitialVector] | None = None,
    seed: int = 0,
    delta: float = 1e-2,
) -> EigenReport:
    """Rayleigh-Ritz on the span of ``A^i x0`` (``i = 0..k``), from pipeline overlaps.

    With ``blocks > 1`` several starting vectors are used at once, which is
    what resolves repeated eigenvalues. Overlaps are taken between states
    flagged on the first bit and states flagged on the second bit, so garbage
    never contributes; they equal ``C^(i+j) <A^i x_p, A^j x_q>``. The pencil is
    solved for ``C A`` in that scaled basis and divided by ``C`` at the end.
    """
    _check_bound(a, cfg)
    k = cfg.k
    if blocks < 1:
        raise BadParams("blocks must be >= 1")
    if k + 1 > a.n:
        raise BadParams(f"Krylov dimension k+1 = {k + 1} exceeds n = {a.n}")
    if not 1 <= m <= blocks * (k + 1):
        raise BadParams(f"m = {m} must be in [1, {blocks * (k + 1)}]")
    eig = a.eig
    if x0s is None:
        x0s = [draw_initial_vector(a.n, cfg.x0_seed + 1000 * j, eig) for j in range(blocks)]
    if len(x0s) != blocks:
        raise BadParams(f"expected {blocks} starting vectors, got {len(x0s)}")

    first, second = [], []
    core_counters = None
    for x0 in x0s:
        st = initial_state(a, x0, cfg, k + 1)
        firsts, seconds = [], []
        for depth in range(k + 2):
            if depth:
                st = apply_once(st, a, cfg)
            if depth == k:
                core_counters = st.counters
            firsts.append(mark_flags(st, "first_bit"))
            seconds.append(mark_flags(st, "second_bit"))
        first.append(firsts)
        second.append(seconds)

    dim = blocks * (k + 1)
    S = np.zeros((dim, dim), dtype=np.complex128)
    H = np.zeros((dim, dim), dtype=np.complex128)
    counter = 0
    for p in range(blocks):
        for i in range(k + 1):
            row = p * (k + 1) + i
            for q in range(blocks):
                for j in range(k + 1):
                    col = q * (k + 1) + j
                    S[row, col] = overlap(first[p][i], second[q][j], shots, derive_seed(seed, counter)).value
                    H[row, col] = overlap(first[p][i], second[q][j + 1], shots, derive_seed(seed, counter, 1)).value
                    counter += 1
    S = (S + S.conj().T) / 2
    H = (H + H.conj().T) / 2
    theta, dropped = _ritz_values(S, H, KRYLOV_COND_RTOL)
    if theta.size < m:
        raise IllConditionedKrylov(f"only {theta.size} Krylov directions survive, need m = {m}")
    estimates = sorted((float(t) / cfg.C for t in theta), key=lambda t: (-abs(t), -t))[:m]
    oracle = sorted((float(x) for x in eig.eigenvalues), key=lambda t: (-abs(t), -t))[:m]
    err = max(_rel_error(e, o) for e, o in zip(estimates, oracle))
    warn = _degenerate_warning(eig)
    if dropped:
        warn.append(f"KrylovDirectionsDropped:{dropped}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSpectrumWarning)
        bound = convergence_bound(eig, x0s[0], delta)
    return EigenReport(
        mode="krylov",
        lambda_estimates=estimates,
        oracle_values=oracle,
        multiplicative_error=err,
        k_used=k,
        bound=bound,
        resources=_resources(core_counters, cfg, a.n, 2 * shots * 2 * counter),
        seeds={"x0_seeds": [x.seed for x in x0s], "shot_seed": seed},
        warnings=warn,
        details={"krylov_dimension": dim, "dropped_directions": dropped, "blocks": blocks, "m": m},
        config=config_dict(cfg),
    )


@dataclass(frozen=True)
class AccumulationResult:
    max_deviation: float
    bound: float
    trajectories: np.ndarray  # (trials, k + 1) deviations after each step
    scale: float


def error_accumulation_experiment(
    a: HermitianMatrix,
    x0: InitialVector,
    k: int,
    eps: float,
    trials: int,
    seed: int = 0,
    D: float | None = None,
) -> AccumulationResult:
    """Perturb every multiplication by a vector of norm ``eps`` and track the drift.

    ``A`` is divided by ``D`` (default: its spectral radius) so ``||A|| <= 1``.
    Even trials use random perturbation directions; odd trials push along the
    accumulated error, the worst case for its growth.
    """
    if eps < 0 or k < 1 or trials < 1:
        raise BadParams("need eps >= 0, k >= 1 and trials >= 1")
    radius = abs(a.eig.dominant)
    D = radius if D is None else D
    if radius > D * (1 + 1e-12) or D <= 0:
        raise OutOfBound(f"D = {D} does not bound the spectral radius {radius}")
    data = np.asarray(a.data) / D
    top = a.eig.eigenvectors[:, -1]
    rng = make_rng(seed)
    traj = np.zeros((trials, k + 1))
    for t in range(trials):
        exact = np.asarray(x0.vector, dtype=np.complex128)
        noisy = exact.copy()
        for r in range(1, k + 1):
            exact = data @ exact
            noisy = data @ noisy
            drift = noisy - exact
            if t % 2 and np.linalg.norm(drift) > 0:
                direction = drift
            elif t % 2:
                direction = top
            else:
                direction = rng.standard_normal(a.n) + 1j * rng.standard_normal(a.n)
            noisy = noisy + eps * direction / np.linalg.norm(direction)
            traj[t, r] = np.linalg.norm(noisy - exact)
    return AccumulationResult(float(traj[:, -1].max()), k * eps, traj, float(D))


def select_k(
    a: HermitianMatrix,
    cfg: PipelineConfig,
    delta: float,
    x0: InitialVector | None = None,
    blind: bool = False,
    shots: int = 0,
    seed: int = 0,
) -> tuple[int, list[str]]:
    """Iteration count when the caller does not fix one.

    Oracle mode uses the convergence bound. Blind mode doubles ``k`` until two
    successive estimates agree within ``delta / 2`` (relative).
    """
    notes: list[str] = []
    if x0 is None:
        x0 = draw_initial_vector(a.n, cfg.x0_seed, a.eig)
    if not blind:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateSpectrumWarning)
            k = convergence_bound(a.eig, x0, delta).k_required
        if k > MAX_AUTO_K:
            notes.append(f"KCapped:{k}->{MAX_AUTO_K}")
            k = MAX_AUTO_K
        return k, notes
    prev = None
    k = 1
    while k <= MAX_AUTO_K:
        est = quantum_estimate_max(a, replace(cfg, k=k), shots, x0=x0, seed=seed, delta=delta).lambda_estimates[0]
        if prev is not None and abs(est - prev) <= 0.5 * delta * abs(est):
            return k, notes
        prev = est
        k *= 2
    notes.append(f"BlindSearchCapped:{MAX_AUTO_K}")
    return MAX_AUTO_K, notes


def oracle_power_error_curve(a: HermitianMatrix, x0: InitialVector, ks) -> list[float]:
    """Multiplicative error of the classical estimate at each ``k``."""
    lam_n = a.eig.dominant
    return [_rel_error(classical_power_method(a, x0, k)[0], lam_n) for k in ks]


__all__ = [
    "AccumulationResult",
    "ConvergenceBound",
    "EigenReport",
    "OverlapEstimate",
    "classical_power_method",
    "convergence_bound",
    "error_accumulation_experiment",
    "krylov_few_eigenvalues",
    "quantum_estimate_max",
    "quantum_estimate_min",
    "quantum_estimate_shifted",
    "select_k",
]
