"""Symmetric-matrix geometry and the matrix-valued comparison condition.

Spectral machinery (cyclic Jacobi eigensolver, positive/negative spectral
splits, squared distance to the PSD cone, its gradient, and the
divided-difference Hessian quadratic form) plus the pointwise matrix
inequality checker and the svec-embedded Monte Carlo runner.

The Hessian quadratic form uses the spectral divided-difference formula for
the separable spectral function lambda -> (negative part)^2, with a
central-difference fallback and a degeneracy flag near zero eigenvalues,
where the squared distance stops being twice differentiable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import engine
from .conditions import Verdict, Witness
from .model import (
    AffineCoefficients,
    CoefficientTriple,
    ComparisonProblem,
    DimensionMismatch,
    MarkMeasure,
    ModelError,
    OrderError,
    RegularityBudget,
    SampleDomain,
    SdeModel,
    Tolerances,
    constant_Cstar,
)

__all__ = [
    "NoConvergence",
    "SymMatrix",
    "EigDecomp",
    "HessQuadForm",
    "Theorem37Value",
    "MatrixLinearMap",
    "MatrixLinearBlocks",
    "MatrixCoefficients",
    "MatrixModel",
    "MatrixComparisonProblem",
    "svec",
    "unsvec",
    "eig_sym",
    "psd_split",
    "dist2_psd",
    "grad_dist2_psd",
    "hess_quadform_psd",
    "eval_theorem37",
    "check_theorem37",
    "mc_matrix_comparison",
    "matrix_certificate",
    "spectral_violation_stat",
]


class NoConvergence(RuntimeError):
    """Jacobi sweeps exhausted before the off-diagonal mass dropped below
    tolerance; carries the remaining residual."""

    def __init__(self, residual: float):
        super().__init__(f"eigensolver did not converge; off-diagonal residual {residual:g}")
        self.residual = float(residual)


# ---------------------------------------------------------------------------
# storage and embeddings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric matrix with structurally symmetric packed storage
    (upper triangle, row-major, diagonal included)."""

    order: int
    packed: np.ndarray

    def __post_init__(self) -> None:
        n = int(self.order)
        packed = np.atleast_1d(np.asarray(self.packed, dtype=float))
        if packed.shape != (n * (n + 1) // 2,):
            raise DimensionMismatch(
                f"packed storage must have length {n * (n + 1) // 2}, got {packed.shape}"
            )
        if not np.all(np.isfinite(packed)):
            raise ModelError("symmetric matrix entries must be finite")
        packed = packed.copy()
        packed.setflags(write=False)
        object.__setattr__(self, "order", n)
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_full(cls, arr, rtol: float = 1e-8) -> "SymMatrix":
        a = np.atleast_2d(np.asarray(arr, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n):
            raise DimensionMismatch("matrix must be square")
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        if float(np.max(np.abs(a - a.T))) > rtol * (1.0 + scale):
            raise ModelError("matrix is not symmetric")
        sym = 0.5 * (a + a.T)
        iu = np.triu_indices(n)
        return cls(order=n, packed=sym[iu])

    def full(self) -> np.ndarray:
        n = self.order
        out = np.zeros((n, n))
        iu = np.triu_indices(n)
        out[iu] = self.packed
        out.T[iu] = self.packed
        return out

    def __array__(self, dtype=None):
        out = self.full()
        return out.astype(dtype) if dtype is not None else out


def _as_full(y) -> np.ndarray:
    if isinstance(y, SymMatrix):
        return y.full()
    return SymMatrix.from_full(y).full()


def svec(Y) -> np.ndarray:
    """Isometric embedding of a symmetric matrix onto the orthonormal basis
    of diagonal units and scaled off-diagonal pairs (off-diagonals x sqrt2)."""
    Yf = _as_full(Y)
    n = Yf.shape[0]
    iu = np.triu_indices(n, k=1)
    return np.concatenate([np.diag(Yf), math.sqrt(2.0) * Yf[iu]])


def unsvec(v, m: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (m * (m + 1) // 2,):
        raise DimensionMismatch(f"svec vector must have length {m * (m + 1) // 2}")
    out = np.zeros((m, m))
    np.fill_diagonal(out, v[:m])
    iu = np.triu_indices(m, k=1)
    off = v[m:] / math.sqrt(2.0)
    out[iu] = off
    out.T[iu] = off
    return out


def _unsvec_rows(rows: np.ndarray, m: int) -> np.ndarray:
    K = rows.shape[0]
    out = np.zeros((K, m, m))
    idx = np.arange(m)
    out[:, idx, idx] = rows[:, :m]
    iu = np.triu_indices(m, k=1)
    off = rows[:, m:] / math.sqrt(2.0)
    out[:, iu[0], iu[1]] = off
    out[:, iu[1], iu[0]] = off
    return out


# ---------------------------------------------------------------------------
# spectral kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigDecomp:
    """Orthogonal eigenbasis with ascending eigenvalues."""

    Q: np.ndarray
    lam: np.ndarray


def eig_sym(y, *, tol_factor: float = 1e-13, max_sweeps: int = 50) -> EigDecomp:
    """Cyclic Jacobi eigendecomposition.

    Rotations sweep the strict upper triangle until the off-diagonal
    Frobenius mass drops below tol_factor times the input norm.  Chosen for
    determinism and adequacy at small orders; raises NoConvergence with the
    residual if the budget of sweeps runs out.
    """
    A = _as_full(y).copy()
    n = A.shape[0]
    Q = np.eye(n)
    base = float(np.linalg.norm(A))
    if n == 1 or base == 0.0:
        lam = np.diag(A).copy()
        order = np.argsort(lam, kind="stable")
        return EigDecomp(Q=Q[:, order], lam=lam[order])
    threshold = tol_factor * base

    def off_mass() -> float:
        return float(np.linalg.norm(A - np.diag(np.diag(A))))

    converged = off_mass() <= threshold
    for _ in range(max_sweeps):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0
                qp = Q[:, p].copy()
                qq = Q[:, q].copy()
                Q[:, p] = c * qp - s * qq
                Q[:, q] = s * qp + c * qq
        converged = off_mass() <= threshold
    if not converged:
        raise NoConvergence(off_mass())
    lam = np.diag(A).copy()
    order = np.argsort(lam, kind="stable")
    return EigDecomp(Q=Q[:, order], lam=lam[order])


def psd_split(y) -> Tuple[SymMatrix, SymMatrix]:
    """Spectral split y = y_plus - y_minus with both parts PSD."""
    dec = eig_sym(y)
    lam_plus = np.maximum(dec.lam, 0.0)
    lam_minus = np.maximum(-dec.lam, 0.0)
    yp = (dec.Q * lam_plus) @ dec.Q.T
    ym = (dec.Q * lam_minus) @ dec.Q.T
    return (
        SymMatrix.from_full(0.5 * (yp + yp.T)),
        SymMatrix.from_full(0.5 * (ym + ym.T)),
    )


def dist2_psd(y) -> float:
    """Squared Frobenius distance to the PSD cone: sum of squared negative
    eigenvalue parts."""
    dec = eig_sym(y)
    neg = np.minimum(dec.lam, 0.0)
    return float(np.dot(neg, neg))


def grad_dist2_psd(y) -> SymMatrix:
    """Gradient of dist2_psd: -2 times the negative spectral part."""
    _, ym = psd_split(y)
    return SymMatrix.from_full(-2.0 * ym.full())


@dataclass(frozen=True)
class HessQuadForm:
    """Quadratic form value of the a.e. second derivative, with a flag when
    eigenvalues sit inside the degeneracy band and the value came from the
    finite-difference fallback."""

    value: float
    degenerate: bool


def hess_quadform_psd(y, H, eta_sep: float = 1e-8) -> HessQuadForm:
    """Second-derivative quadratic form of dist2_psd at y applied to (H, H).

    In the eigenbasis: sum_i phi''(lam_i) Ht_ii^2 plus the off-diagonal
    divided differences of phi'(lam) = -2 lam^-, with phi''(lam_i) used for
    coincident eigenvalues.  Near-zero eigenvalues (|lam| <= eta_sep) trigger
    the central-difference fallback and set the degenerate flag.
    """
    yf = _as_full(y)
    Hf = _as_full(H)
    dec = eig_sym(yf)
    lam = dec.lam
    if lam.size and float(np.min(np.abs(lam))) <= eta_sep:
        hnorm = float(np.linalg.norm(Hf))
        s = 1e-4 * (1.0 + float(np.linalg.norm(yf))) / max(hnorm, 1e-12)
        val = (dist2_psd(yf + s * Hf) - 2.0 * dist2_psd(yf) + dist2_psd(yf - s * Hf)) / (s * s)
        return HessQuadForm(value=float(val), degenerate=True)
    Ht = dec.Q.T @ Hf @ dec.Q
    phi1 = 2.0 * np.minimum(lam, 0.0)  # derivative of (negative part)^2
    phi2 = np.where(lam < 0.0, 2.0, 0.0)
    den = lam[:, None] - lam[None, :]
    num = phi1[:, None] - phi1[None, :]
    scale = 1e-12 * (1.0 + float(np.max(np.abs(lam))))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(den) > scale, num / np.where(den == 0.0, 1.0, den), 0.0)
    D = np.where(np.abs(den) > scale, ratio, np.broadcast_to(phi2[:, None], den.shape))
    off = ~np.eye(lam.size, dtype=bool)
    val = float(np.sum(phi2 * np.diag(Ht) ** 2) + np.sum((D * Ht**2)[off]))
    return HessQuadForm(value=val, degenerate=False)


# ---------------------------------------------------------------------------
# matrix models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatrixLinearMap:
    """Scalar-linear symmetric map y -> scale*y + offset."""

    scale: float
    offset: np.ndarray

    def __post_init__(self) -> None:
        off = _as_full(self.offset)
        off.setflags(write=False)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "offset", off)

    def apply(self, y: np.ndarray) -> np.ndarray:
        return self.scale * y + self.offset


@dataclass(frozen=True)
class MatrixLinearBlocks:
    b: MatrixLinearMap
    sigma: MatrixLinearMap
    jumps: Tuple[MatrixLinearMap, ...] = ()


@dataclass(frozen=True)
class MatrixCoefficients:
    """Coefficients mapping symmetric matrices to symmetric matrices, d=1."""

    m: int
    b: Callable[[float, np.ndarray], np.ndarray]
    sigma: Callable[[float, np.ndarray], np.ndarray]
    gamma: Callable[[float, np.ndarray, int], np.ndarray]
    linear: Optional[MatrixLinearBlocks] = None

    @classmethod
    def from_linear(cls, m: int, blocks: MatrixLinearBlocks) -> "MatrixCoefficients":
        return cls(
            m=m,
            b=lambda t, y: blocks.b.apply(y),
            sigma=lambda t, y: blocks.sigma.apply(y),
            gamma=lambda t, y, j: blocks.jumps[j].apply(y),
            linear=blocks,
        )


@dataclass(frozen=True)
class MatrixModel:
    coefficients: MatrixCoefficients
    marks: MarkMeasure
    budget: RegularityBudget

    @property
    def m(self) -> int:
        return self.coefficients.m


def matrix_certificate(blocks: MatrixLinearBlocks, marks: MarkMeasure) -> RegularityBudget:
    """Certified budget for the scalar-linear matrix family (Frobenius norms
    on symmetric matrices match Euclidean norms on svec coordinates)."""
    lin = abs(blocks.b.scale) + abs(blocks.sigma.scale)
    const = float(np.linalg.norm(blocks.b.offset)) + float(np.linalg.norm(blocks.sigma.offset))
    rho = np.array([abs(j.scale) for j in blocks.jumps])
    if rho.shape[0] != marks.n_atoms:
        raise DimensionMismatch(
            f"{rho.shape[0]} jump blocks for {marks.n_atoms} mark atoms"
        )
    return RegularityBudget(mu=max(lin, const), rho=rho)


@dataclass(frozen=True)
class MatrixComparisonProblem:
    """Two matrix models with PSD-ordered initial states."""

    model1: MatrixModel
    model2: MatrixModel
    t0: float
    T: float
    x1: np.ndarray
    x2: np.ndarray
    sampling: SampleDomain = field(default_factory=SampleDomain)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self) -> None:
        if self.model1.m != self.model2.m:
            raise DimensionMismatch("matrix models must share the order m")
        if not self.model1.marks.same_atoms(self.model2.marks):
            raise DimensionMismatch("matrix models must share the mark measure")
        if not (0.0 <= self.t0 < self.T):
            raise ModelError("horizon must satisfy 0 <= t0 < T")
        x1 = _as_full(self.x1)
        x2 = _as_full(self.x2)
        if x1.shape != (self.model1.m,) * 2 or x2.shape != (self.model1.m,) * 2:
            raise DimensionMismatch("initial states must be symmetric m x m matrices")
        diff = x1 - x2
        lam_min = float(eig_sym(diff).lam[0])
        if lam_min < -1e-10 * (1.0 + float(np.linalg.norm(diff))):
            raise OrderError("initial states must satisfy x1 >= x2 in the PSD order")
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    @property
    def m(self) -> int:
        return self.model1.m

    @property
    def marks(self) -> MarkMeasure:
        return self.model1.marks

    @property
    def horizon(self) -> Tuple[float, float]:
        return (self.t0, self.T)

    def shared_budget(self) -> RegularityBudget:
        b1, b2 = self.model1.budget, self.model2.budget
        return RegularityBudget(
            mu=max(b1.mu, b2.mu),
            rho=np.maximum(b1.rho, b2.rho) if b1.rho.size else b1.rho,
        )


# ---------------------------------------------------------------------------
# the matrix inequality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theorem37Value:
    lhs: float
    rhs: float
    degenerate: bool


def eval_theorem37(
    problem: MatrixComparisonProblem, t: float, x, x_prime
) -> Theorem37Value:
    """Pointwise matrix inequality at (t, x, x') under the trace inner product.

    The drift gap pairs with -4 times the negative spectral part of x; the
    diffusion gap enters through the Hessian quadratic form evaluated at x;
    jump gaps enter through exact atom sums of cone-distance differences.
    """
    c1 = problem.model1.coefficients
    c2 = problem.model2.coefficients
    marks = problem.marks
    xf = _as_full(x)
    xpf = _as_full(x_prime)
    dec = eig_sym(xf)
    lam_minus = np.maximum(-dec.lam, 0.0)
    x_minus = (dec.Q * lam_minus) @ dec.Q.T
    x_minus = 0.5 * (x_minus + x_minus.T)
    x_plus = xf + x_minus
    xm_norm2 = float(np.dot(lam_minus, lam_minus))

    b_gap = np.asarray(c1.b(t, x_plus + xpf), dtype=float) - np.asarray(
        c2.b(t, xpf), dtype=float
    )
    lhs = -4.0 * float(np.trace(x_minus @ b_gap))

    s_gap = np.asarray(c1.sigma(t, xf + xpf), dtype=float) - np.asarray(
        c2.sigma(t, xpf), dtype=float
    )
    hq = hess_quadform_psd(xf, 0.5 * (s_gap + s_gap.T))
    lhs += hq.value

    jump = 0.0
    for j in range(marks.n_atoms):
        w = float(marks.weights[j])
        if w == 0.0:
            continue
        dgap = np.asarray(c1.gamma(t, xf + xpf, j), dtype=float) - np.asarray(
            c2.gamma(t, xpf, j), dtype=float
        )
        dgap = 0.5 * (dgap + dgap.T)
        z = xf + dgap
        jump += w * (dist2_psd(z) - xm_norm2 + 2.0 * float(np.trace(x_minus @ dgap)))
    lhs += 2.0 * jump

    cstar = constant_Cstar(problem.shared_budget(), marks)
    rhs = cstar * xm_norm2
    return Theorem37Value(lhs=float(lhs), rhs=float(rhs), degenerate=hq.degenerate)


def _random_orthogonal(rng: np.random.Generator, m: int) -> np.ndarray:
    A = rng.standard_normal((m, m))
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.diag(R))


def check_theorem37(problem: MatrixComparisonProblem) -> Verdict:
    """Sampled check of the matrix inequality over eigenvalue ladders.

    Samples x with controlled spectra (all sign patterns, plus one small
    negative eigenvalue against an O(1) positive rest) in both the standard
    and random orthogonal bases; near-degenerate samples are flagged and
    excluded from Violated decisions.
    """
    eps = problem.tolerances.resolved_eps_check(False)
    rng = np.random.default_rng((int(problem.sampling.seed) << 8) ^ 0x37)
    m = problem.m
    box = problem.sampling.box
    scales = problem.sampling.scales()
    patterns = [np.array(p, dtype=float) for p in itertools.product((-1.0, 1.0), repeat=m)]
    reps = max(2, problem.sampling.count // max(1, len(patterns) * len(scales) * 2))

    witnesses: List[Witness] = []
    samples = 0
    degenerate_skipped = 0

    def probe(t, lam, basis_random: bool, xp):
        nonlocal samples, degenerate_skipped
        Q = _random_orthogonal(rng, m) if basis_random else np.eye(m)
        xmat = (Q * lam) @ Q.T
        xmat = 0.5 * (xmat + xmat.T)
        res = eval_theorem37(problem, t, xmat, xp)
        samples += 1
        if res.degenerate:
            degenerate_skipped += 1
            return
        if res.lhs > res.rhs + eps:
            witnesses.append(
                Witness(t=t, x=tuple(svec(xmat)), x_prime=tuple(svec(xp)), atom=None,
                        margin=float(res.rhs - res.lhs), kind="theorem37")
            )

    for pattern in patterns:
        for scale in scales:
            for r in range(reps):
                lam = scale * pattern * rng.uniform(0.5, 1.0, m)
                xp = (
                    np.zeros((m, m))
                    if r == 0
                    else 0.5 * (lambda A: A + A.T)(rng.uniform(-box, box, (m, m)))
                )
                t = float(rng.uniform(problem.t0, problem.T))
                probe(t, lam, basis_random=(r % 2 == 1), xp=xp)
    # one small negative eigenvalue against an O(1) positive rest
    for k in range(m):
        for scale in scales:
            for mag in (1.0, box):
                lam = mag * rng.uniform(0.5, 1.0, m)
                lam[k] = -scale
                for use_zero_xp in (True, False):
                    xp = (
                        np.zeros((m, m))
                        if use_zero_xp
                        else 0.5 * (lambda A: A + A.T)(rng.uniform(-box, box, (m, m)))
                    )
                    t = float(rng.uniform(problem.t0, problem.T))
                    probe(t, lam, basis_random=use_zero_xp, xp=xp)

    if witnesses:
        return Verdict.from_witnesses(witnesses, samples)
    return Verdict.clean(samples)


# ---------------------------------------------------------------------------
# Monte Carlo on svec coordinates
# ---------------------------------------------------------------------------


def spectral_violation_stat(m: int) -> Callable[[np.ndarray], np.ndarray]:
    """Per-path signed violation measure on svec rows of X2 - X1: the largest
    eigenvalue of the un-embedded difference (equals -lambda_min(X1 - X2))."""

    def stat(rows: np.ndarray) -> np.ndarray:
        fin = np.isfinite(rows).all(axis=1)
        safe = np.where(fin[:, None], rows, 0.0)
        Y = _unsvec_rows(safe, m)
        w = np.linalg.eigvalsh(Y)
        out = w[:, -1].copy()
        out[~fin] = np.nan
        return out

    return stat


def _svec_affine(blocks: MatrixLinearBlocks, m: int) -> AffineCoefficients:
    M = m * (m + 1) // 2
    idx = np.arange(M)
    B = blocks.b.scale * np.eye(M)
    c = svec(blocks.b.offset)
    V = np.zeros((M, 1, M))
    V[idx, 0, idx] = blocks.sigma.scale
    U = svec(blocks.sigma.offset).reshape(M, 1)
    if blocks.jumps:
        G = np.stack([jm.scale * np.eye(M) for jm in blocks.jumps])
        g = np.stack([svec(jm.offset) for jm in blocks.jumps])
    else:
        G = np.zeros((0, M, M))
        g = np.zeros((0, M))
    return AffineCoefficients(B=B, c=c, V=V, U=U, G=G, g=g)


def _vector_model(model: MatrixModel) -> SdeModel:
    m = model.m
    M = m * (m + 1) // 2
    mc = model.coefficients
    if mc.linear is not None:
        triple = CoefficientTriple.from_affine(_svec_affine(mc.linear, m))
    else:
        def b_vec(t, v):
            return svec(np.asarray(mc.b(t, unsvec(v, m)), dtype=float))

        def s_vec(t, v):
            return svec(np.asarray(mc.sigma(t, unsvec(v, m)), dtype=float)).reshape(M, 1)

        def g_vec(t, v, j):
            return svec(np.asarray(mc.gamma(t, unsvec(v, m), j), dtype=float))

        triple = CoefficientTriple(m=M, d=1, drift=b_vec, diffusion=s_vec, jump=g_vec)
    return SdeModel(coefficients=triple, marks=model.marks, budget=model.budget)


def mc_matrix_comparison(
    problem: MatrixComparisonProblem, paths: int, h: float, seed: int, *,
    keep_paths: bool = False,
) -> engine.McReport:
    """Coupled matrix Monte Carlo: embed on svec coordinates (d = 1), reuse
    the vector engine, and measure violations through the smallest eigenvalue
    of the difference.  Thresholds follow the vector defaults (the svec
    embedding is an isometry, so |x| means the Frobenius norm)."""
    vec_problem = ComparisonProblem(
        model1=_vector_model(problem.model1),
        model2=_vector_model(problem.model2),
        t0=problem.t0,
        T=problem.T,
        x1=svec(problem.x1),
        x2=svec(problem.x2),
        sampling=problem.sampling,
        tolerances=problem.tolerances,
        ordering="none",
    )
    return engine.mc_comparison(
        vec_problem, paths, h, seed,
        stat_fn=spectral_violation_stat(problem.m),
        keep_paths=keep_paths,
    )
