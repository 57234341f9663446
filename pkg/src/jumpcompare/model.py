"""Domain types for jump-diffusion SDE models and coupled comparison problems.

A model bundles a coefficient triple (drift, diffusion, jump amplitude), a
finite jump-mark measure stored as weighted atoms, and a regularity budget
(Lipschitz/growth constant ``mu`` plus per-atom jump Lipschitz constants
``rho``).  Two models over identical mark measures and noise dimensions form a
:class:`ComparisonProblem`, the unit of work for the condition checkers and
the Monte Carlo engine.

All types are immutable after construction and safe to share across workers;
every operation here is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "ModelError",
    "DimensionMismatch",
    "NegativeWeight",
    "ZeroMark",
    "OrderError",
    "MarkMeasure",
    "RegularityBudget",
    "AffineCoefficients",
    "CoefficientTriple",
    "SdeModel",
    "SampleDomain",
    "Tolerances",
    "ComparisonProblem",
    "validate_model",
    "lipschitz_certificate",
    "constant_C",
    "constant_Cstar",
    "operator_norm",
]


class ModelError(ValueError):
    """Base class for model construction / validation failures."""


class DimensionMismatch(ModelError):
    """Inconsistent shapes between coefficients, marks, or budget."""


class NegativeWeight(ModelError):
    """A mark atom carries a negative weight."""


class ZeroMark(ModelError):
    """A mark atom equals the zero vector (the mark space excludes 0)."""


class OrderError(ModelError):
    """Initial states violate the required ordering x1 >= x2."""


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Mark measure and regularity budget
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarkMeasure:
    """Finite jump-mark measure: weighted atoms in R^l minus the origin.

    ``marks`` has shape (n_atoms, dimension) and ``weights`` shape (n_atoms,).
    Total mass is finite by construction, which makes mark integrals exact
    finite sums and jump sampling a compound-Poisson draw.
    """

    dimension: int
    marks: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if int(self.dimension) < 1:
            raise DimensionMismatch("mark dimension must be a positive integer")
        marks = np.asarray(self.marks, dtype=float)
        if marks.size == 0:
            marks = np.zeros((0, self.dimension))
        marks = np.atleast_2d(marks)
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if marks.shape != (weights.shape[0], self.dimension):
            raise DimensionMismatch(
                f"marks shape {marks.shape} inconsistent with "
                f"{weights.shape[0]} weights in dimension {self.dimension}"
            )
        if not (np.all(np.isfinite(marks)) and np.all(np.isfinite(weights))):
            raise ModelError("marks and weights must be finite")
        if np.any(weights < 0.0):
            raise NegativeWeight("mark weights must be nonnegative")
        for row in marks:
            if np.all(row == 0.0):
                raise ZeroMark("mark atoms must be nonzero vectors")
        object.__setattr__(self, "marks", _frozen(marks))
        object.__setattr__(self, "weights", _frozen(weights))

    @classmethod
    def from_atoms(
        cls, atoms: Sequence[Tuple[Sequence[float], float]], dimension: Optional[int] = None
    ) -> "MarkMeasure":
        """Build from a list of (mark vector, weight) pairs."""
        if dimension is None:
            if not atoms:
                raise DimensionMismatch("dimension required for an empty atom list")
            dimension = len(np.atleast_1d(np.asarray(atoms[0][0], dtype=float)))
        marks = [np.atleast_1d(np.asarray(e, dtype=float)) for e, _ in atoms]
        weights = [float(w) for _, w in atoms]
        return cls(dimension=int(dimension), marks=np.array(marks).reshape(len(atoms), -1)
                   if atoms else np.zeros((0, dimension)), weights=np.array(weights))

    @property
    def n_atoms(self) -> int:
        return int(self.weights.shape[0])

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def atom(self, j: int) -> Tuple[np.ndarray, float]:
        return self.marks[j], float(self.weights[j])

    def same_atoms(self, other: "MarkMeasure") -> bool:
        return (
            self.dimension == other.dimension
            and np.array_equal(self.marks, other.marks)
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True)
class RegularityBudget:
    """Lipschitz/growth budget: ``mu`` for drift+diffusion, ``rho`` per atom."""

    mu: float
    rho: np.ndarray

    def __post_init__(self) -> None:
        mu = float(self.mu)
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        if rho.size == 0:
            rho = np.zeros(0)
        if not (math.isfinite(mu) and mu >= 0.0):
            raise ModelError("mu must be finite and nonnegative")
        if rho.size and (not np.all(np.isfinite(rho)) or np.any(rho < 0.0)):
            raise ModelError("rho entries must be finite and nonnegative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "rho", _frozen(rho))

    def jump_second_moment(self, marks: MarkMeasure) -> float:
        """Exact value of the mark integral of rho^2 over the atoms."""
        if self.rho.shape[0] != marks.n_atoms:
            raise DimensionMismatch(
                f"budget has {self.rho.shape[0]} rho entries for {marks.n_atoms} atoms"
            )
        return float(np.sum(marks.weights * self.rho**2))


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineCoefficients:
    """Closed-form affine coefficient family.

    drift(t, x)        = B x + c
    diffusion(t, x)    = einsum('kaj,j->ka', V, x) + U        (m x d matrix)
    jump(t, x, j)      = G[j] x + g[j]                        (per mark atom)

    The family is time-homogeneous; evaluation still accepts t so the
    call signatures match black-box coefficients.
    """

    B: np.ndarray  # (m, m)
    c: np.ndarray  # (m,)
    V: np.ndarray  # (m, d, m)
    U: np.ndarray  # (m, d)
    G: np.ndarray  # (n_atoms, m, m)
    g: np.ndarray  # (n_atoms, m)

    def __post_init__(self) -> None:
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        V = np.asarray(self.V, dtype=float)
        U = np.atleast_2d(np.asarray(self.U, dtype=float))
        G = np.asarray(self.G, dtype=float)
        g = np.asarray(self.g, dtype=float)
        m = B.shape[0]
        if B.shape != (m, m):
            raise DimensionMismatch("B must be square")
        if c.shape != (m,):
            raise DimensionMismatch("c must have shape (m,)")
        if V.ndim != 3 or V.shape[0] != m or V.shape[2] != m:
            raise DimensionMismatch("V must have shape (m, d, m)")
        d = V.shape[1]
        if U.shape != (m, d):
            raise DimensionMismatch("U must have shape (m, d)")
        if G.size == 0:
            G = np.zeros((0, m, m))
        if g.size == 0:
            g = np.zeros((0, m))
        if G.ndim != 3 or G.shape[1:] != (m, m):
            raise DimensionMismatch("G must have shape (n_atoms, m, m)")
        if g.shape != (G.shape[0], m):
            raise DimensionMismatch("g must have shape (n_atoms, m)")
        for name, arr in (("B", B), ("c", c), ("V", V), ("U", U), ("G", G), ("g", g)):
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"affine block {name} contains non-finite entries")
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "V", _frozen(V))
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "G", _frozen(G))
        object.__setattr__(self, "g", _frozen(g))

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def d(self) -> int:
        return self.V.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.G.shape[0]

    # single-point evaluation
    def drift(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.B @ x + self.c

    def diffusion(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.V @ x + self.U

    def jump(self, t: float, x: np.ndarray, j: int) -> np.ndarray:
        return self.G[j] @ x + self.g[j]

    # batch evaluation over rows of X, used by the vectorized engine
    def drift_rows(self, t: float, X: np.ndarray) -> np.ndarray:
        return X @ self.B.T + self.c

    def diffusion_rows(self, t: float, X: np.ndarray) -> np.ndarray:
        return np.einsum("kaj,pj->pka", self.V, X) + self.U

    def net_drift_blocks(self, marks: MarkMeasure) -> Tuple[np.ndarray, np.ndarray]:
        """Linear part and constant of the compensator-adjusted drift b - sum(w*gamma)."""
        M = self.B.copy()
        dvec = self.c.copy()
        for j in range(self.n_atoms):
            w = marks.weights[j]
            M -= w * self.G[j]
            dvec -= w * self.g[j]
        return M, dvec


@dataclass(frozen=True)
class CoefficientTriple:
    """Evaluatable coefficients (b, sigma, gamma) of one SDE.

    ``drift(t, x) -> R^m``, ``diffusion(t, x) -> R^(m x d)``,
    ``gamma(t, x, atom_index) -> R^m``.  Evaluation must be pure.  When an
    affine parameterization is attached, black-box and affine evaluation must
    agree pointwise (sample-tested, not enforced here).
    """

    m: int
    d: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: Callable[[float, np.ndarray], np.ndarray]
    jump: Callable[[float, np.ndarray, int], np.ndarray]
    affine: Optional[AffineCoefficients] = None

    @classmethod
    def from_affine(cls, affine: AffineCoefficients) -> "CoefficientTriple":
        return cls(
            m=affine.m,
            d=affine.d,
            drift=affine.drift,
            diffusion=affine.diffusion,
            jump=affine.jump,
            affine=affine,
        )

    def b(self, t: float, x) -> np.ndarray:
        return np.asarray(self.drift(t, np.asarray(x, dtype=float)), dtype=float).reshape(self.m)

    def sigma(self, t: float, x) -> np.ndarray:
        out = np.asarray(self.diffusion(t, np.asarray(x, dtype=float)), dtype=float)
        return out.reshape(self.m, self.d)

    def gamma(self, t: float, x, j: int) -> np.ndarray:
        return np.asarray(self.jump(t, np.asarray(x, dtype=float), j), dtype=float).reshape(self.m)


@dataclass(frozen=True)
class SdeModel:
    """One SDE: coefficients plus mark measure plus regularity budget."""

    coefficients: CoefficientTriple
    marks: MarkMeasure
    budget: RegularityBudget

    @property
    def m(self) -> int:
        return self.coefficients.m

    @property
    def d(self) -> int:
        return self.coefficients.d

    @property
    def is_affine(self) -> bool:
        return self.coefficients.affine is not None


# ---------------------------------------------------------------------------
# Sampling domains, tolerances, comparison problems
# ---------------------------------------------------------------------------

DEFAULT_LADDER = (1e-6, 1e-4, 1e-2, 1e-1, 1.0)


@dataclass(frozen=True)
class SampleDomain:
    """Where the randomized checkers draw their probes.

    ``box`` is the half-width R of the sampling box, ``count`` the random probe
    budget on top of the structured ladder probes, ``ladder`` the mandatory
    magnitude scales for near-boundary probing.
    """

    box: float = 10.0
    count: int = 512
    ladder: Tuple[float, ...] = DEFAULT_LADDER
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.box > 0.0):
            raise ModelError("sample box half-width must be positive")
        if int(self.count) < 1:
            raise ModelError("sample count must be >= 1")
        if not all(s > 0 for s in self.ladder):
            raise ModelError("ladder scales must be positive")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "ladder", tuple(float(s) for s in self.ladder))

    def scales(self) -> Tuple[float, ...]:
        """Ladder plus the box half-width, deduplicated, ascending."""
        vals = sorted(set(self.ladder) | {float(self.box)})
        return tuple(vals)


@dataclass(frozen=True)
class Tolerances:
    """Numeric slack knobs.

    ``eps_check``: inequality slack for analytic checks (None resolves to
    1e-9 for affine-exact comparisons, 1e-6 for black-box sampling).
    ``eps_path``: pathwise violation threshold (None resolves to the
    step-dependent default 5*sqrt(h)*(1+|x1|+|x2|)).
    ``eps_lin``: floating-point equality tolerance.
    """

    eps_check: Optional[float] = None
    eps_path: Optional[float] = None
    eps_lin: float = 1e-12

    def __post_init__(self) -> None:
        for name in ("eps_check", "eps_path"):
            v = getattr(self, name)
            if v is not None and not (float(v) > 0.0):
                raise ModelError(f"{name} must be strictly positive when given")
        if not (self.eps_lin > 0.0):
            raise ModelError("eps_lin must be strictly positive")

    def resolved_eps_check(self, affine: bool) -> float:
        if self.eps_check is not None:
            return float(self.eps_check)
        return 1e-9 if affine else 1e-6


@dataclass(frozen=True)
class ComparisonProblem:
    """Two models driven by shared noise, with ordered initial states.

    ``ordering="componentwise"`` enforces x1 >= x2 coordinatewise (the vector
    problem).  ``ordering="none"`` skips the check; used internally when a
    matrix problem is embedded on symmetric-matrix coordinates, where order
    means the PSD cone and is validated upstream.
    """

    model1: SdeModel
    model2: SdeModel
    t0: float
    T: float
    x1: np.ndarray
    x2: np.ndarray
    sampling: SampleDomain = field(default_factory=SampleDomain)
    tolerances: Tolerances = field(default_factory=Tolerances)
    ordering: str = "componentwise"

    def __post_init__(self) -> None:
        validate_model(self.model1)
        validate_model(self.model2)
        if self.model1.m != self.model2.m or self.model1.d != self.model2.d:
            raise DimensionMismatch("the two models must share state and noise dimensions")
        if not self.model1.marks.same_atoms(self.model2.marks):
            raise DimensionMismatch(
                "the two models must share the same mark atoms and weights (shared driver)"
            )
        if not (0.0 <= self.t0 < self.T):
            raise ModelError("horizon must satisfy 0 <= t0 < T")
        x1 = np.atleast_1d(np.asarray(self.x1, dtype=float))
        x2 = np.atleast_1d(np.asarray(self.x2, dtype=float))
        if x1.shape != (self.model1.m,) or x2.shape != (self.model1.m,):
            raise DimensionMismatch("initial states must be vectors of length m")
        if self.ordering not in ("componentwise", "none"):
            raise ModelError("ordering must be 'componentwise' or 'none'")
        if self.ordering == "componentwise" and np.any(x1 < x2):
            raise OrderError("initial states must satisfy x1 >= x2 componentwise")
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "x1", _frozen(x1))
        object.__setattr__(self, "x2", _frozen(x2))

    @property
    def m(self) -> int:
        return self.model1.m

    @property
    def d(self) -> int:
        return self.model1.d

    @property
    def marks(self) -> MarkMeasure:
        return self.model1.marks

    @property
    def horizon(self) -> Tuple[float, float]:
        return (self.t0, self.T)

    @property
    def is_affine(self) -> bool:
        return self.model1.is_affine and self.model2.is_affine

    def shared_budget(self) -> RegularityBudget:
        """Componentwise max of the two budgets: one (mu, rho) covering both models."""
        b1, b2 = self.model1.budget, self.model2.budget
        return RegularityBudget(
            mu=max(b1.mu, b2.mu),
            rho=np.maximum(b1.rho, b2.rho) if b1.rho.size else b1.rho,
        )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def validate_model(model: SdeModel) -> None:
    """Check dimension consistency and the finite-budget invariants.

    Raises DimensionMismatch / NegativeWeight / ZeroMark.  Idempotent and
    side-effect free; mark-measure internal invariants were already enforced
    at construction and are re-checked here for callers that bypass it.
    """
    coeffs = model.coefficients
    marks = model.marks
    if marks.n_atoms and np.any(marks.weights < 0.0):
        raise NegativeWeight("mark weights must be nonnegative")
    for row in marks.marks:
        if np.all(row == 0.0):
            raise ZeroMark("mark atoms must be nonzero vectors")
    if model.budget.rho.shape[0] != marks.n_atoms:
        raise DimensionMismatch(
            f"budget carries {model.budget.rho.shape[0]} rho entries "
            f"for {marks.n_atoms} mark atoms"
        )
    if not math.isfinite(model.budget.jump_second_moment(marks)):
        raise ModelError("sum of w*rho^2 over atoms must be finite")
    if coeffs.affine is not None:
        aff = coeffs.affine
        if aff.m != coeffs.m or aff.d != coeffs.d:
            raise DimensionMismatch("affine block dimensions disagree with the triple")
        if aff.n_atoms != marks.n_atoms:
            raise DimensionMismatch(
                f"affine jump blocks cover {aff.n_atoms} atoms, marks have {marks.n_atoms}"
            )
    # probe evaluation at a fixed point pins down output shapes
    x0 = np.zeros(coeffs.m)
    b0 = np.asarray(coeffs.drift(0.0, x0), dtype=float)
    if b0.reshape(-1).shape != (coeffs.m,):
        raise DimensionMismatch(f"drift output shape {b0.shape} != ({coeffs.m},)")
    s0 = np.asarray(coeffs.diffusion(0.0, x0), dtype=float)
    if s0.reshape(-1).shape != (coeffs.m * coeffs.d,):
        raise DimensionMismatch(
            f"diffusion output shape {s0.shape} incompatible with ({coeffs.m}, {coeffs.d})"
        )
    for j in range(marks.n_atoms):
        g0 = np.asarray(coeffs.jump(0.0, x0, j), dtype=float)
        if g0.reshape(-1).shape != (coeffs.m,):
            raise DimensionMismatch(f"jump output shape {g0.shape} != ({coeffs.m},) at atom {j}")


def operator_norm(mat, rel_tol: float = 1e-10, max_iter: int = 20_000) -> float:
    """Largest singular value by power iteration on the Gram matrix.

    Deterministic seeded start vector; stops when the Rayleigh quotient is
    stationary to ``rel_tol``.  Exact 0 for the zero matrix.
    """
    a = np.atleast_2d(np.asarray(mat, dtype=float))
    if a.size == 0 or not np.any(a):
        return 0.0
    gram = a.T @ a
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    prev = -1.0
    cur = 0.0
    for _ in range(max_iter):
        w = gram @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            # start vector fell in the null space; redraw deterministically
            v = rng.standard_normal(gram.shape[0])
            v /= np.linalg.norm(v)
            prev = -1.0
            continue
        v = w / nw
        cur = float(v @ (gram @ v))
        if prev >= 0.0 and abs(cur - prev) <= rel_tol * max(cur, 1e-300):
            break
        prev = cur
    return math.sqrt(max(cur, 0.0))


def lipschitz_certificate(affine: AffineCoefficients, marks: MarkMeasure) -> RegularityBudget:
    """Certified regularity budget for an affine family.

    mu = max( opnorm(B) + opnorm(stacked V),  |c| + fro(U) ): the first arm
    bounds the Lipschitz constant of x -> (b, sigma) jointly, the second the
    constant part of the growth bound.  rho_j = opnorm(G_j).
    """
    if affine.n_atoms != marks.n_atoms:
        raise DimensionMismatch(
            f"affine jump blocks cover {affine.n_atoms} atoms, marks have {marks.n_atoms}"
        )
    lin = operator_norm(affine.B) + operator_norm(
        affine.V.reshape(affine.m * affine.d, affine.m)
    )
    const = float(np.linalg.norm(affine.c)) + float(np.linalg.norm(affine.U))
    rho = np.array([operator_norm(affine.G[j]) for j in range(affine.n_atoms)])
    return RegularityBudget(mu=max(lin, const), rho=rho)


def constant_C(budget: RegularityBudget, marks: MarkMeasure) -> float:
    """1 + 2*mu + mu^2 + sum_j w_j rho_j^2, evaluated exactly over the atoms."""
    mu = budget.mu
    return 1.0 + 2.0 * mu + mu * mu + budget.jump_second_moment(marks)


def constant_Cstar(budget: RegularityBudget, marks: MarkMeasure) -> float:
    """4*mu + mu^2 + sum_j w_j rho_j^2, evaluated exactly over the atoms."""
    mu = budget.mu
    return 4.0 * mu + mu * mu + budget.jump_second_moment(marks)
