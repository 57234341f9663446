"""Checkers for the necessary-and-sufficient comparison conditions.

Two complementary routes are implemented and cross-checked:

* the structural battery: equality of diffusions, per-coordinate diffusion
  decoupling (a), the jump-monotonicity inequality (b), and the
  compensator-adjusted drift order with quasimonotone coupling (c);
* the single integro-differential inequality ("ii-prime") that the battery is
  equivalent to, evaluated pointwise with exact mark-atom integrals and
  sampled over sign patterns and a magnitude ladder biased toward the origin,
  where violations of the necessary conditions concentrate.

On affine coefficient families the battery is decided exactly (verdict
``holds``); black-box coefficients are only ever sampled, so the strongest
clean verdict is ``no-violation-found``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import (
    ComparisonProblem,
    constant_Cstar,
)

__all__ = [
    "HOLDS",
    "NO_VIOLATION",
    "VIOLATED",
    "DimensionError",
    "VariantPreconditionError",
    "Witness",
    "Verdict",
    "Theorem31Report",
    "check_sigma_equal",
    "check_condition_a",
    "check_condition_b",
    "check_condition_c",
    "eval_ii_prime",
    "ii_prime_terms",
    "check_ii_prime",
    "check_theorem31",
    "check_corollary_1d",
    "combine_statuses",
]

HOLDS = "holds"
NO_VIOLATION = "no-violation-found"
VIOLATED = "violated"

_MAX_WITNESSES = 8


class DimensionError(ValueError):
    """A one-dimensional checker was applied to a multi-dimensional problem."""


class VariantPreconditionError(ValueError):
    """The jump structure does not match the requested corollary variant."""


@dataclass(frozen=True)
class Witness:
    """A concrete probe where a condition fails (margin < 0)."""

    t: float
    x: Tuple[float, ...]
    x_prime: Tuple[float, ...]
    atom: Optional[int]
    margin: float
    kind: str = ""


@dataclass(frozen=True)
class Verdict:
    """Outcome of one condition check.

    ``holds`` is only ever produced by the affine-exact oracle; sampling can
    at best report ``no-violation-found``.  A ``violated`` verdict carries at
    least one witness with a negative margin.
    """

    status: str
    witnesses: Tuple[Witness, ...] = ()
    samples_used: int = 0

    @property
    def violated(self) -> bool:
        return self.status == VIOLATED

    @property
    def worst_margin(self) -> float:
        if not self.witnesses:
            return float("inf")
        return min(w.margin for w in self.witnesses)

    @classmethod
    def exact_holds(cls) -> "Verdict":
        return cls(status=HOLDS)

    @classmethod
    def clean(cls, samples: int) -> "Verdict":
        return cls(status=NO_VIOLATION, samples_used=samples)

    @classmethod
    def from_witnesses(cls, witnesses: Sequence[Witness], samples: int) -> "Verdict":
        ordered = tuple(sorted(witnesses, key=lambda w: w.margin)[:_MAX_WITNESSES])
        return cls(status=VIOLATED, witnesses=ordered, samples_used=samples)


def combine_statuses(statuses: Sequence[str]) -> str:
    if any(s == VIOLATED for s in statuses):
        return VIOLATED
    if statuses and all(s == HOLDS for s in statuses):
        return HOLDS
    return NO_VIOLATION


# ---------------------------------------------------------------------------
# shared probe machinery
# ---------------------------------------------------------------------------


def _rng_for(problem: ComparisonProblem, salt: int) -> np.random.Generator:
    return np.random.default_rng((int(problem.sampling.seed) << 8) ^ salt)


def _draw_t(problem: ComparisonProblem, rng: np.random.Generator) -> float:
    return float(rng.uniform(problem.t0, problem.T))


def _sign_patterns(m: int, rng: np.random.Generator, cap: int = 48) -> List[np.ndarray]:
    """All sign patterns in {-1,0,1}^m for small m; a capped random family above."""
    if 3**m <= cap:
        return [np.array(p, dtype=float) for p in itertools.product((-1.0, 0.0, 1.0), repeat=m)]
    base = [np.full(m, -1.0), np.full(m, 1.0), np.zeros(m)]
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        base.append(e)
        base.append(-e)
    while len(base) < cap:
        base.append(rng.choice([-1.0, 0.0, 1.0], size=m))
    return base


def _b_expression(problem: ComparisonProblem, t: float, x, xp, j: int) -> np.ndarray:
    """Vector over k of x_k + gamma1_k(t, x+x', e_j) - gamma2_k(t, x', e_j)."""
    c1 = problem.model1.coefficients
    c2 = problem.model2.coefficients
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    return x + c1.gamma(t, x + xp, j) - c2.gamma(t, xp, j)


def _c_expression(problem: ComparisonProblem, t: float, delta, xp) -> np.ndarray:
    """Vector over k of the compensator-adjusted drift gap at (delta + x', x')."""
    c1 = problem.model1.coefficients
    c2 = problem.model2.coefficients
    marks = problem.marks
    delta = np.asarray(delta, dtype=float)
    xp = np.asarray(xp, dtype=float)
    lhs = c1.b(t, delta + xp).copy()
    rhs = c2.b(t, xp).copy()
    for j in range(marks.n_atoms):
        w = marks.weights[j]
        if w != 0.0:
            lhs -= w * c1.gamma(t, delta + xp, j)
            rhs -= w * c2.gamma(t, xp, j)
    return lhs - rhs


# ---------------------------------------------------------------------------
# diffusion equality and per-coordinate decoupling
# ---------------------------------------------------------------------------


def check_sigma_equal(problem: ComparisonProblem) -> Verdict:
    """The two diffusion coefficients must agree as functions."""
    eps = problem.tolerances.resolved_eps_check(problem.is_affine)
    if problem.is_affine:
        a1 = problem.model1.coefficients.affine
        a2 = problem.model2.coefficients.affine
        dv = float(np.max(np.abs(a1.V - a2.V))) if a1.V.size else 0.0
        du = float(np.max(np.abs(a1.U - a2.U))) if a1.U.size else 0.0
        if max(dv, du) <= eps:
            return Verdict.exact_holds()
        # exhibit the gap at a concrete point
        m = problem.m
        cands = [np.zeros(m)]
        for j in range(m):
            e = np.zeros(m)
            e[j] = problem.sampling.box
            cands.extend([e, -e])
        best = None
        c1, c2 = problem.model1.coefficients, problem.model2.coefficients
        for x in cands:
            gap = float(np.linalg.norm(c1.sigma(problem.t0, x) - c2.sigma(problem.t0, x)))
            if best is None or gap > -best.margin:
                best = Witness(
                    t=problem.t0,
                    x=tuple(x),
                    x_prime=tuple(x),
                    atom=None,
                    margin=-gap,
                    kind="sigma-equal",
                )
        return Verdict.from_witnesses([best], samples=len(cands))

    rng = _rng_for(problem, 0xA1)
    c1, c2 = problem.model1.coefficients, problem.model2.coefficients
    m = problem.m
    box = problem.sampling.box
    witnesses: List[Witness] = []
    samples = 0
    points = [np.zeros(m)]
    for scale in problem.sampling.scales():
        points.append(rng.uniform(-1.0, 1.0, m) * scale)
    for _ in range(problem.sampling.count // 4):
        points.append(rng.uniform(-box, box, m))
    for x in points:
        t = _draw_t(problem, rng)
        gap = float(np.linalg.norm(c1.sigma(t, x) - c2.sigma(t, x)))
        samples += 1
        if gap > eps:
            witnesses.append(
                Witness(t=t, x=tuple(x), x_prime=tuple(x), atom=None, margin=-gap,
                        kind="sigma-equal")
            )
    if witnesses:
        return Verdict.from_witnesses(witnesses, samples)
    return Verdict.clean(samples)


def check_condition_a(problem: ComparisonProblem) -> List[Verdict]:
    """Row k of the diffusion may depend on coordinate k only (per-k verdicts)."""
    eps = problem.tolerances.resolved_eps_check(problem.is_affine)
    m = problem.m
    if problem.is_affine:
        a1 = problem.model1.coefficients.affine
        out: List[Verdict] = []
        for k in range(m):
            worst = None
            for j in range(m):
                if j == k:
                    continue
                mag = float(np.max(np.abs(a1.V[k, :, j]))) if a1.V.size else 0.0
                if mag > eps and (worst is None or mag > -worst.margin):
                    e = np.zeros(m)
                    e[j] = 1.0
                    cross = float(np.linalg.norm(a1.V[k, :, j]))
                    worst = Witness(
                        t=problem.t0, x=tuple(np.zeros(m)), x_prime=tuple(e),
                        atom=None, margin=-cross, kind=f"cond-a[k={k}]",
                    )
            out.append(Verdict.exact_holds() if worst is None else Verdict.from_witnesses([worst], 0))
        return out

    rng = _rng_for(problem, 0xA2)
    c1 = problem.model1.coefficients
    box = problem.sampling.box
    scales = problem.sampling.scales()
    reps = max(2, problem.sampling.count // (m * max(1, m - 1) * len(scales)))
    out = []
    for k in range(m):
        witnesses: List[Witness] = []
        samples = 0
        for j in range(m):
            if j == k:
                continue
            for scale in scales:
                for _ in range(reps):
                    x = rng.uniform(-box, box, m)
                    t = _draw_t(problem, rng)
                    e = np.zeros(m)
                    e[j] = scale
                    gap = float(
                        np.linalg.norm(c1.sigma(t, x + e)[k] - c1.sigma(t, x)[k])
                    )
                    samples += 1
                    if gap > eps:
                        witnesses.append(
                            Witness(t=t, x=tuple(x), x_prime=tuple(e), atom=None,
                                    margin=-gap, kind=f"cond-a[k={k}]")
                        )
        out.append(
            Verdict.from_witnesses(witnesses, samples) if witnesses else Verdict.clean(samples)
        )
    return out


# ---------------------------------------------------------------------------
# jump monotonicity (b) and drift order (c)
# ---------------------------------------------------------------------------


def _scale_to_expose(base: float, offset: float, coef: float) -> float:
    """Scale s with coef*s + offset <= -1, never below the sampling box."""
    return max(base, (abs(offset) + 1.0 + abs(coef)) / max(abs(coef), 1e-300))


def check_condition_b(problem: ComparisonProblem) -> List[Verdict]:
    """Per-coordinate jump monotonicity across the two models (per-k verdicts).

    Affine reduction: for every positively weighted atom, row k of the two
    jump matrices must agree, the own-coordinate map 1 + G_kk and the cross
    entries G_ki must be nonnegative, and the constant parts must be ordered.
    """
    eps = problem.tolerances.resolved_eps_check(problem.is_affine)
    m = problem.m
    marks = problem.marks
    live_atoms = [j for j in range(marks.n_atoms) if marks.weights[j] > 0.0]

    if problem.is_affine:
        a1 = problem.model1.coefficients.affine
        a2 = problem.model2.coefficients.affine
        out: List[Verdict] = []
        for k in range(m):
            witnesses: List[Witness] = []
            for j in live_atoms:
                row_gap = a1.G[j][k] - a2.G[j][k]
                dg = float(a1.g[j][k] - a2.g[j][k])
                if np.max(np.abs(row_gap)) > eps:
                    unit = row_gap / np.linalg.norm(row_gap)
                    s = _scale_to_expose(problem.sampling.box, dg, float(np.linalg.norm(row_gap)))
                    xp = -s * unit
                    val = float(_b_expression(problem, problem.t0, np.zeros(m), xp, j)[k])
                    witnesses.append(Witness(problem.t0, tuple(np.zeros(m)), tuple(xp), j,
                                             val, kind=f"cond-b[k={k}] row-gap"))
                    continue
                coefs = a1.G[j][k].copy()
                coefs[k] += 1.0
                for i in range(m):
                    if coefs[i] < -eps:
                        s = _scale_to_expose(problem.sampling.box, dg, float(coefs[i]))
                        x = np.zeros(m)
                        x[i] = s
                        val = float(_b_expression(problem, problem.t0, x, np.zeros(m), j)[k])
                        witnesses.append(Witness(problem.t0, tuple(x), tuple(np.zeros(m)), j,
                                                 val, kind=f"cond-b[k={k}] coef[i={i}]"))
                if dg < -eps:
                    val = float(_b_expression(problem, problem.t0, np.zeros(m), np.zeros(m), j)[k])
                    witnesses.append(Witness(problem.t0, tuple(np.zeros(m)), tuple(np.zeros(m)),
                                             j, val, kind=f"cond-b[k={k}] const"))
            out.append(Verdict.exact_holds() if not witnesses
                       else Verdict.from_witnesses(witnesses, 0))
        return out

    rng = _rng_for(problem, 0xB1)
    box = problem.sampling.box
    scales = problem.sampling.scales()
    reps = max(2, problem.sampling.count // max(1, (len(scales) * (m + 2) * max(1, len(live_atoms)))))
    x_cands: List[np.ndarray] = [np.zeros(m)]
    for scale in scales:
        for i in range(m):
            e = np.zeros(m)
            e[i] = scale
            x_cands.append(e)
        for _ in range(reps):
            x_cands.append(scale * rng.uniform(0.0, 1.0, m))
    per_k_wit: List[List[Witness]] = [[] for _ in range(m)]
    samples = 0
    for x in x_cands:
        for use_zero_xp in (True, False):
            xp = np.zeros(m) if use_zero_xp else rng.uniform(-box, box, m)
            t = _draw_t(problem, rng)
            for j in live_atoms:
                vals = _b_expression(problem, t, x, xp, j)
                samples += 1
                for k in range(m):
                    if vals[k] < -eps:
                        per_k_wit[k].append(
                            Witness(t, tuple(x), tuple(xp), j, float(vals[k]),
                                    kind=f"cond-b[k={k}]")
                        )
    return [
        Verdict.from_witnesses(w, samples) if w else Verdict.clean(samples)
        for w in per_k_wit
    ]


def check_condition_c(problem: ComparisonProblem) -> List[Verdict]:
    """Compensator-adjusted drift order with quasimonotone coupling (per k).

    Affine reduction on M_i = B_i - sum_j w_j G_i[j], d_i = c_i - sum_j w_j g_i[j]:
    row k of M1 and M2 must agree, M1's off-diagonal row entries must be
    nonnegative, and d1_k >= d2_k.
    """
    eps = problem.tolerances.resolved_eps_check(problem.is_affine)
    m = problem.m
    marks = problem.marks

    if problem.is_affine:
        a1 = problem.model1.coefficients.affine
        a2 = problem.model2.coefficients.affine
        M1, d1 = a1.net_drift_blocks(marks)
        M2, d2 = a2.net_drift_blocks(marks)
        out: List[Verdict] = []
        for k in range(m):
            witnesses: List[Witness] = []
            row_gap = M1[k] - M2[k]
            dd = float(d1[k] - d2[k])
            if np.max(np.abs(row_gap)) > eps:
                unit = row_gap / np.linalg.norm(row_gap)
                s = _scale_to_expose(problem.sampling.box, dd, float(np.linalg.norm(row_gap)))
                xp = -s * unit
                val = float(_c_expression(problem, problem.t0, np.zeros(m), xp)[k])
                witnesses.append(Witness(problem.t0, tuple(np.zeros(m)), tuple(xp), None,
                                         val, kind=f"cond-c[k={k}] row-gap"))
            else:
                for i in range(m):
                    if i != k and M1[k, i] < -eps:
                        s = _scale_to_expose(problem.sampling.box, dd, float(M1[k, i]))
                        delta = np.zeros(m)
                        delta[i] = s
                        val = float(_c_expression(problem, problem.t0, delta, np.zeros(m))[k])
                        witnesses.append(Witness(problem.t0, tuple(delta), tuple(np.zeros(m)),
                                                 None, val, kind=f"cond-c[k={k}] offdiag[i={i}]"))
                if dd < -eps:
                    val = float(_c_expression(problem, problem.t0, np.zeros(m), np.zeros(m))[k])
                    witnesses.append(Witness(problem.t0, tuple(np.zeros(m)), tuple(np.zeros(m)),
                                             None, val, kind=f"cond-c[k={k}] const"))
            out.append(Verdict.exact_holds() if not witnesses
                       else Verdict.from_witnesses(witnesses, 0))
        return out

    rng = _rng_for(problem, 0xC1)
    box = problem.sampling.box
    scales = problem.sampling.scales()
    reps = max(2, problem.sampling.count // max(1, len(scales) * m * 4))
    per_k_wit: List[List[Witness]] = [[] for _ in range(m)]
    samples = [0] * m
    for k in range(m):
        deltas: List[np.ndarray] = [np.zeros(m)]
        for scale in scales:
            for i in range(m):
                if i == k:
                    continue
                e = np.zeros(m)
                e[i] = scale
                deltas.append(e)
            for _ in range(reps):
                delta = scale * rng.uniform(0.0, 1.0, m)
                delta[k] = 0.0
                deltas.append(delta)
        for delta in deltas:
            for use_zero_xp in (True, False):
                xp = np.zeros(m) if use_zero_xp else rng.uniform(-box, box, m)
                t = _draw_t(problem, rng)
                val = float(_c_expression(problem, t, delta, xp)[k])
                samples[k] += 1
                if val < -eps:
                    per_k_wit[k].append(
                        Witness(t, tuple(delta), tuple(xp), None, val, kind=f"cond-c[k={k}]")
                    )
    return [
        Verdict.from_witnesses(per_k_wit[k], samples[k])
        if per_k_wit[k]
        else Verdict.clean(samples[k])
        for k in range(m)
    ]


# ---------------------------------------------------------------------------
# the pointwise inequality
# ---------------------------------------------------------------------------


def ii_prime_terms(problem: ComparisonProblem, t: float, x, x_prime) -> dict:
    """The four left-hand-side terms and the right-hand side, exactly.

    Mark integrals are exact atom sums.  The drift term pairs the negative
    part of x with the drift gap evaluated at (positive part of x) + x';
    the diffusion and jump gaps are evaluated at x + x'.
    """
    c1 = problem.model1.coefficients
    c2 = problem.model2.coefficients
    marks = problem.marks
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
    xm = np.maximum(-x, 0.0)
    xpos = np.maximum(x, 0.0)
    neg = x < 0.0

    b_gap = c1.b(t, xpos + xp) - c2.b(t, xp)
    drift = -2.0 * float(xm @ b_gap)

    s_gap = c1.sigma(t, x + xp) - c2.sigma(t, xp)
    diffusion = float(np.sum(s_gap[neg] ** 2)) if np.any(neg) else 0.0

    jump_neg = 0.0
    jump_pos = 0.0
    for j in range(marks.n_atoms):
        w = float(marks.weights[j])
        if w == 0.0:
            continue
        dg = c1.gamma(t, x + xp, j) - c2.gamma(t, xp, j)
        y = x + dg
        yneg2 = np.minimum(y, 0.0) ** 2
        bracket = yneg2 - x**2 - 2.0 * x * dg
        jump_neg += w * float(np.sum(bracket[neg]))
        jump_pos += w * float(np.sum(yneg2[~neg]))

    cstar = constant_Cstar(problem.shared_budget(), marks)
    rhs = cstar * float(xm @ xm)
    return {
        "drift": drift,
        "diffusion": diffusion,
        "jump_neg": jump_neg,
        "jump_pos": jump_pos,
        "lhs": drift + diffusion + jump_neg + jump_pos,
        "rhs": rhs,
        "cstar": cstar,
    }


def eval_ii_prime(problem: ComparisonProblem, t: float, x, x_prime) -> Tuple[float, float]:
    """Left- and right-hand side of the pointwise inequality at (t, x, x')."""
    terms = ii_prime_terms(problem, t, x, x_prime)
    return terms["lhs"], terms["rhs"]


def _ii_prime_probes(problem: ComparisonProblem, rng: np.random.Generator):
    """Probe generator: sign patterns x ladder, plus the proof-shaped probes
    with one small negative coordinate against an O(1) nonnegative rest."""
    m = problem.m
    box = problem.sampling.box
    scales = problem.sampling.scales()
    patterns = _sign_patterns(m, rng)
    reps = max(2, problem.sampling.count // max(1, len(patterns) * len(scales)))
    for pattern in patterns:
        for scale in scales:
            for r in range(reps):
                u = rng.uniform(0.5, 1.0, m)
                x = scale * pattern * u
                xp = np.zeros(m) if r == 0 else rng.uniform(-box, box, m)
                yield _draw_t(problem, rng), x, xp
    # one small negative coordinate, nonnegative O(1)/O(box) rest
    for k in range(m):
        for scale in scales:
            bases: List[np.ndarray] = []
            for mag in (1.0, box):
                delta = mag * rng.uniform(0.2, 1.0, m)
                delta[k] = 0.0
                bases.append(delta)
                for i in range(m):
                    if i != k:
                        e = np.zeros(m)
                        e[i] = mag
                        bases.append(e)
            for delta in bases:
                ek = np.zeros(m)
                ek[k] = scale
                x = delta - ek
                for use_zero_xp in (True, False):
                    xp = np.zeros(m) if use_zero_xp else rng.uniform(-box, box, m)
                    yield _draw_t(problem, rng), x, xp


def check_ii_prime(problem: ComparisonProblem) -> Verdict:
    """Sampled check of the pointwise inequality over the probe ladder."""
    eps = problem.tolerances.resolved_eps_check(problem.is_affine)
    rng = _rng_for(problem, 0x11)
    witnesses: List[Witness] = []
    samples = 0
    for t, x, xp in _ii_prime_probes(problem, rng):
        lhs, rhs = eval_ii_prime(problem, t, x, xp)
        samples += 1
        if lhs > rhs + eps:
            witnesses.append(
                Witness(t=t, x=tuple(x), x_prime=tuple(xp), atom=None,
                        margin=float(rhs - lhs), kind="ii-prime")
            )
    if witnesses:
        return Verdict.from_witnesses(witnesses, samples)
    return Verdict.clean(samples)


# ---------------------------------------------------------------------------
# the full report and the one-dimensional reductions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theorem31Report:
    """All sub-verdicts plus the combined status.

    ``overall`` is violated iff any sub-verdict is violated; it is ``holds``
    only when the whole battery is affine-exact and nothing is violated.
    ``battery_agrees_ii_prime`` records whether the structural battery and the
    sampled pointwise inequality reached the same violated/clean conclusion;
    the two are equivalent, so a disagreement flags a checker defect.
    """

    sigma_equal: Verdict
    cond_a: Tuple[Verdict, ...]
    cond_b: Tuple[Verdict, ...]
    cond_c: Tuple[Verdict, ...]
    ii_prime: Verdict
    overall: str
    battery_agrees_ii_prime: bool

    @property
    def battery_violated(self) -> bool:
        parts = [self.sigma_equal, *self.cond_a, *self.cond_b, *self.cond_c]
        return any(v.violated for v in parts)

    def all_witnesses(self) -> List[Witness]:
        parts = [self.sigma_equal, *self.cond_a, *self.cond_b, *self.cond_c, self.ii_prime]
        out: List[Witness] = []
        for v in parts:
            out.extend(v.witnesses)
        return sorted(out, key=lambda w: w.margin)

    @property
    def worst_margin(self) -> float:
        ws = self.all_witnesses()
        return ws[0].margin if ws else float("inf")


def check_theorem31(problem: ComparisonProblem) -> Theorem31Report:
    """Run the full battery and the pointwise inequality; combine verdicts."""
    sigma = check_sigma_equal(problem)
    a = tuple(check_condition_a(problem))
    b = tuple(check_condition_b(problem))
    c = tuple(check_condition_c(problem))
    ii = check_ii_prime(problem)
    battery = [sigma] + list(a) + list(b) + list(c)
    battery_violated = any(v.violated for v in battery)
    if battery_violated or ii.violated:
        overall = VIOLATED
    elif all(v.status == HOLDS for v in battery):
        # the battery is the exact oracle; the sampled pointwise inequality
        # can only confirm, never certify
        overall = HOLDS
    else:
        overall = NO_VIOLATION
    agree = battery_violated == ii.violated
    return Theorem31Report(
        sigma_equal=sigma,
        cond_a=a,
        cond_b=b,
        cond_c=c,
        ii_prime=ii,
        overall=overall,
        battery_agrees_ii_prime=agree,
    )


def _gamma_gap_sup(problem: ComparisonProblem, rng: np.random.Generator, n: int = 64) -> float:
    """Sampled sup of |gamma1 - gamma2| over atoms and the box (structure probe)."""
    c1, c2 = problem.model1.coefficients, problem.model2.coefficients
    marks = problem.marks
    box = problem.sampling.box
    worst = 0.0
    for _ in range(n):
        x = rng.uniform(-box, box, problem.m)
        t = _draw_t(problem, rng)
        for j in range(marks.n_atoms):
            if marks.weights[j] <= 0.0:
                continue
            worst = max(worst, float(np.linalg.norm(c1.gamma(t, x, j) - c2.gamma(t, x, j))))
    return worst


def _gamma_abs_sup(problem: ComparisonProblem, rng: np.random.Generator, n: int = 64) -> float:
    c1, c2 = problem.model1.coefficients, problem.model2.coefficients
    marks = problem.marks
    box = problem.sampling.box
    worst = 0.0
    for _ in range(n):
        x = rng.uniform(-box, box, problem.m)
        t = _draw_t(problem, rng)
        for j in range(marks.n_atoms):
            if marks.weights[j] <= 0.0:
                continue
            worst = max(worst, float(np.linalg.norm(c1.gamma(t, x, j))))
            worst = max(worst, float(np.linalg.norm(c2.gamma(t, x, j))))
    return worst


def check_corollary_1d(problem: ComparisonProblem, variant: str) -> Verdict:
    """One-dimensional specializations ("3.3", "3.4", "3.5").

    "3.3": diffusions equal, compensator-adjusted drifts ordered, and the
    post-jump maps ordered across models for ordered starting points.
    "3.4": shared jump coefficient required; diffusions equal, drifts
    ordered, post-jump map monotone.
    "3.5": no jumps allowed; diffusions equal, drifts ordered.

    The verdict must agree with the full checker's overall status on the same
    problem (specialization consistency, asserted in the test suite).
    """
    if problem.m != 1:
        raise DimensionError(f"one-dimensional checker called with m={problem.m}")
    if variant not in ("3.3", "3.4", "3.5"):
        raise ValueError(f"unknown variant {variant!r}")
    eps = problem.tolerances.resolved_eps_check(problem.is_affine)
    marks = problem.marks
    rng = _rng_for(problem, 0x1D)

    # variant preconditions on the jump structure
    if variant == "3.4":
        if problem.is_affine:
            a1 = problem.model1.coefficients.affine
            a2 = problem.model2.coefficients.affine
            same = (
                np.allclose(a1.G, a2.G, rtol=0.0, atol=problem.tolerances.eps_lin)
                and np.allclose(a1.g, a2.g, rtol=0.0, atol=problem.tolerances.eps_lin)
            )
            if not same:
                raise VariantPreconditionError("variant 3.4 requires gamma1 == gamma2")
        elif _gamma_gap_sup(problem, rng) > eps:
            raise VariantPreconditionError("variant 3.4 requires gamma1 == gamma2")
    if variant == "3.5":
        if problem.is_affine:
            a1 = problem.model1.coefficients.affine
            a2 = problem.model2.coefficients.affine
            zero = all(
                float(np.max(np.abs(arr))) <= problem.tolerances.eps_lin if arr.size else True
                for arr in (a1.G, a1.g, a2.G, a2.g)
            )
            if not zero:
                raise VariantPreconditionError("variant 3.5 requires gamma == 0")
        elif _gamma_abs_sup(problem, rng) > eps:
            raise VariantPreconditionError("variant 3.5 requires gamma == 0")

    verdicts: List[Verdict] = [check_sigma_equal(problem)]

    if variant == "3.3":
        verdicts.extend(check_condition_b(problem))  # the ordered post-jump line
        verdicts.extend(_drift_line_1d(problem, compensated=True))
    elif variant == "3.4":
        verdicts.extend(check_condition_b(problem))  # reduces to monotonicity of x+gamma
        verdicts.extend(_drift_line_1d(problem, compensated=False))
    else:  # "3.5"
        verdicts.extend(_drift_line_1d(problem, compensated=False))

    status = combine_statuses([v.status for v in verdicts])
    witnesses: List[Witness] = []
    samples = 0
    for v in verdicts:
        witnesses.extend(v.witnesses)
        samples += v.samples_used
    if status == VIOLATED:
        return Verdict.from_witnesses(witnesses, samples)
    return Verdict(status=status, samples_used=samples)


def _drift_line_1d(problem: ComparisonProblem, compensated: bool) -> List[Verdict]:
    """b1 >= b2 pointwise, optionally after subtracting the mark integral."""
    eps = problem.tolerances.resolved_eps_check(problem.is_affine)
    marks = problem.marks
    if problem.is_affine:
        a1 = problem.model1.coefficients.affine
        a2 = problem.model2.coefficients.affine
        if compensated:
            M1, d1 = a1.net_drift_blocks(marks)
            M2, d2 = a2.net_drift_blocks(marks)
        else:
            M1, d1 = a1.B, a1.c
            M2, d2 = a2.B, a2.c
        witnesses: List[Witness] = []
        slope_gap = float(M1[0, 0] - M2[0, 0])
        const_gap = float(d1[0] - d2[0])
        if abs(slope_gap) > eps:
            s = _scale_to_expose(problem.sampling.box, const_gap, slope_gap)
            xp = np.array([-np.sign(slope_gap) * s])
            val = slope_gap * float(xp[0]) + const_gap
            witnesses.append(Witness(problem.t0, tuple(xp), tuple(xp), None, val,
                                     kind="drift-line slope-gap"))
        if const_gap < -eps:
            witnesses.append(Witness(problem.t0, (0.0,), (0.0,), None, const_gap,
                                     kind="drift-line const"))
        return [Verdict.exact_holds() if not witnesses
                else Verdict.from_witnesses(witnesses, 0)]

    rng = _rng_for(problem, 0xD1)
    box = problem.sampling.box
    c1, c2 = problem.model1.coefficients, problem.model2.coefficients
    witnesses = []
    samples = 0
    points = [np.zeros(1)] + [rng.uniform(-box, box, 1) for _ in range(problem.sampling.count // 2)]
    for x in points:
        t = _draw_t(problem, rng)
        gap = float(c1.b(t, x)[0] - c2.b(t, x)[0])
        if compensated:
            for j in range(marks.n_atoms):
                w = marks.weights[j]
                if w != 0.0:
                    gap -= w * float(c1.gamma(t, x, j)[0] - c2.gamma(t, x, j)[0])
        samples += 1
        if gap < -eps:
            witnesses.append(Witness(t, tuple(x), tuple(x), None, gap, kind="drift-line"))
    return [Verdict.from_witnesses(witnesses, samples) if witnesses else Verdict.clean(samples)]
