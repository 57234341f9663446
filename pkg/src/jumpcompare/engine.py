"""Jump-adapted Euler scheme for coupled jump-diffusion SDEs.

The scheme integrates the compensator-adjusted form: between events the Euler
step uses the net drift b - sum_j w_j gamma(.,.,e_j), and every simulated jump
time is an exact grid point where the amplitude gamma is applied to the
pre-jump state.  Exact jump placement removes the O(h) jump-location bias.

Randomness is drawn from counter-based Philox streams keyed by
(seed, path_index), so a path's driver realization never depends on how many
paths run, in what order, or on how many workers are active.  Monte Carlo
reductions (counts, maxima) are commutative and accumulated in fixed chunk
order, which makes reports bit-identical across worker counts.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .model import ComparisonProblem, MarkMeasure, SdeModel

__all__ = [
    "InvalidStep",
    "NonFiniteState",
    "DriverRealization",
    "Trajectory",
    "McReport",
    "PathRecords",
    "uniform_grid",
    "sample_drivers",
    "simulate_path",
    "simulate_coupled",
    "violation_stat",
    "mc_comparison",
    "sample_terminal_states",
    "default_eps_path",
    "wilson_interval",
    "worker_count",
]

_MASK64 = (1 << 64) - 1
_CHUNK = 2048  # fixed: chunk boundaries must not depend on worker count


class InvalidStep(ValueError):
    """Step size is nonpositive or exceeds the horizon length."""


class NonFiniteState(RuntimeError):
    """Integration produced an overflow or NaN; carries the first bad time."""

    def __init__(self, time: float):
        super().__init__(f"non-finite state first encountered at t={time!r}")
        self.time = float(time)


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


def uniform_grid(t0: float, T: float, h: float) -> np.ndarray:
    """Deterministic time grid t0, t0+h, ..., T (last point snapped to T)."""
    span = T - t0
    if not (h > 0.0) or h > span * (1.0 + 1e-12):
        raise InvalidStep(f"step h={h} invalid for horizon ({t0}, {T})")
    n = max(int(math.floor(span / h + 1e-9)), 1)
    grid = t0 + h * np.arange(n + 1, dtype=float)
    if (T - grid[-1]) > 1e-9 * h:
        grid = np.append(grid, T)
    else:
        grid[-1] = T
    return grid


@dataclass(frozen=True)
class DriverRealization:
    """One realization of the shared noise for one path.

    ``times`` is the sorted union of the uniform grid and the exact jump
    times; ``dW[i]`` is the d-dimensional Brownian increment over segment
    (times[i], times[i+1]); ``jump_atoms[i]`` is the mark-atom index applied
    at the segment end, or -1 when the end is a plain grid point.
    """

    t0: float
    T: float
    h: float
    times: np.ndarray
    dW: np.ndarray
    jump_atoms: np.ndarray

    @property
    def n_segments(self) -> int:
        return self.times.shape[0] - 1

    @property
    def d(self) -> int:
        return self.dW.shape[1]

    def jump_events(self) -> List[Tuple[float, int]]:
        out = []
        for i in range(self.n_segments):
            if self.jump_atoms[i] >= 0:
                out.append((float(self.times[i + 1]), int(self.jump_atoms[i])))
        return out

    @property
    def jump_count(self) -> int:
        return int(np.sum(self.jump_atoms >= 0))


def _path_rng(seed: int, path_index: int) -> np.random.Generator:
    key = np.array([int(seed) & _MASK64, int(path_index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_drivers(
    marks: MarkMeasure,
    horizon: Tuple[float, float],
    h: float,
    seed: int,
    path_index: int,
    *,
    d: int,
) -> DriverRealization:
    """Draw one path's noise: jump times, mark atoms, Brownian increments.

    Jump times form a Poisson process of rate equal to the total mark mass
    (exponential interarrivals); atoms are categorical with probability
    proportional to their weights.  The stream is keyed by (seed, path_index),
    so two calls with the same key are bit-identical and distinct paths never
    share randomness regardless of evaluation order.
    """
    t0, T = float(horizon[0]), float(horizon[1])
    grid = uniform_grid(t0, T, h)
    rng = _path_rng(seed, path_index)

    lam = marks.total_mass
    jump_times: List[float] = []
    jump_marks: List[int] = []
    if lam > 0.0 and marks.n_atoms > 0:
        cum = np.cumsum(marks.weights) / lam
        t = t0
        while True:
            # clamp away the measure-zero chance of a zero interarrival,
            # which would alias a jump onto an existing grid point
            t = t + max(rng.standard_exponential(), 5e-324) / lam
            if t > T:
                break
            jump_times.append(t)
            u = rng.random()
            jump_marks.append(int(np.searchsorted(cum, u, side="right")))

    if jump_times:
        times = np.union1d(grid, np.asarray(jump_times))
    else:
        times = grid
    n_seg = times.shape[0] - 1
    jump_atoms = np.full(n_seg, -1, dtype=np.int64)
    for tau, j in zip(jump_times, jump_marks):
        idx = int(np.searchsorted(times, tau))
        jump_atoms[idx - 1] = j

    dts = np.diff(times)
    dW = rng.standard_normal((n_seg, d)) * np.sqrt(dts)[:, None]
    return DriverRealization(t0=t0, T=T, h=float(h), times=times, dW=dW, jump_atoms=jump_atoms)


# ---------------------------------------------------------------------------
# Trajectories (per-path reference integrator)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Times and post-event states of one path (cadlag convention:
    the stored value at a jump time is the post-jump state; the pre-jump
    value is the previous entry evolved to the jump time)."""

    times: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return self.times.shape[0]

    def terminal(self) -> np.ndarray:
        return self.states[-1]


def _net_drift(model: SdeModel, t: float, x: np.ndarray) -> np.ndarray:
    coeffs = model.coefficients
    out = coeffs.b(t, x)
    marks = model.marks
    for j in range(marks.n_atoms):
        w = marks.weights[j]
        if w != 0.0:
            out = out - w * coeffs.gamma(t, x, j)
    return out


def simulate_path(
    model: SdeModel, x0, t0: float, drivers: DriverRealization
) -> Trajectory:
    """Integrate one SDE against a fixed driver realization.

    Raises NonFiniteState at the first time the state overflows.
    """
    if drivers.t0 != float(t0):
        raise ValueError(f"drivers start at t0={drivers.t0}, path starts at {t0}")
    if drivers.d != model.d:
        raise ValueError(f"drivers carry d={drivers.d} increments, model has d={model.d}")
    coeffs = model.coefficients
    times = drivers.times
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x.shape != (model.m,):
        raise ValueError(f"x0 must be a vector of length {model.m}")
    states = np.empty((times.shape[0], model.m))
    states[0] = x
    # overflow is reported through NonFiniteState, not per-element warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(drivers.n_segments):
            tl = times[i]
            dt = times[i + 1] - tl
            x = x + _net_drift(model, tl, x) * dt + coeffs.sigma(tl, x) @ drivers.dW[i]
            atom = int(drivers.jump_atoms[i])
            if atom >= 0:
                x = x + coeffs.gamma(times[i + 1], x, atom)
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(times[i + 1])
            states[i + 1] = x
    return Trajectory(times=times, states=states)


def simulate_coupled(
    problem: ComparisonProblem, drivers: DriverRealization
) -> Tuple[Trajectory, Trajectory]:
    """Integrate both models of a problem against the identical drivers."""
    traj1 = simulate_path(problem.model1, problem.x1, problem.t0, drivers)
    traj2 = simulate_path(problem.model2, problem.x2, problem.t0, drivers)
    return traj1, traj2


def violation_stat(pair: Tuple[Trajectory, Trajectory]) -> float:
    """Worst ordering violation over the shared time list.

    Returns max over times and coordinates of the positive part of X2 - X1;
    zero means the ordering held on this path.
    """
    traj1, traj2 = pair
    if not np.array_equal(traj1.times, traj2.times):
        raise ValueError("trajectories must share the same time list")
    diff = traj2.states - traj1.states
    return float(max(0.0, float(diff.max())))


# ---------------------------------------------------------------------------
# Monte Carlo (vectorized chunk integrator)
# ---------------------------------------------------------------------------


def default_eps_path(h: float, x1, x2) -> float:
    """Discretization allowance 5*sqrt(h)*(1+|x1|+|x2|) for the Euler scheme."""
    n1 = float(np.linalg.norm(np.asarray(x1, dtype=float)))
    n2 = float(np.linalg.norm(np.asarray(x2, dtype=float)))
    return 5.0 * math.sqrt(h) * (1.0 + n1 + n2)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> Tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if n <= 0:
        return (0.0, 1.0)
    phat = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, center - half)  # exact at the boundaries
    hi = 1.0 if k == n else min(1.0, center + half)
    return (lo, hi)


def worker_count() -> int:
    """Worker cap from JUMPCOMPARE_THREADS (default 1). Never affects results."""
    raw = os.environ.get("JUMPCOMPARE_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, min(int(raw), 64))
    except ValueError:
        return 1


@dataclass(frozen=True)
class PathRecords:
    """Per-path outcomes, aligned with path index order."""

    violation: np.ndarray
    first_violation_time: np.ndarray
    failed: np.ndarray


@dataclass(frozen=True)
class McReport:
    """Aggregate of one coupled Monte Carlo run."""

    paths: int
    violating: int
    violation_fraction: float
    max_violation: float
    wilson_low: float
    wilson_high: float
    seed: int
    h: float
    eps_path: float
    failed: int
    per_path: Optional[PathRecords] = None


class _BatchCoefficients:
    """Row-vectorized coefficient evaluation for one model.

    Affine models evaluate in closed form on (paths, m) blocks; black-box
    models fall back to a row loop with identical semantics.
    """

    def __init__(self, model: SdeModel):
        self.model = model
        self.coeffs = model.coefficients
        self.marks = model.marks
        aff = model.coefficients.affine
        self.affine = aff
        if aff is not None:
            self._M, self._dvec = aff.net_drift_blocks(model.marks)

    def net_drift_rows(self, t: float, X: np.ndarray) -> np.ndarray:
        if self.affine is not None:
            return X @ self._M.T + self._dvec
        return np.stack([_net_drift(self.model, t, X[i]) for i in range(X.shape[0])])

    def sigma_rows(self, t: float, X: np.ndarray) -> np.ndarray:
        if self.affine is not None:
            return self.affine.diffusion_rows(t, X)
        return np.stack([self.coeffs.sigma(t, X[i]) for i in range(X.shape[0])])

    def jump_one(self, t: float, x: np.ndarray, j: int) -> np.ndarray:
        return self.coeffs.gamma(t, x, j)


def componentwise_stat(diff_rows: np.ndarray) -> np.ndarray:
    """Per-path signed violation measure: max coordinate of X2 - X1."""
    return diff_rows.max(axis=1)


def _euler_rows(
    bat: _BatchCoefficients, t: float, X: np.ndarray, dt: float, dW: np.ndarray
) -> np.ndarray:
    drift = bat.net_drift_rows(t, X)
    sig = bat.sigma_rows(t, X)
    return X + drift * dt + np.einsum("pkd,pd->pk", sig, dW)


def _run_chunk(
    batches: Sequence[_BatchCoefficients],
    starts: Sequence[np.ndarray],
    drivers: Sequence[DriverRealization],
    grid: np.ndarray,
    stat_fn: Optional[Callable[[np.ndarray], np.ndarray]],
    eps_path: float,
):
    K = len(drivers)
    m = batches[0].model.m
    X = [np.tile(np.asarray(x0, dtype=float), (K, 1)) for x0 in starts]
    coupled = len(batches) == 2 and stat_fn is not None

    offsets = np.zeros(K, dtype=np.int64)
    total = 0
    for p, drv in enumerate(drivers):
        offsets[p] = total
        total += drv.n_segments
    dW_flat = (
        np.concatenate([drv.dW for drv in drivers], axis=0)
        if K
        else np.zeros((0, batches[0].model.d))
    )
    cur = np.zeros(K, dtype=np.int64)

    # map each jump to the uniform step containing it
    jumps_by_step: dict = {}
    for p, drv in enumerate(drivers):
        seen = -1
        for i in range(drv.n_segments):
            if drv.jump_atoms[i] >= 0:
                tau = drv.times[i + 1]
                step = int(np.searchsorted(grid, tau, side="left")) - 1
                if step != seen:
                    jumps_by_step.setdefault(step, []).append(p)
                    seen = step

    failed = np.zeros(K, dtype=bool)
    if coupled:
        run_signed = stat_fn(X[1] - X[0])
        first_t = np.full(K, np.nan)
        crossed = run_signed > eps_path
        first_t[crossed] = grid[0]
    else:
        run_signed = np.zeros(K)
        first_t = np.full(K, np.nan)

    all_idx = np.arange(K)
    n_steps = grid.shape[0] - 1
    # overflow / NaN on exploding paths is expected and handled through the
    # failed flag, not warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            tl = float(grid[i])
            tr = float(grid[i + 1])
            dt = tr - tl
            jp = jumps_by_step.get(i)
            if jp:
                mask = np.ones(K, dtype=bool)
                mask[jp] = False
                idx = np.flatnonzero(mask)
            else:
                idx = all_idx
            if idx.size:
                rows = offsets[idx] + cur[idx]
                dWi = dW_flat[rows]
                for mi, bat in enumerate(batches):
                    X[mi][idx] = _euler_rows(bat, tl, X[mi][idx], dt, dWi)
                cur[idx] += 1
            if jp:
                for p in jp:
                    drv = drivers[p]
                    off = offsets[p]
                    while True:
                        s = int(cur[p])
                        t_left = float(drv.times[s])
                        t_end = float(drv.times[s + 1])
                        sdt = t_end - t_left
                        dwrow = dW_flat[off + s][None, :]
                        for mi, bat in enumerate(batches):
                            X[mi][p] = _euler_rows(
                                bat, t_left, X[mi][p][None, :], sdt, dwrow
                            )[0]
                        atom = int(drv.jump_atoms[s])
                        if atom >= 0:
                            for mi, bat in enumerate(batches):
                                X[mi][p] = X[mi][p] + bat.jump_one(t_end, X[mi][p], atom)
                        cur[p] += 1
                        if coupled and not failed[p]:
                            val = stat_fn((X[1][p] - X[0][p])[None, :])[0]
                            if np.isfinite(val):
                                if val > run_signed[p]:
                                    run_signed[p] = val
                                if val > eps_path and np.isnan(first_t[p]):
                                    first_t[p] = t_end
                        if t_end >= tr:
                            break
            # end-of-step bookkeeping
            fin = np.ones(K, dtype=bool)
            for XM in X:
                fin &= np.isfinite(XM).all(axis=1)
            failed |= ~fin
            if coupled:
                s = stat_fn(X[1] - X[0])
                ok = np.isfinite(s) & ~failed
                run_signed = np.where(ok, np.maximum(run_signed, s), run_signed)
                newly = ok & (s > eps_path) & np.isnan(first_t)
                first_t[newly] = tr

    viol = np.maximum(run_signed, 0.0)
    viol[failed] = np.nan
    terminals = [XM for XM in X]
    return viol, first_t, failed, terminals


def _chunk_ranges(n: int) -> List[range]:
    return [range(lo, min(lo + _CHUNK, n)) for lo in range(0, n, _CHUNK)]


def mc_comparison(
    problem: ComparisonProblem,
    paths: int,
    h: float,
    seed: int,
    *,
    stat_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    keep_paths: bool = False,
) -> McReport:
    """Coupled Monte Carlo over per-path driver streams.

    A path violates iff its violation statistic exceeds eps_path (default
    5*sqrt(h)*(1+|x1|+|x2|)); non-finite paths are counted as failed, not as
    violations.  The report includes the Wilson 95% interval for the
    violation probability and is deterministic in (problem, paths, h, seed)
    regardless of worker count.
    """
    if paths < 1:
        raise ValueError("paths must be >= 1")
    grid = uniform_grid(problem.t0, problem.T, h)
    if problem.tolerances.eps_path is not None:
        eps_path = float(problem.tolerances.eps_path)
    else:
        eps_path = default_eps_path(h, problem.x1, problem.x2)
    stat = stat_fn if stat_fn is not None else componentwise_stat
    batches = (_BatchCoefficients(problem.model1), _BatchCoefficients(problem.model2))
    starts = (problem.x1, problem.x2)
    marks = problem.marks

    def run(rng_block: range):
        drivers = [
            sample_drivers(marks, problem.horizon, h, seed, p, d=problem.d)
            for p in rng_block
        ]
        viol, first_t, failed, _ = _run_chunk(batches, starts, drivers, grid, stat, eps_path)
        return viol, first_t, failed

    blocks = _chunk_ranges(paths)
    workers = worker_count()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]

    viol = np.concatenate([r[0] for r in results])
    first_t = np.concatenate([r[1] for r in results])
    failed = np.concatenate([r[2] for r in results])

    ok = ~failed
    violating = int(np.sum(ok & (viol > eps_path)))
    n_failed = int(np.sum(failed))
    max_violation = float(np.max(viol[ok])) if np.any(ok) else 0.0
    lo, hi = wilson_interval(violating, paths)
    per_path = (
        PathRecords(violation=viol, first_violation_time=first_t, failed=failed)
        if keep_paths
        else None
    )
    return McReport(
        paths=paths,
        violating=violating,
        violation_fraction=violating / paths,
        max_violation=max_violation,
        wilson_low=lo,
        wilson_high=hi,
        seed=int(seed),
        h=float(h),
        eps_path=eps_path,
        failed=n_failed,
        per_path=per_path,
    )


def sample_terminal_states(
    model: SdeModel, x0, t0: float, T: float, paths: int, h: float, seed: int
) -> np.ndarray:
    """Terminal states X_T of independent paths, for distributional checks."""
    grid = uniform_grid(t0, T, h)
    bat = (_BatchCoefficients(model),)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def run(rng_block: range):
        drivers = [
            sample_drivers(model.marks, (t0, T), h, seed, p, d=model.d) for p in rng_block
        ]
        _, _, _, terminals = _run_chunk(bat, (x0,), drivers, grid, None, 0.0)
        return terminals[0]

    blocks = _chunk_ranges(paths)
    workers = worker_count()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(run, blocks))
    else:
        outs = [run(b) for b in blocks]
    return np.concatenate(outs, axis=0)
