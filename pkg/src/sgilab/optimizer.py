"""Timing optimization of the pulse sequence.

Three tools mirror the experimental procedure:

* ``scan_reverse_pulse``: population versus T2 + T3 at constant T2 + T3 + Td2;
* ``optimal_t2_curve``: best stopping pulse T2 for a set of Td1 values,
  interpolated by a polynomial;
* ``minimize_residuals``: direct minimization of the recombination residual
  J = (dz/l_z)^2 + (dp/l_p)^2, seeded from a coarse grid.

Free durations are named T2, T3, T4, Td2 or T23. T23 sets T2 = T3 = T23/2:
when pulses 2 and 3 are contiguous with equal field sign only their sum
matters, so the pair is one degree of freedom.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize, minimize_scalar

from .errors import ConfigError
from .interferometer import PulseTimeline, run, run_batch
from .wavepacket import GaussianState, coherence_scales

FREE_PARAMS = ("T2", "T3", "T23", "T4", "Td2")
DEFAULT_THRESHOLD = 1e-6
_INFEASIBLE = 1e6
_US = 1e-6


@dataclass(frozen=True)
class OptimizationProblem:
    """A timeline with some durations left free.

    ``bounds`` maps each free name to (lo, hi) in seconds; missing entries
    default to [0, 3x] the template value (T23: sum of T2 and T3).
    """

    template: PulseTimeline
    initial: GaussianState
    free_params: tuple[str, ...]
    constraint: str = "none"
    objective: str = "HDPenalty"
    bounds: dict | None = None
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if not self.free_params:
            raise ConfigError("at least one free parameter is required")
        unknown = set(self.free_params) - set(FREE_PARAMS)
        if unknown:
            raise ConfigError(f"unknown free parameters: {sorted(unknown)}")
        if len(set(self.free_params)) != len(self.free_params):
            raise ConfigError("duplicate free parameters")
        if "T23" in self.free_params and ({"T2", "T3"} & set(self.free_params)):
            raise ConfigError("T23 cannot be combined with T2 or T3")
        if self.constraint not in ("none", "fixed_total_time"):
            raise ConfigError(f"unknown constraint {self.constraint!r}")
        if self.constraint == "fixed_total_time":
            if "Td2" in self.free_params:
                raise ConfigError("Td2 is derived under the fixed-total-time constraint")
            if not {"T2", "T3", "T23"} & set(self.free_params):
                raise ConfigError("fixed-total-time constraint needs T2, T3 or T23 free")
        if self.objective not in ("HDPenalty", "OverlapMagnitude"):
            raise ConfigError(f"unknown objective {self.objective!r}")

    def template_value(self, name: str) -> float:
        if name == "T23":
            return self.template.T2 + self.template.T3
        return getattr(self.template, name)

    def bound(self, name: str) -> tuple[float, float]:
        if self.bounds and name in self.bounds:
            lo, hi = self.bounds[name]
        else:
            lo, hi = 0.0, 3.0 * self.template_value(name)
        if not 0 <= lo < hi:
            raise ConfigError(f"invalid bounds for {name}: {(lo, hi)}")
        return float(lo), float(hi)

    def timeline(self, values) -> PulseTimeline | None:
        """Timeline for free-parameter ``values`` (seconds); None if infeasible."""
        d = {}
        for name, v in zip(self.free_params, values):
            if v < 0:
                return None
            if name == "T23":
                d["T2"] = d["T3"] = 0.5 * v
            else:
                d[name] = float(v)
        if self.constraint == "fixed_total_time":
            t = self.template
            total = t.T2 + t.T3 + t.Td2
            td2 = total - d.get("T2", t.T2) - d.get("T3", t.T3)
            if td2 < 0:
                return None
            d["Td2"] = td2
        return self.template.with_durations(**d)


def _objective_values(problem: OptimizationProblem, points, richardson=False):
    """J for each row of ``points``, plus the final (dz, dp)."""
    points = np.atleast_2d(points)
    scales = coherence_scales(problem.initial)
    tls = [problem.timeline(p) for p in points]
    ok = [i for i, t in enumerate(tls) if t is not None]
    J = np.full(len(points), _INFEASIBLE)
    dz = np.full(len(points), np.nan)
    dp = np.full(len(points), np.nan)
    if ok:
        out = run_batch([tls[i] for i in ok], problem.initial, richardson=richardson)
        if problem.objective == "HDPenalty":
            vals = (out["dz"] / scales.l_z) ** 2 + (out["dp"] / scales.l_p) ** 2
        else:
            vals = -out["log_overlap"]
        J[ok] = vals
        dz[ok] = out["dz"]
        dp[ok] = out["dp"]
    return J, dz, dp


def objective(problem: OptimizationProblem, values) -> float:
    return float(_objective_values(problem, [values])[0][0])


@dataclass(frozen=True)
class OptimizationResult:
    timeline: PulseTimeline
    params: dict[str, float]
    J: float
    dz_final: float
    dp_final: float
    grid_min: float
    flagged: bool
    n_evaluations: int


def minimize_residuals(
    problem: OptimizationProblem,
    grid_points: int = 5,
    max_starts: int = 5,
    xatol_us: float = 1e-7,
) -> OptimizationResult:
    """Minimize J over the free durations: grid seeding, then Nelder-Mead.

    The simplex works in microseconds. Up to ``max_starts`` of the best grid
    points are used as starting points; the overall best point is returned
    and is never worse than the best grid point.
    """
    names = problem.free_params
    bounds = [problem.bound(n) for n in names]
    axes = [np.linspace(lo, hi, grid_points) for lo, hi in bounds]
    grid = np.array(list(itertools.product(*axes)))
    J_grid, _, _ = _objective_values(problem, grid)
    order = np.argsort(J_grid, kind="stable")
    n_eval = len(grid)

    def f_us(x_us):
        return objective(problem, np.asarray(x_us) * _US)

    best_x = grid[order[0]]
    best_J = float(J_grid[order[0]])
    bounds_us = [(lo / _US, hi / _US) for lo, hi in bounds]
    for idx in order[:max_starts]:
        if J_grid[idx] >= _INFEASIBLE:
            break
        res = minimize(
            f_us,
            grid[idx] / _US,
            method="Nelder-Mead",
            bounds=bounds_us,
            options={"xatol": xatol_us, "fatol": 1e-18, "maxiter": 4000 * len(names), "maxfev": 8000 * len(names)},
        )
        n_eval += res.nfev
        if res.fun < best_J:
            best_J = float(res.fun)
            best_x = np.asarray(res.x) * _US
        if best_J < 1e-16:
            break
    grid_min = float(J_grid[order[0]])
    assert best_J <= grid_min, "optimizer returned a point worse than its seed grid"

    J, dz, dp = _objective_values(problem, [best_x], richardson=True)
    return OptimizationResult(
        timeline=problem.timeline(best_x),
        params=dict(zip(names, map(float, best_x))),
        J=float(J[0]),
        dz_final=float(dz[0]),
        dp_final=float(dp[0]),
        grid_min=grid_min,
        flagged=bool(J[0] > problem.threshold),
        n_evaluations=n_eval,
    )


def brute_force_grid(problem: OptimizationProblem, n: int = 200):
    """Objective on an n^d grid over the problem bounds: (axes, J array)."""
    axes = [np.linspace(*problem.bound(name), n) for name in problem.free_params]
    mesh = np.array(list(itertools.product(*axes)))
    J, _, _ = _objective_values(problem, mesh)
    return axes, J.reshape([n] * len(axes))


def scan_reverse_pulse(problem: OptimizationProblem, scan_range, readout_phase: float | None = None) -> np.ndarray:
    """Rows (T2 + T3, P1) at constant T2 + T3 + Td2 (the reverse-pulse scan).

    T2 = T3 = x/2 for each scan value x. The readout phase defaults to
    pi/2 - Phi_sym, where Phi_sym is the interferometer phase at the
    symmetric point T2 + T3 = T1 + T4, so the fringe peaks there for a
    linear gradient.
    """
    lo, hi, n = scan_range
    if n < 3:
        raise ValueError("need at least 3 scan points")
    t = problem.template
    total = t.T2 + t.T3 + t.Td2
    x = np.linspace(lo, hi, int(n))
    if readout_phase is None:
        sym = t.T1 + t.T4
        sym_tl = t.with_durations(T2=0.5 * sym, T3=0.5 * sym, Td2=max(total - sym, 0.0))
        readout_phase = np.pi / 2 - run(sym_tl, problem.initial).final_phase
    tls = []
    for xi in x:
        if xi > total:
            raise ConfigError("scan exceeds the fixed total T2 + T3 + Td2")
        tls.append(t.with_durations(T2=0.5 * xi, T3=0.5 * xi, Td2=total - xi))
    out = run_batch(tls, problem.initial)
    P1 = 0.5 + 0.5 * out["contrast"] * np.sin(readout_phase + out["phase"])
    return np.column_stack([x, P1])


@dataclass(frozen=True)
class T2Curve:
    polynomial: Polynomial
    td1: np.ndarray
    t2_opt: np.ndarray
    flagged: bool

    def __call__(self, Td1):
        return self.polynomial(Td1)


def _count_local_maxima(v):
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])
    return int(np.sum(inner)) + int(v[0] > v[1]) + int(v[-1] > v[-2])


def optimal_t2_curve(
    problem: OptimizationProblem,
    Td1_samples,
    poly_degree: int,
    bracket: tuple[float, float] | None = None,
    n_coarse: int = 41,
) -> T2Curve:
    """Stopping-pulse duration maximizing visibility, versus Td1.

    For each Td1 (with Td2 = Td1 for full loops) T2 is scanned on a coarse
    grid, then refined by golden-section search on the log of the overlap.
    ``T23`` in the free set moves T3 together with T2. A bracket with several
    maxima is widened once, then flagged. The optima are fitted with a
    least-squares polynomial of degree ``poly_degree``.
    """
    td1 = np.asarray(Td1_samples, dtype=float)
    if len(td1) < poly_degree + 1:
        raise ValueError("need at least poly_degree + 1 samples")
    t = problem.template
    lo, hi = bracket if bracket is not None else (0.25 * t.T1, 3.0 * t.T1)
    move_t3 = "T23" in problem.free_params

    def timeline_for(td, t2):
        d = {"Td1": float(td), "T2": float(t2)}
        if move_t3:
            d["T3"] = float(t2)
        if t.scheme.is_full_loop:
            d["Td2"] = float(td)
        return t.with_durations(**d)

    def log_vis(td, t2_values):
        return run_batch([timeline_for(td, v) for v in t2_values], problem.initial)["log_overlap"]

    flagged = False
    optima = []
    for td in td1:
        a, b = lo, hi
        for attempt in range(2):
            grid = np.linspace(a, b, n_coarse)
            vals = log_vis(td, grid)
            if _count_local_maxima(vals) == 1:
                break
            a, b = max(0.0, a - 0.5 * (b - a)), b + 0.5 * (b - a)
        else:
            flagged = True
        i = int(np.argmax(vals))
        if i in (0, n_coarse - 1):
            # optimum on the edge of the bracket: no refinement possible
            flagged = True
            optima.append(float(grid[i]))
            continue
        res = minimize_scalar(
            lambda v: -float(log_vis(td, [v])[0]),
            bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden",
            tol=1e-10,
        )
        optima.append(float(res.x))
    optima = np.array(optima)
    poly = Polynomial.fit(td1, optima, poly_degree).convert()
    return T2Curve(poly, td1, optima, flagged)
