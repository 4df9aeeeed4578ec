"""
Secant pathfollowing of the solution branch in the (N, y0) plane.

Each branch point is a converged BVP solution.  From the last two points
z1, z2 the predictor steps a distance delta along the secant,

    w = z2 + delta v,   v = (z2 - z1) / |z2 - z1|,

and the corrector solves the BVP with the Neumann condition at eta = 1
replaced by the line through w orthogonal to v,

    v2 y(0) - v1 y'(1) = v1 w1 + v2 w2,

which lets the branch pass through folds where N is not a valid parameter.
Whenever N_target falls between two consecutive branch values the BVP is
solved at N_target directly, so walking the branch enumerates solutions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .hofid import (DEFAULT_ORDER, BvpSolution, MeshError, NoConvergence, RightCondition,
                    initial_guess, solve_bvp)

# a corrected point further than this many step lengths from its predictor
# has most likely jumped to a distant part of the branch
CORRECTION_LIMIT = 2.0
ILLINOIS_MAX_ITER = 60


class InitialSolveFailed(RuntimeError):
    """No lower-branch solution at the requested N."""


class ContinuationError(RuntimeError):
    """Pathfollowing aborted; ``branch`` holds everything traced so far."""

    def __init__(self, message, branch=None):
        super().__init__(message)
        self.branch = branch


@dataclass(frozen=True)
class BranchPoint:
    N: float
    y0: float
    solution_ref: int

    @property
    def z(self):
        return np.array([self.N, self.y0])


@dataclass
class Branch:
    points: List[BranchPoint] = field(default_factory=list)
    turning_points: List[int] = field(default_factory=list)
    solve_count: int = 0
    event_solves: int = 0
    solutions: Dict[int, BvpSolution] = field(default_factory=dict, repr=False)

    def solution(self, point):
        return self.solutions[point.solution_ref]

    def add(self, sol):
        ref = len(self.solutions)
        self.solutions[ref] = sol
        pt = BranchPoint(float(sol.N), float(sol.y0), ref)
        self.points.append(pt)
        if len(self.points) >= 3:
            a, b, c = self.points[-3:]
            if (b.N - a.N) * (c.N - b.N) < 0:
                self.turning_points.append(len(self.points) - 2)
        return pt

    def arrays(self):
        return (np.array([p.N for p in self.points]), np.array([p.y0 for p in self.points]))


@dataclass(frozen=True)
class ContinuationConfig:
    delta0: float = 0.2
    delta_min: float = 1e-4
    delta_max: float = 0.5
    n_min: int = 3
    n_max: int = 10
    dN: float = 0.05
    N_margin: float = 0.05
    order: int = DEFAULT_ORDER
    tol: float = 1e-8
    scale: Tuple[float, float] = (1.0, 1.0)
    stop_arclength: float = 1.0
    dedup_tol: float = 1e-4
    max_solves: int = 5000
    max_solutions: Optional[int] = None
    persist: Optional[str] = None

    def __post_init__(self):
        if not 0 < self.delta_min <= self.delta0 <= self.delta_max:
            raise ValueError("need 0 < delta_min <= delta0 <= delta_max")
        if not self.n_min < self.n_max:
            raise ValueError("need n_min < n_max")
        if self.dN <= 0 or self.N_margin < 0 or self.tol <= 0:
            raise ValueError("dN and tol must be positive, N_margin non-negative")
        if min(self.scale) <= 0:
            raise ValueError("axis scales must be positive")


@dataclass
class EnumerationResult:
    N_target: float
    solutions: List[BvpSolution]
    branch: Branch
    stopped_reason: str

    @property
    def y0(self):
        return [s.y0 for s in self.solutions]


def _scaled(z, config):
    return np.asarray(z, dtype=float) / np.asarray(config.scale)


def _lower_branch_limit():
    # y0 at the first fold, from the closed form y0 = 2 ln sigma
    from .representation import critical_thresholds
    th = critical_thresholds()
    return th.n2, 2.0 * math.log(th.sigma_n2)


def _solve_plain(N, guess, config):
    return solve_bvp(N, guess=guess, p=config.order, tol=config.tol)


def first_two_points(N_target, config=None):
    """Lower-branch solutions at N_target and N_target +- dN.

    The offset points toward larger N unless N_target is within
    ``N_margin`` of the first fold, in which case it points the other way.

    Raises
    ------
    InitialSolveFailed
        If N_target exceeds the first fold value N2 or no lower-branch
        solution is found from the quadratic starting guesses.
    """
    config = config or ContinuationConfig()
    if N_target <= 0:
        raise ValueError("N must be positive")
    n2, y0_fold = _lower_branch_limit()
    if N_target > n2:
        raise InitialSolveFailed(
            f"N exceeds N2 = {n2:.10g}: no solutions exist; start from a lower N "
            "and follow the branch instead")
    z1 = None
    for strategy in ("midpoint", "integral"):
        try:
            sol = _solve_plain(N_target, initial_guess(N_target, strategy), config)
        except (NoConvergence, MeshError):
            continue
        if sol.y0 <= y0_fold + 1e-6:
            z1 = sol
            break
    if z1 is None:
        raise InitialSolveFailed(
            f"no lower-branch solution found at N = {N_target:g}; "
            "solve at a lower N and continue along the branch")
    step = config.dN if N_target < n2 - config.N_margin else -config.dN
    try:
        z2 = _solve_plain(N_target + step, z1, config)
    except (NoConvergence, MeshError) as exc:
        raise InitialSolveFailed(f"second start point at N = {N_target + step:g} failed: {exc}")
    return z1, z2


def predictor(z1, z2, delta, scale=(1.0, 1.0)):
    """w = z2 + delta v along the unit secant v (in scaled coordinates).

    Returns ``(w, v)`` with both in the scaled plane.
    """
    s = np.asarray(scale, dtype=float)
    a = np.asarray(z1, dtype=float) / s
    b = np.asarray(z2, dtype=float) / s
    d = b - a
    norm = float(np.hypot(*d))
    if norm == 0.0:
        raise ValueError("zero secant: the two branch points coincide")
    v = d / norm
    return b + delta * v, v


def corrector(w, v, guess_solution, config=None):
    """Solve the BVP on the hyperplane through ``w`` orthogonal to ``v``.

    ``w`` and ``v`` live in the scaled plane; the returned solution reports
    its realized N = -y'(1).
    """
    config = config or ContinuationConfig()
    s = np.asarray(config.scale, dtype=float)
    # v . (z / s) = v . w  is  (v / s) . z = v . w  in unscaled coordinates
    cond = RightCondition(float(v[0] / s[0]), float(v[1] / s[1]), float(np.dot(v, w)))
    return solve_bvp(cond, guess=guess_solution, p=config.order, tol=config.tol)


def adapt_delta(delta, n_k, outcome, config=None):
    """Step-size update after a corrector call.

    ``outcome`` is False for a convergence failure.  Halve on failure or
    slow convergence, double on fast convergence, clamp to the bounds.

    Raises
    ------
    ContinuationError
        When a failure occurs with delta already at ``delta_min``.
    """
    config = config or ContinuationConfig()
    if not outcome:
        if delta <= config.delta_min:
            raise ContinuationError(f"corrector failed at the minimum step {config.delta_min:g}")
        return max(delta / 2.0, config.delta_min)
    if n_k > config.n_max:
        return max(delta / 2.0, config.delta_min)
    if n_k < config.n_min:
        return min(2.0 * delta, config.delta_max)
    return delta


def detect_event(N_target, zA, zB):
    """True when N_target lies in the closed interval spanned by zA.N and zB.N."""
    na = zA.N if isinstance(zA, BranchPoint) else zA[0]
    nb = zB.N if isinstance(zB, BranchPoint) else zB[0]
    return min(na, nb) <= N_target <= max(na, nb)


def _illinois(f, a, fa, b, fb, xtol, ftol=0.0):
    """Illinois false position on a bracket with fa * fb <= 0."""
    side = 0
    c = a
    for _ in range(ILLINOIS_MAX_ITER):
        c = (a * fb - b * fa) / (fb - fa)
        fc = f(c)
        if abs(fc) <= ftol or abs(b - a) < xtol:
            return c
        if fc * fb < 0:
            a, fa = b, fb
            b, fb = c, fc
            side = 0
        else:
            b, fb = c, fc
            if side == -1:
                fa /= 2.0
            side = -1
        if abs(b - a) < xtol:
            return c
    return c


class _EventSolver:
    """Solution at N_target between two bracketing branch points."""

    def __init__(self, N_target, branch, config):
        self.N_target, self.branch, self.config = N_target, branch, config

    def _inside(self, sol, pa, pb):
        lo, hi = sorted((pa.y0, pb.y0))
        slack = 1e-3 * (hi - lo) + 1e-6
        return lo - slack <= sol.y0 <= hi + slack

    def __call__(self, pa, pb):
        br, cfg, Nt = self.branch, self.config, self.N_target
        near = pa if abs(pa.N - Nt) <= abs(pb.N - Nt) else pb
        try:
            br.event_solves += 1
            sol = _solve_plain(Nt, br.solution(near), cfg)
            if self._inside(sol, pa, pb):
                return sol
        except (NoConvergence, MeshError):
            pass
        # y0 is a valid parameter along the whole branch: bracket in y0.  Far up
        # the branch N hardly moves with y0 and the Neumann problem is close
        # to singular, so the fixed-y0 solution is kept once it meets N_target.
        best = [br.solution(near)]

        def f(y0):
            br.event_solves += 1
            s = solve_bvp(RightCondition.fixed_y0(y0), guess=best[0], p=cfg.order, tol=cfg.tol)
            if abs(s.N - Nt) <= abs(best[0].N - Nt):
                best[0] = s
            return s.N - Nt

        y0 = _illinois(f, pa.y0, pa.N - Nt, pb.y0, pb.N - Nt, xtol=1e-12,
                       ftol=1e-2 * cfg.tol)
        sol = best[0]
        if abs(sol.N - Nt) > cfg.tol:
            br.event_solves += 1
            sol = _solve_plain(Nt, sol, cfg)
        if not self._inside(sol, pa, pb):
            raise NoConvergence(f"event solve at N = {Nt:g} left the bracket near y0 = {y0:.6g}")
        return sol


def _persist(path, point):
    with open(path, "a") as fh:
        fh.write(json.dumps({"N": point.N, "y0": point.y0, "solution_ref": point.solution_ref}) + "\n")


def _trace(z1, z2, config, on_step):
    """Generic pathfollowing loop; ``on_step(branch, a, b)`` returns a stop reason or None."""
    branch = Branch()
    for sol in (z1, z2):
        pt = branch.add(sol)
        if config.persist:
            _persist(config.persist, pt)
    delta = config.delta0
    while True:
        if branch.solve_count >= config.max_solves:
            return branch, "config-limit"
        a, b = branch.points[-2:]
        w, v = predictor(a.z, b.z, delta, config.scale)
        branch.solve_count += 1
        try:
            sol = corrector(w, v, branch.solution(b), config)
            dist = float(np.hypot(*(_scaled((sol.N, sol.y0), config) - w)))
            if dist > CORRECTION_LIMIT * delta or sol.y0 == b.y0:
                raise NoConvergence(f"corrector jumped {dist:.3g} from the predictor")
        except (NoConvergence, MeshError):
            try:
                delta = adapt_delta(delta, None, False, config)
            except ContinuationError as exc:
                exc.branch = branch
                raise
            continue
        pt = branch.add(sol)
        if config.persist:
            _persist(config.persist, pt)
        delta = adapt_delta(delta, sol.stats.newton_iters, True, config)
        reason = on_step(branch, b, pt)
        if reason:
            return branch, reason


def enumerate_solutions(N_target, config=None):
    """All solutions at N_target reachable along the branch from the lower one.

    The walk stops once a fold has closed a segment without events and the
    branch has then moved away from N_target for ``stop_arclength``; the
    segment before the first fold is exempt.  Solver failures inside an
    event are raised as ``ContinuationError`` carrying the traced branch.
    """
    config = config or ContinuationConfig()
    z1, z2 = first_two_points(N_target, config)
    start = z1
    if z2.y0 < z1.y0:
        # walk toward growing y0 (away from the trivial end of the branch)
        z1, z2 = z2, z1
    solutions: List[BvpSolution] = []
    state = {"event_since_fold": True, "folds_seen": 0, "away": 0.0, "silent_fold": False}
    events = _EventSolver(N_target, None, config)

    def add_solution(sol):
        if all(abs(sol.y0 - s.y0) >= config.dedup_tol for s in solutions):
            solutions.append(sol)
            solutions.sort(key=lambda s: s.y0)

    def on_step(branch, a, b):
        events.branch = branch
        if detect_event(N_target, a, b):
            try:
                add_solution(events(a, b))
            except (NoConvergence, MeshError) as exc:
                raise ContinuationError(f"event solve failed: {exc}", branch) from exc
            state["event_since_fold"] = True
            state["silent_fold"] = False
            state["away"] = 0.0
        if config.max_solutions and len(solutions) >= config.max_solutions:
            return "event-exhausted"
        n_tp = len(branch.turning_points)
        if n_tp > state["folds_seen"]:
            state["folds_seen"] = n_tp
            # the walk starts at N_target, so the first segment always has an event
            state["silent_fold"] = n_tp >= 2 and not state["event_since_fold"]
            state["event_since_fold"] = False
            state["away"] = 0.0
        if state["silent_fold"]:
            if abs(b.N - N_target) > abs(a.N - N_target):
                state["away"] += float(np.hypot(*(_scaled(b.z, config) - _scaled(a.z, config))))
                if state["away"] >= config.stop_arclength:
                    return "turning-point-without-event"
            else:
                state["away"] = 0.0
        return None

    add_solution(start)
    branch, reason = _trace(z1, z2, config, on_step)
    return EnumerationResult(float(N_target), solutions, branch, reason)


def trace_branch(N_start, config=None, folds=1, y0_max=None):
    """Follow the branch from the lower solution at N_start.

    Stops after ``folds`` turning points (plus a few steps to bracket the
    last one) or when y0 exceeds ``y0_max``.
    """
    config = config or ContinuationConfig()
    z1, z2 = first_two_points(N_start, config)
    if z2.y0 < z1.y0:
        z1, z2 = z2, z1
    after = {"steps": 0}

    def on_step(branch, a, b):
        if y0_max is not None and b.y0 > y0_max:
            return "y0-limit"
        if len(branch.turning_points) >= folds:
            after["steps"] += 1
            if after["steps"] >= 2:
                return "fold-count"
        return None

    branch, _ = _trace(z1, z2, config, on_step)
    return branch


def _extremum(f, a, b, kind, xatol):
    sign = -1.0 if kind == "maximum" else 1.0
    res = minimize_scalar(lambda x: sign * f(x), bounds=(a, b), method="bounded",
                          options={"xatol": xatol, "maxiter": 200})
    return float(res.x), sign * float(res.fun)


def find_fold(branch, which="first", n_of_y0: Optional[Callable[[float], float]] = None,
              config=None, xatol=1e-7):
    """Refined N at a turning point of ``branch``.

    Along the branch N is a smooth function of y0, so a fold is an
    extremum of N(y0).  It is located with bounded Brent iterations on the
    bracket formed by the neighbours of the recorded turning point; each
    evaluation is a fixed-y0 solve on the mesh of the nearest branch
    solution (``n_of_y0`` replaces the solver, e.g. for analytic tests).

    Returns
    -------
    (N_fold, y0_fold)
    """
    index = {"first": 0, "second": 1}.get(which, which)
    if not isinstance(index, int) or index >= len(branch.turning_points):
        raise ValueError(f"branch has no {which} turning point")
    k = branch.turning_points[index]
    a, b, c = branch.points[k - 1:k + 2]
    kind = "maximum" if b.N > a.N else "minimum"
    if n_of_y0 is None:
        config = config or ContinuationConfig()
        base = solve_bvp(RightCondition.fixed_y0(b.y0), guess=branch.solution(b),
                         p=config.order, tol=min(config.tol, 1e-10))
        mesh = base.mesh

        def n_of_y0(y0):
            return solve_bvp(RightCondition.fixed_y0(y0), mesh=mesh, guess=base,
                             p=config.order, refine=False).N

    lo, hi = sorted((a.y0, c.y0))
    y0, N = _extremum(n_of_y0, lo, hi, kind, xatol)
    return N, y0
