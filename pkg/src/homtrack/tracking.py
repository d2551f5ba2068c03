"""Zero-curve tracking from (lam, x) = (0, a) toward lam = 1.

Two interchangeable strategies trace the curve rho(lam, x) = 0:

* ``pc``  -- predictor-corrector stepping: Hermite cubic prediction through
  the last two accepted points, normal-flow correction back onto the curve,
  step doubling/halving driven by corrector effort.
* ``ode`` -- integrate the tangent field with an adaptive embedded
  Runge-Kutta pair, scanning for a candidate solution after each of the
  C_n + 1 equal checkpoint intervals of [0, S_f].

Points and tangents use the (lam, x) layout with lambda first.  Homotopy
contexts expose Jacobians as [d rho/dx | d rho/d lam]; the column reorder is
confined to this module.

The ODE field comes in two parametrizations:

* ``arclength`` -- unit tangent, so the integration variable is Euclidean
  arclength.  Initial orientation makes the lambda component positive;
  subsequent signs follow the acute-angle rule.
* ``adjugate`` -- the tangent scaled by the product of the singular values of
  the full Jacobian, oriented at the start by the signed maximal minors
  (lambda component = det d rho/dx).  This smooth unnormalized field is the
  classical alternative to arclength parametrization; the reference
  experiment tables are reproducible only under it, because a start matrix
  with a large SPD shift makes the field fast and collapses the number of
  checked intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .problems import eval_F, jacobian, scaled_residual

Array = np.ndarray

# relative sigma_min threshold below which the curve Jacobian is declared
# rank deficient
RANK_RTOL = 1e-12

# largest tolerated prediction overshoot past lam = 1 before the step shrinks
_LAMBDA_OVERSHOOT = 0.05

STATUS_REACHED = "reached_lambda1"
STATUS_EXHAUSTED = "exhausted_arclength"
STATUS_RANK = "rank_deficient"
STATUS_UNDERFLOW = "step_underflow"
STATUS_RESIDUAL = "candidate_residual"


class RankDeficientError(RuntimeError):
    """The curve Jacobian lost rank; continuation cannot proceed."""


class CorrectorError(RuntimeError):
    """Normal-flow correction failed to converge within the iteration cap."""


@dataclass(frozen=True)
class TrackPoint:
    """An accepted point on the curve with its unit tangent (lambda first)."""

    s: float
    lam: float
    x: Array
    tangent: Array

    @property
    def coords(self) -> Array:
        return np.concatenate([[self.lam], self.x])


@dataclass(frozen=True)
class TrackerConfig:
    strategy: str = "ode"
    s_max: float = 5.0          # arclength budget S_f
    checkpoints: int = 70       # intermediate checks C_n; S_f splits into C_n + 1 intervals
    h0: float = 0.1
    h_min: float = 1e-10
    h_max: float = 0.5
    corrector_tol: float = 1e-8
    corrector_maxit: int = 6
    candidate_tol: float = 1e-3
    ode_rel_tol: float = 1e-6
    ode_abs_tol: float = 1e-9
    ode_field: str = "arclength"  # or "adjugate"
    path_tol: Optional[float] = None

    def __post_init__(self):
        if self.strategy not in ("ode", "pc"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.ode_field not in ("arclength", "adjugate"):
            raise ValueError(f"unknown ode field {self.ode_field!r}")
        if self.s_max <= 0:
            raise ValueError("s_max must be positive")
        if self.checkpoints < 0:
            raise ValueError("checkpoints must be >= 0")
        if not (0 < self.h_min <= self.h0 <= self.h_max):
            raise ValueError("need 0 < h_min <= h0 <= h_max")
        if self.corrector_maxit < 1:
            raise ValueError("corrector_maxit must be >= 1")

    @property
    def effective_path_tol(self) -> float:
        if self.path_tol is not None:
            return self.path_tol
        return 1e-6 if self.strategy == "pc" else 10.0 * self.ode_rel_tol


@dataclass
class CurveTrace:
    """Ordered accepted points plus the outcome of a tracking run.

    ``checkpoint_hit`` is the 1-based index of the checkpoint interval where a
    candidate was found (ODE strategy only); the predictor-corrector strategy
    reports its accepted step count instead.
    """

    points: List[TrackPoint]
    status: str
    hsol: Optional[Array] = None
    checkpoint_hit: Optional[int] = None
    steps: int = 0
    endpoint_flagged: bool = False

    @property
    def success(self) -> bool:
        return self.status in (STATUS_REACHED, STATUS_RESIDUAL)


def _tracker_jacobian(hmap, lam: float, x: Array) -> Array:
    """Homotopy Jacobian with the lambda column moved to the front."""
    j = hmap.rho_jacobian(lam, x)
    return np.hstack([j[:, -1:], j[:, :-1]])


def _null_and_volume(jac: Array) -> Tuple[Array, float]:
    """Unit null vector of the n x (n+1) Jacobian and the product of its
    singular values (the norm of the signed-minor tangent)."""
    _, sv, vh = np.linalg.svd(jac)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficientError(
            f"curve Jacobian is rank deficient (sigma_min/sigma_max = "
            f"{sv[-1] / sv[0] if sv[0] else 0:.3e})"
        )
    return vh[-1], float(np.prod(sv))


def _orient_first(t: Array) -> Array:
    """Initial sign: lambda component positive.  At an exact lambda tangency
    the rule is vacuous; fall back to a fixed convention (leading nonzero
    state component negative, the branch the reference runs follow on
    symmetric problems)."""
    if t[0] > RANK_RTOL:
        return t
    if t[0] < -RANK_RTOL:
        return -t
    lead = np.flatnonzero(np.abs(t[1:]) > RANK_RTOL)
    if lead.size and t[1 + lead[0]] > 0:
        return -t
    return t


def tangent(jac: Array, prev: Optional[Array] = None) -> Array:
    """Unit tangent to the zero curve from its full Jacobian (lambda column
    first).

    With ``prev`` given, the sign keeps an acute angle against it; otherwise
    the lambda component is made positive so the curve leaves lam = 0 forward.
    Raises RankDeficientError when the Jacobian has rank below n.
    """
    t, _ = _null_and_volume(np.asarray(jac, dtype=float))
    if prev is not None:
        if float(np.dot(t, prev)) < 0.0:
            t = -t
        return t
    return _orient_first(t)


def _cramer_tangent(jac: Array) -> Array:
    """Signed-minor null vector: component i is (-1)^i times the determinant
    of the Jacobian with column i removed.  Carries the natural orientation
    and magnitude of the adjugate field (leading component = det d rho/dx in
    tracker layout)."""
    n = jac.shape[0]
    v = np.empty(n + 1)
    for i in range(n + 1):
        v[i] = (-1.0) ** i * np.linalg.det(np.delete(jac, i, axis=1))
    return v


def hermite_predict(p0: TrackPoint, p1: TrackPoint, h: float) -> Array:
    """Evaluate the Hermite cubic through (p0, p1) and their unit tangents at
    s = p1.s + h."""
    sigma = p1.s - p0.s
    if sigma <= 0:
        raise ValueError("points must have increasing arclength")
    tau = 1.0 + h / sigma
    t2, t3 = tau * tau, tau * tau * tau
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + tau
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return (
        h00 * p0.coords
        + h10 * sigma * p0.tangent
        + h01 * p1.coords
        + h11 * sigma * p1.tangent
    )


def normal_flow_correct(hmap, w0: Array, cfg: TrackerConfig) -> Tuple[Array, int]:
    """Return to the curve from w0 = (lam, x) by minimum-norm Newton steps.

    Each step solves the underdetermined system D rho * z = -rho for the
    shortest z, so iterates move perpendicular to the curve.  Stops once the
    normalized step |z| / (1 + |w|) falls below the corrector tolerance;
    exceeding the iteration cap raises CorrectorError and a rank-deficient
    Jacobian raises RankDeficientError.
    """
    w = np.asarray(w0, dtype=float).copy()
    n = w.shape[0] - 1
    for it in range(1, cfg.corrector_maxit + 1):
        r = hmap.rho(w[0], w[1:])
        jac = _tracker_jacobian(hmap, w[0], w[1:])
        z, _, rank, _ = np.linalg.lstsq(jac, -r, rcond=RANK_RTOL)
        if rank < n:
            raise RankDeficientError("rank-deficient Jacobian in corrector")
        w = w + z
        if np.linalg.norm(z) / (1.0 + np.linalg.norm(w)) <= cfg.corrector_tol:
            return w, it
    raise CorrectorError(f"no convergence in {cfg.corrector_maxit} corrector iterations")


def cross_lambda1(p_before: TrackPoint, p_after: TrackPoint, hmap, cfg: TrackerConfig) -> Tuple[Array, bool]:
    """Extract the solution estimate where the curve crosses lam = 1.

    Interpolates linearly in s between the bracketing points, then runs one
    corrector pass restricted to the lam = 1 hyperplane, i.e. plain Newton on
    the target system.  Returns (hsol, flagged); flagged means the correction
    failed and the raw interpolant was kept.
    """
    lam0, lam1 = p_before.lam, p_after.lam
    if not (lam0 < 1.0 <= lam1):
        if lam0 == 1.0:
            return p_before.x.copy(), False
        raise ValueError("cross_lambda1 requires lam(before) < 1 <= lam(after)")
    frac = (1.0 - lam0) / (lam1 - lam0)
    x = p_before.x + frac * (p_after.x - p_before.x)
    x0 = x.copy()
    for _ in range(cfg.corrector_maxit):
        fx = eval_F(hmap.problem, x)
        try:
            step = np.linalg.solve(jacobian(hmap.problem, x), -fx)
        except np.linalg.LinAlgError:
            return x0, True
        x = x + step
        if np.linalg.norm(step) / (1.0 + np.linalg.norm(x)) <= cfg.corrector_tol:
            return x, False
    return x0, True


def _refine_crossing(hmap, lo: Array, hi: Array, cfg: TrackerConfig) -> Array:
    """Bisect a lam = 1 crossing bracket along the curve until the upper
    point sits essentially on the hyperplane.

    Midpoint chords are corrected back onto the curve, so the refinement
    stays faithful even when the bracketing step jumped a steep terminal
    segment.  Returns the refined upper point.
    """
    lo = np.asarray(lo, dtype=float).copy()
    hi = np.asarray(hi, dtype=float).copy()
    tol = max(cfg.corrector_tol, 1e-9)
    for _ in range(80):
        if hi[0] - 1.0 <= tol or float(np.linalg.norm(hi - lo)) <= 1e-12:
            break
        try:
            mid, _ = normal_flow_correct(hmap, 0.5 * (lo + hi), cfg)
        except (CorrectorError, RankDeficientError):
            break
        if mid[0] >= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def _residual_scale(hmap, x: Array) -> float:
    return float(np.max(np.abs(scaled_residual(hmap.problem, x))))


def _path_residual(hmap, lam: float, x: Array) -> float:
    return float(np.max(np.abs(hmap.rho(lam, x))) / (1.0 + np.linalg.norm(x)))


def pc_track(hmap, a: Optional[Array] = None, cfg: Optional[TrackerConfig] = None) -> CurveTrace:
    """Predictor-corrector tracking from (0, a) until lam crosses 1.

    Step control: corrector success within two iterations doubles h (capped at
    h_max); corrector failure halves h and repredicts; h underflow below h_min
    aborts the run.  The first prediction is linear, later ones Hermite cubic.
    """
    cfg = cfg or TrackerConfig(strategy="pc")
    if cfg.strategy != "pc":
        cfg = replace(cfg, strategy="pc")
    a = np.asarray(hmap.anchor if a is None else a, dtype=float)
    points: List[TrackPoint] = []
    try:
        t = tangent(_tracker_jacobian(hmap, 0.0, a))
    except RankDeficientError:
        return CurveTrace(points=[], status=STATUS_RANK)
    points.append(TrackPoint(s=0.0, lam=0.0, x=a, tangent=t))

    h = cfg.h0
    steps = 0
    while True:
        cur = points[-1]
        if cur.s >= cfg.s_max:
            return CurveTrace(points=points, status=STATUS_EXHAUSTED,
                              hsol=cur.x.copy(), steps=steps)
        if len(points) == 1:
            w_pred = cur.coords + h * cur.tangent
        else:
            w_pred = hermite_predict(points[-2], points[-1], h)
        # predicting deep past the target hyperplane wastes effort and risks
        # corrector capture by a foreign component of the zero set
        if cur.lam < 1.0 and w_pred[0] > 1.0 + _LAMBDA_OVERSHOOT and h > cfg.h_min:
            h *= 0.5
            continue
        try:
            w_new, iters = normal_flow_correct(hmap, w_pred, cfg)
            accept = _path_residual(hmap, w_new[0], w_new[1:]) <= cfg.effective_path_tol
            # a corrected point that collapsed onto the previous one is useless
            accept = accept and np.linalg.norm(w_new - cur.coords) > 1e-12
            # a correction much larger than the step means the predictor left
            # the curve's neighborhood (risking a jump to another component)
            corr_dist = float(np.linalg.norm(w_new - w_pred))
            accept = accept and corr_dist <= max(
                0.25 * h, 1e3 * cfg.corrector_tol * (1.0 + np.linalg.norm(w_new)))
        except CorrectorError:
            accept = False
        except RankDeficientError:
            return CurveTrace(points=points, status=STATUS_RANK,
                              hsol=cur.x.copy(), steps=steps)
        if not accept:
            h *= 0.5
            if h < cfg.h_min:
                return CurveTrace(points=points, status=STATUS_UNDERFLOW,
                                  hsol=cur.x.copy(), steps=steps)
            continue

        steps += 1
        ds = float(np.linalg.norm(w_new - cur.coords))
        if w_new[0] >= 1.0:
            w_hi = _refine_crossing(hmap, cur.coords, w_new, cfg)
            after = TrackPoint(s=cur.s + ds, lam=float(w_hi[0]), x=w_hi[1:], tangent=cur.tangent)
            hsol, flagged = cross_lambda1(cur, after, hmap, cfg)
            final = np.concatenate([[1.0], hsol])
            try:
                t_final = tangent(_tracker_jacobian(hmap, 1.0, hsol), prev=cur.tangent)
            except RankDeficientError:
                t_final = cur.tangent
            points.append(TrackPoint(s=cur.s + float(np.linalg.norm(final - cur.coords)),
                                     lam=1.0, x=hsol, tangent=t_final))
            return CurveTrace(points=points, status=STATUS_REACHED, hsol=hsol,
                              steps=steps, endpoint_flagged=flagged)
        try:
            t_new = tangent(_tracker_jacobian(hmap, w_new[0], w_new[1:]), prev=cur.tangent)
        except RankDeficientError:
            return CurveTrace(points=points, status=STATUS_RANK,
                              hsol=cur.x.copy(), steps=steps)
        points.append(TrackPoint(s=cur.s + ds, lam=float(w_new[0]), x=w_new[1:], tangent=t_new))
        if iters <= 2:
            h = min(2.0 * h, cfg.h_max)


@dataclass(frozen=True)
class Candidate:
    kind: str  # "crossing" or "residual"
    s: float
    y: Array   # (lam, x) at detection


def checkpoint_scan(dense, s0: float, s1: float, endpoint: Array, hmap,
                    cfg: TrackerConfig, samples: int = 33) -> Optional[Candidate]:
    """Scan one checkpoint interval for a candidate solution.

    A candidate is a lam = 1 crossing located on the dense interpolant
    (bracketed on a sample grid, then refined by root finding), or failing
    that, a corrected interval endpoint whose scaled target residual is within
    the candidate tolerance.
    """
    ss = np.linspace(s0, s1, samples)
    lams = np.array([dense(s)[0] for s in ss])
    above = np.flatnonzero(lams >= 1.0)
    if above.size and above[0] > 0:
        i = above[0]
        s_hit = brentq(lambda s: dense(s)[0] - 1.0, ss[i - 1], ss[i], xtol=1e-13)
        return Candidate(kind="crossing", s=float(s_hit), y=np.asarray(dense(s_hit)))
    if endpoint[0] >= 1.0:  # drift correction pushed the endpoint over
        return Candidate(kind="crossing", s=s1, y=endpoint.copy())
    if _residual_scale(hmap, endpoint[1:]) <= cfg.candidate_tol:
        return Candidate(kind="residual", s=s1, y=endpoint.copy())
    return None


def ode_track(hmap, a: Optional[Array] = None, cfg: Optional[TrackerConfig] = None) -> CurveTrace:
    """Track the curve by integrating the tangent field, checking for a
    candidate after each of the C_n + 1 equal subintervals of [0, S_f].

    One normal-flow correction is applied at every checkpoint boundary to pull
    the integrated path back onto the curve; the trace stops at the first
    candidate and records the interval index N_c.
    """
    cfg = cfg or TrackerConfig(strategy="ode")
    if cfg.strategy != "ode":
        cfg = replace(cfg, strategy="ode")
    a = np.asarray(hmap.anchor if a is None else a, dtype=float)
    y0 = np.concatenate([[0.0], a])

    jac0 = _tracker_jacobian(hmap, 0.0, a)
    try:
        t_unit, _ = _null_and_volume(jac0)
    except RankDeficientError:
        return CurveTrace(points=[], status=STATUS_RANK)
    if cfg.ode_field == "adjugate":
        raw = _cramer_tangent(jac0)
        norm = np.linalg.norm(raw)
        if norm == 0.0:
            return CurveTrace(points=[], status=STATUS_RANK)
        t0 = raw / norm
    else:
        t0 = _orient_first(t_unit)

    state = {"prev": t0}

    def rhs(s, y):
        jac = _tracker_jacobian(hmap, y[0], y[1:])
        t, vol = _null_and_volume(jac)
        if float(np.dot(t, state["prev"])) < 0.0:
            t = -t
        state["prev"] = t
        return t * vol if cfg.ode_field == "adjugate" else t

    points: List[TrackPoint] = [TrackPoint(s=0.0, lam=0.0, x=a.copy(), tangent=t0)]
    edges = np.linspace(0.0, cfg.s_max, cfg.checkpoints + 2)
    y = y0

    # stop integrating the moment lam crosses 1 upward: past the crossing the
    # curve no longer matters and (for the unnormalized field) may blow up in
    # finite parameter time
    def crossing_event(s, y):
        return y[0] - 1.0

    crossing_event.terminal = True
    crossing_event.direction = 1.0

    def record(s, w):
        # integrator step points go into the trace so it resolves folds;
        # tangents chain off the previous recorded one
        t_here = tangent(_tracker_jacobian(hmap, w[0], w[1:]), prev=points[-1].tangent)
        points.append(TrackPoint(s=float(s), lam=float(w[0]), x=w[1:].copy(),
                                 tangent=t_here))

    for k in range(1, len(edges)):
        s0, s1 = float(edges[k - 1]), float(edges[k])
        try:
            sol = solve_ivp(rhs, (s0, s1), y, method="RK45",
                            rtol=cfg.ode_rel_tol, atol=cfg.ode_abs_tol,
                            dense_output=True, events=[crossing_event])
            for i in range(1, len(sol.t) - 1):
                record(sol.t[i], sol.y[:, i])
        except RankDeficientError:
            return CurveTrace(points=points, status=STATUS_RANK,
                              hsol=y[1:].copy(), checkpoint_hit=None)
        if sol.t_events[0].size:
            cand = Candidate(kind="crossing", s=float(sol.t_events[0][0]),
                             y=np.asarray(sol.y_events[0][0]))
        else:
            if not sol.success:
                return CurveTrace(points=points, status=STATUS_UNDERFLOW,
                                  hsol=y[1:].copy(), checkpoint_hit=None)
            endpoint = sol.y[:, -1]
            try:
                endpoint, _ = normal_flow_correct(hmap, endpoint, cfg)
            except (CorrectorError, RankDeficientError):
                pass  # keep the uncorrected endpoint; the next interval retries
            cand = checkpoint_scan(sol.sol, s0, float(sol.t[-1]), endpoint, hmap, cfg)
        if cand is not None and cand.kind == "crossing":
            y_hit = cand.y
            before = points[-1]
            if y_hit[0] < 1.0:  # guard against interpolant round-off
                y_hit = y_hit.copy()
                y_hit[0] = 1.0
            after = TrackPoint(s=cand.s, lam=float(y_hit[0]), x=y_hit[1:], tangent=before.tangent)
            hsol, flagged = cross_lambda1(before, after, hmap, cfg)
            try:
                t_final = tangent(_tracker_jacobian(hmap, 1.0, hsol), prev=points[-1].tangent)
            except RankDeficientError:
                t_final = points[-1].tangent
            s_final = max(cand.s, before.s + 1e-13)
            points.append(TrackPoint(s=s_final, lam=1.0, x=hsol, tangent=t_final))
            return CurveTrace(points=points, status=STATUS_REACHED, hsol=hsol,
                              checkpoint_hit=k, endpoint_flagged=flagged)

        try:
            record(sol.t[-1], endpoint)
        except RankDeficientError:
            return CurveTrace(points=points, status=STATUS_RANK,
                              hsol=endpoint[1:].copy(), checkpoint_hit=None)
        if cand is not None:  # residual-based acceptance before lam reaches 1
            return CurveTrace(points=points, status=STATUS_RESIDUAL,
                              hsol=endpoint[1:].copy(), checkpoint_hit=k)
        y = endpoint

    return CurveTrace(points=points, status=STATUS_EXHAUSTED,
                      hsol=y[1:].copy(), checkpoint_hit=None)


def track(hmap, cfg: TrackerConfig, a: Optional[Array] = None) -> CurveTrace:
    """Dispatch to the configured strategy."""
    if cfg.strategy == "pc":
        return pc_track(hmap, a=a, cfg=cfg)
    return ode_track(hmap, a=a, cfg=cfg)
