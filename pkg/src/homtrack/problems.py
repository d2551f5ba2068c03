"""Square nonlinear systems, SPD scaling matrices, and the three homotopy maps.

The continuation machinery connects an easy start system at ``lam = 0`` to the
target system ``F`` at ``lam = 1``.  Three start maps are supported:

* ``nfph`` -- Newton/fixed-point blend: start system F(x) - F(a) + A(x - a)
  with A symmetric positive definite,
* ``fph``  -- plain fixed-point: start system x - a,
* ``nh``   -- Newton homotopy: F(x) - (1 - lam) F(a).

All three agree with F at ``lam = 1`` through the same code path, and vanish
at ``(lam, x) = (0, a)`` up to exact floating-point cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Array = np.ndarray

HOMOTOPY_KINDS = ("nfph", "fph", "nh")


class DomainError(ValueError):
    """A map evaluation produced a NaN or infinity.

    ``index`` points at the first offending output component.
    """

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


def _check_finite(values: Array, what: str) -> Array:
    bad = ~np.isfinite(values)
    if bad.any():
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise DomainError(f"{what} produced a non-finite entry at index {idx}", index=idx)
    return values


@dataclass(frozen=True)
class Problem:
    """A square C^2 map F: R^n -> R^n with optional analytic Jacobian.

    ``box`` is per-coordinate bounds metadata used by the benchmark layer and
    the diagnostics sampler; it is never enforced during solves.
    """

    dim: int
    f: Callable[[Array], Array]
    jac: Optional[Callable[[Array], Array]] = None
    name: str = "problem"
    box: Optional[Array] = None  # shape (dim, 2) rows of (lo, hi)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("problem dimension must be >= 1")
        if self.box is not None:
            box = np.asarray(self.box, dtype=float).reshape(self.dim, 2)
            object.__setattr__(self, "box", box)


def eval_F(problem: Problem, x: Array) -> Array:
    """Evaluate F(x), validating shape and finiteness."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dim,):
        raise ValueError(f"expected x of shape ({problem.dim},), got {x.shape}")
    out = np.asarray(problem.f(x), dtype=float)
    if out.shape != (problem.dim,):
        raise ValueError(f"{problem.name}: F returned shape {out.shape}")
    return _check_finite(out, f"{problem.name}: F")


def fd_jacobian(problem: Problem, x: Array, h: Optional[float] = None) -> Array:
    """Central-difference Jacobian of F at x.

    The default step ``sqrt(eps) * (1 + |x|_inf)`` balances truncation against
    rounding so analytic and difference runs stay comparable.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = np.sqrt(np.finfo(float).eps) * (1.0 + np.max(np.abs(x), initial=0.0))
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    n = problem.dim
    jac = np.empty((n, n))
    for j in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (eval_F(problem, xp) - eval_F(problem, xm)) / (2.0 * h)
    return _check_finite(jac, f"{problem.name}: finite-difference Jacobian")


def jacobian(problem: Problem, x: Array) -> Array:
    """Analytic Jacobian when available, finite differences otherwise."""
    if problem.jac is None:
        return fd_jacobian(problem, x)
    x = np.asarray(x, dtype=float)
    out = np.asarray(problem.jac(x), dtype=float)
    if out.shape != (problem.dim, problem.dim):
        raise ValueError(f"{problem.name}: Jacobian returned shape {out.shape}")
    return _check_finite(out, f"{problem.name}: Jacobian")


def scaled_residual(problem: Problem, x: Array) -> Array:
    """F(x) / (1 + |x|_2), the residual scale used for candidate acceptance.

    Its infinity norm is the scalar merit reported as fhom/fnew in benchmark
    tables.
    """
    x = np.asarray(x, dtype=float)
    return eval_F(problem, x) / (1.0 + np.linalg.norm(x))


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric positive-definite matrix stored with its Cholesky factor."""

    mat: Array
    chol: Array  # lower-triangular L with mat = L @ L.T

    @classmethod
    def from_matrix(cls, mat: Array) -> "SpdMatrix":
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("SpdMatrix requires a square matrix")
        sym_err = np.max(np.abs(mat - mat.T), initial=0.0)
        scale = np.max(np.abs(mat), initial=1.0)
        if sym_err > 1e-12 * max(scale, 1.0):
            raise ValueError(f"matrix is not symmetric (asymmetry {sym_err:.3e})")
        try:
            chol = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError as exc:
            raise ValueError("matrix is not positive definite") from exc
        return cls(mat=mat, chol=chol)

    @classmethod
    def scaled_identity(cls, alpha: float, n: int) -> "SpdMatrix":
        """alpha * I for alpha > 0."""
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        mat = alpha * np.eye(n)
        return cls(mat=mat, chol=np.sqrt(alpha) * np.eye(n))

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    def matvec(self, x: Array) -> Array:
        return self.mat @ x

    def solve(self, b: Array) -> Array:
        """A^{-1} b via the Cholesky factor."""
        y = np.linalg.solve(self.chol, b)
        return np.linalg.solve(self.chol.T, y)


def a_norm(A: SpdMatrix, x: Array) -> float:
    """sqrt(x^T A x), computed stably as |L^T x|_2."""
    x = np.asarray(x, dtype=float)
    if x.shape != (A.n,):
        raise ValueError(f"expected vector of length {A.n}, got shape {x.shape}")
    return float(np.linalg.norm(A.chol.T @ x))


@dataclass(frozen=True)
class HomotopyMap:
    """One of the three homotopy maps, bound to a problem and an anchor.

    F(a) is evaluated once at construction and reused; the anchor identity
    rho(0, a) = 0 then holds by exact cancellation.
    """

    kind: str
    problem: Problem
    anchor: Array
    A: Optional[SpdMatrix] = None
    f_anchor: Array = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in HOMOTOPY_KINDS:
            raise ValueError(f"unknown homotopy kind {self.kind!r}")
        anchor = np.asarray(self.anchor, dtype=float)
        if anchor.shape != (self.problem.dim,):
            raise ValueError("anchor length must equal the problem dimension")
        object.__setattr__(self, "anchor", anchor)
        if self.kind == "nfph":
            if self.A is None:
                raise ValueError("nfph requires an SPD matrix A")
            if self.A.n != self.problem.dim:
                raise ValueError("A dimension must equal the problem dimension")
        elif self.A is not None:
            raise ValueError(f"{self.kind} does not take a matrix A")
        object.__setattr__(self, "f_anchor", eval_F(self.problem, anchor))

    @property
    def dim(self) -> int:
        return self.problem.dim

    # thin delegations so trackers can consume any homotopy context uniformly
    def rho(self, lam: float, x: Array) -> Array:
        return eval_homotopy(self, lam, x)

    def rho_jacobian(self, lam: float, x: Array) -> Array:
        return homotopy_jacobian(self, lam, x)


def eval_homotopy(hmap: HomotopyMap, lam: float, x: Array) -> Array:
    """Evaluate rho(lam, x) for the map's kind.

    lam = 1 short-circuits to a plain F evaluation so the endpoint identity is
    structural rather than a floating-point coincidence.  The nominal range is
    [0, 1], but the formulas extend smoothly and trackers evaluate them
    outside it: integration is never clamped, so paths may overshoot 1 or dip
    below 0 before the crossing is extracted.
    """
    if not np.isfinite(lam):
        raise ValueError(f"lambda must be finite, got {lam}")
    x = np.asarray(x, dtype=float)
    if lam == 1.0:
        return eval_F(hmap.problem, x)
    fx = eval_F(hmap.problem, x)
    if hmap.kind == "nfph":
        return fx + (1.0 - lam) * (hmap.A.matvec(x - hmap.anchor) - hmap.f_anchor)
    if hmap.kind == "fph":
        return lam * fx + (1.0 - lam) * (x - hmap.anchor)
    return fx - (1.0 - lam) * hmap.f_anchor  # nh


def homotopy_jacobian(hmap: HomotopyMap, lam: float, x: Array) -> Array:
    """Full Jacobian of rho as the n x (n+1) block [d rho/dx | d rho/d lam].

    The x block comes first and the lambda column last; trackers that keep
    lambda as the leading coordinate reorder the columns themselves.
    """
    if not np.isfinite(lam):
        raise ValueError(f"lambda must be finite, got {lam}")
    x = np.asarray(x, dtype=float)
    jx_f = jacobian(hmap.problem, x)
    if hmap.kind == "nfph":
        jx = jx_f + (1.0 - lam) * hmap.A.mat
        jlam = hmap.f_anchor - hmap.A.matvec(x - hmap.anchor)
    elif hmap.kind == "fph":
        jx = lam * jx_f + (1.0 - lam) * np.eye(hmap.dim)
        jlam = eval_F(hmap.problem, x) - (x - hmap.anchor)
    else:  # nh
        jx = jx_f
        jlam = hmap.f_anchor.copy()
    return np.hstack([jx, jlam.reshape(-1, 1)])
