"""Sampling spot-checks of the convergence theory's preconditions.

The hypotheses quantify over all of R^n, so a sampler can only falsify them.
A passing report therefore means "no violation found in N samples", never
"verified"; a failing report always carries a concrete witness point that
re-evaluates to the reported violation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .problems import Problem, SpdMatrix, a_norm, eval_F, jacobian

Array = np.ndarray

DEFAULT_SAMPLES = 10_000
_SIGMA_FLOOR = 1e-10
_NEG_TOL = 1e-12


@dataclass(frozen=True)
class HypothesisReport:
    name: str
    passed: bool
    worst_value: float
    worst_witness: tuple
    samples: int
    seed: int
    skipped: int = 0
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst_value": float(self.worst_value),
            "worst_witness": [np.asarray(w, dtype=float).tolist() for w in self.worst_witness],
            "samples": int(self.samples),
            "seed": int(self.seed),
            "skipped": int(self.skipped),
            "note": self.note,
        }


def _default_box(dim: int, box: Optional[Array]) -> Array:
    if box is None:
        return np.tile(np.array([-10.0, 10.0]), (dim, 1))
    box = np.asarray(box, dtype=float).reshape(dim, 2)
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box upper bounds must exceed lower bounds")
    return box


def _sample(rng, box: Array, count: int) -> Array:
    return rng.uniform(box[:, 0], box[:, 1], size=(count, box.shape[0]))


def check_assumption1(problem: Problem, A: SpdMatrix, box: Optional[Array] = None,
                      n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> HypothesisReport:
    """Sample sigma_min(F'(x) + A) over the box; fails on any near-singular hit."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    box = _default_box(problem.dim, box if box is not None else problem.box)
    rng = np.random.default_rng(seed)
    worst = np.inf
    witness = None
    skipped = 0
    for x in _sample(rng, box, n_samples):
        try:
            sig = np.linalg.svd(jacobian(problem, x) + A.mat, compute_uv=False)
        except Exception:
            skipped += 1
            continue
        if sig[-1] < worst:
            worst = float(sig[-1])
            witness = x.copy()
    return HypothesisReport(
        name="assumption1_shifted_jacobian_nonsingular",
        passed=bool(worst > _SIGMA_FLOOR),
        worst_value=worst,
        worst_witness=(witness,),
        samples=n_samples,
        seed=seed,
        skipped=skipped,
        note="no violation found in sampled points" if worst > _SIGMA_FLOOR else "near-singular sample",
    )


def check_start_ball(problem: Problem, A: SpdMatrix, a: Array, M: float) -> HypothesisReport:
    """Check that a + A^{-1} F(a) lies inside the radius-M ball in the
    A^(1/2) norm."""
    if M <= 0:
        raise ValueError("M must be positive")
    a = np.asarray(a, dtype=float)
    shifted = a + A.solve(eval_F(problem, a))
    value = a_norm(A, shifted)
    return HypothesisReport(
        name="start_point_ball",
        passed=bool(value < M),
        worst_value=value,
        worst_witness=(shifted,),
        samples=1,
        seed=0,
        note=f"norm {value:.6g} vs radius {M:g}",
    )


def check_gen_monotone(f: Callable[[Array], Array], dim: int, delta: float,
                       box: Optional[Array] = None, n_pairs: int = DEFAULT_SAMPLES,
                       seed: int = 0) -> HypothesisReport:
    """Sample pairs at distance >= delta and test (x - y)^T (f(x) - f(y)) >= 0.

    Pairs drawn closer than delta are pushed apart along their chord, which
    may leave the box; only f values at the two points matter.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    box = _default_box(dim, box)
    rng = np.random.default_rng(seed)
    worst = np.inf
    witness = None
    for _ in range(n_pairs):
        x = rng.uniform(box[:, 0], box[:, 1])
        y = rng.uniform(box[:, 0], box[:, 1])
        gap = np.linalg.norm(x - y)
        if gap == 0.0:
            continue
        if gap < delta:
            y = x + (y - x) * (delta / gap)
        val = float((x - y) @ (np.asarray(f(x)) - np.asarray(f(y))))
        if val < worst:
            worst = val
            witness = (x.copy(), y.copy())
    return HypothesisReport(
        name="generalized_monotonicity",
        passed=bool(worst >= -_NEG_TOL),
        worst_value=worst,
        worst_witness=witness,
        samples=n_pairs,
        seed=seed,
        note=f"pair separation >= {delta:g}",
    )


def check_pseudo_monotone(problem: Problem, root: Array, box: Optional[Array] = None,
                          n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> HypothesisReport:
    """Post-hoc check anchored at a found root: (x - r)^T F(x) >= 0 sampled
    over the box.  Only meaningful after a solve, since the anchor point must
    be a solution."""
    root = np.asarray(root, dtype=float)
    box = _default_box(problem.dim, box if box is not None else problem.box)
    rng = np.random.default_rng(seed)
    worst = np.inf
    witness = None
    for x in _sample(rng, box, n_samples):
        val = float((x - root) @ eval_F(problem, x))
        if val < worst:
            worst = val
            witness = x.copy()
    return HypothesisReport(
        name="pseudo_monotone_at_root",
        passed=bool(worst >= -_NEG_TOL),
        worst_value=worst,
        worst_witness=(witness,),
        samples=n_samples,
        seed=seed,
    )
