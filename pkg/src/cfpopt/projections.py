"""Projection operators onto elementary convex sets.

Orthogonal projections are exact for halfspaces, hyperplanes and boxes.  For
a general convex level set ``{x : c(x) <= 0}`` the subgradient projection

    Pi(x) = x - (c(x) / ||xi||^2) xi,   xi in the subdifferential of c at x

is used when ``c(x) > 0`` and is the identity otherwise.  When the set is a
halfspace in canonical form the subgradient projection coincides with the
orthogonal projection.

All operators are pure functions; per-run counters are passed in explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConvexFunction, Counters

__all__ = [
    "Relaxation",
    "ZeroSubgradientError",
    "project_halfspace",
    "project_hyperplane",
    "project_box",
    "subgradient_project",
    "relax_step",
]

# below this squared norm a subgradient is treated as zero (guards Inf steps)
_NORM2_FLOOR = 1e-300


class ZeroSubgradientError(ValueError):
    """A violated constraint returned a (numerically) zero subgradient.

    For a consistent set this cannot happen: a zero subgradient at x would
    force c(x) to be a global minimum, contradicting c(x) > 0.
    """


@dataclass(frozen=True)
class Relaxation:
    """Relaxation parameter schedule for projection steps.

    A constant value in the open interval (0, 2), or a per-iteration
    sequence via ``schedule`` (a callable k -> lambda_k, every value again
    in (0, 2)).
    """

    lam: float = 1.0
    schedule: object = None  # optional callable k -> float

    def __post_init__(self):
        if self.schedule is None and not 0.0 < self.lam < 2.0:
            raise ValueError(f"relaxation parameter must lie in (0, 2), got {self.lam}")

    def at(self, k: int) -> float:
        if self.schedule is None:
            return self.lam
        lam = float(self.schedule(k))
        if not 0.0 < lam < 2.0:
            raise ValueError(f"relaxation schedule produced {lam}, outside (0, 2)")
        return lam


def project_halfspace(a: np.ndarray, b: float, x: np.ndarray, counters: Counters | None = None) -> np.ndarray:
    """Orthogonal projection onto {y : a'y <= b}."""
    norm2 = float(a @ a)
    if norm2 <= 0.0:
        raise ValueError("halfspace normal must be nonzero")
    if counters is not None:
        counters.projections += 1
    r = float(a @ x)
    if r <= b:
        return x
    return x - ((r - b) / norm2) * a


def project_hyperplane(a: np.ndarray, b: float, x: np.ndarray, counters: Counters | None = None) -> np.ndarray:
    """Orthogonal projection onto {y : a'y = b}."""
    norm2 = float(a @ a)
    if norm2 <= 0.0:
        raise ValueError("hyperplane normal must be nonzero")
    if counters is not None:
        counters.projections += 1
    r = float(a @ x)
    return x - ((r - b) / norm2) * a


def project_box(lo, hi, x: np.ndarray, counters: Counters | None = None) -> np.ndarray:
    """Componentwise clamp onto {y : lo <= y <= hi}."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if np.any(lo > hi):
        raise ValueError("box is empty: lo > hi in some component")
    if counters is not None:
        counters.projections += 1
    return np.clip(x, lo, hi)


def subgradient_project(c: ConvexFunction, x: np.ndarray, counters: Counters | None = None) -> np.ndarray:
    """Subgradient projection of x onto {y : c(y) <= 0}.

    Returns x unchanged when c(x) <= 0.  Raises
    :class:`ZeroSubgradientError` when c(x) > 0 with a vanishing
    subgradient, which signals an ill-posed (inconsistent) constraint.
    """
    if counters is not None:
        counters.projections += 1
    v = c.value(x)
    if v <= 0.0:
        return x
    xi = c.subgrad(x)
    norm2 = float(xi @ xi)
    if norm2 < _NORM2_FLOOR:
        raise ZeroSubgradientError(f"violated constraint (c(x)={v}) has zero subgradient")
    return x - (v / norm2) * xi


def relax_step(x: np.ndarray, px: np.ndarray, lam: float) -> np.ndarray:
    """Relaxed step x + lam (px - x); lam=1 is px, lam=2 the reflection."""
    if not 0.0 < lam <= 2.0:
        raise ValueError(f"relaxation parameter must lie in (0, 2], got {lam}")
    return x - lam * (x - px)
