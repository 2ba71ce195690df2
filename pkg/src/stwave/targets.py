"""Target states for the tracking functional."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np


class TargetKind(enum.Enum):
    U1_SMOOTH = "u1"
    U2_PIECEWISE_CONST = "u2"
    U3_BILINEAR_HAT = "u3"
    U4_SINE = "u4"


U1_VARIANTS = ("verbatim", "band")


def _u1(x, t, variant="verbatim"):
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    s = 6.0 * t - 3.0 * x
    val = 0.5 * (s - 2.0) ** 3 * (-s) ** 3
    if variant == "verbatim":
        inside = (x <= t) & (t - x <= 2.0)
    elif variant == "band":
        # support where the two cubic factors bracket the value
        inside = (s >= 0.0) & (s <= 2.0)
    else:
        raise ValueError(f"unknown u1 variant {variant!r}")
    return np.where(inside, val, 0.0)


def _u2(x, t):
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    inside = (x > 0.25) & (x < 0.75) & (t > 0.25) & (t < 0.75)
    return inside.astype(float)


def hat(s):
    """1 at s = 0.5, 0 outside [0.25, 0.75], linear in between."""
    s = np.asarray(s, float)
    return np.clip(1.0 - 4.0 * np.abs(s - 0.5), 0.0, None)


def _u3(x, t):
    return hat(x) * hat(t)


def _u4(x, t):
    x, t = np.asarray(x, float), np.asarray(t, float)
    return t * np.sin(np.pi * t) * np.sin(np.pi * x)


def eval_target(kind, x, t, u1_variant: str = "verbatim"):
    kind = TargetKind(kind)
    if kind is TargetKind.U1_SMOOTH:
        out = _u1(x, t, u1_variant)
    elif kind is TargetKind.U2_PIECEWISE_CONST:
        out = _u2(x, t)
    elif kind is TargetKind.U3_BILINEAR_HAT:
        out = _u3(x, t)
    else:
        out = _u4(x, t)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TargetFunction:
    """A target state evaluated pointwise in (x, t).

    ``discontinuous`` targets are integrated on 4-fold split elements to
    soften the quadrature error at jumps.
    """

    name: str
    func: Callable
    discontinuous: bool = False
    kind: TargetKind | None = None

    def __call__(self, x, t):
        return self.func(x, t)

    def sample(self, mesh, bary: np.ndarray) -> np.ndarray:
        """Values at barycentric points ``bary`` (Q, 3) of every element, shape (M, Q)."""
        pts = np.einsum("qi,mid->mqd", bary, mesh.element_coords())
        return np.asarray(self.func(pts[..., 0], pts[..., 1]), dtype=float)


@dataclass(frozen=True, eq=False)
class P1Field:
    """Continuous piecewise linear target given by nodal values on a mesh."""

    mesh: object
    values: np.ndarray
    name: str = "p1"
    discontinuous: bool = False

    def sample(self, mesh, bary: np.ndarray) -> np.ndarray:
        if mesh is not self.mesh:
            raise ValueError("P1Field can only be sampled on the mesh it lives on")
        return self.values[mesh.elements] @ bary.T


def get_target(name, u1_variant: str = "verbatim") -> TargetFunction:
    kind = TargetKind(name) if not isinstance(name, TargetKind) else name
    if kind is TargetKind.U1_SMOOTH:
        if u1_variant not in U1_VARIANTS:
            raise ValueError(f"unknown u1 variant {u1_variant!r}")
        return TargetFunction("u1", lambda x, t: _u1(x, t, u1_variant), False, kind)
    if kind is TargetKind.U2_PIECEWISE_CONST:
        return TargetFunction("u2", _u2, True, kind)
    if kind is TargetKind.U3_BILINEAR_HAT:
        return TargetFunction("u3", _u3, False, kind)
    return TargetFunction("u4", _u4, False, kind)


def zero_target() -> TargetFunction:
    return TargetFunction("zero", lambda x, t: np.zeros(np.broadcast(x, t).shape))
