"""Images, direction systems, split stacks and the Potts energies.

Images are plain 2D ``float64`` arrays indexed ``[row, col]``; a split stack is
a 3D array of shape ``(S, rows, cols)`` holding one image per direction.
Directions are integer offsets ``(drow, dcol)`` on that grid, so ``(0, 1)``
walks along a row and ``(1, 0)`` walks down a column.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "JUMP_THRESHOLD",
    "Direction",
    "DirectionModel",
    "ModelKind",
    "as_image",
    "as_stack",
    "broadcast",
    "build_direction_model",
    "directional_difference",
    "jump_count",
    "potts_energy",
    "relaxed_energy",
]

#: A directional difference counts as a jump iff its magnitude exceeds this.
JUMP_THRESHOLD = 1e-12


class Direction(NamedTuple):
    drow: int
    dcol: int


class ModelKind(str, enum.Enum):
    COORD2 = "coord2"
    COMPASS4 = "compass4"
    KNIGHT8 = "knight8"


@dataclass(frozen=True)
class DirectionModel:
    """Finite set of grid offsets with positive jump weights."""

    directions: tuple[Direction, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        dirs = tuple(Direction(int(d[0]), int(d[1])) for d in self.directions)
        weights = tuple(float(w) for w in self.weights)
        if len(dirs) != len(weights) or not dirs:
            raise ValueError("need one positive weight per direction")
        if any(d == (0, 0) for d in dirs):
            raise ValueError("direction (0, 0) is not allowed")
        if any(not (w > 0 and math.isfinite(w)) for w in weights):
            raise ValueError("weights must be positive and finite")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return len(self.directions)

    def __len__(self) -> int:
        return len(self.directions)


def build_direction_model(kind: ModelKind | str) -> DirectionModel:
    """Return one of the built-in direction systems.

    ``coord2`` is the two coordinate directions with unit weights, ``compass4``
    adds the diagonals and ``knight8`` adds the four knight moves; the weights
    of the last two give a near-isotropic boundary length.
    """
    kind = ModelKind(kind.lower() if isinstance(kind, str) else kind)
    if kind is ModelKind.COORD2:
        return DirectionModel(((0, 1), (1, 0)), (1.0, 1.0))
    r2, r5 = math.sqrt(2.0), math.sqrt(5.0)
    if kind is ModelKind.COMPASS4:
        return DirectionModel(
            ((0, 1), (1, 0), (1, 1), (1, -1)),
            (r2 - 1, r2 - 1, 1 - r2 / 2, 1 - r2 / 2),
        )
    knight = (1 + r2 - r5) / 2
    return DirectionModel(
        ((0, 1), (1, 0), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1)),
        (r5 - 2, r5 - 2, r5 - 1.5 * r2, r5 - 1.5 * r2, knight, knight, knight, knight),
    )


def as_image(u, name: str = "image") -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.size == 0:
        raise ValueError(f"{name} must be a non-empty 2D array, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{name} contains non-finite values")
    return u


def as_stack(stack, model: DirectionModel | None = None) -> np.ndarray:
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[0] == 0:
        raise ValueError(f"split stack must have shape (S, rows, cols), got {stack.shape}")
    if model is not None and stack.shape[0] != model.size:
        raise ValueError(f"stack has {stack.shape[0]} components, model has {model.size}")
    if not np.all(np.isfinite(stack)):
        raise ValueError("split stack contains non-finite values")
    return stack


def broadcast(u: np.ndarray, S: int) -> np.ndarray:
    """Stack ``S`` copies of ``u``."""
    return np.repeat(as_image(u)[None, :, :], S, axis=0)


def _valid_slices(shape, a: Direction):
    rows, cols = shape
    dr, dc = a
    base = (
        slice(max(0, -dr), rows - max(0, dr)),
        slice(max(0, -dc), cols - max(0, dc)),
    )
    shifted = (
        slice(max(0, -dr) + dr, rows - max(0, dr) + dr),
        slice(max(0, -dc) + dc, cols - max(0, dc) + dc),
    )
    return base, shifted


def directional_difference(u, a) -> np.ndarray:
    """Differences ``u[p + a] - u[p]`` for every pixel ``p`` with ``p + a`` on the grid.

    The result is the rectangle of valid base pixels: entry ``[k, l]`` belongs
    to pixel ``(k + max(0, -drow), l + max(0, -dcol))``. Pairs leaving the grid
    are dropped, so the array may be empty.
    """
    u = np.asarray(u, dtype=np.float64)
    base, shifted = _valid_slices(u.shape, Direction(*a))
    return u[shifted] - u[base]


def jump_count(u, a, threshold: float = JUMP_THRESHOLD) -> int:
    return int(np.count_nonzero(np.abs(directional_difference(u, a)) > threshold))


def weighted_jumps(stack, model: DirectionModel) -> float:
    """Weighted jump count of component ``s`` along direction ``s``, summed over ``s``."""
    return sum(w * jump_count(u, a) for u, a, w in zip(stack, model.directions, model.weights))


def _residual_sq(A, f, u) -> float:
    r = A.apply(u) - f
    return float(np.vdot(r, r))


def potts_energy(A, f, u, gamma: float, model: DirectionModel) -> float:
    """``||A u - f||^2 + gamma * sum_s w_s * #jumps of u along a_s``."""
    u = as_image(u, "u")
    f = np.asarray(f, dtype=np.float64)
    if u.shape != A.in_shape or f.shape != A.out_shape:
        raise ValueError(
            f"dimension mismatch: u {u.shape}, f {f.shape}, operator {A.in_shape} -> {A.out_shape}"
        )
    jumps = sum(w * jump_count(u, a) for a, w in zip(model.directions, model.weights))
    return _residual_sq(A, f, u) + gamma * jumps


def relaxed_energy(A, f, stack, gamma: float, rho: float, coupling, model: DirectionModel) -> float:
    """Quadratic penalty relaxation of the split Potts functional.

    Data terms are averaged over the ``S`` components, each component carries
    the jump penalty of its own direction, and coupled pairs are tied by
    ``rho * c[s, t] * ||u_s - u_t||^2``.
    """
    stack = as_stack(stack, model)
    f = np.asarray(f, dtype=np.float64)
    if stack.shape[1:] != A.in_shape or f.shape != A.out_shape:
        raise ValueError("dimension mismatch between stack, data and operator")
    S = model.size
    c = coupling.matrix()
    if c.shape != (S, S):
        raise ValueError(f"coupling defined for S={c.shape[0]}, model has S={S}")
    data = sum(_residual_sq(A, f, u) for u in stack) / S
    return data + gamma * weighted_jumps(stack, model) + rho * coupling_penalty(stack, c)


def coupling_penalty(stack, c: np.ndarray) -> float:
    """``sum_{s<t} c[s, t] * ||u_s - u_t||^2``."""
    total = 0.0
    S = len(stack)
    for s in range(S):
        for t in range(s + 1, S):
            if c[s, t] != 0:
                d = stack[s] - stack[t]
                total += c[s, t] * float(np.vdot(d, d))
    return total


def pair_distances(stack, c: np.ndarray) -> list[tuple[int, int, float]]:
    """``(s, t, ||u_s - u_t||)`` for every coupled pair ``s < t``."""
    S = len(stack)
    return [
        (s, t, float(np.linalg.norm(stack[s] - stack[t])))
        for s in range(S)
        for t in range(s + 1, S)
        if c[s, t] > 0
    ]

