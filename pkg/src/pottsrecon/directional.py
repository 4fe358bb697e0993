"""Directional Potts subproblems solved line by line.

``argmin_u ||u - h||^2 + gamma * #jumps of u along a`` separates into
independent univariate problems on the discrete lines ``v + k*a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Direction, as_image
from .potts1d import solve_lines

__all__ = ["LinePath", "extract_lines", "line_layout", "solve_directional"]


@dataclass(frozen=True)
class LinePath:
    direction: Direction
    start: tuple[int, int]
    pixels: np.ndarray  # (length, 2) array of (row, col)

    def __len__(self) -> int:
        return len(self.pixels)


def _inside(r, c, rows, cols):
    return 0 <= r < rows and 0 <= c < cols


def extract_lines(rows: int, cols: int, a) -> list[LinePath]:
    """All maximal lines of direction ``a`` on a ``rows x cols`` grid.

    A pixel starts a line iff its predecessor ``p - a`` is off the grid. Lines
    are ordered by start pixel in row-major order.
    """
    a = Direction(*a)
    if a == (0, 0):
        raise ValueError("direction (0, 0) is not allowed")
    lines = []
    for r in range(rows):
        for c in range(cols):
            if _inside(r - a.drow, c - a.dcol, rows, cols):
                continue
            pix = []
            rr, cc = r, c
            while _inside(rr, cc, rows, cols):
                pix.append((rr, cc))
                rr += a.drow
                cc += a.dcol
            lines.append(LinePath(a, (r, c), np.array(pix, dtype=np.int64)))
    return lines


@lru_cache(maxsize=256)
def line_layout(rows: int, cols: int, a: Direction) -> tuple[np.ndarray, np.ndarray]:
    """Flat pixel order and line offsets for ``a``, for packing into :func:`solve_lines`.

    Returns ``(order, offsets)``: ``order`` is a permutation of raveled pixel
    indices such that line ``k`` occupies ``order[offsets[k]:offsets[k+1]]``.
    """
    lines = extract_lines(rows, cols, a)
    order = np.concatenate([p[:, 0] * cols + p[:, 1] for p in (ln.pixels for ln in lines)])
    offsets = np.zeros(len(lines) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(ln) for ln in lines])
    order.setflags(write=False)
    offsets.setflags(write=False)
    return order, offsets


def solve_directional(h, a, gamma: float, prune: bool = False, return_energy: bool = False):
    """Exact minimizer of ``||u - h||^2 + gamma * ||grad_a u||_0``."""
    h = as_image(h, "h")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    rows, cols = h.shape
    order, offsets = line_layout(rows, cols, Direction(*a))
    flat = h.ravel()
    fitted, energy = solve_lines(flat[order], offsets, gamma, prune)
    u = np.empty(rows * cols)
    u[order] = fitted
    u = u.reshape(rows, cols)
    if return_energy:
        return u, energy
    return u
