"""Exact univariate Potts solver (segmented least squares) and a brute-force oracle.

Minimizes ``||x - g||^2 + gamma * #{i : x_i != x_{i+1}}`` by the Bellman
recursion over the start of the last segment. Interval deviations come from
first/second moment prefix sums, so one solve costs O(n^2).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "Segmentation1D",
    "brute_force_univariate",
    "interval_error",
    "prefix_moments",
    "solve_lines",
    "solve_univariate",
]

BRUTE_FORCE_MAX_N = 16


@dataclass(frozen=True)
class Segmentation1D:
    """Piecewise-constant fit of a signal.

    ``breakpoints`` lists the indices ``i`` (``0 < i < n``) where a new segment
    starts; ``levels`` holds one value per segment.
    """

    n: int
    breakpoints: tuple[int, ...]
    levels: tuple[float, ...]
    energy: float

    @property
    def num_jumps(self) -> int:
        return len(self.breakpoints)

    @property
    def bounds(self) -> list[tuple[int, int]]:
        edges = (0, *self.breakpoints, self.n)
        return list(zip(edges[:-1], edges[1:]))

    def signal(self) -> np.ndarray:
        x = np.empty(self.n)
        for (lo, hi), level in zip(self.bounds, self.levels):
            x[lo:hi] = level
        return x


def prefix_moments(g) -> tuple[np.ndarray, np.ndarray]:
    """Prefix sums of ``g`` and ``g**2`` with a leading zero."""
    g = np.asarray(g, dtype=np.float64)
    m1 = np.concatenate(([0.0], np.cumsum(g)))
    m2 = np.concatenate(([0.0], np.cumsum(g * g)))
    return m1, m2


def interval_error(moments, start: int, stop: int) -> float:
    """Squared deviation of ``g[start:stop]`` from its mean.

    Uses ``M2 - M1**2 / len`` on prefix moments and clamps roundoff at zero.
    """
    m1, m2 = moments
    n = len(m1) - 1
    if not 0 <= start < stop <= n:
        raise IndexError(f"interval [{start}, {stop}) outside signal of length {n}")
    s1 = m1[stop] - m1[start]
    s2 = m2[stop] - m2[start]
    return max(s2 - s1 * s1 / (stop - start), 0.0)


@numba.njit(cache=True)
def _bellman(g, gamma, prune, starts):
    # starts[r-1] receives the (0-based) start of the last segment of the
    # optimal fit of g[:r]; returns the optimal energy of the full signal
    n = g.shape[0]
    m1 = np.zeros(n + 1)
    m2 = np.zeros(n + 1)
    for i in range(n):
        m1[i + 1] = m1[i] + g[i]
        m2[i + 1] = m2[i] + g[i] * g[i]
    best = np.empty(n + 1)
    best[0] = -gamma
    for r in range(1, n + 1):
        cur = np.inf
        arg = r - 1
        # l runs downward so that on exact ties the larger start is kept
        for l in range(r - 1, -1, -1):
            length = r - l
            s1 = m1[r] - m1[l]
            dev = (m2[r] - m2[l]) - s1 * s1 / length
            if dev < 0.0:
                dev = 0.0
            if prune and dev >= cur:
                break
            cand = best[l] + gamma + dev
            if cand < cur:
                cur = cand
                arg = l
        best[r] = cur
        starts[r - 1] = arg
    return best[n]


@numba.njit(cache=True)
def _fill_levels(g, starts, out):
    r = g.shape[0]
    while r > 0:
        l = starts[r - 1]
        total = 0.0
        for i in range(l, r):
            total += g[i]
        mean = total / (r - l)
        for i in range(l, r):
            out[i] = mean
        r = l


@numba.njit(cache=True)
def _solve_lines(data, offsets, gamma, prune, out):
    energy = 0.0
    for k in range(offsets.shape[0] - 1):
        lo = offsets[k]
        hi = offsets[k + 1]
        g = data[lo:hi]
        starts = np.empty(hi - lo, dtype=np.int64)
        energy += _bellman(g, gamma, prune, starts)
        _fill_levels(g, starts, out[lo:hi])
    return energy


def solve_lines(data: np.ndarray, offsets: np.ndarray, gamma: float, prune: bool = False):
    """Solve many independent univariate problems packed into one flat array.

    Line ``k`` is ``data[offsets[k]:offsets[k+1]]``. Returns the concatenated
    piecewise-constant fits and the summed optimal energy.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    out = np.empty_like(data)
    energy = _solve_lines(data, offsets, float(gamma), bool(prune), out)
    return out, float(energy)


def _check(g, gamma):
    g = np.asarray(g, dtype=np.float64).ravel()
    if g.size < 1:
        raise ValueError("signal must have at least one sample")
    if not np.all(np.isfinite(g)):
        raise ValueError("signal contains non-finite values")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return g


def solve_univariate(g, gamma: float, prune: bool = False) -> Segmentation1D:
    """Global minimizer of the univariate Potts problem.

    ``prune`` skips start positions whose interval deviation alone already
    exceeds the current best value; the result is unchanged.
    """
    g = _check(g, gamma)
    starts = np.empty(g.size, dtype=np.int64)
    energy = _bellman(g, float(gamma), bool(prune), starts)
    bps = []
    r = g.size
    while r > 0:
        l = int(starts[r - 1])
        if l > 0:
            bps.append(l)
        r = l
    bps.reverse()
    edges = (0, *bps, g.size)
    levels = tuple(float(g[lo:hi].mean()) for lo, hi in zip(edges[:-1], edges[1:]))
    return Segmentation1D(g.size, tuple(bps), levels, float(energy))


def potts1d_energy(x, g, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    return float(np.sum((x - g) ** 2) + gamma * np.count_nonzero(np.diff(x) != 0))


def brute_force_univariate(g, gamma: float) -> Segmentation1D:
    """Enumerate all jump sets; test oracle for :func:`solve_univariate`.

    Ties go to the fewest jumps, then the lexicographically earliest
    breakpoint list.
    """
    g = _check(g, gamma)
    n = g.size
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    best = None
    for mask in itertools.product((False, True), repeat=n - 1):
        bps = tuple(i + 1 for i, on in enumerate(mask) if on)
        edges = (0, *bps, n)
        levels = []
        energy = gamma * len(bps)
        for lo, hi in zip(edges[:-1], edges[1:]):
            seg = g[lo:hi]
            mu = seg.sum() / seg.size
            levels.append(float(mu))
            energy += float(np.sum((seg - mu) ** 2))
        key = (energy, len(bps), bps)
        if best is None or key < best[0]:
            best = (key, bps, tuple(levels))
    (energy, _, _), bps, levels = best
    return Segmentation1D(n, bps, levels, energy)
