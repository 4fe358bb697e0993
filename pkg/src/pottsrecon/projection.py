"""Turn a split stack into a feasible piecewise-constant image.

Each component ``u_s`` is cut into maximal constant intervals along its own
direction. Pixels are equivalent when a chain of such intervals links them;
the equivalence classes form the partition, and every segment receives the
mean of all stack values on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .core import JUMP_THRESHOLD, Direction, DirectionModel, _valid_slices, as_stack, broadcast
from .directional import extract_lines

__all__ = [
    "DirectionalPartition",
    "Partition",
    "induced_directional_partition",
    "merge_to_partition",
    "project",
]


@dataclass(frozen=True)
class DirectionalPartition:
    """Per-direction interval decomposition of a grid.

    ``links[s]`` is a boolean array over the valid base pixels of direction
    ``s`` (same layout as :func:`core.directional_difference`); ``True`` means
    ``p`` and ``p + a_s`` lie in the same interval.
    """

    shape: tuple[int, int]
    directions: tuple[Direction, ...]
    links: tuple[np.ndarray, ...]

    def intervals(self, s: int) -> list[tuple[tuple[int, int], int]]:
        """``(start_pixel, length)`` of every interval of direction ``s``."""
        a = self.directions[s]
        rows, cols = self.shape
        link = self.links[s]
        r0, c0 = max(0, -a.drow), max(0, -a.dcol)
        out = []
        for line in extract_lines(rows, cols, a):
            start, length = tuple(int(x) for x in line.pixels[0]), 1
            for (r, c) in line.pixels[:-1]:
                if link[r - r0, c - c0]:
                    length += 1
                else:
                    out.append((start, length))
                    start, length = (int(r + a.drow), int(c + a.dcol)), 1
            out.append((start, length))
        return out


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray  # int label per pixel, dense in 0..num_segments-1

    @property
    def num_segments(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.num_segments)


def induced_directional_partition(stack, model: DirectionModel, threshold: float = JUMP_THRESHOLD) -> DirectionalPartition:
    stack = as_stack(stack, model)
    links = []
    for u, a in zip(stack, model.directions):
        base, shifted = _valid_slices(u.shape, a)
        links.append(np.abs(u[shifted] - u[base]) <= threshold)
    return DirectionalPartition(stack.shape[1:], model.directions, tuple(links))


def merge_to_partition(dp: DirectionalPartition) -> Partition:
    """Equivalence classes of pixels linked through chains of intervals.

    Labels are assigned in order of each segment's first pixel in row-major
    order.
    """
    rows, cols = dp.shape
    index = np.arange(rows * cols).reshape(rows, cols)
    src, dst = [index.ravel()[:0]], [index.ravel()[:0]]
    for a, link in zip(dp.directions, dp.links):
        base, shifted = _valid_slices((rows, cols), a)
        src.append(index[base][link])
        dst.append(index[shifted][link])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    graph = sp.coo_matrix((np.ones(src.size), (src, dst)), shape=(rows * cols, rows * cols))
    _, comp = connected_components(graph, directed=False)
    # relabel by first occurrence
    _, first = np.unique(comp, return_index=True)
    order = np.argsort(first)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.size)
    return Partition(relabel[comp].reshape(rows, cols))


def segment_means(stack, partition: Partition) -> np.ndarray:
    S = stack.shape[0]
    labels = partition.labels.ravel()
    k = partition.num_segments
    flat = stack.reshape(S, -1)
    sums = np.bincount(labels, weights=flat.sum(axis=0), minlength=k)
    means = sums / (S * partition.sizes())
    # constant segments keep their exact value so that re-projection is the identity
    lo = np.full(k, np.inf)
    hi = np.full(k, -np.inf)
    np.minimum.at(lo, labels, flat.min(axis=0))
    np.maximum.at(hi, labels, flat.max(axis=0))
    return np.where(lo == hi, lo, means)


def project(stack, model: DirectionModel) -> tuple[np.ndarray, Partition]:
    """Feasible image averaging all components over each induced segment."""
    stack = as_stack(stack, model)
    partition = merge_to_partition(induced_directional_partition(stack, model))
    values = segment_means(stack, partition)
    return values[partition.labels], partition


def reproject(image, model: DirectionModel) -> tuple[np.ndarray, Partition]:
    """Project a single image treated as ``S`` identical components."""
    return project(broadcast(image, model.size), model)
