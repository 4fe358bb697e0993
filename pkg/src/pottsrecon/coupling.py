"""Coupling schemes between split variables and the parameter formulas built on them.

A scheme fixes nonnegative weights ``c[s, t]`` for the soft constraints
``rho * c[s, t] * ||u_s - u_t||^2``. From the scheme and the problem data we
derive the step normalization ``L_rho``, the smallest nonzero eigenvalue
``sigma_1`` of ``C^T C``, the penalty ``rho`` that guarantees a prescribed
closeness of the split variables, and the inner-loop threshold ``t``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

__all__ = [
    "CouplingKind",
    "CouplingScheme",
    "choose_rho",
    "choose_t",
    "l_rho",
    "l_rho_squared_bound",
    "sigma1",
]

RHO_SLACK = 1e-6
L_SLACK = 1e-9


class CouplingKind(str, enum.Enum):
    FULL = "full"
    CYCLIC = "cyclic"
    GENERAL = "general"


@dataclass(frozen=True)
class CouplingScheme:
    kind: CouplingKind
    S: int
    weights: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def full(cls, S: int) -> "CouplingScheme":
        return cls._make(CouplingKind.FULL, S, np.ones((S, S)))

    @classmethod
    def cyclic(cls, S: int) -> "CouplingScheme":
        """Couple each ``u_s`` to ``u_{s+1}`` and ``u_S`` back to ``u_1``."""
        w = np.zeros((S, S))
        for s in range(S):
            w[s, (s + 1) % S] = w[(s + 1) % S, s] = 1.0
        return cls._make(CouplingKind.CYCLIC, S, w)

    @classmethod
    def general(cls, weights) -> "CouplingScheme":
        w = np.array(weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("coupling weights must be a square matrix")
        w = np.triu(w, 1)
        w = w + w.T
        return cls._make(CouplingKind.GENERAL, w.shape[0], w)

    @classmethod
    def from_name(cls, name: str, S: int) -> "CouplingScheme":
        name = name.lower()
        if name == "full":
            return cls.full(S)
        if name == "cyclic":
            return cls.cyclic(S)
        raise ValueError(f"unknown coupling scheme {name!r}")

    @classmethod
    def _make(cls, kind, S, w):
        if S < 2:
            raise ValueError("coupling needs at least two split variables")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("coupling weights must be nonnegative and finite")
        np.fill_diagonal(w, 0.0)
        w.setflags(write=False)
        return cls(kind, S, w)

    def matrix(self) -> np.ndarray:
        """Symmetric ``S x S`` weight matrix with zero diagonal."""
        return self.weights

    def pairs(self) -> list[tuple[int, int, float]]:
        return [
            (s, t, float(self.weights[s, t]))
            for s in range(self.S)
            for t in range(s + 1, self.S)
            if self.weights[s, t] > 0
        ]

    def is_connected(self) -> bool:
        n, _ = connected_components(self.weights > 0, directed=False)
        return n == 1

    def laplacian(self) -> np.ndarray:
        w = self.weights
        return np.diag(w.sum(axis=1)) - w

    def constraint_gram(self) -> np.ndarray:
        """Pattern of ``C^T C`` on one pixel, where ``C`` has rows ``c[s,t] (e_s - e_t)``."""
        w2 = self.weights**2
        return np.diag(w2.sum(axis=1)) - w2


def l_rho_squared_bound(norm_A: float, rho: float, scheme: CouplingScheme) -> float:
    """Upper bound on ``||B||^2`` for the stacked data/constraint operator."""
    S = scheme.S
    base = norm_A**2 / S
    if scheme.kind is CouplingKind.FULL:
        return base + S * rho
    if scheme.kind is CouplingKind.CYCLIC and S >= 3:
        alpha = 4.0 if S % 2 == 0 else 2.0 - 2.0 * math.cos(math.pi * (S - 1) / S)
        return base + alpha * rho
    return base + 2.0 * rho * float(scheme.weights.sum(axis=1).max())


def l_rho(norm_A: float, S: int, rho: float, scheme: CouplingScheme) -> float:
    """Smallest admissible step normalization ``L_rho`` (strictly above ``||B||``)."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if S != scheme.S:
        raise ValueError(f"scheme is for S={scheme.S}, got S={S}")
    return math.sqrt(l_rho_squared_bound(norm_A, rho, scheme)) * (1 + L_SLACK)


def sigma1(scheme: CouplingScheme, numeric: bool = False) -> float:
    """Smallest nonzero eigenvalue of ``C^T C``.

    Closed forms are used for full (``S``) and cyclic (``2 - 2 cos(2 pi / S)``)
    coupling; ``numeric=True`` or general weights fall back to a dense
    eigensolve of the ``S x S`` pattern matrix.
    """
    if not scheme.is_connected():
        raise ValueError("coupling graph is disconnected")
    if not numeric:
        if scheme.kind is CouplingKind.FULL:
            return float(scheme.S)
        if scheme.kind is CouplingKind.CYCLIC and scheme.S >= 3:
            return 2.0 - 2.0 * math.cos(2.0 * math.pi / scheme.S)
    eig = np.linalg.eigvalsh(scheme.constraint_gram())
    # the graph is connected, so exactly one eigenvalue (constants) is zero
    return float(np.sort(eig)[1])


def _multiplier_bound(scheme, norm_A, norm_f):
    return 2.0 * sigma1(scheme) ** -0.5 * scheme.S**-0.5 * norm_A * norm_f


def choose_rho(epsilon: float, scheme: CouplingScheme, S: int, norm_A: float, norm_f: float) -> float:
    """Penalty that makes the split variables ``epsilon``-close at convergence."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if S != scheme.S:
        raise ValueError(f"scheme is for S={scheme.S}, got S={S}")
    return (1 + RHO_SLACK) * _multiplier_bound(scheme, norm_A, norm_f) / epsilon


def choose_t(scheme: CouplingScheme, S: int, norm_A: float, norm_f: float) -> float:
    """Inner-loop closeness threshold, strictly above the Lagrange multiplier bound."""
    if norm_A < 0 or norm_f < 0:
        raise ValueError("norms must be nonnegative")
    if S != scheme.S:
        raise ValueError(f"scheme is for S={scheme.S}, got S={S}")
    return (1 + RHO_SLACK) * _multiplier_bound(scheme, norm_A, norm_f)
