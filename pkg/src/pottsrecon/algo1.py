"""Surrogate iteration for the quadratic penalty relaxation of the Potts problem.

One iteration is a gradient-like forward step on the smooth part (data
fidelity plus coupling) followed by an exact backward step that solves one
directional Potts problem per split variable.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DirectionModel, as_stack, broadcast, coupling_penalty, pair_distances, relaxed_energy
from .coupling import CouplingScheme, choose_rho, l_rho
from .directional import solve_directional
from .operators import LinearOperator, landweber

__all__ = [
    "Algo1Config",
    "IterationTrace",
    "backward_step",
    "forward_step",
    "initial_stack",
    "relaxed_step",
    "run_algo1",
]

logger = logging.getLogger(__name__)


@dataclass
class Algo1Config:
    gamma: float
    epsilon: float
    scheme: CouplingScheme
    model: DirectionModel
    lam: float = 0.4
    max_iters: int = 5000
    rel_change_tol: float = 1e-6
    strict_mode: bool = False
    per_pair: bool = False
    init: str = "landweber"
    landweber_steps: int = 1000
    prune: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.scheme.S != self.model.size:
            raise ValueError(f"coupling is for S={self.scheme.S}, model has S={self.model.size}")
        if not 0 < self.lam <= 1:
            raise ValueError("lam must lie in (0, 1]")
        if self.init not in ("landweber", "zero", "adjoint"):
            raise ValueError(f"unknown initialization {self.init!r}")

    @property
    def step_relaxation(self) -> float:
        return 1.0 if self.strict_mode else self.lam


@dataclass
class IterationTrace:
    energy: list[float] = field(default_factory=list)
    max_pair_distance: list[float] = field(default_factory=list)
    rel_change: list[tuple[float, ...]] = field(default_factory=list)
    converged: bool = False
    rho: float = float("nan")
    L: float = float("nan")

    def __len__(self):
        return len(self.energy)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "energy", "max_pair_distance"])
            for i, (e, d) in enumerate(zip(self.energy, self.max_pair_distance)):
                w.writerow([i, repr(e), repr(d)])


def relaxed_step(L: float, lam: float, n: int) -> float:
    """Relaxed normalization ``L * (lam + (1 - (n+1)**-0.5) * (1 - lam))``."""
    return L * (lam + (1.0 - (n + 1) ** -0.5) * (1.0 - lam))


def forward_step(stack, A: LinearOperator, f, rho_weights, L: float, adjoint_f=None) -> np.ndarray:
    """``h_s = u_s + (A^T f - A^T A u_s) / (S L^2) - sum_t rho[s,t] (u_s - u_t) / L^2``."""
    stack = np.asarray(stack, dtype=np.float64)
    S = stack.shape[0]
    if stack.shape[1:] != A.in_shape:
        raise ValueError(f"stack components have shape {stack.shape[1:]}, operator expects {A.in_shape}")
    rho_weights = np.asarray(rho_weights, dtype=np.float64)
    if rho_weights.shape != (S, S):
        raise ValueError("rho weights must be S x S")
    if adjoint_f is None:
        adjoint_f = A.adjoint(np.asarray(f, dtype=np.float64))
    inv = 1.0 / L**2
    h = np.empty_like(stack)
    for s in range(S):
        h[s] = stack[s] + (inv / S) * (adjoint_f - A.normal(stack[s]))
    lap = np.diag(rho_weights.sum(axis=1)) - rho_weights
    h -= inv * np.tensordot(lap, stack, axes=1)
    return h


def backward_step(h, gamma: float, model: DirectionModel, L: float, prune: bool = False) -> np.ndarray:
    """Solve the separable directional Potts problems with penalties ``gamma w_s / L^2``."""
    h = as_stack(h, model)
    out = np.empty_like(h)
    for s, (a, w) in enumerate(zip(model.directions, model.weights)):
        out[s] = solve_directional(h[s], a, gamma * w / L**2, prune=prune)
    return out


def initial_stack(A: LinearOperator, f, S: int, init, landweber_steps: int = 1000) -> np.ndarray:
    if init is None or isinstance(init, str):
        kind = init or "landweber"
        if kind == "landweber":
            u0 = landweber(A, f, landweber_steps)
        elif kind == "adjoint":
            u0 = A.adjoint(f)
        elif kind == "zero":
            u0 = np.zeros(A.in_shape)
        else:
            raise ValueError(f"unknown initialization {kind!r}")
        return broadcast(u0, S)
    init = np.asarray(init, dtype=np.float64)
    if init.ndim == 2:
        return broadcast(init, S)
    return as_stack(init).copy()


def _rel_change(new, old):
    den = np.linalg.norm(new) + np.linalg.norm(old)
    return 0.0 if den == 0 else float(np.linalg.norm(new - old) / den)


def nearness_ok(stack, scheme: CouplingScheme, epsilon: float, per_pair: bool = False) -> bool:
    """Aggregate closeness ``sum c ||u_s - u_t||^2 <= eps^2``, or the per-pair variant."""
    if per_pair:
        return all(
            float(np.sum((stack[s] - stack[t]) ** 2)) < epsilon**2 / w for s, t, w in scheme.pairs()
        )
    return coupling_penalty(stack, scheme.matrix()) <= epsilon**2


def run_algo1(
    A: LinearOperator,
    f,
    cfg: Algo1Config,
    init=None,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
    norm_A: float | None = None,
):
    """Run the surrogate iteration until the split variables are close and stationary.

    Returns ``(stack, trace)``; ``trace.converged`` is False when ``max_iters``
    was reached first. ``callback(n, stack, L_n)`` sees every backward-step
    output together with the normalization used to produce it.
    """
    f = np.asarray(f, dtype=np.float64)
    S = cfg.model.size
    norm_A = A.norm if norm_A is None else norm_A
    norm_f = float(np.linalg.norm(f))
    rho = choose_rho(cfg.epsilon, cfg.scheme, S, norm_A, norm_f)
    if rho == 0:
        # zero data: any positive penalty keeps the iteration well defined
        rho = 1.0
    L = l_rho(norm_A, S, rho, cfg.scheme)
    rho_w = rho * cfg.scheme.matrix()
    atf = A.adjoint(f)

    stack = initial_stack(A, f, S, cfg.init if init is None else init, cfg.landweber_steps)
    trace = IterationTrace(rho=rho, L=L)

    def record(u, changes):
        trace.energy.append(relaxed_energy(A, f, u, cfg.gamma, rho, cfg.scheme, cfg.model))
        dists = pair_distances(u, cfg.scheme.matrix())
        trace.max_pair_distance.append(max((d for *_, d in dists), default=0.0))
        trace.rel_change.append(changes)

    record(stack, ())
    lam = cfg.step_relaxation
    for n in range(cfg.max_iters):
        Ln = relaxed_step(L, lam, n)
        h = forward_step(stack, A, f, rho_w, Ln, adjoint_f=atf)
        new = backward_step(h, cfg.gamma, cfg.model, Ln, prune=cfg.prune)
        changes = tuple(_rel_change(new[s], stack[s]) for s in range(min(2, S)))
        stack = new
        record(stack, changes)
        if callback is not None:
            callback(n, stack, Ln)
        if max(changes) < cfg.rel_change_tol and nearness_ok(stack, cfg.scheme, cfg.epsilon, cfg.per_pair):
            trace.converged = True
            break
    if not trace.converged:
        logger.warning("algorithm 1 stopped at max_iters=%d without convergence", cfg.max_iters)
    return stack, trace
