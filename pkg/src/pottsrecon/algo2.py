"""Increasing-penalty method for the (non-relaxed) multivariate Potts problem.

The surrogate iteration is run for a strictly increasing sequence of coupling
penalties ``rho_k = tau**k * rho_0``. For each ``rho_k`` the inner loop stops
once all coupled pairs are within ``t / (rho_k sqrt(c))`` and the last
increment is below ``delta_k / L_rho``. The outer loop stops when the first
two components agree and the outer step is stationary, both to ``final_tol``
in relative terms; the final split stack is projected to a feasible
piecewise-constant image.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .algo1 import backward_step, forward_step, initial_stack, relaxed_step
from .core import DirectionModel, pair_distances, relaxed_energy
from .coupling import CouplingKind, CouplingScheme, choose_t, l_rho
from .operators import LinearOperator, ScaledOperator
from .projection import Partition, project

__all__ = [
    "LAMBDA_PRESETS",
    "Algo2Config",
    "Algo2Trace",
    "InnerResult",
    "inner_loop",
    "run_algo2",
]

logger = logging.getLogger(__name__)

#: Step relaxation per application.
LAMBDA_PRESETS = {"gaussian": 0.35, "motion": 0.25, "radon": 0.11, "segment": 0.55}


@dataclass
class Algo2Config:
    gamma: float
    scheme: CouplingScheme
    model: DirectionModel
    rho0: float = 1e-3
    tau: float = 1.05
    eta: float | None = None
    lam: float = 0.35
    outer_max: int = 2000
    inner_max: int = 100_000
    final_tol: float = 1e-6
    t_multiplier: float = 1.0
    init: str = "adjoint"
    prune: bool = False
    normalize: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.scheme.S != self.model.size:
            raise ValueError(f"coupling is for S={self.scheme.S}, model has S={self.model.size}")
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.tau > 1:
            raise ValueError("tau must exceed 1")
        if self.eta is None:
            self.eta = 0.98 if self.scheme.kind is CouplingKind.CYCLIC else 0.95
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if not 0 < self.lam <= 1:
            raise ValueError("lam must lie in (0, 1]")
        if not self.t_multiplier >= 1:
            raise ValueError("t_multiplier must be at least 1")

    def rho(self, k: int) -> float:
        return self.rho0 * self.tau**k

    def delta(self, k: int) -> float:
        return 1.0 / (self.eta * self.rho(k))


@dataclass
class InnerResult:
    stack: np.ndarray
    iterations: int
    terminated: bool
    last_increment: np.ndarray  # per-component ||u^(n) - u^(n-1)||, nan if no step was taken
    L: float


@dataclass
class Algo2Trace:
    k: list[int] = field(default_factory=list)
    n_inner: list[int] = field(default_factory=list)
    rho: list[float] = field(default_factory=list)
    delta: list[float] = field(default_factory=list)
    L: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    max_pair_distance: list[float] = field(default_factory=list)
    max_increment: list[float] = field(default_factory=list)
    inner_terminated: list[bool] = field(default_factory=list)
    converged: bool = False
    t: float = float("nan")
    scale: float = 1.0
    partition: Partition | None = None
    stack: np.ndarray | None = None

    def __len__(self):
        return len(self.k)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "n_inner", "rho", "delta", "energy", "max_pair_distance"])
            for row in zip(self.k, self.n_inner, self.rho, self.delta, self.energy, self.max_pair_distance):
                w.writerow([row[0], row[1], *(repr(x) for x in row[2:])])


def _pair_ok(stack, pairs, bound_num):
    # ||u_s - u_t|| <= t / (rho sqrt(c)) for every coupled pair
    return all(np.linalg.norm(stack[s] - stack[t]) <= bound_num / math.sqrt(c) for s, t, c in pairs)


def inner_loop(
    state,
    rho_k: float,
    delta_k: float,
    t: float,
    A: LinearOperator,
    f,
    cfg: Algo2Config,
    previous=None,
    norm_A: float | None = None,
    adjoint_f=None,
) -> InnerResult:
    """Surrogate iterations at fixed ``rho_k`` until both termination bounds hold.

    ``previous`` is the iterate preceding ``state``; without it the increment
    bound is undefined and at least one step is taken.
    """
    f = np.asarray(f, dtype=np.float64)
    S = cfg.model.size
    norm_A = A.norm if norm_A is None else norm_A
    L = l_rho(norm_A, S, rho_k, cfg.scheme)
    rho_w = rho_k * cfg.scheme.matrix()
    pairs = cfg.scheme.pairs()
    if adjoint_f is None:
        adjoint_f = A.adjoint(f)
    stack = np.array(state, dtype=np.float64)
    pair_bound = t / rho_k
    inc_bound = delta_k / L

    if previous is None:
        increments = np.full(S, np.nan)
    else:
        increments = np.linalg.norm((stack - previous).reshape(S, -1), axis=1)

    n = 0
    while True:
        inc_ok = not np.isnan(increments).any() and bool(np.all(increments <= inc_bound))
        if inc_ok and _pair_ok(stack, pairs, pair_bound):
            return InnerResult(stack, n, True, increments, L)
        if n >= cfg.inner_max:
            return InnerResult(stack, n, False, increments, L)
        Ln = relaxed_step(L, cfg.lam, n)
        h = forward_step(stack, A, f, rho_w, Ln, adjoint_f=adjoint_f)
        new = backward_step(h, cfg.gamma, cfg.model, Ln, prune=cfg.prune)
        increments = np.linalg.norm((new - stack).reshape(S, -1), axis=1)
        stack = new
        n += 1


def _rel_diff(u1, u2):
    den = np.linalg.norm(u1) + np.linalg.norm(u2)
    return 0.0 if den == 0 else float(np.linalg.norm(u1 - u2) / den)


def run_algo2(A: LinearOperator, f, cfg: Algo2Config, init=None, norm_A: float | None = None):
    """Increasing-penalty Potts minimization.

    Returns ``(image, trace)`` where ``image`` is the projection of the final
    split stack; ``trace.stack`` keeps the unprojected components and
    ``trace.partition`` the segments.

    With ``cfg.normalize`` the equivalent problem ``(A/c, f/c, gamma/c^2)``
    with ``c = ||A||`` is solved; it has the same minimizers but puts the
    penalty schedule on the scale of a unit-norm operator. Then ``t``, ``rho``
    and ``L`` in the trace refer to the normalized problem while ``energy`` is
    reported in the units of the original one.
    """
    f = np.asarray(f, dtype=np.float64)
    norm_A = A.norm if norm_A is None else norm_A
    if cfg.normalize and norm_A > 0:
        scale = norm_A
        image, trace = run_algo2(
            ScaledOperator(A, 1.0 / scale),
            f / scale,
            replace(cfg, gamma=cfg.gamma / scale**2, normalize=False),
            init=init,
            norm_A=1.0,
        )
        trace.energy = [e * scale**2 for e in trace.energy]
        trace.scale = scale
        return image, trace

    S = cfg.model.size
    t = choose_t(cfg.scheme, S, norm_A, float(np.linalg.norm(f))) * cfg.t_multiplier
    atf = A.adjoint(f)
    stack = initial_stack(A, f, S, cfg.init if init is None else init)
    trace = Algo2Trace(t=t)

    for k in range(cfg.outer_max):
        rho_k, delta_k = cfg.rho(k), cfg.delta(k)
        res = inner_loop(stack, rho_k, delta_k, t, A, f, cfg, norm_A=norm_A, adjoint_f=atf)
        # components can coincide long before the iteration settles (e.g. from
        # a symmetric start), so the outer step must be stationary as well
        moved = _rel_diff(res.stack, stack)
        stack = res.stack
        dists = pair_distances(stack, cfg.scheme.matrix())
        trace.k.append(k)
        trace.n_inner.append(res.iterations)
        trace.rho.append(rho_k)
        trace.delta.append(delta_k)
        trace.L.append(res.L)
        trace.max_pair_distance.append(max((d for *_, d in dists), default=0.0))
        trace.max_increment.append(float(np.nanmax(res.last_increment)) if res.iterations else float("nan"))
        trace.inner_terminated.append(res.terminated)
        trace.energy.append(relaxed_energy(A, f, stack, cfg.gamma, rho_k, cfg.scheme, cfg.model))
        disc = _rel_diff(stack[0], stack[1])
        logger.debug(
            "k=%d rho=%.4g inner=%d energy=%.6g discrepancy=%.3g moved=%.3g",
            k, rho_k, res.iterations, trace.energy[-1], disc, moved,
        )
        if not res.terminated:
            logger.warning("inner loop hit inner_max=%d at k=%d", cfg.inner_max, k)
        if disc < cfg.final_tol and moved < cfg.final_tol:
            trace.converged = True
            break
    if not trace.converged:
        logger.warning("algorithm 2 stopped at outer_max=%d without convergence", cfg.outer_max)
    image, partition = project(stack, cfg.model)
    trace.stack = stack
    trace.partition = partition
    return image, trace
