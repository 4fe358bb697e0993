"""Forward operators, operator norms, Landweber initialization and FBP.

Every operator maps an image of shape ``in_shape`` to data of shape
``out_shape`` and provides an adjoint that is the exact transpose of its
forward map (convolutions fold the boundary explicitly instead of relying on
a padding mode, and the Radon projector is an explicit sparse matrix).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "IdentityOperator",
    "LinearOperator",
    "MatrixOperator",
    "RadonGeometry",
    "RadonOperator",
    "ScaledOperator",
    "SeparableConvolution",
    "estimate_norm",
    "fbp",
    "gaussian_blur_operator",
    "gaussian_kernel",
    "identity_operator",
    "landweber",
    "motion_blur_operator",
    "radon_operator",
    "spectral_norm",
]

NORM_ITERS = 100
NORM_SEED = 0
DENSE_NORM_MAX = 1024


class LinearOperator:
    """Linear map between image space and data space."""

    in_shape: tuple[int, int]
    out_shape: tuple

    def apply(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def normal(self, u: np.ndarray) -> np.ndarray:
        return self.adjoint(self.apply(u))

    @cached_property
    def norm(self) -> float:
        """Spectral norm to working precision, cached after the first request."""
        return spectral_norm(self)

    def _check_in(self, u):
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.in_shape:
            raise ValueError(f"expected image of shape {self.in_shape}, got {u.shape}")
        return u

    def _check_out(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != self.out_shape:
            raise ValueError(f"expected data of shape {self.out_shape}, got {v.shape}")
        return v


class IdentityOperator(LinearOperator):
    def __init__(self, shape):
        self.in_shape = self.out_shape = (int(shape[0]), int(shape[1]))

    def apply(self, u):
        return self._check_in(u).copy()

    def adjoint(self, v):
        return self._check_out(v).copy()

    @property
    def norm(self) -> float:
        return 1.0

    def __repr__(self):
        return f"IdentityOperator({self.in_shape})"


class ScaledOperator(LinearOperator):
    """``factor * A`` sharing the storage of ``A``."""

    def __init__(self, base: LinearOperator, factor: float):
        self.base = base
        self.factor = float(factor)
        self.in_shape = base.in_shape
        self.out_shape = base.out_shape

    def apply(self, u):
        return self.factor * self.base.apply(u)

    def adjoint(self, v):
        return self.factor * self.base.adjoint(v)

    def normal(self, u):
        return self.factor**2 * self.base.normal(u)

    def __repr__(self):
        return f"ScaledOperator({self.base!r}, {self.factor!r})"


class MatrixOperator(LinearOperator):
    """Operator given by a dense or sparse matrix acting on raveled images."""

    def __init__(self, matrix, in_shape, out_shape=None):
        self.matrix = matrix if sp.issparse(matrix) else np.asarray(matrix, dtype=np.float64)
        self.in_shape = tuple(int(n) for n in in_shape)
        if out_shape is None:
            out_shape = (self.matrix.shape[0],)
        self.out_shape = tuple(int(n) for n in out_shape)
        if self.matrix.shape != (math.prod(self.out_shape), math.prod(self.in_shape)):
            raise ValueError(f"matrix shape {self.matrix.shape} inconsistent with {in_shape} -> {out_shape}")
        if sp.issparse(self.matrix):
            self.matrix = self.matrix.tocsr()
            self._matrix_t = self.matrix.T.tocsr()
        else:
            self._matrix_t = self.matrix.T

    def apply(self, u):
        return (self.matrix @ self._check_in(u).ravel()).reshape(self.out_shape)

    def adjoint(self, v):
        return (self._matrix_t @ self._check_out(v).ravel()).reshape(self.in_shape)


def _fold(idx: np.ndarray, n: int) -> np.ndarray:
    """Map arbitrary integer indices into ``[0, n)`` by half-sample symmetric reflection."""
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx < n, idx, period - 1 - idx)


def convolution_matrix(n: int, kernel: np.ndarray) -> np.ndarray:
    """Dense ``n x n`` matrix of 1D convolution with symmetric boundary extension.

    The kernel is centered at index ``(len(kernel) - 1) // 2``.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    center = (len(kernel) - 1) // 2
    mat = np.zeros((n, n))
    rows = np.arange(n)
    for k, w in enumerate(kernel):
        # out[i] += w * in[i - (k - center)]
        cols = _fold(rows - (k - center), n)
        np.add.at(mat, (rows, cols), w)
    return mat


class SeparableConvolution(LinearOperator):
    """2D convolution with a separable kernel ``k_row (x) k_col``.

    ``A u = C_rows @ u @ C_cols.T`` where each factor is a folded 1D
    convolution matrix, so the adjoint ``C_rows.T @ v @ C_cols`` is exact.
    """

    def __init__(self, shape, row_kernel, col_kernel, name="convolution"):
        rows, cols = int(shape[0]), int(shape[1])
        self.in_shape = self.out_shape = (rows, cols)
        self.row_kernel = np.asarray(row_kernel, dtype=np.float64)
        self.col_kernel = np.asarray(col_kernel, dtype=np.float64)
        self._cr = convolution_matrix(rows, self.row_kernel)
        self._cc = convolution_matrix(cols, self.col_kernel)
        self.name = name

    def apply(self, u):
        return self._cr @ self._check_in(u) @ self._cc.T

    def adjoint(self, v):
        return self._cr.T @ self._check_out(v) @ self._cc

    def __repr__(self):
        return f"SeparableConvolution({self.name}, {self.in_shape})"


def identity_operator(rows: int, cols: int) -> IdentityOperator:
    return IdentityOperator((rows, cols))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian with ``2*floor(3*sigma) + 1`` taps."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(math.floor(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur_operator(rows: int, cols: int, sigma: float) -> SeparableConvolution:
    k = gaussian_kernel(sigma)
    return SeparableConvolution((rows, cols), k, k, name=f"gaussian(sigma={sigma:g})")


def motion_blur_operator(rows: int, cols: int, length: int) -> SeparableConvolution:
    """Horizontal box blur over ``length`` pixels."""
    length = int(length)
    if length < 1:
        raise ValueError(f"motion blur length must be >= 1, got {length}")
    return SeparableConvolution(
        (rows, cols), np.ones(1), np.full(length, 1.0 / length), name=f"motion(length={length})"
    )


@dataclass(frozen=True)
class RadonGeometry:
    """Parallel-beam geometry: equispaced angles in ``[0, pi)``, centered detector."""

    num_angles: int
    num_detectors: int
    detector_spacing: float = 1.0

    def __post_init__(self):
        if self.num_angles < 1 or self.num_detectors < 1 or not self.detector_spacing > 0:
            raise ValueError("invalid Radon geometry")

    @classmethod
    def for_image(cls, rows: int, cols: int, num_angles: int) -> "RadonGeometry":
        return cls(num_angles, int(math.ceil(math.sqrt(2.0) * max(rows, cols))))

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.num_angles) * (math.pi / self.num_angles)

    @property
    def detector_positions(self) -> np.ndarray:
        return (np.arange(self.num_detectors) - (self.num_detectors - 1) / 2) * self.detector_spacing


def _image_coords(rows, cols):
    # pixel (i, j) sits at x = j - (cols-1)/2, y = i - (rows-1)/2
    return (cols - 1) / 2.0, (rows - 1) / 2.0


def _radon_matrix(rows: int, cols: int, geom: RadonGeometry) -> sp.csr_matrix:
    cx, cy = _image_coords(rows, cols)
    half = 0.5 * math.hypot(rows, cols) + 1.0
    t = np.arange(-math.ceil(half), math.ceil(half) + 1, dtype=np.float64)
    s = geom.detector_positions
    nd = geom.num_detectors
    blocks = []
    for theta in geom.angles:
        c, sn = math.cos(theta), math.sin(theta)
        # ray point: s*(c, sn) + t*(-sn, c) in (x, y)
        x = s[:, None] * c - t[None, :] * sn + cx
        y = s[:, None] * sn + t[None, :] * c + cy
        x0 = np.floor(x)
        y0 = np.floor(y)
        fx = x - x0
        fy = y - y0
        x0 = x0.astype(np.int64)
        y0 = y0.astype(np.int64)
        det = np.broadcast_to(np.arange(nd)[:, None], x.shape)
        r_idx, c_idx, vals = [], [], []
        for dy, dx, w in (
            (0, 0, (1 - fx) * (1 - fy)),
            (0, 1, fx * (1 - fy)),
            (1, 0, (1 - fx) * fy),
            (1, 1, fx * fy),
        ):
            xi = x0 + dx
            yi = y0 + dy
            ok = (xi >= 0) & (xi < cols) & (yi >= 0) & (yi < rows) & (w > 0)
            r_idx.append(det[ok])
            c_idx.append(yi[ok] * cols + xi[ok])
            vals.append(w[ok])
        block = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(r_idx), np.concatenate(c_idx))),
            shape=(nd, rows * cols),
        ).tocsr()
        block.sum_duplicates()
        blocks.append(block)
    # unit sampling step along each ray
    return sp.vstack(blocks, format="csr")


class RadonOperator(MatrixOperator):
    """Ray-driven discrete Radon transform with bilinear interpolation.

    Each ray is sampled at unit steps; the sinogram has shape
    ``(num_angles, num_detectors)``. At angle 0 the detector coordinate is the
    column coordinate.
    """

    def __init__(self, rows: int, cols: int, geom: RadonGeometry):
        self.geometry = geom
        super().__init__(_radon_matrix(rows, cols, geom), (rows, cols), (geom.num_angles, geom.num_detectors))

    def __repr__(self):
        return f"RadonOperator({self.in_shape}, angles={self.geometry.num_angles})"


def radon_operator(rows: int, cols: int, geom: RadonGeometry | None = None, num_angles: int = 180) -> RadonOperator:
    if geom is None:
        geom = RadonGeometry.for_image(rows, cols, num_angles)
    return RadonOperator(rows, cols, geom)


def estimate_norm(A: LinearOperator, iters: int = NORM_ITERS, seed: int = NORM_SEED, history: bool = False):
    """Power iteration on ``A^T A`` from a seeded Gaussian start.

    Returns ``sqrt`` of the final Rayleigh quotient ``||A x||^2 / ||x||^2``;
    with ``history=True`` also the estimate after every step.
    """
    if iters < 10:
        raise ValueError("need at least 10 power iterations")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.in_shape)
    x /= np.linalg.norm(x)
    estimates = []
    est = 0.0
    for _ in range(iters):
        ax = A.apply(x)
        est = math.sqrt(float(np.vdot(ax, ax)))
        estimates.append(est)
        y = A.adjoint(ax)
        ny = np.linalg.norm(y)
        if ny == 0:
            break
        x = y / ny
    if history:
        return est, estimates
    return est


def spectral_norm(A: LinearOperator, seed: int = NORM_SEED) -> float:
    """Largest singular value of ``A``.

    Dense for small images, otherwise Lanczos (ARPACK) on ``A^T A``. Plain
    power iteration stalls when the top singular values cluster, and an
    underestimate would break the step-size bound.
    """
    n = math.prod(A.in_shape)
    if n <= DENSE_NORM_MAX:
        cols = [A.apply(e.reshape(A.in_shape)).ravel() for e in np.eye(n)]
        return float(np.linalg.norm(np.stack(cols, axis=1), 2))
    op = spla.LinearOperator(
        (n, n), matvec=lambda x: A.normal(x.reshape(A.in_shape)).ravel(), dtype=np.float64
    )
    v0 = np.random.default_rng(seed).standard_normal(n)
    lam = spla.eigsh(op, k=1, which="LA", v0=v0, tol=0, return_eigenvectors=False)[0]
    return math.sqrt(max(float(lam), 0.0))


def landweber(A: LinearOperator, f, steps: int, norm: float | None = None) -> np.ndarray:
    """``steps`` Landweber iterations with step ``1/||A||^2`` from zero."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    f = np.asarray(f, dtype=np.float64)
    norm = A.norm if norm is None else norm
    tau = 1.0 / norm**2
    u = np.zeros(A.in_shape)
    for _ in range(steps):
        u = u + tau * A.adjoint(f - A.apply(u))
    return u


def _ramlak_response(n_pad: int) -> np.ndarray:
    # spatial-domain Ram-Lak taps (unit spacing) transformed, avoids the DC offset of |w|
    k = np.arange(-(n_pad // 2), n_pad // 2)
    h = np.zeros(n_pad)
    h[k == 0] = 0.25
    odd = k % 2 == 1
    h[odd] = -1.0 / (math.pi * k[odd]) ** 2
    return np.real(np.fft.fft(np.fft.ifftshift(h)))


def fbp(sinogram, geom: RadonGeometry, shape: tuple[int, int]) -> np.ndarray:
    """Filtered backprojection with the Ram-Lak filter and linear interpolation."""
    sino = np.asarray(sinogram, dtype=np.float64)
    if sino.shape != (geom.num_angles, geom.num_detectors):
        raise ValueError(f"sinogram shape {sino.shape} does not match geometry")
    nd = geom.num_detectors
    n_pad = max(64, 1 << int(math.ceil(math.log2(2 * nd))))
    response = _ramlak_response(n_pad)
    padded = np.zeros((geom.num_angles, n_pad))
    padded[:, :nd] = sino
    filtered = np.real(np.fft.ifft(np.fft.fft(padded, axis=1) * response, axis=1))[:, :nd]
    filtered /= geom.detector_spacing
    rows, cols = shape
    cx, cy = _image_coords(rows, cols)
    x = np.arange(cols) - cx
    y = np.arange(rows) - cy
    s_pos = geom.detector_positions
    out = np.zeros((rows, cols))
    for theta, proj in zip(geom.angles, filtered):
        s = x[None, :] * math.cos(theta) + y[:, None] * math.sin(theta)
        out += np.interp(s, s_pos, proj, left=0.0, right=0.0)
    return out * (math.pi / geom.num_angles)

