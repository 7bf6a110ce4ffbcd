"""Images, finite differences and the Gaussian blur operator.

Images are plain 2-D float64 arrays in row-major order. A gradient field is
an array of shape ``(2, n1, n2)`` holding the horizontal and vertical forward
differences.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from scipy import ndimage

from .errors import ConfigError

Boundary = Literal["neumann", "periodic"]
BlurBoundary = Literal["periodic", "replicate"]


def as_image(data, name: str = "image") -> np.ndarray:
    """Validate and copy ``data`` into a finite float64 2-D array."""
    u = np.array(data, dtype=np.float64, copy=True)
    if u.ndim != 2 or u.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{name} contains non-finite values")
    return u


# ---------------------------------------------------------------------------
# finite differences


def gradient(u: np.ndarray, boundary: Boundary = "neumann") -> np.ndarray:
    """Forward differences ``(u[h, l+1] - u[h, l], u[h+1, l] - u[h, l])``.

    With the Neumann boundary the difference across the last column (row) is
    zero. The periodic variant wraps around instead.
    """
    u = np.asarray(u, dtype=np.float64)
    g = np.zeros((2,) + u.shape)
    if boundary == "neumann":
        g[0, :, :-1] = u[:, 1:] - u[:, :-1]
        g[1, :-1, :] = u[1:, :] - u[:-1, :]
    elif boundary == "periodic":
        g[0] = np.roll(u, -1, axis=1) - u
        g[1] = np.roll(u, -1, axis=0) - u
    else:
        raise ValueError(f"unknown gradient boundary {boundary!r}")
    return g


def gradient_adjoint(w: np.ndarray, boundary: Boundary = "neumann") -> np.ndarray:
    """Transpose of :func:`gradient` (the negative divergence)."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 3 or w.shape[0] != 2:
        raise ValueError(f"gradient field must have shape (2, n1, n2), got {w.shape}")
    if boundary == "neumann":
        wh = w[0, :, :-1]
        wv = w[1, :-1, :]
        out = np.zeros(w.shape[1:])
        out[:, :-1] -= wh
        out[:, 1:] += wh
        out[:-1, :] -= wv
        out[1:, :] += wv
        return out
    if boundary == "periodic":
        return (np.roll(w[0], 1, axis=1) - w[0]) + (np.roll(w[1], 1, axis=0) - w[1])
    raise ValueError(f"unknown gradient boundary {boundary!r}")


def gradient_symbol(shape: tuple[int, int]) -> np.ndarray:
    """Eigenvalues of ``D^T D`` for the periodic gradient, in FFT layout."""
    n1, n2 = shape
    s1 = 4.0 * np.sin(np.pi * np.arange(n1) / n1) ** 2
    s2 = 4.0 * np.sin(np.pi * np.arange(n2) / n2) ** 2
    return s1[:, None] + s2[None, :]


# ---------------------------------------------------------------------------
# blur


def gaussian_kernel(band: int, sigma: float) -> np.ndarray:
    """Sampled isotropic Gaussian on a ``band x band`` grid, normalized to sum 1."""
    if int(band) != band or band < 1 or band % 2 == 0:
        raise ConfigError(f"band must be an odd positive integer, got {band}")
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    h = (int(band) - 1) // 2
    x = np.arange(-h, h + 1, dtype=np.float64)
    k = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2.0 * sigma**2))
    return k / k.sum()


def kernel_otf(kernel: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """DFT of the kernel zero-padded to ``shape`` with its center moved to (0, 0)."""
    k = np.asarray(kernel, dtype=np.float64)
    if k.shape[0] > shape[0] or k.shape[1] > shape[1]:
        raise ValueError(f"kernel {k.shape} does not fit image {shape}")
    pad = np.zeros(shape)
    pad[: k.shape[0], : k.shape[1]] = k
    pad = np.roll(pad, (-(k.shape[0] // 2), -(k.shape[1] // 2)), axis=(0, 1))
    return np.fft.fft2(pad)


def _fold_edges(z: np.ndarray, h: int) -> np.ndarray:
    # transpose of edge padding by h pixels on every side
    z = z.copy()
    for axis in (0, 1):
        z = np.moveaxis(z, axis, 0)
        z[h] += z[:h].sum(axis=0)
        z[-h - 1] += z[-h:].sum(axis=0)
        z = np.moveaxis(z[h:-h], 0, axis)
    return z


def convolve(u: np.ndarray, kernel: np.ndarray, boundary: BlurBoundary = "periodic") -> np.ndarray:
    """Convolve ``u`` with ``kernel`` (true convolution, centered kernel)."""
    return BlurOperator(kernel, np.shape(u), boundary).apply(u)


class BlurOperator:
    """Space-invariant blur ``A`` with periodic or replicate boundary."""

    def __init__(self, kernel: np.ndarray, shape: tuple[int, int], boundary: BlurBoundary = "periodic"):
        k = np.asarray(kernel, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise ValueError("kernel must be 2-D with odd side lengths")
        if boundary not in ("periodic", "replicate"):
            raise ValueError(f"unknown blur boundary {boundary!r}")
        self.kernel = k
        self.shape = (int(shape[0]), int(shape[1]))
        self.boundary = boundary
        self.otf = kernel_otf(k, self.shape) if boundary == "periodic" else None

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if self.periodic:
            return np.real(np.fft.ifft2(self.otf * np.fft.fft2(u)))
        h = self.kernel.shape[0] // 2
        padded = np.pad(u, max(h, self.kernel.shape[1] // 2), mode="edge")
        out = ndimage.convolve(padded, self.kernel, mode="constant")
        p = max(h, self.kernel.shape[1] // 2)
        return out[p:-p, p:-p] if p else out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.periodic:
            return np.real(np.fft.ifft2(np.conj(self.otf) * np.fft.fft2(y)))
        p = max(self.kernel.shape[0] // 2, self.kernel.shape[1] // 2)
        if p == 0:
            return ndimage.correlate(y, self.kernel, mode="constant")
        z = np.pad(y, p)
        z = ndimage.correlate(z, self.kernel, mode="constant")
        return _fold_edges(z, p)


class IdentityOperator:
    """``A = I``; diagonal in every basis."""

    boundary = "periodic"
    periodic = True

    def __init__(self, shape: tuple[int, int]):
        self.shape = (int(shape[0]), int(shape[1]))
        self.otf = np.ones(self.shape, dtype=np.complex128)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return np.array(u, dtype=np.float64)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return np.array(y, dtype=np.float64)
