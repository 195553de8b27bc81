"""Grid definitions, 2D Fourier transforms, wavenumber algebra and norms.

Conventions used throughout the package:

* physical fields are (n, n) float64 arrays, ``values[i, j] = phi(i*dx, j*dx)``
  (axis 0 is x, axis 1 is y);
* spectral fields are (n, n) complex128 arrays holding the unnormalised
  forward DFT (no 1/N factor on the forward transform, 1/n^2 on the inverse),
  so coefficient magnitudes match the usual Matlab ``fft2`` output;
* the mean mode sits at ``coeffs[0, 0]`` and is kept at zero by the dynamics.
"""

from dataclasses import dataclass
from functools import lru_cache
import struct

import numpy as np

MAGIC = b"KSE2"
FORMAT_VERSION = 1

# Ordering of the named low-wavenumber magnitudes: (x index, y index).
LEADING_MODES = ((0, 1), (1, 1), (1, 0), (2, 0), (2, 1),
                 (3, 0), (3, 1), (0, 2), (1, 2), (2, 2))
LEADING_NAMES = tuple(f"e{p}{q}" for p, q in LEADING_MODES)


class SpectralError(ValueError):
    """Invalid field data (non-finite input, broken symmetry, bad shapes)."""


@dataclass(frozen=True)
class GridSpec:
    """Square periodic grid on [0, 2L) x [0, 2L) with n points per side."""

    n: int = 64
    half_domain: float = 10.0

    def __post_init__(self):
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")
        if self.half_domain <= 0:
            raise ValueError("half_domain must be positive")

    @property
    def side(self) -> float:
        return 2.0 * self.half_domain

    @property
    def dx(self) -> float:
        return self.side / self.n

    def signed_index(self, j: int) -> int:
        """Map DFT index j in [0, n) to the signed index in [-n/2, n/2)."""
        j = j % self.n
        return j - self.n if j >= self.n // 2 else j

    def wavenumber(self, j: int) -> float:
        return np.pi * self.signed_index(j) / self.half_domain


@lru_cache(maxsize=8)
def signed_indices(n: int) -> np.ndarray:
    """Signed DFT indices [0, 1, ..., n/2-1, -n/2, ..., -1]."""
    return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)


@lru_cache(maxsize=8)
def wavenumber_grids(grid: GridSpec):
    """Full (n, n) arrays of k_x and k_y for the unshifted DFT layout."""
    k = np.pi * signed_indices(grid.n) / grid.half_domain
    kx = np.broadcast_to(k[:, None], (grid.n, grid.n)).copy()
    ky = np.broadcast_to(k[None, :], (grid.n, grid.n)).copy()
    kx.setflags(write=False)
    ky.setflags(write=False)
    return kx, ky


@lru_cache(maxsize=8)
def dealias_mask(n: int) -> np.ndarray:
    """2/3-rule mask: True where |signed index| <= n/3 in both directions."""
    keep = np.abs(signed_indices(n)) <= n / 3.0
    mask = keep[:, None] & keep[None, :]
    mask.setflags(write=False)
    return mask


def _require_finite(arr: np.ndarray, what: str):
    if not np.all(np.isfinite(arr)):
        bad = int(np.count_nonzero(~np.isfinite(arr)))
        raise SpectralError(f"{what} contains {bad} non-finite entries")


def _require_square(arr: np.ndarray, what: str):
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise SpectralError(f"{what} must be square 2D, got shape {arr.shape}")


def dft2(field: np.ndarray) -> np.ndarray:
    """Unnormalised forward 2D DFT of a real physical field."""
    field = np.asarray(field, dtype=np.float64)
    _require_square(field, "physical field")
    _require_finite(field, "physical field")
    return np.fft.fft2(field)


def idft2(spec: np.ndarray, imag_tol: float = 1e-6) -> np.ndarray:
    """Inverse DFT (1/n^2 scaling); discards the imaginary residue.

    Raises SpectralError when the residue exceeds ``imag_tol`` of the field
    norm, which signals a spectrum that does not describe a real field.
    """
    spec = np.asarray(spec, dtype=np.complex128)
    _require_square(spec, "spectral field")
    _require_finite(spec, "spectral field")
    phys = np.fft.ifft2(spec)
    norm = np.linalg.norm(phys)
    residue = np.linalg.norm(phys.imag)
    if norm > 0 and residue > imag_tol * norm:
        raise SpectralError(
            f"imaginary residue {residue:.3e} exceeds {imag_tol:.1e} of field "
            f"norm {norm:.3e}; spectrum is not Hermitian-symmetric")
    return np.ascontiguousarray(phys.real)


def is_hermitian(spec: np.ndarray, rtol: float = 1e-10) -> bool:
    """Check coeffs[p, q] == conj(coeffs[-p mod n, -q mod n]) to rtol."""
    mirrored = np.conj(spec[::-1, ::-1])
    mirrored = np.roll(np.roll(mirrored, 1, axis=0), 1, axis=1)
    scale = np.max(np.abs(spec))
    if scale == 0.0:
        return True
    return bool(np.max(np.abs(spec - mirrored)) <= rtol * scale)


def spectral_gradient(spec: np.ndarray, grid: GridSpec):
    """Return (d/dx, d/dy) spectra; the Nyquist line of each is zeroed.

    Zeroing the signed index -n/2 keeps odd derivatives of real fields real.
    """
    spec = np.asarray(spec, dtype=np.complex128)
    if spec.shape != (grid.n, grid.n):
        raise SpectralError(f"spectrum shape {spec.shape} does not match grid n={grid.n}")
    kx, ky = wavenumber_grids(grid)
    gx = 1j * kx * spec
    gy = 1j * ky * spec
    nyq = grid.n // 2
    gx[nyq, :] = 0.0
    gy[:, nyq] = 0.0
    return gx, gy


def dealias(spec: np.ndarray) -> np.ndarray:
    """Zero every coefficient with |signed index| > n/3 in either direction."""
    spec = np.asarray(spec)
    _require_square(spec, "spectral field")
    return spec * dealias_mask(spec.shape[0])


def spectral_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean norm sqrt(sum |a - b|^2) over all coefficients."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise SpectralError(f"grid mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def leading_coefficients(spec: np.ndarray) -> np.ndarray:
    """Magnitudes |coeffs[p, q]| of the ten named low modes, unnormalised.

    Order: e01, e11, e10, e20, e21, e30, e31, e02, e12, e22 (p = x index,
    q = y index), matching the table layout the fixed-point store exports.
    """
    spec = np.asarray(spec)
    _require_square(spec, "spectral field")
    return np.array([abs(spec[p, q]) for p, q in LEADING_MODES])


def energy(field: np.ndarray, grid: GridSpec) -> float:
    """Discrete energy sum(phi^2) * dx^2."""
    field = np.asarray(field)
    return float(np.sum(field * field) * grid.dx ** 2)


_HEADER = struct.Struct("<4sHId")  # magic, version, n, half_domain


def write_spectral(path, spec: np.ndarray, grid: GridSpec):
    """Binary dump: header then n^2 little-endian complex128, x index outer."""
    spec = np.ascontiguousarray(spec, dtype=np.complex128)
    if spec.shape != (grid.n, grid.n):
        raise SpectralError(f"spectrum shape {spec.shape} does not match grid n={grid.n}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, grid.n, grid.half_domain))
        fh.write(spec.astype("<c16", copy=False).tobytes())


def read_spectral(path):
    """Read a field written by write_spectral; returns (coeffs, GridSpec)."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise SpectralError(f"{path}: truncated header")
        magic, version, n, half_domain = _HEADER.unpack(header)
        if magic != MAGIC:
            raise SpectralError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise SpectralError(f"{path}: unsupported format version {version}")
        payload = fh.read(n * n * 16)
    if len(payload) != n * n * 16:
        raise SpectralError(f"{path}: truncated payload")
    coeffs = np.frombuffer(payload, dtype="<c16").astype(np.complex128).reshape(n, n)
    return coeffs, GridSpec(n=n, half_domain=half_domain)
