"""
Fourier representation of periodic, mean-zero 2D vorticity fields.

Coefficients are stored in the real-FFT half-spectrum layout ``(n, n//2 + 1)``
with wave vector ``k = (k1, k2)``: ``k1`` runs along axis 0 in FFT index order,
``k2 >= 0`` along axis 1. The forward transform carries ``1/n**2`` so stored
values are Fourier-series coefficients, i.e. ``omega(x) = sum_k c_k exp(i k.x)``.

Norms are physical-domain L2 norms, ``|f|^2 = int_Omega |f|^2 dx = L^2 sum_k |c_k|^2``.
For divergence-free 2D velocity, ``||u||_{H^1} = |grad u| = |omega|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class Grid:
    """Square periodic grid with ``n_modes`` points per dimension."""

    n_modes: int
    domain_length: float = 2 * np.pi

    def __post_init__(self):
        n = self.n_modes
        if n < 4 or n % 2:
            raise ValueError(f"n_modes must be even and >= 4, got {n}")
        if n & (n - 1):
            raise ValueError(f"n_modes must be a power of two, got {n}")
        if self.domain_length <= 0:
            raise ValueError("domain_length must be positive")

    @property
    def dealias_cutoff(self) -> int:
        return self.n_modes // 3

    @property
    def kappa0(self) -> float:
        return 2 * np.pi / self.domain_length

    @property
    def half_shape(self) -> tuple[int, int]:
        return (self.n_modes, self.n_modes // 2 + 1)

    @property
    def spacing(self) -> float:
        return self.domain_length / self.n_modes

    @cached_property
    def k1_index(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_modes, 1.0 / self.n_modes).astype(int)[:, None]

    @cached_property
    def k2_index(self) -> np.ndarray:
        return np.arange(self.n_modes // 2 + 1)[None, :]

    @cached_property
    def k1(self) -> np.ndarray:
        return self.kappa0 * self.k1_index.astype(float)

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kappa0 * self.k2_index.astype(float)

    @cached_property
    def ksq(self) -> np.ndarray:
        return self.k1**2 + self.k2**2

    @cached_property
    def inv_ksq(self) -> np.ndarray:
        out = np.zeros(self.half_shape)
        nz = self.ksq > 0
        out[nz] = 1.0 / self.ksq[nz]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        c = self.dealias_cutoff
        return (np.abs(self.k1_index) <= c) & (self.k2_index <= c)

    @cached_property
    def norm_weights(self) -> np.ndarray:
        """Multiplicity of each half-spectrum entry in the full spectrum."""
        w = np.full(self.half_shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    def box_mask(self, cutoff: int) -> np.ndarray:
        return (np.abs(self.k1_index) <= cutoff) & (self.k2_index <= cutoff)

    def box_rows(self, cutoff: int) -> np.ndarray:
        """Row indices of ``|k1| <= cutoff`` in FFT order (0..c, then -c..-1)."""
        n = self.n_modes
        if cutoff >= n // 2:
            raise ValueError(f"cutoff {cutoff} does not fit on a {n}-point grid")
        return np.concatenate([np.arange(cutoff + 1), np.arange(n - cutoff, n)])


def to_physical(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Inverse transform of half-spectrum coefficients (batched over leading axes)."""
    n = grid.n_modes
    return sfft.irfft2(coeffs, s=(n, n), axes=(-2, -1), norm="forward")


def to_spectral(grid: Grid, values: np.ndarray) -> np.ndarray:
    return sfft.rfft2(values, axes=(-2, -1), norm="forward")


def symmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Impose exact reality symmetry on the ``k2 = 0`` column and zero the mean, in place."""
    col = coeffs[..., :, 0]
    mirrored = np.conj(np.roll(col[..., ::-1], 1, axis=-1))
    coeffs[..., :, 0] = 0.5 * (col + mirrored)
    coeffs[..., 0, 0] = 0.0
    return coeffs


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Scalar field (vorticity, force curl, velocity component) on a ``Grid``."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.half_shape:
            raise ValueError(f"coeffs shape {c.shape} != {self.grid.half_shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid) -> SpectralField:
        return cls(grid, np.zeros(grid.half_shape, dtype=complex))

    @classmethod
    def from_modes(cls, grid: Grid, modes: Mapping[tuple[int, int], complex]) -> SpectralField:
        """Build a real field from ``{(k1, k2): value}``; conjugate partners are filled in."""
        c = np.zeros(grid.half_shape, dtype=complex)
        n = grid.n_modes
        for (a, b), val in modes.items():
            if max(abs(a), abs(b)) >= n // 2:
                raise ValueError(f"mode {(a, b)} not representable on {n}-point grid")
            if (a, b) == (0, 0):
                raise ValueError("mean mode must be zero")
            if b < 0 or (b == 0 and a < 0):
                a, b, val = -a, -b, np.conj(val)
            c[a % n, b] = val
            if b == 0:
                c[-a % n, 0] = np.conj(val)
        return cls(grid, c)

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> SpectralField:
        return cls(grid, symmetrize(to_spectral(grid, np.asarray(values, dtype=float))))

    def to_physical(self) -> np.ndarray:
        return to_physical(self.grid, self.coeffs)

    def mode(self, k1: int, k2: int) -> complex:
        n = self.grid.n_modes
        if k2 < 0:
            return complex(np.conj(self.coeffs[-k1 % n, -k2]))
        return complex(self.coeffs[k1 % n, k2])

    def full(self) -> np.ndarray:
        """Full ``n x n`` coefficient array in FFT index order."""
        n = self.grid.n_modes
        out = np.zeros((n, n), dtype=complex)
        h = n // 2 + 1
        out[:, :h] = self.coeffs
        neg = np.arange(1, n // 2)
        # c(k1, -k2) = conj(c(-k1, k2))
        rows = (-np.arange(n)) % n
        out[:, n - neg] = np.conj(self.coeffs[rows][:, neg])
        return out

    @classmethod
    def from_full(cls, grid: Grid, full: np.ndarray) -> SpectralField:
        full = np.asarray(full, dtype=complex)
        if full.shape != (grid.n_modes, grid.n_modes):
            raise ValueError("full coefficient array has wrong shape")
        return cls(grid, full[:, : grid.n_modes // 2 + 1].copy())

    def resample(self, grid: Grid) -> SpectralField:
        """Zero-pad or truncate onto another grid with the same domain."""
        return SpectralField(grid, resample_coeffs(self.grid, grid, self.coeffs))

    def __add__(self, other: SpectralField) -> SpectralField:
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def check_invariants(self, atol: float = 0.0) -> None:
        """Raise ``ValueError`` if reality or mean-zero fail beyond ``atol``."""
        c = self.coeffs
        if abs(c[0, 0]) > atol:
            raise ValueError("mean mode is nonzero")
        col = c[:, 0]
        mirrored = np.conj(np.roll(col[::-1], 1))
        if np.max(np.abs(col - mirrored), initial=0.0) > atol:
            raise ValueError("reality symmetry violated on k2 = 0")
        if self.grid.n_modes >= 4 and np.max(np.abs(c[:, -1])) > atol:
            raise ValueError("Nyquist column must be zero")


def _check_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def resample_coeffs(src: Grid, dst: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Copy the common low modes of ``coeffs`` (batched) from ``src`` layout to ``dst``."""
    if src.domain_length != dst.domain_length:
        raise ValueError("cannot resample across domain lengths")
    m = min(src.n_modes, dst.n_modes) // 2 - 1
    out = np.zeros(coeffs.shape[:-2] + dst.half_shape, dtype=complex)
    rs, rd = src.box_rows(m), dst.box_rows(m)
    out[..., rd, : m + 1] = coeffs[..., rs, : m + 1]
    return out


@dataclass(frozen=True)
class ModalProjector:
    """Box cutoff ``|k1|, |k2| <= cutoff``; the interpolant J."""

    cutoff: int = 5

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")

    def mask(self, grid: Grid) -> np.ndarray:
        return grid.box_mask(self.cutoff)

    def compact_grid(self, domain_length: float = 2 * np.pi) -> Grid:
        """Smallest power-of-two grid that holds the projected modes exactly."""
        n = 4
        while n // 2 <= self.cutoff:
            n *= 2
        return Grid(n, domain_length)


def apply_projector(projector: ModalProjector, phi: SpectralField) -> SpectralField:
    return SpectralField(phi.grid, phi.coeffs * projector.mask(phi.grid))


def velocity_from_vorticity(omega: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Biot-Savart inversion ``u_hat = i k_perp omega_hat / |k|^2``, ``k_perp = (-k2, k1)``."""
    g = omega.grid
    psi = omega.coeffs * g.inv_ksq
    return SpectralField(g, -1j * g.k2 * psi), SpectralField(g, 1j * g.k1 * psi)


def advection(grid: Grid, coeffs: np.ndarray) -> tuple[np.ndarray, float]:
    """Dealiased ``u . grad omega`` for (batched) half-spectrum vorticity.

    Returns the coefficients and the maximum physical-space speed, which the
    stepper uses for its CFL check.
    """
    psi = coeffs * grid.inv_ksq
    stacked = np.stack(
        [-1j * grid.k2 * psi, 1j * grid.k1 * psi, 1j * grid.k1 * coeffs, 1j * grid.k2 * coeffs]
    )
    u1, u2, wx, wy = to_physical(grid, stacked)
    out = to_spectral(grid, u1 * wx + u2 * wy)
    out *= grid.dealias_mask
    symmetrize(out)
    speed = float(np.sqrt(np.max(u1 * u1 + u2 * u2)))
    return out, speed


def nonlinear_term(omega: SpectralField) -> SpectralField:
    return SpectralField(omega.grid, advection(omega.grid, omega.coeffs)[0])


def l2_norm(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Physical L2 norm of (batched) fields from their coefficients."""
    sq = np.sum(grid.norm_weights * np.abs(coeffs) ** 2, axis=(-2, -1))
    return grid.domain_length * np.sqrt(sq)


def h1_velocity_norm(omega: SpectralField) -> float:
    """``||u||_{H^1} = |omega|_{L^2}`` over the physical domain."""
    return float(l2_norm(omega.grid, omega.coeffs))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Fields sampled at ``s_start + i * stride`` for ``i < len(coeffs)``.

    ``coeffs`` has shape ``(frames, n, n//2 + 1)``.
    """

    grid: Grid
    s_start: float
    stride: float
    coeffs: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1:] != self.grid.half_shape:
            raise ValueError(f"trajectory coeffs shape {c.shape} incompatible with grid")
        if len(c) < 1:
            raise ValueError("trajectory needs at least one frame")
        if self.stride <= 0:
            raise ValueError("stride must be positive")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, f: SpectralField, s_start: float, s_end: float, stride: float) -> Trajectory:
        count = int(round((s_end - s_start) / stride)) + 1
        return cls(f.grid, s_start, stride, np.broadcast_to(f.coeffs, (count,) + f.grid.half_shape).copy())

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def s_end(self) -> float:
        return self.s_start + (len(self) - 1) * self.stride

    @property
    def times(self) -> np.ndarray:
        return self.s_start + self.stride * np.arange(len(self))

    @property
    def frames(self) -> list[SpectralField]:
        return [SpectralField(self.grid, c) for c in self.coeffs]

    def frame(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[i])

    def index_of(self, s: float) -> int:
        x = (s - self.s_start) / self.stride
        i = int(round(x))
        if abs(x - i) > 1e-6 or not 0 <= i < len(self):
            raise ValueError(f"s = {s} is not a stored frame time")
        return i

    def window(self, s_lo: float, s_hi: float) -> Trajectory:
        i, j = self.index_of(s_lo), self.index_of(s_hi)
        return Trajectory(self.grid, self.s_start + i * self.stride, self.stride,
                          self.coeffs[i:j + 1], dict(self.metadata))

    def shifted(self, sigma: float) -> Trajectory:
        """``v_sigma(s) = v(s + sigma)``, re-based so it starts at ``s_start``."""
        i = self.index_of(self.s_start + sigma)
        return Trajectory(self.grid, self.s_start, self.stride, self.coeffs[i:], dict(self.metadata))

    def at(self, s: float) -> np.ndarray:
        """Linear interpolation in ``s`` between stored frames."""
        x = (s - self.s_start) / self.stride
        n = len(self)
        if x < -1e-9 or x > n - 1 + 1e-9:
            raise ValueError(f"s = {s} outside [{self.s_start}, {self.s_end}]")
        x = min(max(x, 0.0), n - 1.0)
        i = min(int(np.floor(x)), n - 2) if n > 1 else 0
        a = x - i
        if n == 1 or a == 0.0:
            return self.coeffs[i]
        return (1 - a) * self.coeffs[i] + a * self.coeffs[i + 1]

    def project(self, projector: ModalProjector, compact: bool = True) -> Trajectory:
        """Framewise J; by default stored on the projector's compact grid."""
        c = self.coeffs * projector.mask(self.grid)
        if not compact:
            return Trajectory(self.grid, self.s_start, self.stride, c, dict(self.metadata))
        small = projector.compact_grid(self.grid.domain_length)
        if small.n_modes >= self.grid.n_modes:
            return Trajectory(self.grid, self.s_start, self.stride, c, dict(self.metadata))
        return Trajectory(small, self.s_start, self.stride,
                          resample_coeffs(self.grid, small, c), dict(self.metadata))

    def resample(self, grid: Grid) -> Trajectory:
        return Trajectory(grid, self.s_start, self.stride,
                          resample_coeffs(self.grid, grid, self.coeffs), dict(self.metadata))

    def combine(self, a: float, other: Trajectory, b: float) -> Trajectory:
        """Framewise ``a * self + b * other``."""
        _check_compatible(self, other)
        return Trajectory(self.grid, self.s_start, self.stride, a * self.coeffs + b * other.coeffs)

    def norms(self) -> np.ndarray:
        return l2_norm(self.grid, self.coeffs)


def _check_compatible(v: Trajectory, w: Trajectory) -> None:
    _check_same_grid(v.grid, w.grid)
    if len(v) != len(w) or not np.isclose(v.stride, w.stride) or not np.isclose(v.s_start, w.s_start):
        raise ValueError(
            f"trajectory windows differ: [{v.s_start}, {v.s_end}]/{v.stride} vs "
            f"[{w.s_start}, {w.s_end}]/{w.stride}"
        )


def x0_distance(v: Trajectory, w: Trajectory, nu: float = 1.0) -> float:
    """``sup_s ||v(s) - w(s)|| / (nu kappa0)`` over stored frames."""
    _check_compatible(v, w)
    d = l2_norm(v.grid, v.coeffs - w.coeffs)
    return float(np.max(d)) / (nu * v.grid.kappa0)


def x_derivative_term(v: Trajectory, nu: float = 1.0) -> float:
    """``sup_s ||v'(s)|| / (nu^2 kappa0^3)`` by centred differences; diagnostic only."""
    if len(v) < 3:
        raise ValueError("need at least three frames")
    dv = np.gradient(v.coeffs, v.stride, axis=0)
    return float(np.max(l2_norm(v.grid, dv))) / (nu**2 * v.grid.kappa0**3)


def random_field(grid: Grid, rng: np.random.Generator, cutoff: int | None = None,
                 scale: float = 1.0) -> SpectralField:
    """Real mean-zero field with random coefficients supported in ``|k1|,|k2| <= cutoff``."""
    cutoff = grid.dealias_cutoff if cutoff is None else cutoff
    c = (rng.standard_normal(grid.half_shape) + 1j * rng.standard_normal(grid.half_shape)) * scale
    c *= grid.box_mask(cutoff)
    c[:, -1] = 0
    return SpectralField(grid, symmetrize(c))


def shell_modes(field_: SpectralField) -> Iterable[int]:
    """Distinct integer ``|k|^2`` values present in the field's support."""
    g = field_.grid
    ksq = (g.k1_index**2 + g.k2_index**2)
    return sorted(set(ksq[np.abs(field_.coeffs) > 0].tolist()))
