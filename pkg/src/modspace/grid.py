"""Periodic sampling grids and the discrete Fourier substrate.

Fields live on the uniform grid x_j = -L + j*dx, dx = 2L/N, over the
periodic box [-L, L)^n. The forward transform uses the symmetric
normalization

    F f(xi) = (2*pi)^(-n/2) * integral exp(-i x.xi) f(x) dx,

discretized by its Riemann sum on the dual lattice xi_l = l*dxi,
dxi = pi/L, l in [-N/2, N/2). The inverse is the exact discrete inverse,
so roundtrips and the discrete Parseval identity hold to rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DataError, ParameterError

TWO_PI = 2.0 * math.pi


def _is_pow2(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [-L, L)^n with m-channel samples.

    n: spatial dimension (1 or 2)
    m: number of vector channels (1..3)
    N: samples per axis, power of two
    L: half box length
    """

    n: int
    m: int
    N: int
    L: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ParameterError(f"n must be 1 or 2, got {self.n}")
        if not 1 <= self.m <= 3:
            raise ParameterError(f"m must be in 1..3, got {self.m}")
        if not _is_pow2(self.N) or self.N < 16:
            raise ParameterError(f"N must be a power of two >= 16, got {self.N}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ParameterError(f"L must be positive and finite, got {self.L}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dxi(self) -> float:
        return math.pi / self.L

    @property
    def nyquist(self) -> float:
        """Largest resolved frequency magnitude per axis, pi*N/(2L)."""
        return math.pi * self.N / (2.0 * self.L)

    @property
    def npoints(self) -> int:
        return self.N ** self.n

    @property
    def spatial_shape(self) -> tuple:
        return (self.N,) * self.n

    def axis_x(self) -> np.ndarray:
        return -self.L + np.arange(self.N) * self.dx

    def axis_xi(self) -> np.ndarray:
        return np.arange(-self.N // 2, self.N // 2) * self.dxi

    def x_coords(self) -> np.ndarray:
        """Flattened gridpoint coordinates, shape (N^n, n), C order."""
        ax = self.axis_x()
        if self.n == 1:
            return ax[:, None]
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def xi_coords(self) -> np.ndarray:
        """Flattened dual-lattice coordinates, shape (N^n, n), C order."""
        ax = self.axis_xi()
        if self.n == 1:
            return ax[:, None]
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def resolves_band(self, K: float) -> bool:
        """Safety margin for a frequency decomposition truncated at K."""
        return self.nyquist >= K + math.sqrt(self.n) + 2.0


@dataclass(frozen=True)
class VectorField:
    """Sampled C^m-valued field on a grid, on the physical or frequency side.

    samples has shape spatial_shape + (m,): (N, m) for n=1, (N, N, m)
    for n=2. Frequency-side samples are ordered by ascending lattice
    coordinate along each axis (same layout as GridSpec.axis_xi).
    """

    grid: GridSpec
    samples: np.ndarray
    side: str = "physical"

    def __post_init__(self):
        if self.side not in ("physical", "frequency"):
            raise ParameterError(f"side must be physical|frequency, got {self.side}")
        want = self.grid.spatial_shape + (self.grid.m,)
        arr = np.asarray(self.samples)
        if arr.shape != want:
            raise ContractViolation(
                f"samples shape {arr.shape} does not match grid {want}")
        if arr.dtype != np.complex128:
            arr = arr.astype(np.complex128)
            object.__setattr__(self, "samples", arr)
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise DataError("field contains non-finite samples")

    @property
    def flat(self) -> np.ndarray:
        """View of shape (N^n, m)."""
        return self.samples.reshape(self.grid.npoints, self.grid.m)

    def same_grid(self, other: "VectorField") -> None:
        if self.grid != other.grid:
            raise ContractViolation("fields live on different grids")


def _axis_phase(N: int) -> np.ndarray:
    # (-1)^l for l in [-N/2, N/2): absorbs the -L origin offset per axis
    l = np.arange(-N // 2, N // 2)
    return np.where(l % 2 == 0, 1.0, -1.0)


def fourier(field: VectorField) -> VectorField:
    """Forward transform of a physical-side field; exact inverse of
    inverse_fourier. Output is frequency-side with the same grid."""
    if field.side != "physical":
        raise ContractViolation("fourier expects a physical-side field")
    g = field.grid
    axes = tuple(range(g.n))
    out = np.fft.fftn(field.samples, axes=axes)
    out = np.fft.fftshift(out, axes=axes)
    ph = _axis_phase(g.N)
    for ax in axes:
        shape = [1] * (g.n + 1)
        shape[ax] = g.N
        out = out * ph.reshape(shape)
    out *= (g.dx / math.sqrt(TWO_PI)) ** g.n
    return VectorField(g, out, side="frequency")


def inverse_fourier(field: VectorField) -> VectorField:
    """Inverse transform of a frequency-side field."""
    if field.side != "frequency":
        raise ContractViolation("inverse_fourier expects a frequency-side field")
    g = field.grid
    axes = tuple(range(g.n))
    work = field.samples
    ph = _axis_phase(g.N)
    for ax in axes:
        shape = [1] * (g.n + 1)
        shape[ax] = g.N
        work = work * ph.reshape(shape)
    work = np.fft.ifftshift(work, axes=axes)
    out = np.fft.ifftn(work, axes=axes)
    out *= (g.dxi * g.N / math.sqrt(TWO_PI)) ** g.n
    return VectorField(g, out, side="physical")


def conjugate_transform(field: VectorField) -> VectorField:
    """Apply the inverse-kernel sum to a physical-side field.

    Returns the frequency-side array whose value at xi is
    (2*pi)^(-n/2) dx^n sum_x exp(+i x.xi) f(x): the transform with the
    opposite phase sign, as needed by the bilinear transpose of a band
    multiplier. Equals conj(fourier(conj(f))).
    """
    g = field.grid
    conj = VectorField(g, np.conj(field.samples), side="physical")
    out = fourier(conj)
    return VectorField(g, np.conj(out.samples), side="frequency")


def riemann_sum(values: np.ndarray, grid: GridSpec) -> float:
    """dx^n * sum(values) over the gridpoints (real input)."""
    return float(np.sum(values) * grid.dx ** grid.n)


def weighted_lp_norm(field: VectorField, p: float, weight=None) -> float:
    """L^p norm with an optional matrix weight:
    ( dx^n sum_x |W^{1/p}(x) f(x)|^p )^(1/p).

    weight is a MatrixWeight or None (identity). p in [1, inf).
    """
    if not (p >= 1 and math.isfinite(p)):
        raise ParameterError(f"p must be in [1, inf), got {p}")
    if field.side != "physical":
        raise ContractViolation("weighted_lp_norm expects a physical-side field")
    g = field.grid
    flat = field.flat
    if weight is None:
        mag = np.sqrt(np.sum(np.abs(flat) ** 2, axis=1))
    else:
        if weight.grid != g:
            raise ContractViolation("weight grid does not match field grid")
        wp = weight.power(1.0 / p)
        vec = np.einsum("pij,pj->pi", wp, flat)
        mag = np.sqrt(np.sum(np.abs(vec) ** 2, axis=1))
    return float((np.sum(mag ** p) * g.dx ** g.n) ** (1.0 / p))


def bilinear_pairing(f: VectorField, g_field: VectorField) -> complex:
    """dx^n sum_x sum_i g_i(x) f_i(x); bilinear, no conjugation."""
    f.same_grid(g_field)
    if f.side != g_field.side:
        raise ContractViolation("pairing requires both fields on the same side")
    step = f.grid.dx if f.side == "physical" else f.grid.dxi
    return complex(np.sum(f.flat * g_field.flat) * step ** f.grid.n)


def parseval_defect(field: VectorField) -> float:
    """Relative defect of the discrete Plancherel identity for one field."""
    g = field.grid
    fhat = fourier(field)
    a = np.sum(np.abs(field.flat) ** 2) * g.dx ** g.n
    b = np.sum(np.abs(fhat.flat) ** 2) * g.dxi ** g.n
    if a == 0:
        return 0.0
    return abs(a - b) / a


# -- serialization ----------------------------------------------------------
#
# File layout: one UTF-8 JSON header line terminated by '\n', then the raw
# sample buffer as little-endian complex128 (float64 re/im pairs), C order,
# N^n * m entries.

_FIELD_MAGIC = "modspace-field-v1"


def write_field(field: VectorField, path) -> None:
    header = {
        "format": _FIELD_MAGIC,
        "n": field.grid.n,
        "m": field.grid.m,
        "N": field.grid.N,
        "L": field.grid.L,
        "side": field.side,
    }
    buf = np.ascontiguousarray(field.flat, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(buf)


def read_field(path) -> VectorField:
    with open(path, "rb") as fh:
        try:
            header = json.loads(fh.readline().decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise DataError(f"not a field file: {path}")
        if not isinstance(header, dict) or header.get("format") != _FIELD_MAGIC:
            raise DataError(f"not a field file: {path}")
        grid = GridSpec(header["n"], header["m"], header["N"], header["L"])
        raw = fh.read()
    want = grid.npoints * grid.m
    arr = np.frombuffer(raw, dtype="<c16")
    if arr.size != want:
        raise DataError(f"field buffer has {arr.size} entries, expected {want}")
    samples = arr.astype(np.complex128).reshape(grid.spatial_shape + (grid.m,))
    return VectorField(grid, samples, side=header["side"])
