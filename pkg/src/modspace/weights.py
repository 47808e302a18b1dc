"""Matrix weight fields, their fractional powers, and cube statistics.

A weight is a Hermitian positive definite m x m matrix at every gridpoint.
Fractional powers go through a cached eigendecomposition. The Muckenhoupt
and doubling estimators scan finite dyadic cube families and report lower
bounds for the corresponding suprema; membership claims are made only
through refinement behaviour, never from a single family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .errors import (ConditioningError, ContractViolation, DataError,
                     DegeneracyError, ParameterError)
from .grid import GridSpec

EIG_FLOOR = 1e-14
HERMITICITY_TOL = 1e-12


class MatrixWeight:
    """HPD matrix field on a grid; samples shape (N^n, m, m), complex128.

    The eigendecomposition is computed once on first use and reused for
    every requested power (write-once cache, single writer).
    """

    def __init__(self, grid: GridSpec, samples: np.ndarray):
        samples = np.asarray(samples, dtype=np.complex128)
        want = (grid.npoints, grid.m, grid.m)
        if samples.shape == grid.spatial_shape + (grid.m, grid.m):
            samples = samples.reshape(want)
        if samples.shape != want:
            raise ContractViolation(
                f"weight samples shape {samples.shape}, expected {want}")
        if not np.all(np.isfinite(samples.view(np.float64))):
            raise DataError("weight contains non-finite entries")
        herm = np.max(np.abs(samples - np.conj(np.transpose(samples, (0, 2, 1)))))
        scale = 1.0 + float(np.max(np.abs(samples)))
        if herm > HERMITICITY_TOL * scale:
            raise DataError(f"hermiticity defect {herm:.3e} exceeds tolerance")
        self.grid = grid
        self.samples = samples
        self._eig = None
        self._powers = {}
        evals = self.eigenvalues()
        if float(evals.min()) <= 0.0:
            bad = int(np.argmin(evals.min(axis=1)))
            raise DataError(
                f"weight not positive definite at gridpoint {bad} "
                f"(lambda_min = {evals.min():.3e})")

    def eigenvalues(self) -> np.ndarray:
        self._ensure_eig()
        return self._eig[0]

    def _ensure_eig(self):
        if self._eig is None:
            evals, evecs = np.linalg.eigh(self.samples)
            self._eig = (evals, evecs)

    def power(self, t: float) -> np.ndarray:
        """Samples of W^t, shape (N^n, m, m)."""
        t = float(t)
        if t == 1.0:
            return self.samples
        cached = self._powers.get(t)
        if cached is not None:
            return cached
        self._ensure_eig()
        evals, evecs = self._eig
        if t < 0.0 and float(evals.min()) < EIG_FLOOR:
            bad = int(np.argmin(evals.min(axis=1)))
            raise ConditioningError(
                f"eigenvalue {evals.min():.3e} below floor {EIG_FLOOR} at "
                f"gridpoint {bad}; negative power refused")
        lam = evals ** t
        out = np.einsum("pik,pk,pjk->pij", evecs, lam, np.conj(evecs))
        out = 0.5 * (out + np.conj(np.transpose(out, (0, 2, 1))))
        self._powers[t] = out
        return out

    @property
    def is_real(self) -> bool:
        return bool(np.max(np.abs(self.samples.imag)) < 1e-13)

    @property
    def m(self) -> int:
        return self.grid.m

    def scalar_profile(self) -> np.ndarray:
        """The scalar weight for m = 1 fields, shape (N^n,)."""
        if self.grid.m != 1:
            raise ContractViolation("scalar_profile requires m = 1")
        return self.samples[:, 0, 0].real.copy()


def hpd_power(weight: MatrixWeight, t: float) -> np.ndarray:
    """Convenience wrapper: samples of W^t."""
    return weight.power(t)


# -- weight construction ----------------------------------------------------

WEIGHT_KINDS = ("identity", "scalar-power", "diagonal-power",
                "rotated-diagonal", "custom-table")


@dataclass(frozen=True)
class WeightSpec:
    """Recipe for a weight field.

    kind:
        identity          W = I
        scalar-power      W = w(x) I with w = |x|^alpha (or the smooth
                          profile (1+|x|^2)^{alpha/2} when bracket=True)
        diagonal-power    W = diag(w_1, ..., w_m), per-channel exponents
        rotated-diagonal  U(x) diag(...) U(x)^T with a linearly varying
                          rotation angle angle0 + omega . x
        custom-table      explicit samples
    Singular power profiles sample |x + dx/2|, putting every gridpoint a
    half cell away from the singularity at the origin.
    delta adds delta * I after assembly.
    """

    kind: str
    alpha: tuple = ()
    bracket: bool = False
    angle0: float = 0.0
    omega: tuple = ()
    delta: float = 0.0
    table: object = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ParameterError(f"unknown weight kind {self.kind!r}")
        if self.delta < 0:
            raise ParameterError("delta must be >= 0")
        a = self.alpha if isinstance(self.alpha, (tuple, list)) else (self.alpha,)
        object.__setattr__(self, "alpha", tuple(float(v) for v in a))
        o = self.omega if isinstance(self.omega, (tuple, list)) else (self.omega,)
        object.__setattr__(self, "omega", tuple(float(v) for v in o))


def _radial(x_off: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x_off ** 2, axis=1))


def _power_profile(grid: GridSpec, alpha: float, bracket: bool) -> np.ndarray:
    x = grid.x_coords()
    if bracket:
        return (1.0 + np.sum(x ** 2, axis=1)) ** (alpha / 2.0)
    r = _radial(x + 0.5 * grid.dx)
    return r ** alpha


def _givens(theta: np.ndarray, m: int, axes) -> np.ndarray:
    U = np.zeros((theta.size, m, m))
    for i in range(m):
        U[:, i, i] = 1.0
    i, j = axes
    U[:, i, i] = np.cos(theta)
    U[:, j, j] = np.cos(theta)
    U[:, i, j] = -np.sin(theta)
    U[:, j, i] = np.sin(theta)
    return U


def make_weight(spec: WeightSpec, grid: GridSpec) -> MatrixWeight:
    m = grid.m
    P = grid.npoints
    if spec.kind == "identity":
        samples = np.broadcast_to(np.eye(m), (P, m, m)).copy()
    elif spec.kind == "scalar-power":
        if len(spec.alpha) != 1:
            raise ParameterError("scalar-power takes exactly one exponent")
        w = _power_profile(grid, spec.alpha[0], spec.bracket)
        samples = w[:, None, None] * np.eye(m)[None]
    elif spec.kind == "diagonal-power":
        if len(spec.alpha) != m:
            raise ParameterError(
                f"diagonal-power needs {m} exponents, got {len(spec.alpha)}")
        cols = [_power_profile(grid, a, spec.bracket) for a in spec.alpha]
        samples = np.zeros((P, m, m))
        for i, c in enumerate(cols):
            samples[:, i, i] = c
    elif spec.kind == "rotated-diagonal":
        if m < 2:
            raise ParameterError("rotated-diagonal needs m >= 2")
        if len(spec.alpha) != m:
            raise ParameterError(
                f"rotated-diagonal needs {m} exponents, got {len(spec.alpha)}")
        omega = np.zeros(grid.n)
        omega[:len(spec.omega)] = spec.omega[:grid.n]
        theta = spec.angle0 + grid.x_coords() @ omega
        U = _givens(theta, m, (0, 1))
        if m == 3:
            U = np.einsum("pij,pjk->pik", U, _givens(0.7 * theta, m, (1, 2)))
        cols = [_power_profile(grid, a, bracket=True) for a in spec.alpha]
        D = np.zeros((P, m, m))
        for i, c in enumerate(cols):
            D[:, i, i] = c
        samples = np.einsum("pij,pjk,plk->pil", U, D, U)
    elif spec.kind == "custom-table":
        if spec.table is None:
            raise ParameterError("custom-table requires samples")
        samples = np.asarray(spec.table, dtype=np.complex128)
    if spec.delta > 0:
        samples = samples + spec.delta * np.eye(m)[None]
    return MatrixWeight(grid, samples)


# -- cube families ----------------------------------------------------------

@dataclass(frozen=True)
class CubeFamily:
    """Finite family of axis-aligned dyadic cubes with 2Q inside the box.

    Cubes are stored as integer index ranges (start per axis, points per
    axis), so membership and counting are exact. The family contains the
    standard dyadic cubes of each admissible level plus the origin-centred
    cube of each level; every cube covers at least min_pts gridpoints per
    axis and its concentric double stays inside [-L, L)^n.
    """

    grid: GridSpec
    cubes: tuple  # ((start_0, ..., start_{n-1}), npts_per_axis)

    def __post_init__(self):
        N = self.grid.N
        for start, npts in self.cubes:
            half = npts // 2
            for s in start:
                if s - half < 0 or s + npts + half > N:
                    raise ParameterError(
                        f"cube {start}+{npts}: concentric double leaves the box")

    def side(self, cube) -> float:
        return cube[1] * self.grid.dx

    def center(self, cube) -> np.ndarray:
        start, npts = cube
        return -self.grid.L + (np.asarray(start) + npts / 2.0) * self.grid.dx

    def flat_indices(self, cube, doubled: bool = False) -> np.ndarray:
        start, npts = cube
        if doubled:
            start = tuple(s - npts // 2 for s in start)
            npts = 2 * npts
        axes = [np.arange(s, s + npts) for s in start]
        if self.grid.n == 1:
            return axes[0]
        I, J = np.meshgrid(axes[0], axes[1], indexing="ij")
        return (I * self.grid.N + J).ravel()


def dyadic_family(grid: GridSpec, min_pts: int = 4,
                  include_centered: bool = True) -> CubeFamily:
    N = grid.N
    cubes = []
    level = 1
    while N // 2 ** level >= min_pts:
        npts = N // 2 ** level
        half = npts // 2
        for idx in _level_starts(grid.n, 2 ** level, npts):
            if all(s - half >= 0 and s + npts + half <= N for s in idx):
                cubes.append((idx, npts))
        if include_centered:
            c = (N // 2 - half,) * grid.n
            if c[0] - half >= 0 and c[0] + npts + half <= N:
                cand = (c, npts)
                if cand not in cubes:
                    cubes.append(cand)
        level += 1
    if not cubes:
        raise ParameterError("grid too coarse for any admissible cube")
    return CubeFamily(grid, tuple(cubes))


def _level_starts(n, count, npts):
    starts = [i * npts for i in range(count)]
    if n == 1:
        return [(s,) for s in starts]
    return [(a, b) for a in starts for b in starts]


# -- Muckenhoupt estimators -------------------------------------------------

def scalar_ap_characteristic(w: np.ndarray, p: float,
                             family: CubeFamily) -> float:
    """Lower bound for the scalar A_p characteristic over the family.

    p > 1: max_Q avg_Q(w) * avg_Q(w^{1-p'})^{p-1}; p = 1 uses the
    maximal-function form max_Q avg_Q(w) / min_Q(w).
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size != family.grid.npoints:
        raise ContractViolation("weight array does not match the grid")
    if np.any(w <= 0):
        raise DataError("scalar weight must be positive")
    if not p >= 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    best = 0.0
    for cube in family.cubes:
        vals = w[family.flat_indices(cube)]
        if p == 1:
            cand = float(np.mean(vals) / np.min(vals))
        else:
            pprime = p / (p - 1.0)
            cand = float(np.mean(vals) * np.mean(vals ** (1.0 - pprime))
                         ** (p - 1.0))
        best = max(best, cand)
    return best


def matrix_ap_characteristic(weight: MatrixWeight, p: float,
                             family: CubeFamily) -> float:
    """Lower bound for the matrix A_p characteristic over the family:

        max_Q avg_x ( avg_y ||W^{1/p}(x) W^{-1/p}(y)||^{p'} )^{p/p'}.
    """
    if not 1.0 < p < math.inf:
        raise ParameterError(f"matrix A_p needs p in (1, inf), got {p}")
    if weight.grid != family.grid:
        raise ContractViolation("weight and family live on different grids")
    Wp = weight.power(1.0 / p)
    Wm = weight.power(-1.0 / p)
    best = 0.0
    for cube in family.cubes:
        idx = family.flat_indices(cube)
        best = max(best, kernels.ap_cube_stat(Wp[idx], Wm[idx], p))
    return best


# -- doubling ---------------------------------------------------------------

def default_directions(weight: MatrixWeight, ndirs: int = 32,
                       seed: int = 0) -> np.ndarray:
    """Probe directions: seeded complex unit vectors, the coordinate
    axes, and eigenvector frames sampled along the grid."""
    m = weight.grid.m
    rng = np.random.default_rng(seed)
    dirs = [np.eye(m, dtype=np.complex128)[i] for i in range(m)]
    z = rng.standard_normal((ndirs, m)) + 1j * rng.standard_normal((ndirs, m))
    z /= np.linalg.norm(z, axis=1)[:, None]
    dirs.extend(z)
    weight._ensure_eig()
    evecs = weight._eig[1]
    P = weight.grid.npoints
    for pidx in sorted({0, P // 3, (2 * P) // 3, P - 1}):
        for col in range(m):
            dirs.append(evecs[pidx][:, col])
    return np.array(dirs)


def doubling_exponent(weight: MatrixWeight, p: float, family: CubeFamily,
                      directions: np.ndarray = None, seed: int = 0):
    """Doubling constant and exponent of order p over the family:

        C = max_{Q, z} int_{2Q} |W^{1/p} z|^p  /  int_Q |W^{1/p} z|^p,
        beta = log2(C).

    Returns (C, beta, details). Integrals are Riemann sums; the uniform
    measure factor cancels, so the identity weight gives the counting
    ratio 2^n exactly.
    """
    if not p >= 1:
        raise ParameterError(f"doubling order needs p >= 1, got {p}")
    if weight.grid != family.grid:
        raise ContractViolation("weight and family live on different grids")
    if directions is None:
        directions = default_directions(weight, seed=seed)
    Wp = weight.power(1.0 / p)
    best = 0.0
    best_info = None
    for z in directions:
        v = Wp @ z
        s = np.sum(np.abs(v) ** 2, axis=1) ** (p / 2.0)
        for cube in family.cubes:
            # math.fsum is correctly rounded, which keeps the counting
            # ratio for a constant integrand exact (identity weight).
            den = math.fsum(s[family.flat_indices(cube)])
            if den <= 0.0:
                raise DegeneracyError(f"zero mass on cube {cube[0]}")
            num = math.fsum(s[family.flat_indices(cube, doubled=True)])
            ratio = num / den
            if ratio > best:
                best = ratio
                best_info = {"cube_start": list(cube[0]), "cube_npts": cube[1],
                             "direction": [complex(c) for c in z]}
    return best, math.log2(best), best_info
