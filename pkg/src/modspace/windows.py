"""Frequency-uniform window families, band operators, and the STFT.

A family is built from integer translates of a fixed radial profile rho:
rho = 1 inside radius sqrt(n)/2, rho = 0 outside radius sqrt(n), with a
smooth transition in between. The stored windows are

    phi_k = rho(. - k) / sum_j rho(. - j),

normalized over every integer j whose translate touches the resolved
band, so the retained set {phi_k : |k|_inf <= K} sums to 1 exactly on
|xi|_inf <= K - sqrt(n). The two shipped profiles share the support
geometry and differ in the transition, which is what the window
independence experiment exercises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ParameterError
from .grid import GridSpec, VectorField, fourier, inverse_fourier

PROFILES = ("smooth-bump", "raised-cosine")


def bracket(vec, mode: str = "l1") -> np.ndarray:
    """Japanese bracket (1 + |v|^2)^(1/2).

    mode 'l1' uses the l1 modulus (lattice indices), 'l2' the Euclidean
    modulus (continuous frequency arguments). Accepts shape (..., n).
    """
    v = np.asarray(vec, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
        squeeze = True
    else:
        squeeze = False
    if mode == "l1":
        mod = np.sum(np.abs(v), axis=-1)
    elif mode == "l2":
        mod = np.sqrt(np.sum(v ** 2, axis=-1))
    else:
        raise ParameterError(f"bracket mode must be l1|l2, got {mode}")
    out = np.sqrt(1.0 + mod ** 2)
    return float(out[0]) if squeeze else out


def lambda_set(n: int) -> list:
    """Integer offsets l with |l|_2 <= 2*sqrt(2n): every pair of windows
    whose supports can meet is separated by an offset in this set."""
    if n not in (1, 2):
        raise ParameterError(f"n must be 1 or 2, got {n}")
    limit = 8 * n  # (2 sqrt(2n))^2, compared in integers
    reach = int(math.isqrt(limit))
    out = []
    if n == 1:
        for a in range(-reach, reach + 1):
            if a * a <= limit:
                out.append((a,))
    else:
        for a in range(-reach, reach + 1):
            for b in range(-reach, reach + 1):
                if a * a + b * b <= limit:
                    out.append((a, b))
    return out


def _profile(r: np.ndarray, n: int, profile: str) -> np.ndarray:
    rin = 0.5 * math.sqrt(n)
    rout = math.sqrt(n)
    out = np.zeros_like(r)
    out[r <= rin] = 1.0
    mid = (r > rin) & (r < rout)
    t = (r[mid] - rin) / (rout - rin)
    if profile == "smooth-bump":
        out[mid] = np.exp(1.0 - 1.0 / (1.0 - t ** 2))
    elif profile == "raised-cosine":
        out[mid] = 0.5 * (1.0 + np.cos(math.pi * t))
    else:
        raise ParameterError(f"unknown profile {profile!r}")
    return out


@dataclass(frozen=True)
class WindowFamily:
    """Sampled windows phi_k on a grid's frequency lattice.

    values maps the integer index tuple k to an array of spatial shape.
    """

    grid: GridSpec
    K: int
    profile: str
    values: dict

    @property
    def indices(self) -> list:
        return sorted(self.values.keys())

    def __contains__(self, k) -> bool:
        return tuple(k) in self.values


def build_window_family(grid: GridSpec, K: int,
                        profile: str = "smooth-bump") -> WindowFamily:
    if profile not in PROFILES:
        raise ParameterError(f"profile must be one of {PROFILES}")
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    if not grid.resolves_band(K):
        raise ParameterError(
            f"nyquist {grid.nyquist:.3f} < K + sqrt(n) + 2 = "
            f"{K + math.sqrt(grid.n) + 2:.3f}; enlarge N or reduce K")
    xi = grid.xi_coords()  # (P, n)
    reach = int(math.ceil(grid.nyquist + math.sqrt(grid.n))) + 1
    denom = np.zeros(grid.npoints)
    per_j = {}
    means = range(-reach, reach + 1)
    if grid.n == 1:
        all_j = [(a,) for a in means]
    else:
        all_j = [(a, b) for a in means for b in means]
    for j in all_j:
        r = np.sqrt(np.sum((xi - np.asarray(j, dtype=float)) ** 2, axis=1))
        if np.all(r >= math.sqrt(grid.n)):
            continue
        vals = _profile(r, grid.n, profile)
        denom += vals
        if max(abs(c) for c in j) <= K:
            per_j[j] = vals
    values = {j: (v / denom).reshape(grid.spatial_shape)
              for j, v in per_j.items()}
    return WindowFamily(grid, K, profile, values)


def validate_window_family(fam: WindowFamily) -> dict:
    """Check the four family conditions on the sampled lattice.

    (a) phi_k >= c > 0 on its own unit cell; c is measured and reported.
    (b) support inside the ball |xi - k|_2 <= sqrt(n), exactly.
    (c) retained windows sum to 1 on |xi|_inf <= K - sqrt(n).
    (d) centered finite differences up to order 2 bounded uniformly in k.
    """
    g = fam.grid
    xi = g.xi_coords()
    c_vals, support_leaks, fd_per_k = [], [], []
    for k, phi in fam.values.items():
        flat = phi.reshape(-1)
        off = xi - np.asarray(k, dtype=float)
        in_cell = np.max(np.abs(off), axis=1) <= 0.5
        if np.any(in_cell):
            c_vals.append(float(flat[in_cell].min()))
        outside = np.sqrt(np.sum(off ** 2, axis=1)) > math.sqrt(g.n)
        if np.any(outside):
            support_leaks.append(float(np.abs(flat[outside]).max()))
        fd_per_k.append(_fd_bounds(phi, g.dxi))
    c = min(c_vals)
    leak = max(support_leaks) if support_leaks else 0.0
    total = np.zeros(g.npoints)
    for phi in fam.values.values():
        total += phi.reshape(-1)
    safe = np.max(np.abs(xi), axis=1) <= fam.K - math.sqrt(g.n)
    defect = float(np.abs(total[safe] - 1.0).max())
    orders = sorted(fd_per_k[0].keys())
    c_beta = {o: max(d[o] for d in fd_per_k) for o in orders}
    report = {
        "c": c,
        "support_leak": leak,
        "partition_defect": defect,
        "derivative_bounds": c_beta,
        "clauses": {
            "lower_bound": c > 0.0,
            "support": leak == 0.0,
            "partition": defect <= 1e-12,
            "derivatives": all(math.isfinite(v) for v in c_beta.values()),
        },
    }
    report["pass"] = all(report["clauses"].values())
    return report


def _fd_bounds(phi: np.ndarray, h: float) -> dict:
    out = {}
    firsts, seconds = [], []
    for ax in range(phi.ndim):
        d1 = (np.roll(phi, -1, axis=ax) - np.roll(phi, 1, axis=ax)) / (2 * h)
        d2 = (np.roll(phi, -1, axis=ax) - 2 * phi + np.roll(phi, 1, axis=ax)) / h ** 2
        firsts.append(float(np.abs(d1).max()))
        seconds.append(float(np.abs(d2).max()))
    out[1] = max(firsts)
    out[2] = max(seconds)
    if phi.ndim == 2:
        up = np.roll(np.roll(phi, -1, axis=0), -1, axis=1)
        dn = np.roll(np.roll(phi, 1, axis=0), 1, axis=1)
        ud = np.roll(np.roll(phi, -1, axis=0), 1, axis=1)
        du = np.roll(np.roll(phi, 1, axis=0), -1, axis=1)
        mixed = (up + dn - ud - du) / (4 * h ** 2)
        out[2] = max(out[2], float(np.abs(mixed).max()))
    return out


def box_operator(f: VectorField, k, fam: WindowFamily,
                 adjoint: bool = False) -> VectorField:
    """Band multiplier for window k: F^{-1} phi_k F on the physical side.

    adjoint=True applies the bilinear transpose (the same multiplier
    conjugated by the opposite-phase transforms), which pairs with the
    forward operator under the conjugation-free pairing.
    """
    k = tuple(int(c) for c in np.atleast_1d(k))
    if k not in fam.values:
        raise ParameterError(f"window index {k} not in family (K={fam.K})")
    if f.grid != fam.grid:
        raise ContractViolation("field and family live on different grids")
    phi = fam.values[k][..., None]
    if not adjoint:
        fhat = fourier(f)
        return inverse_fourier(VectorField(f.grid, fhat.samples * phi,
                                           side="frequency"))
    # transpose under the bilinear pairing: conjugate, apply, conjugate
    conj_in = VectorField(f.grid, np.conj(f.samples))
    applied = box_operator(conj_in, k, fam, adjoint=False)
    return VectorField(f.grid, np.conj(applied.samples))


def box_all(f: VectorField, fam: WindowFamily) -> dict:
    """All band pieces {k: box_k f} from a single forward transform."""
    fhat = fourier(f)
    out = {}
    for k, phi in fam.values.items():
        piece = VectorField(f.grid, fhat.samples * phi[..., None],
                            side="frequency")
        out[k] = inverse_fourier(piece)
    return out


def canonical_pieces(f: VectorField, fam: WindowFamily) -> dict:
    """Canonical almost-orthogonal pieces f_k = sum_{l in Lambda} box_{k+l} f.

    Offsets leaving the retained index range contribute nothing for
    band-safe fields and are skipped.
    """
    pieces = box_all(f, fam)
    lam = lambda_set(f.grid.n)
    out = {}
    for k in pieces:
        acc = np.zeros_like(pieces[k].samples)
        for l in lam:
            j = tuple(k[d] + l[d] for d in range(f.grid.n))
            if j in pieces:
                acc = acc + pieces[j].samples
        out[k] = VectorField(f.grid, acc)
    return out


BAND_CONVENTIONS = ("paper-scale", "unit")
_BAND_MASS_FRACTION = 0.9999


def band_limit_predicate(f: VectorField, k, convention: str = "paper-scale",
                         bracket_mode: str = "l1") -> bool:
    """Membership test for the k-th band region: every nonzero component
    must hold at least 99.99% of its spectral mass inside the Euclidean
    ball B(k <k>, sqrt(n) <k>) (frequency-scaled convention) or
    B(k, sqrt(n)) (unit convention).

    Box pieces satisfy the unit convention by construction; the scaled
    convention is strictly larger only away from the origin, so the two
    genuinely disagree on translated spectra.
    """
    if convention not in BAND_CONVENTIONS:
        raise ParameterError(
            f"convention must be one of {BAND_CONVENTIONS}")
    g = f.grid
    k = np.asarray(np.atleast_1d(k), dtype=np.float64)
    if k.shape != (g.n,):
        raise ParameterError(f"k must have {g.n} components")
    scale = bracket(k, bracket_mode) if convention == "paper-scale" else 1.0
    center = k * scale
    radius = math.sqrt(g.n) * scale
    fhat = fourier(f) if f.side == "physical" else f
    dist = np.sqrt(np.sum((g.xi_coords() - center) ** 2, axis=1))
    inside = dist <= radius + 1e-12
    comp = np.abs(fhat.flat) ** 2  # (P, m)
    total = comp.sum(axis=0)
    held = comp[inside].sum(axis=0)
    live = total > 0
    return bool(np.all(held[live] >= _BAND_MASS_FRACTION * total[live]))


# -- short-time transform ---------------------------------------------------

def gaussian_window(grid: GridSpec) -> np.ndarray:
    """Unit-L2 Gaussian window sampled on the grid, spatial shape."""
    x = grid.x_coords()
    g = np.exp(-0.5 * np.sum(x ** 2, axis=1))
    g /= math.sqrt(np.sum(g ** 2) * grid.dx ** grid.n)
    return g.reshape(grid.spatial_shape)


def xi_lattice(grid: GridSpec, K: float) -> np.ndarray:
    """Dual-lattice points with |xi|_inf <= K, shape (nxi, n)."""
    if K > grid.nyquist:
        raise ParameterError(f"K={K} beyond nyquist {grid.nyquist:.3f}")
    ax = grid.axis_xi()
    keep = np.abs(ax) <= K + 1e-12
    pts = ax[keep]
    if grid.n == 1:
        return pts[:, None]
    A, B = np.meshgrid(pts, pts, indexing="ij")
    return np.stack([A.ravel(), B.ravel()], axis=1)


def stft(f: VectorField, window: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Windowed transform V f(x, xi) = dx^n sum_y e^{-i y.xi}
    conj(g(y - x)) f(y) on the periodic box, for each row of xi.

    window is a real or complex array of spatial shape; xi has shape
    (nxi, n) with every row inside the resolved band. Returns an array
    of shape (nxi,) + spatial_shape + (m,).
    """
    g = f.grid
    window = np.asarray(window)
    if window.shape != g.spatial_shape:
        raise ContractViolation("window shape does not match the grid")
    xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
    if xi.shape[1] != g.n:
        raise ParameterError(f"xi must have {g.n} columns")
    if np.any(np.abs(xi) > g.nyquist + 1e-12):
        raise ParameterError("xi beyond the resolved band")
    axes = tuple(range(g.n))
    gc = np.fft.ifftshift(window, axes=axes)
    Gc = np.fft.fftn(gc, axes=axes)
    x = g.x_coords()
    out = np.empty((xi.shape[0],) + g.spatial_shape + (g.m,),
                   dtype=np.complex128)
    scale = g.dx ** g.n
    for r, xi0 in enumerate(xi):
        mod = np.exp(-1j * (x @ xi0)).reshape(g.spatial_shape)
        h = f.samples * mod[..., None]
        H = np.fft.fftn(h, axes=axes)
        V = np.fft.ifftn(H * np.conj(Gc)[..., None], axes=axes)
        out[r] = scale * V
    return out
