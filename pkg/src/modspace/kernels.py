"""Hot numerical kernels with two interchangeable backends.

The compiled backend uses numba @njit; the fallback is pure numpy and
computes the same quantities (to rounding). Selection:

    MODSPACE_BACKEND=numba   force the compiled path (error if missing)
    MODSPACE_BACKEND=numpy   force the fallback
    MODSPACE_BACKEND=auto    compiled if numba imports, else numpy (default)

set_backend()/get_backend() switch at runtime; benchmarks/kernel_bench.py
times both paths on the same workloads. All kernels are serial and
deterministic regardless of the thread knob.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .errors import ParameterError

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via MODSPACE_BACKEND=numpy
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


_env = os.environ.get("MODSPACE_BACKEND", "auto").lower()
if _env not in ("auto", "numba", "numpy"):
    raise ParameterError(f"MODSPACE_BACKEND must be auto|numba|numpy, got {_env}")
if _env == "numba" and not HAS_NUMBA:
    raise ParameterError("MODSPACE_BACKEND=numba but numba is not importable")
_BACKEND = "numba" if (_env in ("auto", "numba") and HAS_NUMBA) else "numpy"


def get_backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ParameterError(f"backend must be numba|numpy, got {name}")
    if name == "numba" and not HAS_NUMBA:
        raise ParameterError("numba backend requested but numba is not importable")
    _BACKEND = name


# -- compiled primitives ----------------------------------------------------

@njit(cache=True)
def _eigmax_herm(H):
    """Largest eigenvalue of a Hermitian m x m matrix, m <= 3."""
    m = H.shape[0]
    if m == 1:
        return H[0, 0].real
    if m == 2:
        half_tr = 0.5 * (H[0, 0].real + H[1, 1].real)
        det = H[0, 0].real * H[1, 1].real - (H[0, 1] * H[1, 0]).real
        disc = half_tr * half_tr - det
        if disc < 0.0:
            disc = 0.0
        return half_tr + math.sqrt(disc)
    # m == 3: trigonometric closed form
    p1 = (abs(H[0, 1]) ** 2 + abs(H[0, 2]) ** 2 + abs(H[1, 2]) ** 2)
    d0 = H[0, 0].real
    d1 = H[1, 1].real
    d2 = H[2, 2].real
    if p1 == 0.0:
        return max(d0, max(d1, d2))
    q = (d0 + d1 + d2) / 3.0
    p2 = (d0 - q) ** 2 + (d1 - q) ** 2 + (d2 - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    # det(H - q I) via cofactors; result is real for Hermitian input
    a = H[0, 0] - q
    b = H[1, 1] - q
    c = H[2, 2] - q
    det = (a * (b * c - H[1, 2] * H[2, 1])
           - H[0, 1] * (H[1, 0] * c - H[1, 2] * H[2, 0])
           + H[0, 2] * (H[1, 0] * H[2, 1] - b * H[2, 0])).real
    r = det / (2.0 * p ** 3)
    if r > 1.0:
        r = 1.0
    elif r < -1.0:
        r = -1.0
    phi = math.acos(r) / 3.0
    return q + 2.0 * p * math.cos(phi)


@njit(cache=True)
def _specnorm(G):
    """Spectral norm via the largest eigenvalue of G^H G."""
    m = G.shape[0]
    H = np.empty((m, m), dtype=np.complex128)
    for i in range(m):
        for j in range(m):
            acc = 0.0 + 0.0j
            for k in range(m):
                acc += np.conj(G[k, i]) * G[k, j]
            H[i, j] = acc
    lam = _eigmax_herm(H)
    if lam < 0.0:
        lam = 0.0
    return math.sqrt(lam)


@njit(cache=True)
def _ap_cube_stat_numba(P, M, pprime, p_over_pprime):
    npts = P.shape[0]
    m = P.shape[1]
    G = np.empty((m, m), dtype=np.complex128)
    outer = 0.0
    for ix in range(npts):
        inner = 0.0
        for iy in range(npts):
            for i in range(m):
                for j in range(m):
                    acc = 0.0 + 0.0j
                    for k in range(m):
                        acc += P[ix, i, k] * M[iy, k, j]
                    G[i, j] = acc
            inner += _specnorm(G) ** pprime
        outer += (inner / npts) ** p_over_pprime
    return outer / npts


@njit(cache=True)
def _cell_apply_numba(A, idx, f):
    npts = f.shape[0]
    m = f.shape[1]
    out = np.empty((npts, m), dtype=np.complex128)
    for x in range(npts):
        a = A[idx[x]]
        for i in range(m):
            acc = 0.0 + 0.0j
            for j in range(m):
                acc += a[i, j] * f[x, j]
            out[x, i] = acc
    return out


@njit(cache=True)
def _strong_doubling_numba(A, Ainv, sides, centers, pairs, beta, p, n):
    nres = pairs.shape[0]
    m = A.shape[1]
    G = np.empty((m, m), dtype=np.complex128)
    out = np.empty(nres)
    for s in range(nres):
        q = pairs[s, 0]
        r = pairs[s, 1]
        for i in range(m):
            for j in range(m):
                acc = 0.0 + 0.0j
                for k in range(m):
                    acc += A[q, i, k] * Ainv[r, k, j]
                G[i, j] = acc
        num = _specnorm(G) ** p
        lq = sides[q]
        lr = sides[r]
        ratio = lr / lq
        envelope = max(ratio ** n, (1.0 / ratio) ** (beta - n))
        dist = 0.0
        for d in range(centers.shape[1]):
            dist += (centers[q, d] - centers[r, d]) ** 2
        dist = math.sqrt(dist)
        envelope *= (1.0 + dist / max(lq, lr)) ** beta
        out[s] = num / envelope
    return out


# -- numpy twins ------------------------------------------------------------

def specnorm_stack(G: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of matrices, shape (..., m, m)."""
    H = np.einsum("...ki,...kj->...ij", np.conj(G), G)
    lam = np.linalg.eigvalsh(H)[..., -1]
    return np.sqrt(np.maximum(lam, 0.0))


def _ap_cube_stat_numpy(P, M, pprime, p_over_pprime):
    npts = P.shape[0]
    outer = 0.0
    # chunked over x to bound the (npts, m, m) temporaries
    for ix in range(npts):
        G = np.einsum("ik,ykj->yij", P[ix], M)
        sig = specnorm_stack(G)
        outer += float(np.mean(sig ** pprime)) ** p_over_pprime
    return outer / npts


def _cell_apply_numpy(A, idx, f):
    return np.einsum("xij,xj->xi", A[idx], f)


def _strong_doubling_numpy(A, Ainv, sides, centers, pairs, beta, p, n):
    q = pairs[:, 0]
    r = pairs[:, 1]
    G = np.einsum("sik,skj->sij", A[q], Ainv[r])
    num = specnorm_stack(G) ** p
    lq, lr = sides[q], sides[r]
    ratio = lr / lq
    envelope = np.maximum(ratio ** n, (1.0 / ratio) ** (beta - n))
    dist = np.sqrt(np.sum((centers[q] - centers[r]) ** 2, axis=1))
    envelope = envelope * (1.0 + dist / np.maximum(lq, lr)) ** beta
    return num / envelope


# -- dispatchers ------------------------------------------------------------

def ap_cube_stat(P: np.ndarray, M: np.ndarray, p: float) -> float:
    """One cube's two-index average for the matrix Muckenhoupt estimator:

        avg_x ( avg_y ||P(x) M(y)||^{p'} )^{p/p'},

    with P = W^{1/p}, M = W^{-1/p} gathered on the cube's gridpoints and
    ||.|| the spectral norm.
    """
    pprime = p / (p - 1.0)
    P = np.ascontiguousarray(P, dtype=np.complex128)
    M = np.ascontiguousarray(M, dtype=np.complex128)
    if _BACKEND == "numba":
        return float(_ap_cube_stat_numba(P, M, pprime, p / pprime))
    return float(_ap_cube_stat_numpy(P, M, pprime, p / pprime))


def cell_apply(A: np.ndarray, idx: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Per-gridpoint matrix application y[x] = A[idx[x]] @ f[x]."""
    A = np.ascontiguousarray(A, dtype=np.complex128)
    f = np.ascontiguousarray(f, dtype=np.complex128)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if _BACKEND == "numba":
        return _cell_apply_numba(A, idx, f)
    return _cell_apply_numpy(A, idx, f)


def strong_doubling_scores(A, Ainv, sides, centers, pairs, beta, p, n):
    """Per-pair ratio of ||A_Q inv(A_P)||^p to the doubling envelope

        max{ (l(P)/l(Q))^n, (l(Q)/l(P))^{beta-n} }
            * (1 + |x_Q - x_P| / max{l(P), l(Q)})^beta.

    The inverse on the second factor makes the bound scale-free: a pair
    of identical cells scores ||I||^p = 1 regardless of how large the
    weight is there, and only relative growth between locations counts.
    """
    A = np.ascontiguousarray(A, dtype=np.complex128)
    Ainv = np.ascontiguousarray(Ainv, dtype=np.complex128)
    sides = np.ascontiguousarray(sides, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    pairs = np.ascontiguousarray(pairs, dtype=np.int64)
    if _BACKEND == "numba":
        return _strong_doubling_numba(A, Ainv, sides, centers, pairs,
                                      float(beta), float(p), int(n))
    return _strong_doubling_numpy(A, Ainv, sides, centers, pairs,
                                  float(beta), float(p), int(n))
