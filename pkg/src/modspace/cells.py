"""Cell partitions tied to a frequency index, and reducing operators.

For frequency index k the box is tiled by half-open cubes of side
1/(a * r_k), anchored at integer multiples of the side; r_k is 1 (unit
convention) or the bracket of k (frequency-scaled convention). Cell
membership is decided by floor division of the coordinates, so every
gridpoint lands in exactly one cell by construction; boundary cells
clipped by the box keep whatever gridpoints they cover.

A reducing operator A_Q is an HPD matrix whose norm |A_Q z| tracks the
cell average ((1/|Q|) int_Q |W^{1/p} z|^p)^{1/p} uniformly in z. Two
constructions ship: the exact second-moment operator for p = 2, and a
minimum-volume-ellipsoid fit through sampled directions for general p,
with the dimensional sandwich factor sqrt(2m) checked a posteriori.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (ContractViolation, DataError, DegeneracyError,
                     NumericalError, ParameterError, ResolutionError)
from .grid import GridSpec, VectorField
from .weights import MatrixWeight
from .windows import bracket

R_CONVENTIONS = ("unit", "paper-scale")
# sampled-direction slack on the John sandwich, covering the Khachiyan
# approximation tolerance
_SANDWICH_SLACK = 1e-3


@dataclass(frozen=True)
class CellPartition:
    grid: GridSpec
    k: tuple
    a: float
    r_convention: str
    side: float
    cell_index: np.ndarray  # (P,) int64, cell id per gridpoint
    anchors: np.ndarray     # (ncells, n) lower corners
    counts: np.ndarray      # (ncells,)

    @property
    def ncells(self) -> int:
        return self.anchors.shape[0]

    def centers(self) -> np.ndarray:
        return self.anchors + 0.5 * self.side


def cell_partition(grid: GridSpec, k, a: float = None,
                   r_convention: str = "paper-scale",
                   bracket_mode: str = "l1") -> CellPartition:
    """Tile the box with cells of side 1/(a * r_k)."""
    k = tuple(int(c) for c in np.atleast_1d(k))
    if len(k) != grid.n:
        raise ParameterError(f"k must have {grid.n} components, got {k}")
    if r_convention not in R_CONVENTIONS:
        raise ParameterError(f"r_convention must be one of {R_CONVENTIONS}")
    if a is None:
        a = math.sqrt(grid.n)
    if a < math.sqrt(grid.n) / 2:
        raise ParameterError(
            f"a = {a} below the covering threshold sqrt(n)/2")
    r_k = bracket(np.asarray(k, dtype=float), bracket_mode) \
        if r_convention == "paper-scale" else 1.0
    side = 1.0 / (a * r_k)
    if side < 2.0 * grid.dx:
        raise ResolutionError(
            f"cell side {side:.4f} at k={k} resolves fewer than 2 gridpoints "
            f"per axis (dx={grid.dx:.4f}); increase N or reduce |k|")
    cell_index, anchors, counts = _tile(grid, side)
    return CellPartition(grid, k, float(a), r_convention, side,
                         cell_index, anchors, counts)


def _tile(grid: GridSpec, side: float):
    x = grid.x_coords()
    labels = np.floor(x / side).astype(np.int64)  # (P, n)
    uniq, cell_index, counts = np.unique(
        labels, axis=0, return_inverse=True, return_counts=True)
    cell_index = cell_index.reshape(-1)
    anchors = uniq.astype(np.float64) * side
    return cell_index, anchors, counts


@dataclass(frozen=True)
class ReducingOperatorSet:
    partition: CellPartition
    p: float
    method: str
    matrices: np.ndarray  # (ncells, m, m) complex128

    def inverse(self) -> "ReducingOperatorSet":
        """Inverted operators, carried at the dual exponent p' so the
        set plugs directly into the dual sequence norm."""
        if self.p <= 1.0:
            raise ParameterError(
                f"inverse set needs p > 1 (dual exponent finite), "
                f"got p={self.p}")
        inv = np.linalg.inv(self.matrices)
        inv = 0.5 * (inv + np.conj(np.transpose(inv, (0, 2, 1))))
        return ReducingOperatorSet(self.partition, self.p / (self.p - 1.0),
                                   self.method + "-inverse", inv)


def reducing_operators(weight: MatrixWeight, partition: CellPartition,
                       p: float, method: str = "auto", ndirs: int = 64,
                       tol: float = 1e-6, maxiter: int = 10000,
                       seed: int = 7) -> ReducingOperatorSet:
    """Build one reducing operator per cell.

    method 'moment' uses ((1/|Q|) sum W^{2/p})^{1/2}, exact for p = 2;
    'mvee' fits the minimum-volume ellipsoid around the unit ball of the
    cell-averaged norm through >= ndirs sampled directions; 'auto'
    chooses moment at p = 2 and mvee otherwise.
    """
    if weight.grid != partition.grid:
        raise ContractViolation("weight and partition on different grids")
    if not 1.0 <= p < math.inf:
        raise ParameterError(f"p must be in [1, inf), got {p}")
    if method == "auto":
        method = "moment" if p == 2.0 else "mvee"
    if method not in ("moment", "mvee"):
        raise ParameterError(f"method must be moment|mvee, got {method}")
    m = weight.grid.m
    ncells = partition.ncells
    if method == "moment":
        W2p = weight.power(2.0 / p)
        sums = np.zeros((ncells, m, m), dtype=np.complex128)
        np.add.at(sums, partition.cell_index, W2p)
        avg = sums / partition.counts[:, None, None]
        mats = _hpd_sqrt(avg)
        return ReducingOperatorSet(partition, p, "moment", mats)
    dirs = _direction_set(m, ndirs, seed)
    Wp = weight.power(1.0 / p)
    mats = np.empty((ncells, m, m), dtype=np.complex128)
    order = np.argsort(partition.cell_index, kind="stable")
    bounds = np.searchsorted(partition.cell_index[order],
                             np.arange(ncells + 1))
    for c in range(ncells):
        members = order[bounds[c]:bounds[c + 1]]
        if members.size == 0:
            raise DegeneracyError(f"cell {c} has no gridpoints")
        rho = _cell_gauge(Wp[members], dirs, p)
        if np.any(rho <= 0):
            raise DegeneracyError(
                f"cell at {partition.anchors[c]} has a null direction")
        if m == 1:
            mats[c] = rho[0]  # all directions agree for scalars
            continue
        mats[c] = _mvee_operator(dirs, rho, tol, maxiter, c)
    if weight.is_real:
        # the gauge is conjugation-invariant, so the exact ellipsoid is
        # real symmetric; drop the solver's residual imaginary part
        mats = mats.real.astype(np.complex128)
    return ReducingOperatorSet(partition, p, "mvee", mats)


def _hpd_sqrt(stack: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(stack)
    if float(evals.min()) <= 0:
        raise DegeneracyError("cell average lost positive definiteness")
    lam = np.sqrt(evals)
    out = np.einsum("cik,ck,cjk->cij", evecs, lam, np.conj(evecs))
    return 0.5 * (out + np.conj(np.transpose(out, (0, 2, 1))))


def _direction_set(m: int, ndirs: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((ndirs, m)) + 1j * rng.standard_normal((ndirs, m))
    z /= np.linalg.norm(z, axis=1)[:, None]
    return np.concatenate([np.eye(m, dtype=np.complex128), z], axis=0)


def _cell_gauge(Wp_members: np.ndarray, dirs: np.ndarray,
                p: float) -> np.ndarray:
    """((1/|Q|) sum_x |W^{1/p}(x) z|^p)^{1/p} for each direction z."""
    v = np.einsum("xij,dj->xdi", Wp_members, dirs)
    mags = np.sqrt(np.sum(np.abs(v) ** 2, axis=2))
    return np.mean(mags ** p, axis=0) ** (1.0 / p)


def _hermitian_basis(m: int):
    basis = []
    for i in range(m):
        E = np.zeros((m, m), dtype=np.complex128)
        E[i, i] = 1.0
        basis.append(E)
    r = 1.0 / math.sqrt(2.0)
    for i in range(m):
        for j in range(i + 1, m):
            E = np.zeros((m, m), dtype=np.complex128)
            E[i, j] = E[j, i] = r
            basis.append(E)
            E = np.zeros((m, m), dtype=np.complex128)
            E[i, j] = -1j * r
            E[j, i] = 1j * r
            basis.append(E)
    return np.stack(basis)


def _mvee_operator(dirs: np.ndarray, rho: np.ndarray, tol: float,
                   maxiter: int, cell_id: int) -> np.ndarray:
    """Minimum-volume ellipsoid around the boundary points z_d / rho_d
    of the cell gauge, returned as the HPD root A with |A z|^2 the
    ellipsoid form.

    The circled (phase-invariant) problem reduces to maximizing
    log det H over Hermitian H with v^H H v <= 1 at every point; a
    barrier-Newton path solves it and the Kiefer-Wolfowitz dual
    condition max_d v^H G(u)^{-1} v <= m (1 + tol) certifies the fit.
    First-order ascent on the same problem stalls when the gauge is
    already near-ellipsoidal, which is the common case here, so the
    iteration count bounds Newton steps instead.
    """
    m = dirs.shape[1]
    v = dirs / rho[:, None]
    basis = _hermitian_basis(m)
    nb = basis.shape[0]
    # quadratic forms of each basis element at each point, real by
    # hermiticity
    Bv = np.real(np.einsum("di,aij,dj->ad", np.conj(v), basis, v))

    def forms(H):
        return np.real(np.einsum("di,ij,dj->d", np.conj(v), H, v))

    H = (0.99 / float(np.max(np.sum(np.abs(v) ** 2, axis=1)))) * np.eye(m)
    t = 1.0
    iters = 0
    while t <= 1e14:
        for _ in range(60):
            if iters >= maxiter:
                raise NumericalError(
                    f"ellipsoid fit did not converge in {maxiter} "
                    f"iterations on cell {cell_id}")
            iters += 1
            f = forms(H)
            s = 1.0 / (1.0 - f)
            try:
                Hinv = np.linalg.inv(H)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(
                    f"ellipsoid fit degenerate on cell {cell_id}") from exc
            grad_mat = -t * Hinv + np.einsum("d,di,dj->ij", s, v, np.conj(v))
            g = np.real(np.einsum("ij,aji->a", grad_mat, basis))
            HiB = np.einsum("ij,ajk,kl->ail", Hinv, basis, Hinv)
            hess = t * np.real(np.einsum("aij,bji->ab", HiB, basis)) \
                + (Bv * (s * s)[None, :]) @ Bv.T
            try:
                step = np.linalg.solve(hess, -g)
            except np.linalg.LinAlgError:
                break
            decrement = float(-g @ step)
            dH = np.einsum("a,aij->ij", step, basis)
            alpha = 1.0
            for _ in range(50):
                Hn = H + alpha * dH
                if float(np.linalg.eigvalsh(Hn).min()) > 0 \
                        and float(forms(Hn).max()) < 1.0:
                    break
                alpha *= 0.5
            else:
                break
            H = H + alpha * dH
            if decrement < 1e-12:
                break
        f = forms(H)
        u = 1.0 / (1.0 - f)
        u /= u.sum()
        G = np.einsum("d,di,dj->ij", u, v, np.conj(v))
        w = np.real(np.einsum("di,ij,dj->d",
                              np.conj(v), np.linalg.inv(G), v))
        if float(w.max()) <= m * (1.0 + tol):
            break
        t *= 10.0
    else:
        raise NumericalError(
            f"ellipsoid fit on cell {cell_id} exhausted the barrier path "
            f"without certifying tolerance {tol}")
    evals, evecs = np.linalg.eigh(H)
    if float(evals.min()) <= 0:
        raise DegeneracyError(f"ellipsoid on cell {cell_id} not definite")
    A = (evecs * np.sqrt(evals)[None, :]) @ np.conj(evecs.T)
    A = 0.5 * (A + np.conj(A.T))
    _check_sandwich(A, dirs, rho, m, cell_id)
    return A


def _check_sandwich(A, dirs, rho, m, cell_id):
    vals = np.sqrt(np.sum(np.abs(dirs @ A.T) ** 2, axis=1))
    hi = float(np.max(vals / rho))
    lo = float(np.min(vals / rho))
    limit = math.sqrt(2 * m)
    if hi > 1.0 + _SANDWICH_SLACK or lo < 1.0 / limit * (1.0 - _SANDWICH_SLACK):
        raise NumericalError(
            f"ellipsoid sandwich violated on cell {cell_id}: "
            f"range [{lo:.4f}, {hi:.4f}] vs [1/sqrt(2m), 1]")


def averaged_lp_norm(f: VectorField, ops: ReducingOperatorSet,
                     p: float = None) -> float:
    """( dx^n sum_x |A_{Q(x)} f(x)|^p )^(1/p) with the set's p; an
    explicit p is accepted but must agree with the set."""
    if p is not None and p != ops.p:
        raise ContractViolation(
            f"operator set built for p={ops.p}, call asked p={p}")
    if f.grid != ops.partition.grid:
        raise ContractViolation("field and operator set on different grids")
    g = f.grid
    applied = kernels.cell_apply(ops.matrices, ops.partition.cell_index,
                                 f.flat)
    mags = np.sqrt(np.sum(np.abs(applied) ** 2, axis=1))
    p = ops.p
    return float((np.sum(mags ** p) * g.dx ** g.n) ** (1.0 / p))


def strong_doubling_check(sets, beta: float, p: float, seed: int = 0,
                          max_within: int = 20000, n_cross: int = 10000,
                          enrich: float = 2.0) -> dict:
    """Estimate the cross-scale bound constant

        C = max ||A_Q inv(A_P)||^p / envelope(Q, P; beta)

    over ordered cell pairs drawn within and across the given operator
    sets, then re-estimate with an enriched pair budget; the pair
    (C, stability) is the check's outcome.
    """
    mats, sides, centers, offsets = [], [], [], []
    for s in sets:
        part = s.partition
        mats.append(s.matrices)
        sides.append(np.full(part.ncells, part.side))
        centers.append(part.centers())
        offsets.append(part.ncells)
    A = np.concatenate(mats, axis=0)
    Ainv = np.linalg.inv(A)
    sides = np.concatenate(sides)
    centers = np.concatenate(centers, axis=0)
    n = centers.shape[1]
    total = A.shape[0]
    starts = np.cumsum([0] + offsets[:-1])

    def batch(scale, salt):
        rng = np.random.default_rng([seed, salt])
        pairs = []
        for si, s in enumerate(sets):
            nc = s.partition.ncells
            base = starts[si]
            want = min(int(max_within * scale), nc * nc)
            if nc * nc <= want:
                ii, jj = np.meshgrid(np.arange(nc), np.arange(nc))
                local = np.stack([ii.ravel(), jj.ravel()], axis=1)
            else:
                local = rng.integers(0, nc, size=(want, 2))
            pairs.append(local + base)
        cross = rng.integers(0, total, size=(int(n_cross * scale), 2))
        pairs.append(cross)
        allp = np.concatenate(pairs, axis=0)
        scores = kernels.strong_doubling_scores(
            A, Ainv, sides, centers, allp, beta, p, n)
        worst = int(np.argmax(scores))
        return float(scores[worst]), allp[worst]

    c1, worst1 = batch(1.0, 1)
    c2, worst2 = batch(enrich, 2)
    change = abs(c2 - c1) / c1 if c1 > 0 else math.inf
    return {
        "C": c1,
        "C_enriched": c2,
        "relative_change": change,
        "stable": bool(change <= 0.2),
        "worst_pair": [int(worst2[0]), int(worst2[1])],
        "beta": beta,
        "p": p,
    }


_OPS_MAGIC = "modspace-ops-v1"


def write_operator_set(ops: ReducingOperatorSet, path) -> None:
    """JSON header line, then cell anchors (float64 LE) and matrices
    (complex128 LE). The gridpoint-to-cell map is not stored; it is
    reproduced exactly by rebuilding the partition from the header."""
    part = ops.partition
    g = part.grid
    header = {
        "format": _OPS_MAGIC,
        "n": g.n, "m": g.m, "N": g.N, "L": g.L,
        "k": list(part.k),
        "a": part.a,
        "r_convention": part.r_convention,
        "side": part.side,
        "ncells": part.ncells,
        "p": ops.p,
        "method": ops.method,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(part.anchors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ops.matrices, dtype="<c16").tobytes())


def read_operator_set(path) -> ReducingOperatorSet:
    with open(path, "rb") as fh:
        try:
            header = json.loads(fh.readline().decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise DataError(f"not an operator-set file: {path}")
        if not isinstance(header, dict) or header.get("format") != _OPS_MAGIC:
            raise DataError(f"not an operator-set file: {path}")
        grid = GridSpec(header["n"], header["m"], header["N"], header["L"])
        nc, m, n = header["ncells"], grid.m, grid.n
        raw_a = fh.read(nc * n * 8)
        raw_m = fh.read(nc * m * m * 16)
    anchors = np.frombuffer(raw_a, dtype="<f8").reshape(nc, n)
    mats = np.frombuffer(raw_m, dtype="<c16").reshape(nc, m, m)
    cell_index, re_anchors, counts = _tile(grid, header["side"])
    if re_anchors.shape[0] != nc or not np.allclose(re_anchors, anchors):
        raise DataError(
            f"stored partition does not match its rebuilt geometry: {path}")
    part = CellPartition(grid, tuple(header["k"]), header["a"],
                         header["r_convention"], header["side"],
                         cell_index, re_anchors, counts)
    return ReducingOperatorSet(part, header["p"], header["method"],
                               mats.copy())
