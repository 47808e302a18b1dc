"""Weighted modulation norms over sampled fields.

Three routes to the same size measurement:

  * band route: weighted L^p norm of each band piece, combined in a
    polynomially weighted little-l^q over the retained indices;
  * cell route: the L^p stage replaced by reducing-operator magnitudes
    on a frequency-scaled cell partition;
  * transform route: windowed-transform magnitudes integrated over the
    box and combined over a dual-frequency lattice.

All three gate on band safety: a field whose spectrum leaks past the
exactly-partitioned region would be silently truncated, so it is
refused instead.
"""

from __future__ import annotations

import math

import numpy as np

from .cells import ReducingOperatorSet, averaged_lp_norm, cell_partition, \
    reducing_operators
from .corpus import spectral_mass_outside
from .errors import ContractViolation, ParameterError, TruncationError
from .grid import VectorField, weighted_lp_norm
from .weights import MatrixWeight
from .windows import WindowFamily, box_all, bracket, gaussian_window, \
    stft, xi_lattice

BAND_SAFETY_TOL = 1e-10


def conjugate_exponent(q: float) -> float:
    """Dual exponent: q/(q-1) on (1, inf); 1 on the quasinorm range
    (0, 1]; 1 at q = inf."""
    if q <= 0:
        raise ParameterError(f"exponent must be positive, got {q}")
    if q == math.inf or q <= 1.0:
        return 1.0
    return q / (q - 1.0)


def dual_weight(weight: MatrixWeight, p: float) -> MatrixWeight:
    """W^(-p'/p), the weight of the dual space; needs p in (1, inf)."""
    if not 1.0 < p < math.inf:
        raise ParameterError(f"dual weight needs p in (1, inf), got {p}")
    pprime = p / (p - 1.0)
    return MatrixWeight(weight.grid, weight.power(-pprime / p))


def band_safety_check(f: VectorField, fam: WindowFamily,
                      tol: float = BAND_SAFETY_TOL) -> float:
    """Relative spectral mass outside the exactly-partitioned band
    |xi|_inf <= K - sqrt(n); raises when it exceeds tol."""
    covered = fam.K - math.sqrt(f.grid.n)
    leak = spectral_mass_outside(f, covered)
    if leak > tol:
        raise TruncationError(
            f"field carries {leak:.3e} of its spectral mass beyond "
            f"|xi| = {covered:.3f}, outside the exactly-covered band "
            f"(tolerance {tol:.1e}); enlarge K or re-band the input")
    return leak


def _check_exponents(p: float, q: float) -> None:
    if not (1.0 <= p < math.inf):
        raise ParameterError(f"p must be in [1, inf), got {p}")
    if not (0.0 < q <= math.inf):
        raise ParameterError(f"q must be in (0, inf], got {q}")


def sequence_combine(values: dict, s: float, q: float,
                     bracket_mode: str = "l1") -> float:
    """l^q with polynomial weight: ( sum_k (<k>^s v_k)^q )^(1/q),
    max over k at q = inf. values maps index tuples to nonnegative
    floats."""
    if not values:
        return 0.0
    ks = np.array(sorted(values.keys()), dtype=np.float64)
    v = np.array([values[tuple(int(c) for c in row)] for row in ks])
    w = bracket(ks, bracket_mode) ** s * v
    if q == math.inf:
        return float(np.max(w))
    return float(np.sum(w ** q) ** (1.0 / q))


def mixed_norm_from_pieces(pieces: dict, p: float, q: float, s: float,
                           weight: MatrixWeight = None,
                           bracket_mode: str = "l1"):
    """Weighted L^p per piece, then the weighted l^q combine.

    Returns (norm, per_index) with per_index the unweighted L^p stage
    values keyed by index.
    """
    _check_exponents(p, q)
    per = {k: weighted_lp_norm(f, p, weight) for k, f in pieces.items()}
    return sequence_combine(per, s, q, bracket_mode), per


def modulation_norm(f: VectorField, fam: WindowFamily, p: float, q: float,
                    s: float, weight: MatrixWeight = None,
                    bracket_mode: str = "l1", band_tol: float = BAND_SAFETY_TOL,
                    return_terms: bool = False):
    """Band-decomposition modulation norm

        ( sum_k ( <k>^s || W^(1/p) box_k f ||_p )^q )^(1/q).
    """
    _check_exponents(p, q)
    if f.grid != fam.grid:
        raise ContractViolation("field and window family on different grids")
    band_safety_check(f, fam, band_tol)
    pieces = box_all(f, fam)
    value, per = mixed_norm_from_pieces(pieces, p, q, s, weight, bracket_mode)
    if return_terms:
        return value, per
    return value


def build_operator_sets(weight: MatrixWeight, fam: WindowFamily, p: float,
                        r_convention: str = "paper-scale", a: float = None,
                        method: str = "auto", seed: int = 7) -> dict:
    """One reducing-operator set per retained index, sharing the
    partition convention. Raises ResolutionError when the finest
    requested cells drop under two gridpoints per axis."""
    out = {}
    for k in fam.indices:
        part = cell_partition(weight.grid, k, a=a, r_convention=r_convention)
        out[k] = reducing_operators(weight, part, p, method=method, seed=seed)
    return out


def averaged_modulation_norm(f: VectorField, fam: WindowFamily,
                             op_sets: dict, q: float, s: float,
                             bracket_mode: str = "l1",
                             band_tol: float = BAND_SAFETY_TOL,
                             return_terms: bool = False):
    """Cell-route modulation norm: reducing-operator L^p stage per band
    piece, weighted l^q combine. op_sets maps each retained index to a
    ReducingOperatorSet; their common p is the spatial exponent."""
    if f.grid != fam.grid:
        raise ContractViolation("field and window family on different grids")
    missing = [k for k in fam.indices if k not in op_sets]
    if missing:
        raise ContractViolation(
            f"operator sets missing for {len(missing)} indices, "
            f"first {missing[0]}")
    ps = {op_sets[k].p for k in fam.indices}
    if len(ps) != 1:
        raise ContractViolation(f"operator sets disagree on p: {sorted(ps)}")
    (p,) = ps
    _check_exponents(p, q)
    band_safety_check(f, fam, band_tol)
    pieces = box_all(f, fam)
    per = {k: averaged_lp_norm(pieces[k], op_sets[k]) for k in pieces}
    value = sequence_combine(per, s, q, bracket_mode)
    if return_terms:
        return value, per
    return value


def sequence_norm(seq: dict, s: float, p: float, q: float, weight=None,
                  bracket_mode: str = "l1") -> float:
    """Norm of a field sequence {k: VectorField}:

        ( sum_k <k>^(sq) ||f_k||^q )^(1/q),   sup_k <k>^s ||f_k|| at q = inf.

    The inner stage is the weighted L^p norm when weight is a
    MatrixWeight or None, the reducing-operator stage when weight is a
    ReducingOperatorSet (one set shared across k) or a dict mapping each
    index to its own set. Inverse sets enter as ops.inverse().
    """
    _check_exponents(p, q)
    grids = {f.grid for f in seq.values()}
    if len(grids) > 1:
        raise ContractViolation("sequence fields live on different grids")
    all_ops = []
    if isinstance(weight, dict):
        all_ops = list(weight.values())
    elif isinstance(weight, ReducingOperatorSet):
        all_ops = [weight]
    for ops in all_ops:
        if ops.p != p:
            raise ContractViolation(
                f"operator set built for p={ops.p}, norm asked p={p}")
    per = {}
    for k, f in seq.items():
        if isinstance(weight, dict):
            per[k] = averaged_lp_norm(f, weight[k])
        elif isinstance(weight, ReducingOperatorSet):
            per[k] = averaged_lp_norm(f, weight)
        else:
            per[k] = weighted_lp_norm(f, p, weight)
    return sequence_combine(per, s, q, bracket_mode)


_STFT_CHUNK = 64


def stft_modulation_norm(f: VectorField, p: float, q: float, s: float,
                         K: float, weight: MatrixWeight = None,
                         window: np.ndarray = None,
                         bracket_mode: str = "l2",
                         return_terms: bool = False):
    """Transform-route modulation norm on the dual lattice:

        ( sum_{|xi|_inf <= K} ( <xi>^s || W^(1/p) V f(., xi) ||_p )^q dxi^n )^(1/q)

    with a unit Gaussian window unless one is supplied; the outer sum
    carries the lattice measure dxi^n, the supremum at q = inf does not.
    The continuous frequency variable takes the l2 bracket by default.
    """
    _check_exponents(p, q)
    g = f.grid
    if window is None:
        window = gaussian_window(g)
    lattice = xi_lattice(g, K)
    per = {}
    for lo in range(0, lattice.shape[0], _STFT_CHUNK):
        block = lattice[lo:lo + _STFT_CHUNK]
        V = stft(f, window, block)
        for r in range(block.shape[0]):
            row = VectorField(g, V[r])
            per[tuple(block[r])] = weighted_lp_norm(row, p, weight)
    br = bracket(lattice, bracket_mode) ** s
    vals = np.array([per[tuple(row)] for row in lattice])
    w = br * vals
    if q == math.inf:
        value = float(np.max(w))
    else:
        value = float((np.sum(w ** q) * g.dxi ** g.n) ** (1.0 / q))
    if return_terms:
        return value, per
    return value
