import math

import numpy as np
import pytest

from modspace.corpus import CorpusSpec, generate_corpus
from modspace.errors import ContractViolation, ParameterError, TruncationError
from modspace.grid import GridSpec, VectorField, weighted_lp_norm
from modspace.norms import (averaged_modulation_norm, band_safety_check,
                            build_operator_sets, conjugate_exponent,
                            dual_weight, mixed_norm_from_pieces,
                            modulation_norm, sequence_norm,
                            stft_modulation_norm)
from modspace.weights import MatrixWeight, WeightSpec, make_weight
from modspace.windows import box_all, build_window_family

from reference import dense_modulation_norm

L = 8 * math.pi

# band-route value for the unit gaussian at s=1, p=q=2, K=6 on the
# 256-point box; frozen from the dense coordinate-sum route
UNIT_GAUSSIAN_NORM = 0.999124544888


def _unit_gaussian(grid):
    x = grid.axis_x()
    prof = np.pi ** -0.25 * np.exp(-x ** 2 / 2.0)
    return VectorField(grid, prof.reshape(grid.spatial_shape + (1,)).astype(complex))


def test_conjugate_exponent_table():
    assert conjugate_exponent(2.0) == 2.0
    assert abs(conjugate_exponent(4.0) - 4.0 / 3.0) < 1e-15
    assert conjugate_exponent(1.5) == 3.0
    assert conjugate_exponent(1.0) == 1.0
    assert conjugate_exponent(0.5) == 1.0
    assert conjugate_exponent(math.inf) == 1.0
    for bad in (0.0, -1.0):
        with pytest.raises(ParameterError):
            conjugate_exponent(bad)


def test_dual_weight(grid1m2, rng):
    I = make_weight(WeightSpec("identity"), grid1m2)
    assert np.max(np.abs(dual_weight(I, 3.0).samples - np.eye(2))) < 1e-14
    shape = (grid1m2.npoints, 2, 2)
    A = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    W = MatrixWeight(grid1m2, A @ np.conj(np.transpose(A, (0, 2, 1)))
                     + 0.5 * np.eye(2))
    # at p = 2 the dual weight is the inverse
    prod = np.einsum("pij,pjk->pik", W.samples, dual_weight(W, 2.0).samples)
    assert np.max(np.abs(prod - np.eye(2))) < 1e-10
    # general p: W^(p'/p) times the dual is the identity
    p = 3.0
    prod3 = np.einsum("pij,pjk->pik", W.power(0.5), dual_weight(W, p).samples)
    assert np.max(np.abs(prod3 - np.eye(2))) < 1e-10
    for bad in (1.0, math.inf):
        with pytest.raises(ParameterError):
            dual_weight(W, bad)


def test_exponent_validation(grid1, fam1, corpus1):
    f = corpus1[0][0]
    with pytest.raises(ParameterError):
        modulation_norm(f, fam1, 0.5, 2.0, 0.0)
    with pytest.raises(ParameterError):
        modulation_norm(f, fam1, math.inf, 2.0, 0.0)
    with pytest.raises(ParameterError):
        modulation_norm(f, fam1, 2.0, 0.0, 0.0)
    with pytest.raises(ParameterError):
        modulation_norm(f, fam1, 2.0, -2.0, 0.0)


def test_zero_and_homogeneity(grid1, fam1, corpus1):
    zero = VectorField(grid1, np.zeros(grid1.spatial_shape + (1,), dtype=complex))
    assert modulation_norm(zero, fam1, 2.0, 2.0, 0.0) == 0.0
    f = corpus1[0][0]
    base = modulation_norm(f, fam1, 2.0, 1.5, 1.0)
    scaled = modulation_norm(VectorField(grid1, 3.7 * f.samples),
                             fam1, 2.0, 1.5, 1.0)
    assert abs(scaled - 3.7 * base) < 1e-12 * scaled


def test_unweighted_l2_bounds(fam1, corpus1):
    # at p = q = 2, s = 0 the squared norm is int |fhat|^2 sum phi_k^2,
    # pinched between the partition floor and 1
    fields, _ = corpus1
    for f in fields:
        l2 = weighted_lp_norm(f, 2.0)
        v = modulation_norm(f, fam1, 2.0, 2.0, 0.0)
        assert v <= l2 * (1 + 1e-10)
        assert v ** 2 >= l2 ** 2 / 3.0 * (1 - 1e-10)


def test_band_route_matches_dense_oracle(fam1, corpus1):
    fields, _ = corpus1
    for f in fields[::3]:
        fast = modulation_norm(f, fam1, 2.0, 1.5, 1.0)
        slow = dense_modulation_norm(f, fam1, 2.0, 1.5, 1.0)
        assert abs(fast - slow) <= 1e-8 * max(slow, 1e-30)


def test_frozen_unit_gaussian_value(grid1, fam1):
    f = _unit_gaussian(grid1)
    v = modulation_norm(f, fam1, 2.0, 2.0, 1.0)
    assert abs(v - UNIT_GAUSSIAN_NORM) < 1e-10
    assert abs(v - dense_modulation_norm(f, fam1, 2.0, 2.0, 1.0)) < 1e-12


def test_band_safety_refuses_leaky_spectrum(grid1, fam1):
    x = grid1.axis_x()
    f = VectorField(grid1, (np.exp(1j * 5.5 * x) * np.exp(-x ** 2 / 72.0)
                            ).reshape(grid1.spatial_shape + (1,)))
    with pytest.raises(TruncationError):
        modulation_norm(f, fam1, 2.0, 2.0, 0.0)
    # the same field is fine when the family covers it
    wide = build_window_family(grid1, 8, "smooth-bump")
    assert modulation_norm(f, wide, 2.0, 2.0, 0.0) > 0.0
    assert band_safety_check(f, wide) <= 1e-10


def test_s_and_q_monotonicity(fam1, corpus1):
    f = corpus1[0][0]
    by_s = [modulation_norm(f, fam1, 2.0, 2.0, s) for s in (0.0, 1.0, 2.0)]
    assert by_s[0] <= by_s[1] <= by_s[2]
    qs = (1.0, 1.5, 2.0, 4.0, math.inf)
    by_q = [modulation_norm(f, fam1, 2.0, q, 0.5) for q in qs]
    for a, b in zip(by_q, by_q[1:]):
        assert b <= a * (1 + 1e-12)


def test_triangle_inequality(fam1, corpus1):
    fields, _ = corpus1
    f, g = fields[0], fields[4]
    fg = VectorField(f.grid, f.samples + g.samples)
    for p, q in ((2.0, 2.0), (3.0, 1.5), (2.0, math.inf)):
        lhs = modulation_norm(fg, fam1, p, q, 1.0)
        rhs = modulation_norm(f, fam1, p, q, 1.0) \
            + modulation_norm(g, fam1, p, q, 1.0)
        assert lhs <= rhs * (1 + 1e-10)


def test_quasinorm_range_accepted(fam1, corpus1):
    f = corpus1[0][0]
    v = modulation_norm(f, fam1, 2.0, 0.5, 0.0)
    assert np.isfinite(v) and v > 0.0


def test_averaged_route_identity_ops_collapse():
    g = GridSpec(1, 1, 512, L)
    fam = build_window_family(g, 3, "smooth-bump")
    spec = CorpusSpec(seed=3, size=3, families=("random-bandlimited",),
                      band_limit=1.8)
    fields, _ = generate_corpus(spec, g)
    W = make_weight(WeightSpec("identity"), g)
    op_sets = build_operator_sets(W, fam, 2.0)
    for f in fields:
        band = modulation_norm(f, fam, 2.0, 2.0, 1.0)
        cell = averaged_modulation_norm(f, fam, op_sets, 2.0, 1.0)
        assert abs(cell - band) < 1e-12 * band


def test_averaged_route_validation(grid1, fam1, corpus1):
    f = corpus1[0][0]
    with pytest.raises(ContractViolation):
        averaged_modulation_norm(f, fam1, {}, 2.0, 0.0)


def test_stft_route_basics(grid1):
    zero = VectorField(grid1, np.zeros(grid1.spatial_shape + (1,), dtype=complex))
    assert stft_modulation_norm(zero, 2.0, 2.0, 0.0, K=3) == 0.0
    f = _unit_gaussian(grid1)
    base = stft_modulation_norm(f, 2.0, 2.0, 0.0, K=6)
    scaled = stft_modulation_norm(VectorField(grid1, 2.5 * f.samples),
                                  2.0, 2.0, 0.0, K=6)
    assert abs(scaled - 2.5 * base) < 1e-12 * scaled
    # at p = q = 2, s = 0 the transform route carries the full energy
    ratio = base / (math.sqrt(2 * math.pi) * weighted_lp_norm(f, 2.0))
    assert abs(ratio - 1.0) < 0.02


def test_sequence_norm_routes(grid1, fam1, corpus1, rng):
    f = corpus1[0][0]
    k = (2,)
    single = sequence_norm({k: f}, 1.0, 2.0, 2.0)
    assert abs(single - math.sqrt(5.0) * weighted_lp_norm(f, 2.0)) < 1e-12
    g = corpus1[0][1]
    sup = sequence_norm({(0,): f, (2,): g}, 0.0, 2.0, math.inf)
    assert abs(sup - max(weighted_lp_norm(f, 2.0),
                         weighted_lp_norm(g, 2.0))) < 1e-12
    other = GridSpec(1, 1, 128, L)
    h = VectorField(other, np.zeros(other.spatial_shape + (1,), dtype=complex))
    with pytest.raises(ContractViolation):
        sequence_norm({(0,): f, (1,): h}, 0.0, 2.0, 2.0)


def test_sequence_norm_with_operator_sets(grid1m2, rng):
    from modspace.cells import cell_partition, reducing_operators
    W = make_weight(WeightSpec("identity"), grid1m2)
    part = cell_partition(grid1m2, (0,))
    ops = reducing_operators(W, part, 2.0)
    shape = grid1m2.spatial_shape + (2,)
    f = VectorField(grid1m2, rng.normal(size=shape) + 1j * rng.normal(size=shape))
    via_ops = sequence_norm({(0,): f}, 0.0, 2.0, 2.0, weight=ops)
    assert abs(via_ops - weighted_lp_norm(f, 2.0)) < 1e-12
    with pytest.raises(ContractViolation):
        sequence_norm({(0,): f}, 0.0, 3.0, 2.0, weight=ops)


def test_mixed_norm_reports_stage_values(fam1, corpus1):
    f = corpus1[0][0]
    pieces = box_all(f, fam1)
    value, per = mixed_norm_from_pieces(pieces, 2.0, 2.0, 0.0)
    assert set(per) == set(fam1.indices)
    manual = math.sqrt(sum(v ** 2 for v in per.values()))
    assert abs(value - manual) < 1e-12
