import math

import numpy as np
import pytest

from modspace.cells import (ReducingOperatorSet, averaged_lp_norm,
                            cell_partition, read_operator_set,
                            reducing_operators, strong_doubling_check,
                            write_operator_set)
from modspace.errors import (ContractViolation, DataError, ParameterError,
                             ResolutionError)
from modspace.grid import GridSpec, VectorField, weighted_lp_norm
from modspace.weights import (MatrixWeight, WeightSpec, doubling_exponent,
                              dyadic_family, make_weight)

L = 8 * math.pi


def test_partition_side_formulas(grid1):
    fine = GridSpec(1, 1, 512, L)
    part = cell_partition(fine, (3,), a=1.0)
    assert abs(part.side - 1.0 / math.sqrt(10.0)) < 1e-15
    unit = cell_partition(grid1, (3,), a=1.0, r_convention="unit")
    assert unit.side == 1.0
    default = cell_partition(grid1, (0,))
    assert abs(default.a - math.sqrt(grid1.n)) < 1e-15
    assert abs(default.side - 1.0) < 1e-15


def test_partition_covers_grid(grid1, grid2):
    for g, k in ((grid1, (2,)), (grid2, (1, 0))):
        part = cell_partition(g, k)
        assert int(part.counts.sum()) == g.npoints
        assert part.cell_index.min() == 0
        assert part.cell_index.max() == part.ncells - 1
        assert part.anchors.shape == (part.ncells, g.n)
        # anchors really are the lower corners of their members
        x = g.x_coords()
        for c in (0, part.ncells // 2, part.ncells - 1):
            members = x[part.cell_index == c]
            assert np.all(members >= part.anchors[c] - 1e-12)
            assert np.all(members < part.anchors[c] + part.side + 1e-12)


def test_partition_validation(grid1):
    with pytest.raises(ResolutionError):
        cell_partition(grid1, (40,))
    with pytest.raises(ParameterError):
        cell_partition(grid1, (2,), a=0.4)
    with pytest.raises(ParameterError):
        cell_partition(grid1, (1, 1))
    with pytest.raises(ParameterError):
        cell_partition(grid1, (1,), r_convention="euclid")


def test_identity_weight_identity_operators(grid1m2):
    W = make_weight(WeightSpec("identity"), grid1m2)
    part = cell_partition(grid1m2, (0,))
    for method, p in (("moment", 2.0), ("mvee", 3.0)):
        ops = reducing_operators(W, part, p, method=method)
        assert ops.method == method
        defect = np.max(np.abs(ops.matrices - np.eye(2)))
        tol = 1e-12 if method == "moment" else 1e-4
        assert defect < tol


def test_moment_operators_are_cell_averages(grid1m2):
    W = make_weight(WeightSpec("diagonal-power", alpha=(1.0, 2.0)), grid1m2)
    part = cell_partition(grid1m2, (1,))
    ops = reducing_operators(W, part, 2.0, method="moment")
    sums = np.zeros((part.ncells, 2, 2), dtype=complex)
    np.add.at(sums, part.cell_index, W.samples)
    avg = sums / part.counts[:, None, None]
    expected = np.sqrt(np.real(avg))  # diagonal, so sqrt acts entrywise
    assert np.max(np.abs(ops.matrices - expected)) < 1e-12


def _cell_constant_weight(grid, part, rng):
    vals = 0.5 + rng.random(size=(part.ncells, grid.m))
    table = np.zeros((grid.npoints, grid.m, grid.m), dtype=complex)
    for i in range(grid.m):
        table[:, i, i] = vals[part.cell_index, i]
    return make_weight(WeightSpec("custom-table", table=table), grid)


def test_cell_constant_weight_collapses_average(grid1m2, rng):
    # weight constant on every cell: averaging changes nothing at p = 2
    part = cell_partition(grid1m2, (0,))
    W = _cell_constant_weight(grid1m2, part, rng)
    ops = reducing_operators(W, part, 2.0)
    shape = grid1m2.spatial_shape + (2,)
    f = VectorField(grid1m2, rng.normal(size=shape) + 1j * rng.normal(size=shape))
    lhs = averaged_lp_norm(f, ops)
    rhs = weighted_lp_norm(f, 2.0, W)
    assert abs(lhs - rhs) < 1e-10 * rhs


def test_mvee_recovers_cell_constant_root(grid1m2, rng):
    # for a cell-constant diagonal weight the p-gauge is elliptic with
    # root W^{1/p}, so the fitted ellipsoid must match it
    part = cell_partition(grid1m2, (0,))
    W = _cell_constant_weight(grid1m2, part, rng)
    p = 3.0
    ops = reducing_operators(W, part, p)
    assert ops.method == "mvee"
    root = W.power(1.0 / p)
    # one representative gridpoint per cell suffices: W is cell-constant
    reps = np.zeros(part.ncells, dtype=int)
    reps[part.cell_index] = np.arange(grid1m2.npoints)
    rel = np.max(np.abs(ops.matrices - root[reps])) / np.max(np.abs(root))
    assert rel < 1e-3


def test_scalar_mvee_shortcut(grid1, rng):
    part = cell_partition(grid1, (1,))
    W = make_weight(WeightSpec("scalar-power", alpha=(1.0,)), grid1)
    p = 3.0
    ops = reducing_operators(W, part, p)
    w = W.scalar_profile()
    for c in (0, part.ncells // 2):
        members = w[part.cell_index == c]
        expected = float(np.mean(members)) ** (1.0 / p)
        got = float(np.real(ops.matrices[c, 0, 0]))
        assert abs(got - expected) < 1e-12


def test_moment_vs_mvee_consistent(grid1m2, corpus1, rng):
    W = make_weight(WeightSpec("rotated-diagonal", alpha=(0.0, 1.0),
                               omega=(0.4,)), grid1m2)
    part = cell_partition(grid1m2, (1,))
    mom = reducing_operators(W, part, 2.0, method="moment")
    mve = reducing_operators(W, part, 2.0, method="mvee")
    shape = grid1m2.spatial_shape + (2,)
    f = VectorField(grid1m2, rng.normal(size=shape) + 1j * rng.normal(size=shape))
    ratio = averaged_lp_norm(f, mve) / averaged_lp_norm(f, mom)
    # both answer the same gauge up to the John factor; in practice the
    # routes agree to a fraction of a percent
    assert 0.5 < ratio < 2.0
    assert abs(ratio - 1.0) < 0.01


def test_fresh_direction_sandwich(grid1m2, rng):
    W = make_weight(WeightSpec("rotated-diagonal", alpha=(0.0, 1.0),
                               omega=(0.4,)), grid1m2)
    p = 3.0
    part = cell_partition(grid1m2, (0,))
    ops = reducing_operators(W, part, p)
    Wp = W.power(1.0 / p)
    m = grid1m2.m
    z = rng.standard_normal((24, m)) + 1j * rng.standard_normal((24, m))
    z /= np.linalg.norm(z, axis=1)[:, None]
    lo_limit = 1.0 / math.sqrt(2 * m)
    for c in range(0, part.ncells, 7):
        members = Wp[part.cell_index == c]
        v = np.einsum("xij,dj->xdi", members, z)
        gauge = np.mean(np.sqrt(np.sum(np.abs(v) ** 2, axis=2)) ** p,
                        axis=0) ** (1.0 / p)
        fitted = np.sqrt(np.sum(np.abs(z @ ops.matrices[c].T) ** 2, axis=1))
        band = fitted / gauge
        assert float(band.max()) <= 1.10
        assert float(band.min()) >= lo_limit - 0.01


def test_reducing_operator_validation(grid1m2, grid1):
    W = make_weight(WeightSpec("identity"), grid1m2)
    part = cell_partition(grid1m2, (0,))
    with pytest.raises(ParameterError):
        reducing_operators(W, part, 0.5)
    with pytest.raises(ParameterError):
        reducing_operators(W, part, math.inf)
    with pytest.raises(ParameterError):
        reducing_operators(W, part, 2.0, method="john")
    other = make_weight(WeightSpec("identity"), grid1)
    with pytest.raises(ContractViolation):
        reducing_operators(other, part, 2.0)


def test_inverse_set_carries_dual_exponent(grid1m2, rng):
    W = MatrixWeight(grid1m2, np.broadcast_to(
        np.diag([2.0, 5.0]).astype(complex), (grid1m2.npoints, 2, 2)))
    part = cell_partition(grid1m2, (0,))
    ops = reducing_operators(W, part, 3.0)
    inv = ops.inverse()
    assert abs(inv.p - 1.5) < 1e-15
    prod = np.einsum("cij,cjk->cik", ops.matrices, inv.matrices)
    assert np.max(np.abs(prod - np.eye(2))) < 1e-10
    back = inv.inverse()
    assert abs(back.p - 3.0) < 1e-15
    assert np.max(np.abs(back.matrices - ops.matrices)) < 1e-10
    one = ReducingOperatorSet(part, 1.0, "moment", ops.matrices)
    with pytest.raises(ParameterError):
        one.inverse()


def test_averaged_norm_contracts(grid1m2, rng):
    W = make_weight(WeightSpec("identity"), grid1m2)
    part = cell_partition(grid1m2, (0,))
    ops = reducing_operators(W, part, 2.0)
    shape = grid1m2.spatial_shape + (2,)
    f = VectorField(grid1m2, rng.normal(size=shape) + 1j * rng.normal(size=shape))
    assert abs(averaged_lp_norm(f, ops) - weighted_lp_norm(f, 2.0)) < 1e-12
    with pytest.raises(ContractViolation):
        averaged_lp_norm(f, ops, p=3.0)


def test_operator_set_roundtrip(grid1m2, tmp_path, rng):
    W = make_weight(WeightSpec("rotated-diagonal", alpha=(0.0, 1.0),
                               omega=(0.4,)), grid1m2)
    part = cell_partition(grid1m2, (2,))
    ops = reducing_operators(W, part, 2.0)
    path = tmp_path / "ops.bin"
    write_operator_set(ops, path)
    back = read_operator_set(path)
    assert back.p == ops.p
    assert back.method == ops.method
    assert back.partition.side == part.side
    assert back.partition.k == part.k
    assert np.array_equal(back.matrices, ops.matrices)
    assert np.array_equal(back.partition.cell_index, part.cell_index)
    shape = grid1m2.spatial_shape + (2,)
    f = VectorField(grid1m2, rng.normal(size=shape) + 1j * rng.normal(size=shape))
    assert averaged_lp_norm(f, back) == averaged_lp_norm(f, ops)


def test_operator_set_rejects_garbage(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"\x00\x01binary garbage, no header\n more")
    with pytest.raises(DataError):
        read_operator_set(path)


def _op_sets(alpha, N, p=2.0):
    g = GridSpec(1, 1, N, L)
    W = make_weight(WeightSpec("scalar-power", alpha=(alpha,)), g)
    sets = []
    for k in ((0,), (1,), (3,)):
        part = cell_partition(g, k)
        sets.append(reducing_operators(W, part, p))
    return g, W, sets


def test_strong_doubling_identity():
    g = GridSpec(1, 1, 256, L)
    W = make_weight(WeightSpec("identity"), g)
    sets = [reducing_operators(W, cell_partition(g, k), 2.0)
            for k in ((0,), (1,))]
    rep = strong_doubling_check(sets, beta=1.0, p=2.0)
    assert abs(rep["C"] - 1.0) < 1e-12
    assert rep["stable"]


@pytest.mark.parametrize("alpha", [1.0, 3.0])
def test_strong_doubling_at_true_exponent(alpha):
    g, W, sets = _op_sets(alpha, 512)
    _, beta, _ = doubling_exponent(W, 2.0, dyadic_family(g))
    rep = strong_doubling_check(sets, beta=beta, p=2.0)
    # at the measured exponent the envelope absorbs all growth
    assert rep["C"] <= 1.0 + 1e-9
    assert rep["stable"]
    assert rep["C_enriched"] <= 1.0 + 1e-9


def test_strong_doubling_detects_halved_exponent():
    g, W, sets = _op_sets(1.0, 512)
    _, beta, _ = doubling_exponent(W, 2.0, dyadic_family(g))
    good = strong_doubling_check(sets, beta=beta, p=2.0)
    bad = strong_doubling_check(sets, beta=beta / 2.0, p=2.0)
    assert bad["C"] >= 5.0 * good["C"]
    assert bad["C_enriched"] >= bad["C"] * 0.999
