import math

import numpy as np
import pytest

from modspace.cells import cell_partition, reducing_operators
from modspace.corpus import CorpusSpec, FAMILIES
from modspace.errors import DataError, HypothesisError
from modspace.grid import GridSpec
from modspace.norms import conjugate_exponent, sequence_norm
from modspace.verify import (EXPERIMENTS, _control_detected, _random_sequence,
                             _sequence_pairing, _zeroed_family,
                             equalizer_sequence, smoothing_constant,
                             verify_averaging_equivalence, verify_decomposition,
                             verify_duality, verify_embeddings,
                             verify_stft_equivalence,
                             verify_window_independence)
from modspace.weights import WeightSpec, make_weight
from modspace.windows import build_window_family

from reference import brute_bracket_sum

L = 8 * math.pi


# -- series constant --------------------------------------------------------

def test_smoothing_constant_closed_form():
    # sum over Z of (1+k^2)^{-1} telescopes to pi coth(pi)
    want = math.pi / math.tanh(math.pi)
    assert abs(smoothing_constant(1, 2.0) - want) < 1e-12


def test_smoothing_constant_matches_brute():
    got = smoothing_constant(1, 4.0)
    want = brute_bracket_sum(1, 4.0, 2000)
    assert abs(got - want) < 1e-8 * want
    got2 = smoothing_constant(2, 6.0)
    want2 = brute_bracket_sum(2, 6.0, 600)
    assert abs(got2 - want2) < 1e-7 * want2


@pytest.mark.parametrize("n,t", [(1, 1.0), (1, 0.5), (2, 2.0)])
def test_smoothing_divergence_refused(n, t):
    with pytest.raises(HypothesisError) as err:
        smoothing_constant(n, t)
    # the refusal quotes growing partial sums
    assert "S_1000" in str(err.value)


def test_smoothing_near_divergent_bails():
    with pytest.raises(HypothesisError):
        smoothing_constant(1, 1.1)


# -- shared machinery -------------------------------------------------------

def test_control_detected_levels():
    assert not _control_detected(1.0, 2.0, 1.05, 2.1)
    assert _control_detected(1.0, 2.0, 15.0, 30.0)
    assert _control_detected(1.0, 2.0, 0.05, 0.1)
    assert _control_detected(1.0, 2.0, 0.5, 60.0)
    assert _control_detected(1.0, 2.0, 0.5, math.inf)
    assert _control_detected(1.0, 2.0, 0.0, 2.0)


def test_zeroed_family_kills_origin_block(fam1):
    broken = _zeroed_family(fam1)
    for k in broken.indices:
        vals = broken.values[k]
        if max(abs(c) for c in k) <= 1:
            assert np.all(vals == 0.0)
        else:
            assert np.array_equal(vals, fam1.values[k])
    assert broken.profile.endswith("-broken")


def test_experiment_registry():
    for key in ("window-independence", "stft-equivalence",
                "averaging-equivalence", "decomposition", "embeddings",
                "duality"):
        assert key in EXPERIMENTS


def test_require_size_enforced(grid1, fam1, fam1_rc):
    small = CorpusSpec(seed=7, size=2, families=FAMILIES, band_limit=3.0)
    with pytest.raises(DataError):
        verify_window_independence(small, fam1, fam1_rc, {})


# -- experiment smoke runs --------------------------------------------------

def test_window_independence_report(grid1, fam1, fam1_rc, corpus_spec1):
    rep = verify_window_independence(corpus_spec1, fam1, fam1_rc,
                                     {"s": 0.0, "p": 2.0, "q": 2.0})
    assert rep["id"] == "window-independence"
    assert rep["pass"]
    assert not rep["negative_control"]["pass"]
    assert 0.0 < rep["C_min"] <= rep["C_max"]
    assert rep["band"] <= rep["envelope"]
    assert rep["refinement"]["N_doubled"]["pass"]
    assert rep["params"]["grid"]["N"] == 256


def test_window_independence_deterministic(fam1, fam1_rc, corpus_spec1):
    a = verify_window_independence(corpus_spec1, fam1, fam1_rc, {})
    b = verify_window_independence(corpus_spec1, fam1, fam1_rc, {})
    a.pop("runtime_s")
    b.pop("runtime_s")
    assert a == b


def test_stft_equivalence_report(grid1, corpus_spec1):
    rep = verify_stft_equivalence(corpus_spec1, {"grid": grid1, "K": 6})
    assert rep["pass"]
    assert rep["scaling_defect"] <= 1e-12
    assert not rep["negative_control"]["pass"]
    assert 0.0 < rep["C_min"] <= rep["C_max"]
    assert rep["band"] <= rep["envelope"]


def test_averaging_equivalence_report(grid1, corpus_spec1):
    rep = verify_averaging_equivalence(
        corpus_spec1, WeightSpec("identity"),
        {"grid": grid1, "K": 5, "r_convention": "unit"})
    assert rep["pass"]
    assert rep["k_uniform"]
    # identity weight, moment operators: both routes agree exactly
    assert abs(rep["C_min"] - 1.0) < 1e-9
    assert abs(rep["C_max"] - 1.0) < 1e-9
    assert not rep["negative_control"]["pass"]
    assert rep["refinement"]["N_doubled"]["pass"]
    assert rep["refinement"]["K_plus_4"]["pass"]


def test_decomposition_report(grid1, corpus_spec1):
    rep = verify_decomposition(corpus_spec1, {"grid": grid1, "K": 6})
    assert rep["pass"]
    assert rep["reconstruction_defect"] <= 1e-8
    assert rep["C_max"] <= rep["overlap_envelope"] + 1e-9
    assert not rep["negative_control"]["pass"]


def test_embeddings_report(grid1, corpus_spec1):
    rep = verify_embeddings(corpus_spec1, {"grid": grid1, "K": 6},
                            eps=1.5, q0=1.0, q1=2.0)
    assert rep["pass"]
    assert rep["monotonicity_violations"] == 0
    assert rep["C_max"] <= 1.0 + 1e-12
    assert rep["sandwich"]["left_max_ratio"] <= 1.0 + 1e-6
    assert not rep["negative_control"]["pass"]


def test_embeddings_divergent_eps_refused(grid1, corpus_spec1):
    with pytest.raises(HypothesisError):
        verify_embeddings(corpus_spec1, {"grid": grid1, "K": 6},
                          eps=0.5, q0=1.0, q1=2.0)


def test_duality_report(grid1, corpus_spec1):
    corpus_g = CorpusSpec(seed=13, size=3, families=FAMILIES, band_limit=3.0)
    rep = verify_duality(corpus_spec1, corpus_g, {
        "grid": grid1, "K": 6, "K_seq": 2,
        "weight_spec": WeightSpec("scalar-power", alpha=(0.5,), bracket=True),
    })
    assert rep["pass"]
    assert rep["C_max"] <= 1.0 + 1e-9
    assert abs(rep["saturation"] - 1.0) <= 1e-6
    assert not rep["negative_control"]["pass"]
    assert rep["modulation_level"]["pass"]


def test_duality_rejects_endpoint_exponents(grid1, corpus_spec1):
    corpus_g = CorpusSpec(seed=13, size=3, families=FAMILIES, band_limit=3.0)
    with pytest.raises(HypothesisError):
        verify_duality(corpus_spec1, corpus_g, {"grid": grid1, "p": 1.0})
    with pytest.raises(HypothesisError):
        verify_duality(corpus_spec1, corpus_g, {"grid": grid1, "q": math.inf})


# -- equalizer --------------------------------------------------------------

def _equalizer_setup(grid, wspec, p, ks, seed=5):
    weight = make_weight(wspec, grid)
    op_sets, inv_sets = {}, {}
    for k in ks:
        part = cell_partition(grid, k, r_convention="unit")
        op_sets[k] = reducing_operators(weight, part, p, seed=seed)
        inv_sets[k] = op_sets[k].inverse()
    return op_sets, inv_sets


@pytest.mark.parametrize("m,p,q", [(1, 2.0, 2.0), (2, 3.0, 1.5)])
def test_equalizer_saturates_exactly(m, p, q):
    grid = GridSpec(1, m, 128, L)
    wspec = WeightSpec("scalar-power", alpha=(0.5,), bracket=True) if m == 1 \
        else WeightSpec("rotated-diagonal", alpha=(0.0, 1.0), omega=(0.4,))
    ks = [(0,), (1,)]
    op_sets, inv_sets = _equalizer_setup(grid, wspec, p, ks)
    gseq = _random_sequence(grid, ks, np.random.default_rng(17))
    s = 0.5
    fseq = equalizer_sequence(gseq, op_sets, s, p, q)
    S = _sequence_pairing(fseq, gseq)
    nf = sequence_norm(fseq, s, p, q, op_sets)
    ng = sequence_norm(gseq, -s, conjugate_exponent(p), conjugate_exponent(q),
                       inv_sets)
    saturation = float(S.real) / (nf * ng)
    assert abs(saturation - 1.0) < 1e-10


def test_equalizer_wrong_exponent_misses():
    grid = GridSpec(1, 2, 128, L)
    p, q, s = 3.0, 2.0, 0.0
    ks = [(0,), (1,)]
    wspec = WeightSpec("rotated-diagonal", alpha=(0.0, 1.0), omega=(0.4,))
    op_sets, inv_sets = _equalizer_setup(grid, wspec, p, ks)
    gseq = _random_sequence(grid, ks, np.random.default_rng(23))
    pprime = conjugate_exponent(p)
    wrong = equalizer_sequence(gseq, op_sets, s, p, q,
                               inner_exponent=pprime - 1.0)
    S = _sequence_pairing(wrong, gseq)
    nf = sequence_norm(wrong, s, p, q, op_sets)
    ng = sequence_norm(gseq, -s, pprime, conjugate_exponent(q), inv_sets)
    saturation = float(S.real) / (nf * ng)
    assert abs(saturation - 1.0) > 0.01
