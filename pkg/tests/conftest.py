import math

import numpy as np
import pytest

from modspace.grid import GridSpec
from modspace.corpus import CorpusSpec, FAMILIES, generate_corpus
from modspace.windows import build_window_family


@pytest.fixture(scope="session")
def grid1():
    return GridSpec(n=1, m=1, N=256, L=8 * math.pi)


@pytest.fixture(scope="session")
def grid1m2():
    return GridSpec(n=1, m=2, N=256, L=8 * math.pi)


@pytest.fixture(scope="session")
def grid2():
    return GridSpec(n=2, m=1, N=64, L=2 * math.pi)


@pytest.fixture(scope="session")
def fam1(grid1):
    return build_window_family(grid1, 6, "smooth-bump")


@pytest.fixture(scope="session")
def fam1_rc(grid1):
    return build_window_family(grid1, 6, "raised-cosine")


@pytest.fixture(scope="session")
def fam2(grid2):
    return build_window_family(grid2, 3, "smooth-bump")


@pytest.fixture(scope="session")
def corpus_spec1():
    return CorpusSpec(seed=7, size=3, families=FAMILIES, band_limit=3.0)


@pytest.fixture(scope="session")
def corpus1(corpus_spec1, grid1):
    return generate_corpus(corpus_spec1, grid1)


@pytest.fixture(scope="session")
def corpus2(grid2):
    spec = CorpusSpec(seed=11, size=4, families=("random-bandlimited",),
                      band_limit=1.5)
    return generate_corpus(spec, grid2)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260822)
