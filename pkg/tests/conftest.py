"""Shared generators for seeded random test corpora."""

import numpy as np
import pytest

from biquad.partsym import XSymmetricData


def sym_uniform(rng: np.random.Generator, n: int, zero_diag: bool = False) -> np.ndarray:
    """Symmetric matrix with entries uniform on [-1, 1] (upper triangle
    drawn, mirrored)."""
    u = rng.uniform(-1.0, 1.0, (n, n))
    s = np.triu(u) + np.triu(u, 1).T
    if zero_diag:
        np.fill_diagonal(s, 0.0)
    return s


def random_monic(rng: np.random.Generator, m: int, n: int) -> XSymmetricData:
    a = sym_uniform(rng, n)
    b = sym_uniform(rng, n, zero_diag=True)
    return XSymmetricData(m, np.ones(n), a, b)


def monic_corpus(count: int, seed: int, m_range=(2, 6), n_range=(2, 5)) -> list[XSymmetricData]:
    """Seeded mixed PSD / not-PSD monic instances with uniform coefficients."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        out.append(random_monic(rng, m, n))
    return out


@pytest.fixture(scope="session")
def corpus_200():
    return monic_corpus(200, seed=1)
