from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinbus.basis import NotInSectorError, enumerate_sector, sector_dim, sector_of_total_sz


def test_small_sectors():
    b = enumerate_sector(4, 2)
    assert b.states.tolist() == [0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]
    assert b.total_sz == 0
    assert enumerate_sector(3, 0).states.tolist() == [0]
    assert enumerate_sector(3, 3).states.tolist() == [7]


@pytest.mark.parametrize("n, m, dim", [(20, 0, 184756), (16, 0, 12870), (14, 0, 3432), (5, Fraction(1, 2), 10)])
def test_sector_sizes(n, m, dim):
    assert sector_of_total_sz(n, m).dim == dim
    assert sector_dim(n, m) == dim


def test_round_trip_large():
    b = sector_of_total_sz(20, 0)
    rng = np.random.default_rng(0)
    idx = rng.integers(0, b.dim, 10_000)
    assert np.array_equal(b.index_of(b.states[idx]), idx)
    assert b.index_of(int(b.states[123])) == 123
    assert np.all(np.diff(b.states) > 0)


@pytest.mark.parametrize("n", range(1, 15))
def test_sectors_partition_hilbert_space(n):
    total = 0
    seen = []
    for k in range(n + 1):
        b = enumerate_sector(n, k)
        assert b.dim == comb(n, k)
        assert all(bin(int(s)).count("1") == k for s in b.states[:50])
        total += b.dim
        seen.append(b.states)
    assert total == 2 ** n
    assert np.array_equal(np.sort(np.concatenate(seen)), np.arange(2 ** n))


def test_wrong_popcount_rejected():
    b = enumerate_sector(6, 3)
    with pytest.raises(NotInSectorError):
        b.index_of(0b000011)
    with pytest.raises(KeyError):
        b.index_of(np.array([0b000111, 0b111111]))


@pytest.mark.parametrize("args", [(-1, 0), (31, 3), (4, 5), (4, -1)])
def test_enumerate_bad_args(args):
    with pytest.raises(ValueError):
        enumerate_sector(*args)


@pytest.mark.parametrize("n, m", [(4, Fraction(1, 2)), (5, 0), (4, 3), (4, "1/3")])
def test_unreachable_sz(n, m):
    with pytest.raises(ValueError):
        sector_of_total_sz(n, m)
    if n == 5 or m == 3:
        assert sector_dim(n, m) == 0


def test_site_sz_and_neighbour():
    b = enumerate_sector(3, 1)
    assert b.site_sz(0).tolist() == [0.5, -0.5, -0.5]
    assert b.neighbour(+1).n_up == 2
    assert np.array_equal(b.basis_vector(0b010), [0, 1, 0])


@given(st.integers(1, 16).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_index_of_inverts_states(nk):
    n, k = nk
    b = enumerate_sector(n, k)
    assert np.array_equal(b.index_of(b.states), np.arange(b.dim))
