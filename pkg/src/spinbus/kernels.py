"""Hot loops over bit-encoded basis states.

Every kernel exists twice: a numba ``@njit`` version and a plain numpy
version. Both perform the same floating-point operations in the same order,
so results agree bit for bit. The active pair is picked at import time by
:mod:`spinbus._accel`; both stay reachable through :data:`NUMBA` and
:data:`NUMPY` for tests and benchmarks.
"""
from math import comb
from types import SimpleNamespace

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

INDEX_DTYPE = np.int32


# --------------------------------------------------------------------------
# numba
# --------------------------------------------------------------------------

@njit(cache=True)
def _bsearch(a, x):
    lo = 0
    hi = a.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def _enumerate_nb(n_up, count):
    out = np.empty(count, np.int64)
    if n_up == 0:
        out[0] = 0
        return out
    v = (np.int64(1) << n_up) - 1
    for idx in range(count):
        out[idx] = v
        if idx + 1 == count:
            break
        # Gosper's hack: next integer with the same popcount
        c = v & -v
        r = v + c
        v = (((r ^ v) >> 2) // c) | r
    return out


@njit(cache=True)
def _bond_tables_nb(states, bi, bj, bJ):
    nb = bi.size
    d = states.size
    diag = np.zeros(d)
    flips = np.full((nb, d), -1, np.int32)
    for b in range(nb):
        i = bi[b]
        j = bj[b]
        mask = (np.int64(1) << i) | (np.int64(1) << j)
        q = 0.25 * bJ[b]
        for k in range(d):
            s = states[k]
            if ((s >> i) & 1) == ((s >> j) & 1):
                diag[k] += q
            else:
                diag[k] += -q
                flips[b, k] = _bsearch(states, s ^ mask)
    return diag, flips


@njit(cache=True)
def _apply_nb(diag, flips, half, v, out):
    nb, d = flips.shape
    for k in range(d):
        out[k] = diag[k] * v[k]
    for b in range(nb):
        h = half[b]
        row = flips[b]
        for k in range(d):
            p = row[k]
            if p >= 0:
                out[k] += h * v[p]
    return out


@njit(cache=True)
def _raise_nb(states, target, n_sites, v, out):
    # site-major, like the numpy version, so sums accumulate in the same order
    for i in range(n_sites):
        bit = np.int64(1) << i
        for k in range(states.size):
            s = states[k]
            if (s & bit) == 0:
                out[_bsearch(target, s | bit)] += v[k]
    return out


def _enumerate_numba(n_sites, n_up):
    return _enumerate_nb(n_up, comb(n_sites, n_up))


# --------------------------------------------------------------------------
# numpy
# --------------------------------------------------------------------------

def _enumerate_numpy(n_sites, n_up):
    # rows[j]: ascending states on the first m bits with popcount j
    rows = [np.zeros(1, np.int64)] + [np.empty(0, np.int64)] * n_up
    for m in range(n_sites):
        bit = np.int64(1) << m
        lowest_needed = n_up - (n_sites - m)
        new = [rows[0]]
        for j in range(1, n_up + 1):
            if j < lowest_needed:
                new.append(np.empty(0, np.int64))
            else:
                new.append(np.concatenate([rows[j], rows[j - 1] | bit]))
        rows = new
    return rows[n_up]


def _bond_tables_numpy(states, bi, bj, bJ):
    d = states.size
    diag = np.zeros(d)
    flips = np.full((bi.size, d), -1, INDEX_DTYPE)
    for b in range(bi.size):
        i, j = int(bi[b]), int(bj[b])
        q = 0.25 * bJ[b]
        parallel = ((states >> i) & 1) == ((states >> j) & 1)
        diag += np.where(parallel, q, -q)
        anti = np.flatnonzero(~parallel)
        flips[b, anti] = np.searchsorted(states, states[anti] ^ ((1 << i) | (1 << j)))
    return diag, flips


def _apply_numpy(diag, flips, half, v, out):
    np.multiply(diag, v, out=out)
    for b in range(flips.shape[0]):
        row = flips[b]
        hit = np.flatnonzero(row >= 0)
        out[hit] += half[b] * v[row[hit]]
    return out


def _raise_numpy(states, target, n_sites, v, out):
    for i in range(n_sites):
        down = np.flatnonzero(((states >> i) & 1) == 0)
        idx = np.searchsorted(target, states[down] | (1 << i))
        out[idx] += v[down]
    return out


NUMPY = SimpleNamespace(
    name="numpy",
    enumerate_states=_enumerate_numpy,
    bond_tables=_bond_tables_numpy,
    apply=_apply_numpy,
    raise_total=_raise_numpy,
)

NUMBA = SimpleNamespace(
    name="numba",
    enumerate_states=_enumerate_numba,
    bond_tables=_bond_tables_nb,
    apply=_apply_nb,
    raise_total=_raise_nb,
) if HAVE_NUMBA else None

ACTIVE = NUMBA if USE_NUMBA else NUMPY


def enumerate_states(n_sites, n_up):
    """Ascending int64 array of all ``n_sites``-bit integers with ``n_up`` set bits."""
    return ACTIVE.enumerate_states(n_sites, n_up)


def bond_tables(states, bond_i, bond_j, bond_J):
    """Diagonal of H and, per bond, the index of the spin-exchanged partner (-1 if none)."""
    return ACTIVE.bond_tables(states, bond_i, bond_j, bond_J)


def apply(diag, flips, half, v, out=None):
    if out is None:
        out = np.empty_like(v)
    return ACTIVE.apply(diag, flips, half, v, out)


def raise_total(states, target, n_sites, v):
    """Total S^+ applied to ``v``; ``target`` is the sector with one more up spin."""
    out = np.zeros(target.size, dtype=v.dtype)
    return ACTIVE.raise_total(states, target, n_sites, v, out)
