"""Fixed-S^z sectors as sorted arrays of bitmasks.

Bit ``k`` set means site ``k`` is up. States are stored in ascending order and
that order defines the vector index; lookups are binary searches.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from . import kernels

MAX_SITES = 30


class NotInSectorError(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class SectorBasis:
    n_sites: int
    n_up: int
    states: np.ndarray = field(repr=False)

    def __len__(self):
        return self.states.size

    @property
    def dim(self):
        return self.states.size

    @property
    def total_sz(self):
        return Fraction(2 * self.n_up - self.n_sites, 2)

    def index_of(self, s):
        """Position of bitmask ``s`` (scalar or array) in :attr:`states`."""
        arr = np.asarray(s, dtype=np.int64)
        idx = np.searchsorted(self.states, arr)
        ok = (idx < self.states.size) & (self.states[np.minimum(idx, self.states.size - 1)] == arr)
        if not np.all(ok):
            bad = arr[~ok] if arr.ndim else arr
            raise NotInSectorError(
                f"state(s) {np.atleast_1d(bad)[:5].tolist()} not in sector "
                f"(n_sites={self.n_sites}, n_up={self.n_up})"
            )
        return int(idx) if arr.ndim == 0 else idx

    def basis_vector(self, s):
        v = np.zeros(self.dim)
        v[self.index_of(s)] = 1.0
        return v

    def site_sz(self, site):
        """Diagonal of S^z_site over the sector (+-1/2)."""
        return ((self.states >> site) & 1) - 0.5

    def neighbour(self, delta):
        """Sector with ``n_up + delta`` up spins on the same sites."""
        return enumerate_sector(self.n_sites, self.n_up + delta)


def enumerate_sector(n_sites, n_up):
    if not 0 <= n_sites <= MAX_SITES:
        raise ValueError(f"n_sites must be in 0..{MAX_SITES}, got {n_sites}")
    if not 0 <= n_up <= n_sites:
        raise ValueError(f"n_up must be in 0..{n_sites}, got {n_up}")
    states = kernels.enumerate_states(int(n_sites), int(n_up))
    return SectorBasis(int(n_sites), int(n_up), states)


def sector_of_total_sz(n_sites, total_sz):
    twice = Fraction(total_sz) * 2
    if twice.denominator != 1:
        raise ValueError(f"total_sz must be a half-integer, got {total_sz}")
    n_up2 = n_sites + int(twice)
    if n_up2 % 2 or not 0 <= n_up2 // 2 <= n_sites:
        raise ValueError(f"total_sz={total_sz} unreachable with {n_sites} sites")
    return enumerate_sector(n_sites, n_up2 // 2)


def sector_dim(n_sites, total_sz):
    n_up2 = n_sites + int(Fraction(total_sz) * 2)
    if n_up2 % 2 or not 0 <= n_up2 // 2 <= n_sites:
        return 0
    return comb(n_sites, n_up2 // 2)
