"""Matrix-free Heisenberg operator on a fixed-S^z sector.

For a bond (i, j, J): parallel spins give +J/4 on the diagonal, antiparallel
spins give -J/4 on the diagonal and J/2 to the state with both bits flipped.
"""
import warnings

import numpy as np
from scipy.sparse.linalg import LinearOperator

from . import kernels
from .basis import SectorBasis
from .model import CouplingGraph

DENSE_LIMIT = 4096
NORM_TOL = 1e-10


class UnnormalizedStateWarning(UserWarning):
    pass


class HamiltonianOperator:
    """``H = sum_bonds J S_i.S_j`` restricted to one sector.

    The per-bond partner-index tables are built once on first use; they
    only cache the bit arithmetic and do not change results.
    """

    def __init__(self, graph: CouplingGraph, basis: SectorBasis):
        if graph.n_sites != basis.n_sites:
            raise ValueError(f"graph has {graph.n_sites} sites, basis has {basis.n_sites}")
        self.graph = graph
        self.basis = basis
        self._tables = None
        self.n_applies = 0

    @property
    def dim(self):
        return self.basis.dim

    @property
    def shape(self):
        return (self.dim, self.dim)

    def _build(self):
        if self._tables is None:
            bi, bj, bJ = self.graph.arrays()
            diag, flips = kernels.bond_tables(self.basis.states, bi, bj, bJ)
            self._tables = (diag, flips, 0.5 * bJ)
        return self._tables

    @property
    def diagonal(self):
        return self._build()[0]

    def apply(self, v, out=None):
        v = np.asarray(v)
        if v.shape != (self.dim,):
            raise ValueError(f"vector of shape {v.shape} does not match sector dimension {self.dim}")
        if not (np.issubdtype(v.dtype, np.floating) or np.issubdtype(v.dtype, np.complexfloating)):
            v = v.astype(float)
        diag, flips, half = self._build()
        self.n_applies += 1
        return kernels.apply(diag, flips, half, v, out)

    matvec = apply

    def __matmul__(self, v):
        return self.apply(v)

    def to_dense(self, max_dim=DENSE_LIMIT):
        if self.dim > max_dim:
            raise ValueError(f"sector dimension {self.dim} exceeds dense limit {max_dim}")
        diag, flips, half = self._build()
        m = np.diag(diag.copy())
        cols = np.arange(self.dim)
        for b in range(flips.shape[0]):
            hit = flips[b] >= 0
            m[cols[hit], flips[b][hit]] += half[b]
        return m

    def to_sparse(self):
        import scipy.sparse as sp

        diag, flips, half = self._build()
        rows, cols, vals = [np.arange(self.dim)], [np.arange(self.dim)], [diag]
        for b in range(flips.shape[0]):
            hit = np.flatnonzero(flips[b] >= 0)
            rows.append(hit)
            cols.append(flips[b][hit].astype(np.int64))
            vals.append(np.full(hit.size, half[b]))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=self.shape
        )

    def as_linear_operator(self, shift=0.0):
        def mv(x):
            x = np.ravel(x)
            y = self.apply(x)
            if shift:
                y -= shift * x
            return y

        return LinearOperator(self.shape, matvec=mv, rmatvec=mv, dtype=float)

    def expectation(self, v):
        return float(np.real(np.vdot(v, self.apply(v))))


def _check_norm(v):
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > NORM_TOL:
        warnings.warn(f"state norm {nrm:.3e} differs from 1", UnnormalizedStateWarning, stacklevel=3)


def _check_sites(basis, *sites):
    for s in sites:
        if not 0 <= s < basis.n_sites:
            raise ValueError(f"site {s} outside 0..{basis.n_sites - 1}")


def expectation_szsz(v, basis, site_a, site_b):
    _check_sites(basis, site_a, site_b)
    _check_norm(v)
    w = np.abs(np.asarray(v)) ** 2
    return float(w @ (basis.site_sz(site_a) * basis.site_sz(site_b)))


def expectation_sdots(v, basis, site_a, site_b):
    """``<v|S_a.S_b|v>``; for ``a == b`` this is 3/4."""
    _check_sites(basis, site_a, site_b)
    _check_norm(v)
    if site_a == site_b:
        return 0.75 * float(np.vdot(v, v).real)
    graph = CouplingGraph(basis.n_sites, ((site_a, site_b, 1.0),))
    return HamiltonianOperator(graph, basis).expectation(np.asarray(v))


def total_spin_squared(v, basis):
    """``<S_tot^2>`` via ``S^2 = S^- S^+ + Sz (Sz + 1)``, i.e. ``|S^+ v|^2 + m(m+1)``."""
    m = float(basis.total_sz)
    norm2 = float(np.vdot(v, v).real)
    if basis.n_up == basis.n_sites:
        return m * (m + 1) * norm2
    upper = basis.neighbour(+1)
    raised = kernels.raise_total(basis.states, upper.states, basis.n_sites, np.asarray(v))
    return float(np.vdot(raised, raised).real) + m * (m + 1) * norm2


def spin_from_casimir(s2):
    """Total spin S with ``S(S+1)`` closest to ``s2`` (half-integers allowed)."""
    s = 0.5 * (-1.0 + np.sqrt(1.0 + 4.0 * max(s2, 0.0)))
    twice = int(round(2 * s))
    return twice // 2 if twice % 2 == 0 else twice / 2
