from fractions import Fraction

import numpy as np
import pytest
from scipy.sparse.linalg import eigsh

from spinbus.basis import sector_of_total_sz
from spinbus.eigensolve import (
    ConvergenceError,
    dense_spectrum,
    ground_multiplet,
    lanczos_lowest,
    lowest,
)
from spinbus.hamiltonian import HamiltonianOperator
from spinbus.model import Connection, CouplingGraph, LadderSpec, attach_qubits, build_ladder, predicted_ground_spin

from conftest import kron_hamiltonian


def _op(graph, sz=0):
    return HamiltonianOperator(graph, sector_of_total_sz(graph.n_sites, sz))


def test_dense_two_site():
    res = dense_spectrum(_op(CouplingGraph(2, [(0, 1, 1.0)])))
    assert np.allclose(res.eigenvalues, [-0.75, 0.25])
    assert np.all(res.residuals < 1e-14)


def test_dense_three_site_chain_all_sectors():
    g = CouplingGraph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    levels = sorted(np.concatenate([dense_spectrum(_op(g, m)).eigenvalues
                                    for m in (Fraction(-3, 2), Fraction(-1, 2), Fraction(1, 2), Fraction(3, 2))]))
    # S=1/2 doublets at -1 and 0, S=3/2 quartet at 1/2
    assert np.allclose(levels, [-1, -1, 0, 0, 0.5, 0.5, 0.5, 0.5])


def test_dense_limit():
    with pytest.raises(ValueError):
        dense_spectrum(_op(build_ladder(8, 1.0)))


@pytest.mark.parametrize("graph", [
    build_ladder(5, 1.0),
    build_ladder(6, 1.0),
    attach_qubits(LadderSpec(3, 10.0, 1.0, "TypeA")),
    attach_qubits(LadderSpec(4, 10.0, 1.0, "TypeB")),
    attach_qubits(LadderSpec(5, 40.0, 1.0, "TypeA")),
])
def test_lanczos_matches_dense(graph):
    op = _op(graph)
    k = min(6, op.dim)
    lz = lanczos_lowest(op, k, tol=1e-10, seed=3)
    dn = dense_spectrum(op, k)
    assert np.max(np.abs(lz.eigenvalues - dn.eigenvalues)) <= 1e-10
    for lam, v, r in zip(lz.eigenvalues, lz.eigenvectors.T, lz.residuals):
        true_r = np.linalg.norm(op.apply(v) - lam * v)
        assert true_r <= 1e-10 * max(1.0, abs(lam))
        assert r == pytest.approx(true_r, rel=1e-3, abs=1e-13)


def test_lanczos_vs_arpack_large_sector():
    op = _op(build_ladder(8, 1.0))
    assert op.dim == 12870
    lz = lanczos_lowest(op, 3, tol=1e-10)
    ref = np.sort(eigsh(op.to_sparse(), k=3, which="SA", tol=1e-12)[0])
    assert np.max(np.abs(lz.eigenvalues - ref)) <= 1e-9


def test_degenerate_triplet_resolved():
    # N=3 TypeA: triplet ground state; S^z = 1 holds its +1 partner, and S^z = 0
    # must find both the m=0 member and the rest of the spectrum without skipping
    spec = LadderSpec(3, 10.0, 1.0, "TypeA")
    g = attach_qubits(spec)
    dense = dense_spectrum(_op(g), 4).eigenvalues
    lz = lanczos_lowest(_op(g), 4, tol=1e-10, seed=1).eigenvalues
    assert np.max(np.abs(lz - dense)) <= 1e-10
    e1 = lanczos_lowest(_op(g, 1), 1, tol=1e-10).eigenvalues[0]
    assert e1 == pytest.approx(dense[0], abs=1e-9)


def test_exactly_degenerate_pair_found():
    # two decoupled identical dimers: S^z = 0 ground state is doubly degenerate
    g = CouplingGraph(4, [(0, 1, 1.0), (2, 3, 1.0)])
    lz = lanczos_lowest(_op(g), 3, tol=1e-10, ncv=4)
    assert np.allclose(lz.eigenvalues, dense_spectrum(_op(g), 3).eigenvalues, atol=1e-10)


def test_history_is_monotone():
    lz = lanczos_lowest(_op(build_ladder(6, 1.0)), 1, tol=1e-10, ncv=12)
    h = np.array(lz.history)
    assert h.size > 1
    # Ritz values from nested restarted spaces are variational: they never increase
    first_run = h[: np.argmax(np.diff(h) > 1e-9) + 1] if np.any(np.diff(h) > 1e-9) else h
    assert np.all(np.diff(first_run) <= 1e-12)


def test_convergence_error():
    with pytest.raises(ConvergenceError) as err:
        lanczos_lowest(_op(build_ladder(7, 1.0)), 2, tol=1e-12, max_matvec=30, ncv=10)
    assert err.value.n_matvec >= 30
    assert np.isfinite(err.value.best_residual)


def test_bad_k():
    op = _op(build_ladder(2, 1.0))
    with pytest.raises(ValueError):
        lanczos_lowest(op, 0)
    with pytest.raises(ValueError):
        lanczos_lowest(op, 1, tol=0.0)


def test_lowest_dispatch():
    small = lowest(_op(build_ladder(4, 1.0)), 2)
    big = lowest(_op(build_ladder(7, 1.0)), 2)
    assert small.method == "dense"
    assert big.method == "lanczos"


def test_seed_reproducible():
    op = _op(build_ladder(6, 1.0))
    a = lanczos_lowest(op, 2, seed=7)
    b = lanczos_lowest(op, 2, seed=7)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_isolated_ladder_multiplet():
    rep = ground_multiplet(build_ladder(6, 1.0))
    assert rep.ground_spin == 0
    assert rep.first_excited_spin == 1
    # whole 2^12 Hilbert space from Pauli products: gap = second distinct level
    levels = np.unique(np.round(np.linalg.eigvalsh(kron_hamiltonian(build_ladder(6, 1.0))), 9))
    assert rep.ground_energy == pytest.approx(levels[0], abs=1e-9)
    assert rep.gap == pytest.approx(levels[1] - levels[0], abs=1e-9)


def test_full_system_multiplets():
    rep = ground_multiplet(LadderSpec(2, 10.0, 1.0, "TypeB"))
    assert rep.ground_spin == 1
    assert rep.level_table[0].degeneracy == 3
    assert rep.lowest_with_spin(0) - rep.lowest_with_spin(1) == pytest.approx(0.02665, abs=5e-5)
    with pytest.raises(LookupError):
        rep.lowest_with_spin(7)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("conn", list(Connection))
@pytest.mark.parametrize("j", [10.0, 40.0])
def test_lieb_parity_grid(n, conn, j):
    spec = LadderSpec(n, j, 1.0, conn)
    rep = ground_multiplet(spec)
    assert rep.ground_spin == predicted_ground_spin(spec)
    # dense cross-check of the ground-state spin in the S^z = 0 sector
    ops = {m: _op(attach_qubits(spec), m) for m in (0, 1)}
    e0 = dense_spectrum(ops[0], 1).eigenvalues[0]
    e1 = dense_spectrum(ops[1], 1).eigenvalues[0]
    triplet_ground = abs(e1 - e0) <= 1e-8 * j
    assert triplet_ground == (rep.ground_spin == 1)


def test_truncated_degenerate_level_not_labelled():
    # 4-site ring: S^z = 0 levels -2 (S=0), -1 (S=1), then three states at 0;
    # asking for 4 cuts the E = 0 level, which must be dropped, not mislabelled
    rep = ground_multiplet(build_ladder(2, 1.0), n_levels=4)
    assert [(lvl.energy, lvl.spin) for lvl in rep.level_table[:2]] == [(-2.0, 0), (-1.0, 1)]
    assert rep.gap == pytest.approx(1.0)
