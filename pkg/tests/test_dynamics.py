import numpy as np
import pytest
from scipy.linalg import expm

from spinbus import dynamics
from spinbus.basis import sector_of_total_sz
from spinbus.dynamics import (
    KrylovPropagator,
    NoTransferChannelError,
    PropagationError,
    characteristic_time,
    effective_transfer,
    evolve,
    transfer_experiment,
)
from spinbus.effective import jeff_gap_splitting
from spinbus.eigensolve import dense_spectrum
from spinbus.hamiltonian import HamiltonianOperator
from spinbus.model import CouplingGraph, LadderSpec, attach_qubits, build_ladder


def _op(graph, sz=0):
    return HamiltonianOperator(graph, sector_of_total_sz(graph.n_sites, sz))


def test_eigenvector_picks_up_phase():
    op = _op(build_ladder(4, 1.0))
    res = dense_spectrum(op, 3)
    lam, v = res.eigenvalues[2], res.eigenvectors[:, 2]
    for dt in (0.3, 7.0, -2.5):
        out = evolve(op, v, dt)
        assert np.allclose(out, np.exp(-1j * lam * dt) * v, atol=1e-9)


def test_zero_step_is_identity(rng):
    op = _op(build_ladder(3, 1.0))
    psi = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    assert np.array_equal(evolve(op, psi, 0.0), psi)


def test_two_site_matches_expm(rng):
    graph = CouplingGraph(2, [(0, 1, 1.3)])
    op = _op(graph)
    H = op.to_dense()
    psi = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    psi /= np.linalg.norm(psi)
    ref = psi.copy()
    prop = KrylovPropagator(op, tol=1e-12)
    for _ in range(100):
        dt = rng.uniform(-5, 5)
        psi = prop.step(psi, dt)
        ref = expm(-1j * H * dt) @ ref
        assert np.linalg.norm(psi - ref) <= 1e-10


def test_ladder_matches_expm(rng):
    graph = attach_qubits(LadderSpec(2, 10.0, 1.0, "TypeB"))
    op = _op(graph)
    H = op.to_dense()
    psi = rng.standard_normal(op.dim) + 0j
    psi /= np.linalg.norm(psi)
    for dt in (0.01, 1.0, 25.0):
        assert np.linalg.norm(evolve(op, psi, dt) - expm(-1j * H * dt) @ psi) <= 1e-9


def test_subdivision_and_failure(monkeypatch, rng):
    op = _op(build_ladder(5, 1.0))
    psi = rng.standard_normal(op.dim) + 0j
    psi /= np.linalg.norm(psi)
    prop = KrylovPropagator(op, tol=1e-10, m_max=8)
    out = prop.step(psi, 3.0)
    assert prop.n_substeps > 1
    assert abs(np.linalg.norm(out) - 1) <= 1e-9
    monkeypatch.setattr(dynamics, "MAX_SUBDIVISIONS", 2)
    with pytest.raises(PropagationError):
        KrylovPropagator(op, tol=1e-10, m_max=4).step(psi, 50.0)


def test_bad_propagator_args():
    op = _op(build_ladder(2, 1.0))
    with pytest.raises(ValueError):
        KrylovPropagator(op, tol=0)
    with pytest.raises(ValueError):
        evolve(op, np.ones(op.dim + 1), 1.0)


def test_effective_transfer_values():
    j = -0.0025
    assert effective_transfer(j, 0.0) == 0.0
    assert effective_transfer(j, np.pi / abs(j)) == pytest.approx(1.0)
    assert effective_transfer(j, np.pi / (2 * abs(j))) == pytest.approx(0.5)


def test_decoupled_probe_never_transfers():
    cv = transfer_experiment(LadderSpec(2, 10.0, 0.0, "TypeB"), t_max=50.0, n_samples=40)
    assert np.all(cv.fidelity_b == 0.0)
    with pytest.raises(NoTransferChannelError):
        transfer_experiment(LadderSpec(2, 10.0, 0.0, "TypeB"))


def test_characteristic_time():
    spec = LadderSpec(2, 10.0, 1.0, "TypeB")
    t = characteristic_time(spec)
    assert t == pytest.approx(np.pi / abs(jeff_gap_splitting(spec).j_eff), rel=1e-12)
    # second-order value pi / (J0^2 / 4J) = 125.66; the full splitting is 6.6% larger
    assert t == pytest.approx(np.pi / 0.025, rel=0.08)
    t2 = characteristic_time(LadderSpec(2, 20.0, 1.0, "TypeB"))
    assert t2 / t == pytest.approx(2.0, rel=0.10)
    with pytest.raises(NoTransferChannelError, match="no transfer channel"):
        characteristic_time(spec.with_probe(0.0))


@pytest.mark.parametrize("n, conn", [(2, "TypeB"), (2, "TypeA")])
def test_transfer_invariants(n, conn):
    cv = transfer_experiment(LadderSpec(n, 40.0, 1.0, conn))
    assert cv.times.size == 200
    assert cv.times[-1] == pytest.approx(1.5 * np.pi / abs(cv.j_eff_used))
    assert np.all((cv.fidelity_b >= 0) & (cv.fidelity_b <= 1 + 1e-12))
    assert cv.t_star > 0
    assert cv.norm_drift <= 1e-9
    assert cv.energy_drift <= 1e-8 * abs(cv.energy)
    assert cv.peak_fidelity >= 0.95
    assert cv.t_star == pytest.approx(np.pi / abs(cv.j_eff_used), rel=0.10)


@pytest.mark.parametrize("n, conn", [(2, "TypeB"), (3, "TypeA")])
def test_effective_model_agreement(n, conn):
    devs = []
    for j0 in (1.0, 0.5):
        cv = transfer_experiment(LadderSpec(n, 40.0, j0, conn))
        early = cv.times <= cv.t_star
        devs.append(np.max(np.abs(cv.fidelity_b[early] - effective_transfer(cv.j_eff_used, cv.times[early]))))
    assert devs[0] <= 0.1
    assert devs[1] < devs[0]


def test_supplied_coupling_sets_grid():
    spec = LadderSpec(2, 40.0, 1.0, "TypeB")
    cv = transfer_experiment(spec, j_eff=-0.01, n_samples=5)
    assert cv.j_eff_used == -0.01
    assert cv.times[-1] == pytest.approx(1.5 * np.pi / 0.01)
    with pytest.raises(ValueError):
        transfer_experiment(spec, n_samples=1)
