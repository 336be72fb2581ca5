"""Real-time evolution and qubit-to-qubit transfer.

Protocol: the medium starts in its exact ground state, qubit A is up and
qubit B is down. The readout is the up-population of qubit B. Time is in
units of 1/energy (hbar = 1).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .basis import sector_of_total_sz
from .eigensolve import DEFAULT_TOL, lowest
from .effective import jeff_gap_splitting
from .hamiltonian import HamiltonianOperator
from .model import attach_qubits, medium_graph

DEFAULT_M_MAX = 60
MAX_SUBDIVISIONS = 20
MIN_JEFF = 1e-14


class PropagationError(RuntimeError):
    pass


class NoTransferChannelError(ValueError):
    pass


def _tridiag_eigh(alpha, beta):
    try:
        return eigh_tridiagonal(np.array(alpha), np.array(beta))
    except np.linalg.LinAlgError:
        # stemr occasionally gives up on clustered Ritz values
        T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
        return np.linalg.eigh(T)


class KrylovPropagator:
    """``exp(-i H dt) psi`` from a Lanczos basis grown until the error estimate meets ``tol``.

    A substep that does not converge within ``m_max`` vectors is halved and
    retried; a step fails once its substeps would be shorter than
    ``dt / 2**MAX_SUBDIVISIONS``. After a run of successful substeps the
    length grows again; it also carries over to the next call.
    """

    GROW = 1.25
    PATIENCE = 8

    def __init__(self, op, tol=1e-10, m_max=DEFAULT_M_MAX):
        if not tol > 0:
            raise ValueError("tol must be > 0")
        if m_max < 2:
            raise ValueError("m_max must be >= 2")
        self.op = op
        self.tol = tol
        self.m_max = m_max
        self._V = np.empty((m_max + 1, op.dim), dtype=complex)
        self._h = None
        self._streak = 0
        self.n_matvec = 0
        self.n_substeps = 0

    def _try(self, psi, dt):
        """(result, vectors used), or (None, m_max) when the estimate never meets tol."""
        beta0 = np.linalg.norm(psi)
        if beta0 == 0.0:
            return psi.copy(), 0
        V = self._V
        V[0] = psi / beta0
        alpha, beta = [], []
        for j in range(self.m_max):
            w = self.op.apply(V[j])
            self.n_matvec += 1
            a = np.vdot(V[j], w).real
            w -= a * V[j]
            if j:
                w -= beta[-1] * V[j - 1]
            # local reorthogonalization only: full Gram-Schmidt costs 4x the apply here
            # and exp(-iH dt) is insensitive to the slow loss of global orthogonality
            w -= np.vdot(V[j], w) * V[j]
            b = np.linalg.norm(w)
            alpha.append(a)
            breakdown = b <= 1e-14 * max(1.0, abs(a))
            if j >= 8 and j % 4 != 3 and j < self.m_max - 1 and not breakdown:
                # the error estimate is only checked every fourth vector past the first few
                beta.append(b)
                V[j + 1] = w / b
                continue
            if j == 0:
                theta, Y = np.array(alpha), np.ones((1, 1))
            else:
                theta, Y = _tridiag_eigh(alpha, beta)
            coeff = Y @ (np.exp(-1j * dt * theta) * Y[0])
            err = b * abs(coeff[-1]) * beta0
            if err <= self.tol or breakdown:
                return beta0 * (coeff @ V[: j + 1]), j + 1
            beta.append(b)
            V[j + 1] = w / b
        return None, self.m_max

    def step(self, psi, dt):
        out = np.array(psi, dtype=complex)
        if dt == 0:
            return out
        h_min = abs(dt) / 2 ** MAX_SUBDIVISIONS
        h = abs(dt) if self._h is None else min(self._h, abs(dt))
        sign = np.sign(dt)
        remaining = abs(dt)
        while remaining > 1e-15 * abs(dt):
            # equal substeps no longer than h cover what is left of dt
            hh = remaining / np.ceil(remaining / h * (1 - 1e-12))
            new, used = self._try(out, sign * hh)
            if new is None:
                h = 0.5 * hh
                if h < h_min:
                    raise PropagationError(
                        f"Krylov step dt={dt} failed after {MAX_SUBDIVISIONS} subdivisions")
                continue
            out = new
            self.n_substeps += 1
            remaining -= hh
            self._h = h
            self._streak = self._streak + 1 if used < self.m_max else 0
            if self._streak >= self.PATIENCE:
                # a failed attempt costs m_max applies, so probe longer substeps rarely
                h *= self.GROW
                self._streak = 0
        return out


def evolve(op, psi, dt, tol=1e-10, m_max=DEFAULT_M_MAX):
    """One-off ``exp(-i H dt) psi``."""
    psi = np.asarray(psi)
    if psi.shape != (op.dim,):
        raise ValueError(f"state of shape {psi.shape} does not match sector dimension {op.dim}")
    return KrylovPropagator(op, tol, m_max).step(psi, float(dt))


def effective_transfer(j_eff, t):
    """Up-population reaching B under ``J_eff S_A.S_B`` from ``|up,down>``."""
    return np.sin(0.5 * np.asarray(j_eff) * np.asarray(t)) ** 2


def characteristic_time(spec, tol=DEFAULT_TOL, seed=0):
    if spec.j_probe == 0:
        raise NoTransferChannelError("no transfer channel: qubits are decoupled (j_probe = 0)")
    j_eff = jeff_gap_splitting(spec, tol=tol, seed=seed).j_eff
    if abs(j_eff) < MIN_JEFF:
        raise NoTransferChannelError(f"no transfer channel: |j_eff| = {abs(j_eff):.1e}")
    return np.pi / abs(j_eff)


@dataclass
class TransferCurve:
    times: np.ndarray
    fidelity_b: np.ndarray
    j_eff_used: float
    t_star: float
    spec: object = None
    norm_drift: float = 0.0
    energy_drift: float = 0.0
    energy: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def peak_fidelity(self):
        return float(np.max(self.fidelity_b))


def initial_transfer_state(spec, tol=DEFAULT_TOL, seed=0):
    """``|up>_A (x) |ground>_M (x) |down>_B`` in the full S^z = 0 sector."""
    ladder = medium_graph(spec)
    m_basis = sector_of_total_sz(ladder.n_sites, 0)
    ground = lowest(HamiltonianOperator(ladder, m_basis), 1, tol, seed).eigenvectors[:, 0]
    full = sector_of_total_sz(spec.n_sites, 0)
    a, _ = spec.qubit_sites
    psi = np.zeros(full.dim, dtype=complex)
    psi[full.index_of(m_basis.states | (1 << a))] = ground
    return full, psi


def transfer_experiment(spec, t_max=None, n_samples=200, tol=1e-10, seed=0, eig_tol=DEFAULT_TOL, j_eff=None,
                        m_max=DEFAULT_M_MAX):
    """Evolve under the full Hamiltonian and record B's up-population on a uniform grid."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if j_eff is None and spec.j_probe > 0:
        j_eff = jeff_gap_splitting(spec, tol=eig_tol, seed=seed).j_eff
    j_eff = 0.0 if j_eff is None else float(j_eff)
    if t_max is None:
        if abs(j_eff) < MIN_JEFF:
            raise NoTransferChannelError("t_max is required when there is no transfer channel")
        t_max = 1.5 * np.pi / abs(j_eff)

    basis, psi = initial_transfer_state(spec, eig_tol, seed)
    op = HamiltonianOperator(attach_qubits(spec), basis)
    _, b = spec.qubit_sites
    b_up = ((basis.states >> b) & 1).astype(bool)

    times = np.linspace(0.0, float(t_max), n_samples)
    prop = KrylovPropagator(op, tol, m_max)
    e0 = op.expectation(psi)
    fid = np.empty(n_samples)
    norm_drift = energy_drift = 0.0
    for i, t in enumerate(times):
        if i:
            psi = prop.step(psi, times[i] - times[i - 1])
        prob = np.abs(psi) ** 2
        fid[i] = prob[b_up].sum()
        norm_drift = max(norm_drift, abs(np.sqrt(prob.sum()) - 1.0))
        energy_drift = max(energy_drift, abs(op.expectation(psi) - e0))
    t_star = float(times[int(np.argmax(fid))])
    return TransferCurve(
        times, fid, j_eff, t_star, spec, norm_drift, energy_drift, e0,
        {"n_matvec": prop.n_matvec, "n_substeps": prop.n_substeps, "tol": tol, "seed": seed},
    )
