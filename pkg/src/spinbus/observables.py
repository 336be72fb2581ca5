"""Two-qubit reduced density matrices and Bell-state weights."""
from dataclasses import dataclass, field

import numpy as np

from .basis import sector_of_total_sz
from .eigensolve import DEFAULT_TOL, lowest
from .hamiltonian import (
    HamiltonianOperator,
    _check_norm,
    _check_sites,
    expectation_sdots,
    expectation_szsz,
    spin_from_casimir,
    total_spin_squared,
)
from .model import attach_qubits

_S = 1 / np.sqrt(2)
# columns: |1,1>, |1,0>, |1,-1>, |0,0> in the |uu>, |ud>, |du>, |dd> basis
BELL = np.array([
    [1, 0, 0, 0],
    [0, _S, 0, _S],
    [0, _S, 0, -_S],
    [0, 0, 1, 0],
])


@dataclass(frozen=True)
class TwoQubitRDM:
    """Reduced state of two sites, basis ``|uu>, |ud>, |du>, |dd>`` (first site first)."""

    matrix: np.ndarray

    @property
    def populations(self):
        return np.real(np.diag(self.matrix))


@dataclass(frozen=True)
class BellWeights:
    c11_sq: float
    c10_sq: float
    c1m1_sq: float
    c00_sq: float

    def total(self):
        return self.c11_sq + self.c10_sq + self.c1m1_sq + self.c00_sq

    def as_tuple(self):
        return (self.c11_sq, self.c10_sq, self.c1m1_sq, self.c00_sq)

    def as_dict(self, prefix=""):
        return {f"{prefix}{k}": v for k, v in zip(("c11_sq", "c10_sq", "c1m1_sq", "c00_sq"), self.as_tuple())}


def _pair_code(states, site_a, site_b):
    # 0: uu, 1: ud, 2: du, 3: dd
    return 2 * (1 - ((states >> site_a) & 1)) + (1 - ((states >> site_b) & 1))


def reduce_to_qubits(v, basis, site_a, site_b):
    """Partial trace over every site except ``site_a`` and ``site_b``, off-diagonals kept."""
    _check_sites(basis, site_a, site_b)
    if site_a == site_b:
        raise ValueError("site_a and site_b must differ")
    _check_norm(v)
    v = np.asarray(v)
    states = basis.states
    code = _pair_code(states, site_a, site_b)
    rest = states & ~((1 << site_a) | (1 << site_b))
    rho = np.zeros((4, 4), dtype=np.result_type(v.dtype, float))
    for target in range(4):
        up_a = 1 - target // 2
        up_b = 1 - target % 2
        partner = rest | (up_a << site_a) | (up_b << site_b)
        idx = np.minimum(np.searchsorted(states, partner), states.size - 1)
        ok = np.flatnonzero(states[idx] == partner)
        contrib = v[ok] * np.conj(v[idx[ok]])
        for c in range(4):
            rho[c, target] += contrib[code[ok] == c].sum()
    return TwoQubitRDM(rho)


def bell_weights_formula(v, basis, site_a, site_b):
    """Weights from ``<1/4 + Sz_a Sz_b>`` and ``<1/4 - S_a.S_b>`` (S^z = 0 sector only)."""
    if 2 * basis.n_up != basis.n_sites:
        raise ValueError(f"state must lie in total S^z = 0, basis has S^z = {basis.total_sz}")
    c11 = 0.25 + expectation_szsz(v, basis, site_a, site_b)
    c00 = 0.25 - expectation_sdots(v, basis, site_a, site_b)
    return BellWeights(c11, 1.0 - 2.0 * c11 - c00, c11, c00)


def bell_weights_projector(rdm):
    w = np.real(np.einsum("ij,ik,kj->j", BELL, rdm.matrix, BELL))
    return BellWeights(*w.tolist())


@dataclass
class FidelityRow:
    state: str
    j: float
    m: int
    energy: float
    spec: object
    formula: BellWeights
    projector: BellWeights
    extra: dict = field(default_factory=dict)

    def as_record(self):
        rec = {"state": self.state, "j": self.j, "m": self.m}
        rec.update(self.spec.as_dict())
        rec["energy"] = self.energy
        rec.update(self.formula.as_dict())
        rec.update(self.projector.as_dict("proj_"))
        rec.update(self.extra)
        return rec


def fidelity_report(spec, tol=DEFAULT_TOL, seed=0, max_matvec=5000):
    """Bell weights of the two lowest S^z = 0 eigenstates of the full system."""
    graph = attach_qubits(spec)
    basis = sector_of_total_sz(graph.n_sites, 0)
    op = HamiltonianOperator(graph, basis)
    res = lowest(op, 2, tol, seed, max_matvec)
    a, b = spec.qubit_sites
    rows = []
    for i, label in enumerate(("ground", "first_excited")):
        v = res.eigenvectors[:, i]
        s2 = total_spin_squared(v, basis)
        rows.append(FidelityRow(
            state=label,
            j=spin_from_casimir(s2),
            m=0,
            energy=float(res.eigenvalues[i]),
            spec=spec,
            formula=bell_weights_formula(v, basis, a, b),
            projector=bell_weights_projector(reduce_to_qubits(v, basis, a, b)),
            extra={"s2": s2, "residual": float(res.residuals[i]), "n_matvec": res.n_matvec, "seed": seed},
        ))
    return rows
