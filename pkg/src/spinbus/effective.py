"""Effective qubit-qubit exchange induced through the ladder.

With the medium frozen in its singlet ground state, second-order
perturbation in the probe coupling gives ``H_eff = J_eff S_A.S_B + eps`` with

    T_KK' = <g| S^z_K Q (E_g - H_M)^-1 Q S^z_K' |g>
    J_eff = 2 J0^2 T_LR,    eps = (3/4) J0^2 (T_LL + T_RR)

Three routes are provided: an explicit sum over the dense medium spectrum, a
resolvent solve that never needs excited states, and the singlet-triplet
splitting of the full system.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.sparse.linalg import LinearOperator, minres

from .basis import sector_of_total_sz
from .eigensolve import DEFAULT_TOL, DEGENERACY_TOL, dense_spectrum, ground_multiplet, lowest
from .hamiltonian import DENSE_LIMIT, HamiltonianOperator
from .model import medium_graph

DEFAULT_SOLVER_TOL = 1e-10


class Method(str, Enum):
    SUM_OVER_STATES = "SumOverStates"
    RESOLVENT = "Resolvent"
    GAP_SPLITTING = "GapSplitting"


class SolverStagnationError(RuntimeError):
    pass


class DeflationError(RuntimeError):
    pass


@dataclass
class PerturbationResult:
    j_eff: float
    epsilon: float
    t_lr: float
    t_ll: float
    t_rr: float
    method: Method
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """4x4 matrix in the basis ``|1,1>, |1,0>, |1,-1>, |0,0>``."""

    matrix: np.ndarray
    j_eff: float
    epsilon: float

    def product_basis(self):
        """Same operator in ``|uu>, |ud>, |du>, |dd>`` (qubit A first)."""
        s = 1 / np.sqrt(2)
        u = np.array([
            [1, 0, 0, 0],
            [0, s, 0, s],
            [0, s, 0, -s],
            [0, 0, 1, 0],
        ])
        return u @ self.matrix @ u.T


def build_effective_hamiltonian(j_eff, epsilon):
    if not (np.isfinite(j_eff) and np.isfinite(epsilon)):
        raise ValueError("j_eff and epsilon must be finite")
    m = j_eff * np.diag([0.25, 0.25, 0.25, -0.75]) + epsilon * np.eye(4)
    return EffectiveHamiltonian(m, float(j_eff), float(epsilon))


def _couplings(spec, t_ll, t_rr, t_lr):
    j0sq = spec.j_probe ** 2
    return 2.0 * j0sq * t_lr, 0.75 * j0sq * (t_ll + t_rr)


def _medium_operator(spec):
    graph = medium_graph(spec)
    return HamiltonianOperator(graph, sector_of_total_sz(graph.n_sites, 0))


def jeff_sum_over_states(spec):
    """Explicit second-order sum over every excited S^z = 0 medium eigenstate."""
    op = _medium_operator(spec)
    if op.dim > DENSE_LIMIT:
        raise ValueError(
            f"medium sector dimension {op.dim} exceeds {DENSE_LIMIT}; use jeff_resolvent instead"
        )
    spec_res = dense_spectrum(op)
    vals, vecs = spec_res.eigenvalues, spec_res.eigenvectors
    tol = DEGENERACY_TOL * spec.j_medium
    n_ground = int(np.sum(vals - vals[0] <= tol))
    left, right = spec.attachment_sites
    e_g = vals[0]
    t = {"ll": 0.0, "rr": 0.0, "lr": 0.0}
    for g in range(n_ground):
        psi = vecs[:, g]
        amp_l = vecs[:, n_ground:].T @ (op.basis.site_sz(left) * psi)
        amp_r = vecs[:, n_ground:].T @ (op.basis.site_sz(right) * psi)
        denom = e_g - vals[n_ground:]
        t["ll"] += np.sum(amp_l * amp_l / denom) / n_ground
        t["rr"] += np.sum(amp_r * amp_r / denom) / n_ground
        t["lr"] += np.sum(amp_l * amp_r / denom) / n_ground
    j_eff, eps = _couplings(spec, t["ll"], t["rr"], t["lr"])
    return PerturbationResult(
        j_eff, eps, t["lr"], t["ll"], t["rr"], Method.SUM_OVER_STATES,
        {"ground_energy": float(e_g), "ground_degeneracy": n_ground, "n_states": int(vals.size)},
    )


def _solve_projected(op, e_g, ground, rhs, solver_tol, max_iter):
    """Solve ``Q (H - E_g) Q x = rhs`` for ``rhs`` in the range of Q."""

    def project(x):
        return x - ground @ (ground.T @ x)

    def mv(x):
        x = project(np.ravel(x))
        return project(op.apply(x) - e_g * x)

    a = LinearOperator(op.shape, matvec=mv, rmatvec=mv, dtype=float)
    iters = [0]

    def count(_):
        iters[0] += 1

    # scipy's stopping test is relative to |A||x| + |b|; restart until |Ax - b| <= tol |b|
    x = np.zeros_like(rhs)
    rel = 1.0
    info = 0
    bnorm = np.linalg.norm(rhs)
    for _ in range(6):
        x, info = minres(a, rhs, x0=x, rtol=0.1 * solver_tol, maxiter=max_iter, callback=count)
        x = project(x)
        ax = mv(x)
        rel = np.linalg.norm(ax - rhs) / bnorm
        if rel <= solver_tol or iters[0] >= max_iter:
            break
    if rel > solver_tol:
        raise SolverStagnationError(
            f"MINRES stopped with relative residual {rel:.3e} > {solver_tol:.1e} "
            f"after {iters[0]} iterations (info={info})"
        )
    return x, ax, iters[0], rel


def jeff_resolvent(spec, solver_tol=DEFAULT_SOLVER_TOL, seed=0, max_iter=5000, eig_tol=DEFAULT_TOL):
    """Second-order couplings from two projected linear solves on the medium.

    The ground multiplet is deflated explicitly. ``T`` is evaluated with the
    symmetric Galerkin form ``<b_K,x_K'> + <x_K,b_K'> - <x_K,A x_K'>``, whose
    error is quadratic in the solver residual.
    """
    if not solver_tol > 0:
        raise ValueError("solver_tol must be > 0")
    op = _medium_operator(spec)
    spectrum = lowest(op, min(3, op.dim), eig_tol, seed)
    vals = spectrum.eigenvalues
    tol = DEGENERACY_TOL * spec.j_medium
    n_ground = int(np.sum(vals - vals[0] <= tol))
    if n_ground == vals.size and vals.size < op.dim:
        spectrum = lowest(op, min(op.dim, n_ground + 4), eig_tol, seed)
        vals = spectrum.eigenvalues
        n_ground = int(np.sum(vals - vals[0] <= tol))
    e_g = float(vals[0])
    ground = spectrum.eigenvectors[:, :n_ground]
    if n_ground < op.dim:
        gap = float(vals[n_ground] - e_g)
        if gap < 1e3 * tol:
            raise DeflationError(
                f"lowest non-deflated level lies {gap:.3e} above the ground multiplet; "
                "the deflated space is too small and the resolvent is near-singular"
            )
    else:
        gap = float("inf")

    left, right = spec.attachment_sites
    t = {"ll": 0.0, "rr": 0.0, "lr": 0.0}
    iters = []
    for g in range(n_ground):
        psi = ground[:, g]
        b = {}
        for key, site_k in (("l", left), ("r", right)):
            v = op.basis.site_sz(site_k) * psi
            b[key] = v - ground @ (ground.T @ v)
        sol = {}
        for key in ("l", "r"):
            if np.linalg.norm(b[key]) == 0.0:
                sol[key] = (np.zeros_like(b[key]), np.zeros_like(b[key]))
                continue
            x, ax, it, _ = _solve_projected(op, e_g, ground, b[key], solver_tol, max_iter)
            sol[key] = (x, ax)
            iters.append(it)

        def pair(p, q):
            xp, axp = sol[p]
            xq, _ = sol[q]
            # (E_g - H)^-1 = -(H - E_g)^-1 on Q
            return -(b[p] @ xq + xp @ b[q] - axp @ xq)

        t["ll"] += pair("l", "l") / n_ground
        t["rr"] += pair("r", "r") / n_ground
        t["lr"] += pair("l", "r") / n_ground

    j_eff, eps = _couplings(spec, t["ll"], t["rr"], t["lr"])
    return PerturbationResult(
        j_eff, eps, t["lr"], t["ll"], t["rr"], Method.RESOLVENT,
        {
            "ground_energy": e_g,
            "ground_degeneracy": n_ground,
            "medium_gap": gap,
            "solver_iterations": iters,
            "eigen_matvec": spectrum.n_matvec,
            "seed": seed,
        },
    )


def jeff_gap_splitting(spec, tol=DEFAULT_TOL, seed=0, max_matvec=5000):
    """``E(lowest S=1) - E(lowest S=0)`` of the full system; negative if the triplet is lower."""
    if not spec.j_probe > 0:
        raise ValueError("gap splitting needs j_probe > 0")
    report = ground_multiplet(spec, tol=tol, seed=seed, max_matvec=max_matvec)
    e1 = report.lowest_with_spin(1)
    e0 = report.lowest_with_spin(0)
    return PerturbationResult(
        e1 - e0, float("nan"), float("nan"), float("nan"), float("nan"), Method.GAP_SPLITTING,
        {
            "triplet_energy": e1,
            "singlet_energy": e0,
            "ground_spin": report.ground_spin,
            "n_matvec": sum(r.n_matvec for r in report.sectors.values()),
            "seed": seed,
            "report": report,
        },
    )
