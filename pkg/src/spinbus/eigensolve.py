"""Lowest eigenpairs per S^z sector and total-spin multiplet assembly."""
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .basis import sector_dim, sector_of_total_sz
from .hamiltonian import DENSE_LIMIT, HamiltonianOperator, spin_from_casimir
from . import kernels

DEFAULT_TOL = 1e-10
DEFAULT_MAX_MATVEC = 5000
DEGENERACY_TOL = 1e-8
MAX_LANCZOS_K = 20
# dense eigh above ~1000 states costs more than a Lanczos run
AUTO_DENSE_LIMIT = 1024


class ConvergenceError(RuntimeError):
    def __init__(self, message, best_residual=np.inf, n_matvec=0):
        super().__init__(f"{message} (best residual {best_residual:.3e} after {n_matvec} applies)")
        self.best_residual = best_residual
        self.n_matvec = n_matvec


class AmbiguousMultipletError(RuntimeError):
    pass


@dataclass
class SpectrumResult:
    sector_sz: Fraction
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    residuals: np.ndarray
    method: str = "dense"
    n_matvec: int = 0
    seed: int = None
    history: list = field(default_factory=list, repr=False)

    def __len__(self):
        return self.eigenvalues.size

    def vector(self, i):
        return self.eigenvectors[:, i]


def _residuals(op, vals, vecs):
    return np.array([np.linalg.norm(op.apply(vecs[:, i]) - vals[i] * vecs[:, i]) for i in range(vals.size)])


def dense_spectrum(op: HamiltonianOperator, k=None):
    """Full (or lowest ``k``) spectrum from the materialized sector matrix."""
    if op.dim > DENSE_LIMIT:
        raise ValueError(f"sector dimension {op.dim} too large for dense diagonalization (limit {DENSE_LIMIT})")
    vals, vecs = np.linalg.eigh(op.to_dense())
    if k is not None:
        vals, vecs = vals[:k], vecs[:, :k]
    return SpectrumResult(op.basis.total_sz, vals, vecs, _residuals(op, vals, vecs), "dense")


def _orthogonalize(x, blocks):
    # two passes of classical Gram-Schmidt
    for _ in range(2):
        for b in blocks:
            if b.shape[1]:
                x -= b @ (b.T @ x)
    return x


def _thick_restart_run(apply, locked, nw, v0, tol, ncv, budget, rng, history):
    """Lowest ``nw`` eigenpairs of H on the complement of ``locked``.

    Keeps V and W = HV so the projected matrix and the Ritz residuals are
    exact; restarts keep the lowest Ritz vectors.
    """
    n = v0.size
    avail = n - locked.shape[1]
    m = min(avail, ncv)
    nw = min(nw, avail)
    V = np.empty((n, m))
    W = np.empty((n, m))

    x = _orthogonalize(v0.copy(), [locked])
    x /= np.linalg.norm(x)
    j = 0
    used = 0
    best = np.inf
    while True:
        while j < m:
            V[:, j] = x
            W[:, j] = apply(x)
            used += 1
            j += 1
            if j == m:
                break
            x = _orthogonalize(W[:, j - 1].copy(), [locked, V[:, :j]])
            beta = np.linalg.norm(x)
            if beta <= 1e-12 * max(1.0, np.linalg.norm(W[:, j - 1])):
                # invariant subspace reached; keep growing from a random direction
                x = _orthogonalize(rng.standard_normal(n), [locked, V[:, :j]])
                beta = np.linalg.norm(x)
            x /= beta

        T = V[:, :j].T @ W[:, :j]
        theta, Y = np.linalg.eigh(0.5 * (T + T.T))
        X = V[:, :j] @ Y[:, :nw]
        HX = W[:, :j] @ Y[:, :nw]
        R = HX - X * theta[:nw]
        res = np.linalg.norm(R, axis=0)
        scale = np.maximum(1.0, np.abs(theta[:nw]))
        history.append(float(theta[0]))
        best = min(best, float(np.max(res / scale)))
        done = res <= tol * scale
        if np.all(done) or j == avail:
            return theta[:nw], X, res, used
        if used >= budget:
            raise ConvergenceError("Lanczos did not converge", best, used)

        p = min(j - 1, max(nw + 5, m // 2))
        V[:, :p] = V[:, :j] @ Y[:, :p]
        W[:, :p] = W[:, :j] @ Y[:, :p]
        first = int(np.flatnonzero(~done)[0])
        x = _orthogonalize(R[:, first].copy(), [locked, V[:, :p]])
        nrm = np.linalg.norm(x)
        if nrm <= 1e-14 * scale[first]:
            x = _orthogonalize(rng.standard_normal(n), [locked, V[:, :p]])
            nrm = np.linalg.norm(x)
        x /= nrm
        j = p


def lanczos_lowest(op: HamiltonianOperator, k=1, tol=DEFAULT_TOL, seed=0,
                   max_matvec=DEFAULT_MAX_MATVEC, ncv=None):
    """``k`` lowest eigenpairs by thick-restart Lanczos with full reorthogonalization.

    Converged pairs are locked; a further run from a fresh random vector,
    orthogonal to everything locked, must not find anything below the k-th
    value. This catches degenerate partners a single Krylov space cannot see.
    """
    n = op.dim
    if not 1 <= k <= min(n, MAX_LANCZOS_K):
        raise ValueError(f"k must be in 1..{min(n, MAX_LANCZOS_K)}, got {k}")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    ncv = ncv or max(2 * k + 20, 40)
    rng = np.random.default_rng(seed)
    locked = np.empty((n, 0))
    vals, res = [], []
    used = 0
    history = []
    while True:
        avail = n - locked.shape[1]
        if avail == 0:
            break
        want = k - len(vals) if len(vals) < k else 1
        try:
            th, X, r, u = _thick_restart_run(op.apply, locked, want, rng.standard_normal(n), tol,
                                              ncv, max_matvec - used, rng, history)
        except ConvergenceError as exc:
            raise ConvergenceError("Lanczos did not converge", exc.best_residual, used + exc.n_matvec) from None
        used += u
        if len(vals) >= k:
            kth = sorted(vals)[k - 1]
            if th[0] >= kth - tol * max(1.0, abs(kth)):
                break
            th, X, r = th[:1], X[:, :1], r[:1]
        vals.extend(th.tolist())
        res.extend(r.tolist())
        locked = np.hstack([locked, X])
        if used >= max_matvec:
            raise ConvergenceError("matvec budget exhausted during verification", max(res), used)

    order = np.argsort(vals, kind="stable")[:k]
    return SpectrumResult(op.basis.total_sz, np.asarray(vals)[order], locked[:, order],
                          np.asarray(res)[order], "lanczos", used, seed, history)


def lowest(op, k=1, tol=DEFAULT_TOL, seed=0, max_matvec=DEFAULT_MAX_MATVEC, dense_limit=AUTO_DENSE_LIMIT):
    """Dense up to ``dense_limit`` states, Lanczos above."""
    k = min(k, op.dim)
    if op.dim <= dense_limit:
        return dense_spectrum(op, k)
    return lanczos_lowest(op, k, tol, seed, max_matvec)


# --------------------------------------------------------------------------
# multiplets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Level:
    energy: float
    spin: float
    degeneracy: int


@dataclass
class MultipletReport:
    ground_energy: float
    ground_spin: float
    gap: float
    level_table: list
    first_excited_spin: float = None
    sectors: dict = field(default_factory=dict, repr=False)
    casimir: dict = field(default_factory=dict, repr=False)

    def lowest_with_spin(self, spin):
        for lvl in self.level_table:
            if lvl.spin == spin:
                return lvl.energy
        raise LookupError(f"no spin-{spin} level among the computed levels")


def _clusters(vals, tol):
    groups, start = [], 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > tol:
            groups.append(list(range(start, i)))
            start = i
    return groups


def _casimir_block(vecs, basis):
    """Eigenvalues of S^2 restricted to the span of ``vecs``."""
    m = float(basis.total_sz)
    if basis.n_up == basis.n_sites:
        return np.full(vecs.shape[1], m * (m + 1))
    upper = basis.neighbour(+1)
    raised = np.column_stack([
        kernels.raise_total(basis.states, upper.states, basis.n_sites, np.ascontiguousarray(vecs[:, i]))
        for i in range(vecs.shape[1])
    ])
    gram = raised.T @ raised + m * (m + 1) * (vecs.T @ vecs)
    return np.linalg.eigvalsh(0.5 * (gram + gram.T))


def _system_graph(system):
    from .model import CouplingGraph, attach_qubits

    if isinstance(system, CouplingGraph):
        return system
    return attach_qubits(system)


def ground_multiplet(system, n_levels=4, tol=DEFAULT_TOL, seed=0, max_matvec=DEFAULT_MAX_MATVEC,
                     dense_limit=AUTO_DENSE_LIMIT):
    """Label the lowest levels by total spin.

    ``system`` is a :class:`LadderSpec` (full ladder plus qubits) or any
    :class:`CouplingGraph`. The sectors ``m0, m0+1, m0+2`` are solved, the
    lowest ``m0`` levels get spins from the S^2 Casimir, and those spins must
    agree with how many copies of each level the higher sectors contain.
    """
    graph = _system_graph(system)
    n = graph.n_sites
    m0 = Fraction(n % 2, 2)
    deg_tol = DEGENERACY_TOL * graph.energy_scale()

    sectors = {}
    wanted = {m0: n_levels, m0 + 1: max(2, n_levels - 1), m0 + 2: 1}
    for m, k in wanted.items():
        if sector_dim(n, m) == 0:
            continue
        op = HamiltonianOperator(graph, sector_of_total_sz(n, m))
        sectors[m] = lowest(op, k, tol, seed, max_matvec, dense_limit)

    # a degenerate level cut by the k-th eigenvalue cannot be labelled; drop it,
    # and ask for more levels while fewer than two complete ones remain
    base_op = HamiltonianOperator(graph, sector_of_total_sz(n, m0))
    k = wanted[m0]
    while True:
        base = sectors[m0]
        groups = _clusters(base.eigenvalues, deg_tol)
        if base.eigenvalues.size < base_op.dim:
            groups = groups[:-1]
        if len(groups) >= 2 or base.eigenvalues.size == base_op.dim or k >= MAX_LANCZOS_K:
            break
        k = min(k + 4, MAX_LANCZOS_K, base_op.dim)
        sectors[m0] = lowest(base_op, k, tol, seed, max_matvec, dense_limit)
    if not groups:
        raise AmbiguousMultipletError(f"ground level is degenerate beyond the {k} computed states")

    vals = base.eigenvalues
    levels, casimir = [], {}
    for group in groups:
        energy = float(np.mean(vals[group]))
        s2 = _casimir_block(base.eigenvectors[:, group], sector_of_total_sz(n, m0))
        spins = sorted(spin_from_casimir(x) for x in s2)
        for x, s in zip(np.sort(s2), spins):
            if abs(x - s * (s + 1)) > 1e-6:
                raise AmbiguousMultipletError(f"<S^2> = {x:.8f} at E = {energy:.10f} is not S(S+1)")
        casimir[energy] = np.sort(s2)
        for m, res in sectors.items():
            if m == m0:
                continue
            expected = sum(1 for s in spins if s >= m)
            found = int(np.sum(np.abs(res.eigenvalues - energy) <= deg_tol))
            full = res.eigenvalues.size == sector_dim(n, m)
            reliable = full or energy < res.eigenvalues[-1] - deg_tol
            if reliable and found != expected:
                raise AmbiguousMultipletError(
                    f"level E = {energy:.10f}: Casimir spins {spins} imply {expected} copies in "
                    f"S^z = {m}, found {found}"
                )
        levels.extend(Level(energy, s, int(round(2 * s + 1))) for s in spins)

    ground = levels[0]
    excited = next((lvl for lvl in levels if lvl.energy > ground.energy + deg_tol), None)
    return MultipletReport(
        ground_energy=ground.energy,
        ground_spin=ground.spin,
        gap=(excited.energy - ground.energy) if excited else float("nan"),
        level_table=levels,
        first_excited_spin=excited.spin if excited else None,
        sectors=sectors,
        casimir=casimir,
    )
