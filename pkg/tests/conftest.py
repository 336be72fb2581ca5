import numpy as np
import pytest
import scipy.sparse as sp

from spinbus.model import CouplingGraph

# basis order |up>, |down>
SZ = np.array([[0.5, 0.0], [0.0, -0.5]])
SP = np.array([[0.0, 1.0], [0.0, 0.0]])
SM = SP.T

# criterion number -> (passed, message); filled by test_acceptance
ACCEPTANCE = {}


def _site_op(op, site, n):
    # site 0 is the least significant bit, i.e. the rightmost kron factor
    out = sp.identity(1, format="csr")
    for s in reversed(range(n)):
        out = sp.kron(out, sp.csr_matrix(op) if s == site else sp.identity(2), format="csr")
    return out


def kron_hamiltonian(graph: CouplingGraph):
    """Full 2^n matrix of sum J S_i.S_j from tensor products; index = bitstring, bit 1 = down."""
    n = graph.n_sites
    H = sp.csr_matrix((2 ** n, 2 ** n))
    for i, j, J in graph.bonds:
        H = H + J * (_site_op(SZ, i, n) @ _site_op(SZ, j, n)
                     + 0.5 * (_site_op(SP, i, n) @ _site_op(SM, j, n) + _site_op(SM, i, n) @ _site_op(SP, j, n)))
    return H.toarray()


def kron_sector_block(graph, basis):
    """Restrict the Kronecker oracle to a sector; spinbus states use bit 1 = up."""
    H = kron_hamiltonian(graph)
    full = (1 << graph.n_sites) - 1
    idx = full ^ basis.states  # flip convention
    return H[np.ix_(idx, idx)]


def random_graph(rng, n_sites, n_bonds):
    pairs = set()
    while len(pairs) < n_bonds:
        i, j = sorted(rng.choice(n_sites, 2, replace=False).tolist())
        pairs.add((i, j))
    return CouplingGraph(n_sites, [(i, j, float(rng.uniform(0.1, 3.0))) for i, j in sorted(pairs)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, msg = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {key}: {msg}")
