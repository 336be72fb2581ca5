"""Ladder geometry, probe qubits and the resulting coupling graphs.

Sites are indexed leg-major, ``site(leg, rung) = leg * n_rungs + rung``, and
the two probe qubits are appended last: qubit A is site ``2N``, qubit B is
site ``2N + 1``.
"""
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Connection(str, Enum):
    """How the probe qubits attach to the ladder ends.

    ``TYPE_A`` puts both attachment sites on leg 0 at opposite ends,
    ``TYPE_B`` uses the diagonal corners (leg 0, rung 0) and (leg 1, rung N-1).
    """

    TYPE_A = "TypeA"
    TYPE_B = "TypeB"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for member in cls:
            if key in (member.value.lower(), member.name.lower().replace("_", ""), member.value[-1].lower()):
                return member
        raise ValueError(f"unknown connection type {value!r}")

    @classmethod
    def auto_triplet(cls, n_rungs):
        """The connection whose ground state is a triplet for this ladder length."""
        return cls.TYPE_A if n_rungs % 2 == 1 else cls.TYPE_B


@dataclass(frozen=True)
class LadderSpec:
    n_rungs: int
    j_medium: float
    j_probe: float = 1.0
    connection: Connection = Connection.TYPE_A

    def __post_init__(self):
        if int(self.n_rungs) != self.n_rungs or self.n_rungs < 1:
            raise ValueError(f"n_rungs must be a positive integer, got {self.n_rungs!r}")
        if not self.j_medium > 0:
            raise ValueError(f"j_medium must be > 0, got {self.j_medium!r}")
        if not self.j_probe >= 0:
            raise ValueError(f"j_probe must be >= 0, got {self.j_probe!r}")
        object.__setattr__(self, "n_rungs", int(self.n_rungs))
        object.__setattr__(self, "j_medium", float(self.j_medium))
        object.__setattr__(self, "j_probe", float(self.j_probe))
        object.__setattr__(self, "connection", Connection.parse(self.connection))

    @property
    def distance(self):
        """Qubit separation L = N + 1."""
        return self.n_rungs + 1

    @property
    def n_sites(self):
        return 2 * self.n_rungs + 2

    @property
    def qubit_sites(self):
        return 2 * self.n_rungs, 2 * self.n_rungs + 1

    @property
    def attachment_sites(self):
        n = self.n_rungs
        left = site(0, 0, n)
        if self.connection is Connection.TYPE_A:
            right = site(0, n - 1, n)
        else:
            right = site(1, n - 1, n)
        return left, right

    def with_probe(self, j_probe):
        return LadderSpec(self.n_rungs, self.j_medium, j_probe, self.connection)

    def as_dict(self):
        return {
            "n_rungs": self.n_rungs,
            "distance": self.distance,
            "j_medium": self.j_medium,
            "j_probe": self.j_probe,
            "connection": self.connection.value,
        }


@dataclass(frozen=True)
class CouplingGraph:
    """Sites plus isotropic Heisenberg bonds ``(i, j, J)`` for ``H = sum J S_i.S_j``."""

    n_sites: int
    bonds: tuple

    def __post_init__(self):
        seen = set()
        clean = []
        for i, j, strength in self.bonds:
            i, j = int(i), int(j)
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise ValueError(f"bond ({i}, {j}) outside 0..{self.n_sites - 1}")
            if i == j:
                raise ValueError(f"self bond on site {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate bond {key}")
            seen.add(key)
            clean.append((i, j, float(strength)))
        object.__setattr__(self, "bonds", tuple(clean))

    def __len__(self):
        return len(self.bonds)

    def arrays(self):
        """Bond endpoints and strengths as ``(int64, int64, float64)`` arrays."""
        if not self.bonds:
            return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
        i, j, s = zip(*self.bonds)
        return np.array(i, np.int64), np.array(j, np.int64), np.array(s, float)

    def energy_scale(self):
        return max((abs(s) for _, _, s in self.bonds), default=1.0)

    def two_coloring(self):
        """BFS sublattice coloring, or ``None`` if some bond joins equal colors."""
        adj = [[] for _ in range(self.n_sites)]
        for i, j, _ in self.bonds:
            adj[i].append(j)
            adj[j].append(i)
        color = [-1] * self.n_sites
        for root in range(self.n_sites):
            if color[root] >= 0:
                continue
            color[root] = 0
            queue = deque([root])
            while queue:
                u = queue.popleft()
                for w in adj[u]:
                    if color[w] < 0:
                        color[w] = 1 - color[u]
                        queue.append(w)
                    elif color[w] == color[u]:
                        return None
        return color

    def is_bipartite(self):
        return self.two_coloring() is not None


def site(leg, rung, n_rungs):
    return leg * n_rungs + rung


def build_ladder(n_rungs, j):
    """Open two-leg ladder: rung bonds first, then leg 0 and leg 1 bonds."""
    if int(n_rungs) != n_rungs or n_rungs < 1:
        raise ValueError(f"n_rungs must be a positive integer, got {n_rungs!r}")
    if not j > 0:
        raise ValueError(f"j must be > 0, got {j!r}")
    n = int(n_rungs)
    bonds = [(site(0, r, n), site(1, r, n), j) for r in range(n)]
    for leg in (0, 1):
        bonds += [(site(leg, r, n), site(leg, r + 1, n), j) for r in range(n - 1)]
    return CouplingGraph(2 * n, tuple(bonds))


def medium_graph(spec):
    return build_ladder(spec.n_rungs, spec.j_medium)


def attach_qubits(spec):
    """Full graph: ladder bonds followed by (A, L, J0) and (B, R, J0)."""
    ladder = medium_graph(spec)
    a, b = spec.qubit_sites
    left, right = spec.attachment_sites
    bonds = ladder.bonds + ((a, left, spec.j_probe), (b, right, spec.j_probe))
    return CouplingGraph(spec.n_sites, bonds)


def predicted_ground_spin(spec):
    """Ground-state spin from the sublattice imbalance of the full bipartite graph."""
    n = spec.n_rungs
    colors = [(leg + rung) % 2 for leg in (0, 1) for rung in range(n)]
    for attach in spec.attachment_sites:
        colors.append(1 - colors[attach])
    n_odd = sum(colors)
    return abs(len(colors) - 2 * n_odd) // 2
