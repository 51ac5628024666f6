"""Treatment registry and consistency-mapping matrices.

Meta-population blip parameters are stored in the fixed layout
(psi_{21,0..Q}, psi_{31,0..Q}, ..., psi_{G1,0..Q}); every module indexes
against this single ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedNetworkError, MappingError


def build_U(arms: list[str], treatments: list[str]) -> np.ndarray:
    """Mapping from a study's blip contrasts to global contrasts.

    ``arms[0]`` is the study reference; ``treatments[0]`` is the global
    reference.  Rows correspond to non-reference arms; columns to global
    treatments 2..G.  Each row carries +1 in the arm treatment's column
    (none when the arm is the global reference itself), and the study
    reference's column is all -1 when it differs from the global reference.
    """
    if len(set(arms)) != len(arms):
        raise MappingError(f"duplicate arms {arms}")
    index = {t: i for i, t in enumerate(treatments)}
    for a in arms:
        if a not in index:
            raise MappingError(f"arm treatment {a!r} not in registry")
    g = len(treatments)
    u = np.zeros((len(arms) - 1, g - 1))
    ref = index[arms[0]]
    for row, a in enumerate(arms[1:]):
        col = index[a]
        if col != 0:  # the global reference treatment has no psi column
            u[row, col - 1] = 1.0
    if ref != 0:
        u[:, ref - 1] = -1.0
    return u


def build_V(u: np.ndarray, q: int) -> np.ndarray:
    """Kronecker expansion of U over the (Q+1) per-contrast coefficients."""
    return np.kron(u, np.eye(q + 1))


@dataclass
class TreatmentNetwork:
    """Global treatment registry; index 0 is the meta-population reference."""

    treatments: list[str]
    study_arms: dict[str, list[str]]
    q: int
    u_matrices: dict[str, np.ndarray] = field(init=False)

    def __post_init__(self):
        if len(set(self.treatments)) != len(self.treatments):
            raise MappingError("duplicate treatment ids in registry")
        self.u_matrices = {
            sid: build_U(arms, self.treatments) for sid, arms in self.study_arms.items()
        }
        self._check_connected()

    @property
    def g(self) -> int:
        return len(self.treatments)

    @property
    def n_psi(self) -> int:
        return (self.q + 1) * (self.g - 1)

    def v_matrix(self, study_id: str) -> np.ndarray:
        return build_V(self.u_matrices[study_id], self.q)

    def psi_index(self, treatment: str, q: int) -> int:
        """Flat index of psi_{g1,q} in the global layout."""
        gi = self.treatments.index(treatment)
        if gi == 0:
            raise MappingError("reference treatment has no psi coordinates")
        if not 0 <= q <= self.q:
            raise MappingError(f"covariate index {q} outside 0..{self.q}")
        return (gi - 1) * (self.q + 1) + q

    def psi_labels(self) -> list[str]:
        ref = self.treatments[0]
        return [
            f"psi[{t} vs {ref}, q={qq}]"
            for t in self.treatments[1:]
            for qq in range(self.q + 1)
        ]

    def _check_connected(self) -> None:
        if not self.study_arms:
            raise DisconnectedNetworkError("network has no studies")
        reachable = {self.treatments[0]}
        frontier = [self.treatments[0]]
        edges = [set(arms) for arms in self.study_arms.values()]
        while frontier:
            t = frontier.pop()
            for arms in edges:
                if t in arms:
                    for other in arms:
                        if other not in reachable:
                            reachable.add(other)
                            frontier.append(other)
        missing = set(self.treatments) - reachable
        if missing:
            raise DisconnectedNetworkError(
                f"treatments unreachable from reference: {sorted(missing)}"
            )

    def summary(self) -> dict:
        """Nodes/edges payload for plotting (per-edge direct-study counts)."""
        edge_counts: dict[tuple[str, str], int] = {}
        for arms in self.study_arms.values():
            for i, a in enumerate(arms):
                for b in arms[i + 1 :]:
                    key = tuple(sorted((a, b)))
                    edge_counts[key] = edge_counts.get(key, 0) + 1
        return {
            "treatments": list(self.treatments),
            "reference": self.treatments[0],
            "n_effect_modifiers": self.q,
            "edges": [
                {"a": a, "b": b, "n_studies": n}
                for (a, b), n in sorted(edge_counts.items())
            ],
        }


def consistency_contrast(
    psi_draws: np.ndarray, net: TreatmentNetwork, g: str, g_prime: str, q: int
) -> np.ndarray:
    """Per-draw psi_{gg',q} = psi_{g1,q} - psi_{g'1,q}."""
    if g not in net.treatments or g_prime not in net.treatments:
        raise MappingError(f"unknown treatment in contrast ({g!r}, {g_prime!r})")
    s = psi_draws.shape[0]
    left = np.zeros(s) if g == net.treatments[0] else psi_draws[:, net.psi_index(g, q)]
    right = (
        np.zeros(s) if g_prime == net.treatments[0] else psi_draws[:, net.psi_index(g_prime, q)]
    )
    return left - right
