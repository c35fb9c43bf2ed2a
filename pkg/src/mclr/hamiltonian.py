"""Orbital-space matrix elements feeding the ground-state and response builds.

Identical particles: one-body elements h_kq, direct potentials W_sl(r),
exchange kernels K_sl, the four-index interaction tensor, and the dense
configuration-space Hamiltonian.

Distinguishable degrees of freedom: pairwise (and small all-body) couplings,
their configuration matrix elements, partially integrated potentials, and
the per-DOF mean-field operators.

Index convention for the interaction tensor: ``W[k, s, q, l]`` pairs bra k /
ket q on the first coordinate and bra s / ket l on the second,

    W[k,s,q,l] = dx^2 sum_ij conj(phi_k[i]) conj(phi_s[j]) W[i,j] phi_q[i] phi_l[j].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fockspace import ConfigSpace, apply_second_quantized
from .grid import Grid, OneBodyOperator

__all__ = [
    "OrbitalSet",
    "one_body_elements",
    "local_potentials",
    "exchange_apply",
    "exchange_matrix",
    "two_body_tensor",
    "hamiltonian_matrix",
    "PairCoupling",
    "AllBodyTable",
    "config_coupling_matrix",
    "partial_coupling",
    "mean_fields_dist",
    "mean_field_dist",
]


@dataclass
class OrbitalSet:
    """M orthonormal orbitals stored as grid-value rows of shape (M, n)."""

    orbitals: np.ndarray = field(repr=False)
    grid: Grid = None

    def __post_init__(self):
        self.orbitals = np.atleast_2d(np.asarray(self.orbitals, dtype=complex))

    @property
    def M(self) -> int:
        return self.orbitals.shape[0]

    @property
    def scaled(self) -> np.ndarray:
        """Orbitals times sqrt(dx): unit vectors under the plain dot product."""
        return np.sqrt(self.grid.weight) * self.orbitals

    def orthonormality_defect(self) -> float:
        ov = self.grid.weight * (self.orbitals.conj() @ self.orbitals.T)
        return float(np.abs(ov - np.eye(self.M)).max())

    def orthonormalized(self) -> "OrbitalSet":
        """Gram-Schmidt in quadrature metric (QR on the scaled vectors)."""
        q, r = np.linalg.qr(self.scaled.T)
        # fix phases so the stepper stays continuous
        phases = np.sign(np.real(np.diag(r)))
        phases[phases == 0] = 1.0
        q = q * phases
        return OrbitalSet(q.T / np.sqrt(self.grid.weight), self.grid)


def one_body_elements(orbs: OrbitalSet, op: OneBodyOperator) -> np.ndarray:
    """h_kq = <phi_k| op |phi_q> by grid quadrature."""
    if op.matrix.shape[0] != orbs.grid.n_points:
        raise ValueError("operator grid size does not match the orbitals")
    phi = orbs.orbitals
    return orbs.grid.weight * (phi.conj() @ op.matrix @ phi.T)


def local_potentials(orbs: OrbitalSet, kernel_matrix: np.ndarray) -> np.ndarray:
    """Direct potentials W_sl(r) = dx sum_j conj(phi_s[j]) W[r,j] phi_l[j].

    Returns an (M, M, n) array of grid-diagonal functions.
    """
    phi = orbs.orbitals
    M, n = phi.shape
    out = np.empty((M, M, n), dtype=complex)
    for s in range(M):
        for l in range(M):
            out[s, l] = orbs.grid.weight * (kernel_matrix @ (phi[s].conj() * phi[l]))
    return out


def exchange_apply(orbs: OrbitalSet, kernel_matrix: np.ndarray, s: int, l: int,
                   f: np.ndarray) -> np.ndarray:
    """K_sl f: build the direct potential with f in the ket slot, times phi_l."""
    phi = orbs.orbitals
    w_sf = orbs.grid.weight * (kernel_matrix @ (phi[s].conj() * np.asarray(f)))
    return w_sf * phi[l]


def exchange_matrix(orbs: OrbitalSet, kernel_matrix: np.ndarray, s: int,
                    l: int) -> np.ndarray:
    """Dense matrix of K_sl: K[i,j] = dx phi_l[i] W[i,j] conj(phi_s[j])."""
    phi = orbs.orbitals
    return orbs.grid.weight * (phi[l][:, None] * kernel_matrix * phi[s].conj()[None, :])


def two_body_tensor(orbs: OrbitalSet, kernel_matrix: np.ndarray) -> np.ndarray:
    """Four-index interaction tensor W[k,s,q,l] (see module docstring)."""
    phi = orbs.orbitals
    dx = orbs.grid.weight
    # pair densities d_kq[i] = conj(phi_k[i]) phi_q[i]
    M, n = phi.shape
    d = phi.conj()[:, None, :] * phi[None, :, :]          # (k, q, i)
    mid = np.tensordot(d, kernel_matrix, axes=(2, 0))     # (k, q, j)
    W = dx * dx * np.tensordot(mid, d, axes=(2, 2))       # (k, q, s, l)
    return W.transpose(0, 2, 1, 3)


def hamiltonian_matrix(space: ConfigSpace, orbs: OrbitalSet,
                       h_op: OneBodyOperator,
                       kernel_matrix: np.ndarray | None) -> np.ndarray:
    """Dense configuration-space Hamiltonian, built column by column."""
    h = one_body_elements(orbs, h_op)
    W = None if kernel_matrix is None else two_body_tensor(orbs, kernel_matrix)
    H = np.empty((space.size, space.size), dtype=complex)
    e = np.zeros(space.size, dtype=complex)
    for col in range(space.size):
        e[:] = 0
        e[col] = 1.0
        H[:, col] = apply_second_quantized(space, e, h, W)
    return H


# ---------------------------------------------------------------------------
# couplings between distinguishable degrees of freedom


@dataclass
class PairCoupling:
    """Sum of pairwise multiplicative couplings sum_t w_t(x_a, x_b).

    Each term is (a, b, table) with a < b and table[i_a, i_b] the sampled
    kernel (any prefactor folded in).
    """

    terms: list

    def __post_init__(self):
        fixed = []
        for a, b, table in self.terms:
            if a == b:
                raise ValueError("pair coupling needs two distinct DOFs")
            if a > b:
                a, b, table = b, a, np.asarray(table).T
            fixed.append((a, b, np.asarray(table, dtype=complex)))
        self.terms = fixed

    @classmethod
    def bilinear(cls, grids, a: int, b: int, strength: float) -> "PairCoupling":
        """strength * x_a * x_b."""
        return cls([(a, b, strength * np.outer(grids[a].points, grids[b].points))])

    @classmethod
    def gaussian_pair(cls, grids, a: int, b: int, strength: float,
                      width: float) -> "PairCoupling":
        d = grids[a].points[:, None] - grids[b].points[None, :]
        return cls([(a, b, strength * np.exp(-(d**2) / (2.0 * width**2)))])


@dataclass
class AllBodyTable:
    """Explicit multiplicative coupling table over all coordinates (Q <= 3)."""

    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=complex)
        if self.table.ndim > 3:
            raise ValueError("all-body tables are limited to 3 degrees of freedom")


def _pair_contraction(table, bra, ket, side):
    """Contract one side of a pair table with bra/ket orbital vectors.

    side=1 contracts the second index: returns f(x_a) = sum_ib conj(bra) T ket;
    side=0 contracts the first index: returns f(x_b).
    ``bra``/``ket`` are scaled (sqrt(dx)-weighted) vectors, so no weights
    appear here.
    """
    w = bra.conj() * ket
    return table @ w if side == 1 else table.T @ w


def _full_pair_element(table, bra_a, ket_a, bra_b, ket_b):
    return np.einsum("i,j,ij,i,j->", bra_a.conj(), bra_b.conj(), table, ket_a, ket_b)


def config_coupling_matrix(coupling, sets, space: ConfigSpace) -> np.ndarray:
    """Configuration-space matrix <n|W|m> of the coupling."""
    Q = len(space.M_list)
    scaled = [s.scaled for s in sets]
    W = np.zeros((space.size, space.size), dtype=complex)
    if isinstance(coupling, PairCoupling):
        for a, b, table in coupling.terms:
            Ma, Mb = space.M_list[a], space.M_list[b]
            blk = np.empty((Ma, Mb, Ma, Mb), dtype=complex)
            for na in range(Ma):
                for nb in range(Mb):
                    for ma in range(Ma):
                        for mb in range(Mb):
                            blk[na, nb, ma, mb] = _full_pair_element(
                                table, scaled[a][na], scaled[a][ma],
                                scaled[b][nb], scaled[b][mb])
            for i, nvec in enumerate(space.configs):
                for k, mvec in enumerate(space.configs):
                    if all(nvec[l] == mvec[l] for l in range(Q) if l not in (a, b)):
                        W[i, k] += blk[nvec[a], nvec[b], mvec[a], mvec[b]]
        return W
    if isinstance(coupling, AllBodyTable):
        t = coupling.table
        for i, nvec in enumerate(space.configs):
            for k, mvec in enumerate(space.configs):
                vecs_b = [scaled[j][nvec[j]].conj() for j in range(Q)]
                vecs_k = [scaled[j][mvec[j]] for j in range(Q)]
                if Q == 2:
                    W[i, k] = np.einsum("i,j,ij,i,j->", vecs_b[0], vecs_b[1], t,
                                        vecs_k[0], vecs_k[1])
                else:
                    W[i, k] = np.einsum("i,j,k,ijk,i,j,k->", vecs_b[0], vecs_b[1],
                                        vecs_b[2], t, vecs_k[0], vecs_k[1], vecs_k[2])
        return W
    raise TypeError(f"unsupported coupling {type(coupling)!r}")


def partial_coupling(coupling, sets, space: ConfigSpace, j: int,
                     nvec, mvec) -> np.ndarray:
    """Grid-j diagonal of the coupling integrated over every other coordinate.

    Bra orbitals come from ``nvec``, ket orbitals from ``mvec``; slot j of
    both is ignored.  Result multiplies functions of x_j pointwise.
    """
    Q = len(space.M_list)
    scaled = [s.scaled for s in sets]
    n_j = sets[j].grid.n_points
    out = np.zeros(n_j, dtype=complex)
    if isinstance(coupling, PairCoupling):
        for a, b, table in coupling.terms:
            others = [l for l in range(Q) if l not in (a, b) and l != j]
            if any(nvec[l] != mvec[l] for l in others):
                continue
            if j == a:
                out += _pair_contraction(table, scaled[b][nvec[b]],
                                         scaled[b][mvec[b]], side=1)
            elif j == b:
                out += _pair_contraction(table, scaled[a][nvec[a]],
                                         scaled[a][mvec[a]], side=0)
            else:
                if nvec[j] != mvec[j]:
                    continue
                out += _full_pair_element(table, scaled[a][nvec[a]], scaled[a][mvec[a]],
                                          scaled[b][nvec[b]], scaled[b][mvec[b]])
        return out
    if isinstance(coupling, AllBodyTable):
        t = coupling.table
        rest = [l for l in range(Q) if l != j]
        # contract every axis but j with conj(bra) * ket weights; descending
        # order keeps the remaining axis numbers valid
        for l in sorted(rest, reverse=True):
            w = scaled[l][nvec[l]].conj() * scaled[l][mvec[l]]
            t = np.tensordot(t, w, axes=([l], [0]))
        return np.asarray(t, dtype=complex)
    raise TypeError(f"unsupported coupling {type(coupling)!r}")


def mean_fields_dist(space: ConfigSpace, C: np.ndarray, sets, coupling,
                     j: int) -> np.ndarray:
    """All mean-field diagonals of DOF j: an (M_j, M_j, n_j) stack.

    Omega^j[a, b](x_j) = sum over configuration pairs sharing slot-j labels
    (a, b) of conj(C_n) C_m  times the partially integrated coupling.
    """
    Mj = space.M_list[j]
    nj = sets[j].grid.n_points
    C = np.asarray(C, dtype=complex)
    out = np.zeros((Mj, Mj, nj), dtype=complex)
    if coupling is None:
        return out
    for i, nvec in enumerate(space.configs):
        cn = C[i].conjugate()
        if cn == 0:
            continue
        for k, mvec in enumerate(space.configs):
            if C[k] == 0:
                continue
            w = cn * C[k]
            v = partial_coupling(coupling, sets, space, j, nvec, mvec)
            if np.any(v):
                out[nvec[j], mvec[j]] += w * v
    return out


def mean_field_dist(space: ConfigSpace, C: np.ndarray, sets, coupling,
                    j: int, n_j: int, m_j: int) -> np.ndarray:
    """Single mean-field diagonal Omega^j_{n_j m_j}(x_j)."""
    return mean_fields_dist(space, C, sets, coupling, j)[n_j, m_j]
