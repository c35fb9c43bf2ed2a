"""Response-matrix assembly for Q coupled distinguishable degrees of freedom.

The response vector stacks u-amplitudes of every DOF (u^1 .. u^Q, each DOF
contributing M_j orbital slots on its own grid), then the v partners, then
C_u and C_v; D = 2 (sum_j M_j n_j + N_conf).

Structure mirrors the identical-particle case with two differences rooted
in distinguishability: the diagonal (same-DOF) u-blocks carry no exchange
term at all, the diagonal v-blocks are exactly zero, and exchange-like
couplings appear only between different degrees of freedom.  All couplings
stream over configuration pairs; the all-body density conj(C_n) C_m is
never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fockspace as fs
from . import hamiltonian as ham
from .groundstate import DistGroundState, regularized_power
from .hamiltonian import PairCoupling
from .linres_identical import ResponseMatrix

__all__ = [
    "DistLayout",
    "DistPerturbationSpec",
    "build_oo_dist",
    "build_oc_co_cc_dist",
    "assemble_L_dist",
    "build_R_dist",
    "zero_mode_vectors_dist",
]


@dataclass(frozen=True)
class DistLayout:
    """Offsets for per-DOF orbital stacks plus the coefficient sectors."""

    M_list: tuple
    n_list: tuple
    n_conf: int

    @property
    def Q(self) -> int:
        return len(self.M_list)

    @property
    def orb(self) -> int:
        return int(sum(m * n for m, n in zip(self.M_list, self.n_list)))

    @property
    def D(self) -> int:
        return 2 * (self.orb + self.n_conf)

    def dof_offset(self, j: int) -> int:
        return int(sum(m * n for m, n in
                       zip(self.M_list[:j], self.n_list[:j])))

    def u_slice(self, j: int, a: int) -> slice:
        base = self.dof_offset(j) + a * self.n_list[j]
        return slice(base, base + self.n_list[j])

    def v_slice(self, j: int, a: int) -> slice:
        base = self.orb + self.dof_offset(j) + a * self.n_list[j]
        return slice(base, base + self.n_list[j])

    def u_block(self, j: int) -> slice:
        base = self.dof_offset(j)
        return slice(base, base + self.M_list[j] * self.n_list[j])

    def v_block(self, j: int) -> slice:
        base = self.orb + self.dof_offset(j)
        return slice(base, base + self.M_list[j] * self.n_list[j])

    @property
    def cu_off(self) -> int:
        return 2 * self.orb

    @property
    def cu_slice(self) -> slice:
        return slice(self.cu_off, self.cu_off + self.n_conf)

    @property
    def cv_slice(self) -> slice:
        return slice(self.cu_off + self.n_conf, self.D)

    def split(self, x):
        """(list of per-DOF u stacks (M_j, n_j), same for v, C_u, C_v)."""
        us = [x[self.u_block(j)].reshape(self.M_list[j], self.n_list[j])
              for j in range(self.Q)]
        vs = [x[self.v_block(j)].reshape(self.M_list[j], self.n_list[j])
              for j in range(self.Q)]
        return us, vs, x[self.cu_slice], x[self.cv_slice]


@dataclass(frozen=True)
class DistPerturbationSpec:
    """Per-DOF one-body probes, optional all-body probe, frequency > 0."""

    f_dags: tuple = ()
    g_dag: object = None
    omega: float = 1.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("static probes (omega <= 0) need a separate treatment")


def _require_converged(state, tol=1e-6):
    res = state.residuals.get("orb_residual")
    if res is None or res > tol:
        raise ValueError(
            f"stationarity residual {res} above {tol}: the expansion point "
            "must satisfy the static equations")


def _layout(state) -> DistLayout:
    return DistLayout(tuple(state.space.M_list),
                      tuple(g.n_points for g in state.grids),
                      state.space.size)


def _pair_tables(coupling, j, k):
    """Coupling terms split by how they touch the DOF pair (j, k).

    Returns (direct, j_side, k_side, outside): ``direct`` holds tables
    oriented (j, k); ``j_side``/``k_side`` hold (other_dof, table oriented
    (j|k, other)); ``outside`` holds untouched terms (a, b, table).
    """
    direct, j_side, k_side, outside = [], [], [], []
    for a, b, table in coupling.terms:
        if {a, b} == {j, k}:
            direct.append(table if a == j else table.T)
        elif j in (a, b):
            c = b if a == j else a
            j_side.append((c, table if a == j else table.T))
        elif k in (a, b):
            c = b if a == k else a
            k_side.append((c, table if a == k else table.T))
        else:
            outside.append((a, b, table))
    return direct, j_side, k_side, outside


def _allbody_reduced(table, scaled, nvec, mvec, j, k):
    """All-body table contracted over every axis outside (j, k).

    Result axes ordered (x_j, x_k).
    """
    t = table
    axes = list(range(t.ndim))
    for l in sorted([ax for ax in axes if ax not in (j, k)], reverse=True):
        w = scaled[l][nvec[l]].conj() * scaled[l][mvec[l]]
        t = np.tensordot(t, w, axes=([l], [0]))
    return t if j < k else t.T


def build_oo_dist(state: DistGroundState):
    """Orbital-orbital block: (A, B) over the stacked per-DOF u/v sectors.

    Diagonal DOF blocks of A are rho^j h^j - mu^j + Omega^j with no exchange
    term; off-diagonal blocks carry the cross-DOF exchange-like couplings.
    B has exactly zero diagonal DOF blocks.
    """
    _require_converged(state)
    layout = _layout(state)
    Q = layout.Q
    scaled = [s.scaled for s in state.sets]
    C = state.C
    space = state.space

    A = np.zeros((layout.orb, layout.orb), dtype=complex)
    B = np.zeros((layout.orb, layout.orb), dtype=complex)

    # diagonal blocks: rho h - mu + Omega
    for j in range(Q):
        rho = 0.5 * (state.rho1[j] + state.rho1[j].conj().T)
        mu = 0.5 * (state.mu[j] + state.mu[j].conj().T)
        h = state.h_ops[j].matrix
        om = ham.mean_fields_dist(space, C, state.sets, state.coupling, j) \
            if state.coupling is not None else None
        eye = np.eye(layout.n_list[j])
        for a in range(layout.M_list[j]):
            for b in range(layout.M_list[j]):
                blk = rho[a, b] * h - mu[a, b] * eye
                if om is not None:
                    blk = blk + np.diag(om[a, b])
                A[layout.u_slice(j, a), layout.u_slice(j, b)] = blk

    if state.coupling is None:
        return A, B

    pairwise = isinstance(state.coupling, PairCoupling)
    # cross-DOF exchange-like couplings, streamed over configuration pairs
    for j in range(Q):
        for k in range(Q):
            if k == j:
                continue
            if pairwise:
                direct, j_side, k_side, outside = _pair_tables(
                    state.coupling, j, k)
            for i_n, nvec in enumerate(space.configs):
                cn = C[i_n].conjugate()
                if cn == 0:
                    continue
                for i_m, mvec in enumerate(space.configs):
                    w = cn * C[i_m]
                    if w == 0:
                        continue
                    pj = scaled[j][mvec[j]]
                    bra_k = scaled[k][nvec[k]].conj()
                    ket_k = scaled[k][mvec[k]]
                    others = [l for l in range(Q) if l not in (j, k)]

                    k1 = np.zeros((layout.n_list[j], layout.n_list[k]),
                                  dtype=complex)
                    k2 = np.zeros_like(k1)
                    if pairwise:
                        if all(nvec[l] == mvec[l] for l in others):
                            for t in direct:
                                k1 += pj[:, None] * t * bra_k[None, :]
                                k2 += pj[:, None] * t * ket_k[None, :]
                        for c, t in j_side:
                            if all(nvec[l] == mvec[l] for l in others if l != c):
                                d = t @ (scaled[c][nvec[c]].conj()
                                         * scaled[c][mvec[c]])
                                k1 += np.outer(d * pj, bra_k)
                                k2 += np.outer(d * pj, ket_k)
                        for c, t in k_side:
                            if all(nvec[l] == mvec[l] for l in others if l != c):
                                e = t @ (scaled[c][nvec[c]].conj()
                                         * scaled[c][mvec[c]])
                                k1 += np.outer(pj, bra_k * e)
                                k2 += np.outer(pj, ket_k * e)
                        for a, b, t in outside:
                            if all(nvec[l] == mvec[l] for l in others
                                   if l not in (a, b)):
                                s = ham._full_pair_element(
                                    t, scaled[a][nvec[a]], scaled[a][mvec[a]],
                                    scaled[b][nvec[b]], scaled[b][mvec[b]])
                                k1 += s * np.outer(pj, bra_k)
                                k2 += s * np.outer(pj, ket_k)
                    else:
                        t = _allbody_reduced(state.coupling.table, scaled,
                                             nvec, mvec, j, k)
                        k1 = pj[:, None] * t * bra_k[None, :]
                        k2 = pj[:, None] * t * ket_k[None, :]

                    A[layout.u_slice(j, nvec[j]),
                      layout.u_slice(k, mvec[k])] += w * k1
                    # column of B indexes the v sector: bra-side label n_k
                    col = layout.dof_offset(k) + nvec[k] * layout.n_list[k]
                    B[layout.u_slice(j, nvec[j]),
                      col:col + layout.n_list[k]] += w * k2
    return A, B


def build_oc_co_cc_dist(state: DistGroundState):
    """(Loc_u, Loc_v, Lco_u, Lco_v, cc_u, cc_v) in the stacked layout.

    The coefficient-orbital rows are the adjoint / transpose partners of
    the orbital-coefficient columns, which is how they are built.
    """
    _require_converged(state)
    layout = _layout(state)
    Q = layout.Q
    scaled = [s.scaled for s in state.sets]
    C = state.C
    space = state.space

    Loc_u = np.zeros((layout.orb, layout.n_conf), dtype=complex)
    Loc_v = np.zeros((layout.orb, layout.n_conf), dtype=complex)
    for j in range(Q):
        h = state.h_ops[j].matrix
        h_phi = scaled[j] @ h.T                        # rows h |phi_b>
        for col, mvec in enumerate(space.configs):
            # u columns: sum over configurations matching mvec off slot j
            for i_n, nvec in enumerate(space.configs):
                if C[i_n] == 0:
                    continue
                same_off_j = all(nvec[l] == mvec[l] for l in range(Q) if l != j)
                cbar = C[i_n].conjugate()
                if same_off_j:
                    Loc_u[layout.u_slice(j, nvec[j]), col] += \
                        cbar * h_phi[mvec[j]]
                if state.coupling is not None:
                    part = ham.partial_coupling(state.coupling, state.sets,
                                                space, j, nvec, mvec)
                    if np.any(part):
                        Loc_u[layout.u_slice(j, nvec[j]), col] += \
                            cbar * part * scaled[j][mvec[j]]
        for col, nvec in enumerate(space.configs):
            # v columns: slot-j label of the column fixes the row slot
            a = nvec[j]
            for i_m, mvec in enumerate(space.configs):
                if C[i_m] == 0:
                    continue
                same_off_j = all(mvec[l] == nvec[l] for l in range(Q) if l != j)
                if same_off_j:
                    Loc_v[layout.u_slice(j, a), col] += C[i_m] * h_phi[mvec[j]]
                if state.coupling is not None:
                    part = ham.partial_coupling(state.coupling, state.sets,
                                                space, j, nvec, mvec)
                    if np.any(part):
                        Loc_v[layout.u_slice(j, a), col] += \
                            C[i_m] * part * scaled[j][mvec[j]]

    from .groundstate import _dist_hamiltonian
    H = _dist_hamiltonian(space, state.sets, state.h_ops, state.coupling)
    H = 0.5 * (H + H.conj().T)
    eps = float(np.real(np.vdot(C, H @ C)))
    eye = np.eye(space.size)
    return (Loc_u, Loc_v, Loc_u.conj().T, Loc_v.T,
            H - eps * eye, eps * eye - H.conj())


def combined_projector_dist(state, layout) -> np.ndarray:
    P = np.zeros((layout.D, layout.D), dtype=complex)
    for j in range(layout.Q):
        phi = state.sets[j].scaled
        Pg = np.eye(layout.n_list[j], dtype=complex) - phi.T @ phi.conj()
        for a in range(layout.M_list[j]):
            P[layout.u_slice(j, a), layout.u_slice(j, a)] = Pg
            P[layout.v_slice(j, a), layout.v_slice(j, a)] = Pg.conj()
    C = state.C
    Pc = np.eye(layout.n_conf, dtype=complex) - np.outer(C, C.conj())
    P[layout.cu_slice, layout.cu_slice] = Pc
    P[layout.cv_slice, layout.cv_slice] = Pc.conj()
    return P


def metric_powers_dist(state, layout, floor: float | None = None):
    if floor is None:
        floor = 1e-10
    halves, neghalves = [], []
    clipped = False
    for j in range(layout.Q):
        rho = 0.5 * (state.rho1[j] + state.rho1[j].conj().T)
        h, c1 = regularized_power(rho, +0.5, floor)
        nh, c2 = regularized_power(rho, -0.5, floor)
        halves.append(h)
        neghalves.append(nh)
        clipped = clipped or c1 or c2

    def stack(mats):
        out = np.eye(layout.D, dtype=complex)
        for j in range(layout.Q):
            eye = np.eye(layout.n_list[j])
            blk = np.kron(mats[j], eye)
            out[layout.u_block(j), layout.u_block(j)] = blk
            out[layout.v_block(j), layout.v_block(j)] = blk.conj()
        return out

    return stack(halves), stack(neghalves), clipped


def assemble_L_dist(state: DistGroundState,
                    floor: float | None = None) -> ResponseMatrix:
    """Full metric-transformed, projected response matrix for Q DOFs."""
    layout = _layout(state)
    A, B = build_oo_dist(state)
    Loc_u, Loc_v, Lco_u, Lco_v, cc_u, cc_v = build_oc_co_cc_dist(state)

    D = layout.D
    orb = layout.orb
    raw = np.zeros((D, D), dtype=complex)
    u, v = slice(0, orb), slice(orb, 2 * orb)
    cu, cv = layout.cu_slice, layout.cv_slice
    raw[u, u] = A
    raw[u, v] = B
    raw[v, u] = -B.conj()
    raw[v, v] = -A.conj()
    raw[u, cu] = Loc_u
    raw[u, cv] = Loc_v
    raw[v, cu] = -Loc_v.conj()
    raw[v, cv] = -Loc_u.conj()
    raw[cu, u] = Lco_u
    raw[cu, v] = Lco_v
    raw[cv, u] = -Lco_v.conj()
    raw[cv, v] = -Lco_u.conj()
    raw[cu, cu] = cc_u
    raw[cv, cv] = cc_v

    P = combined_projector_dist(state, layout)
    M_half, M_neghalf, clipped = metric_powers_dist(state, layout, floor)
    L = P @ (M_neghalf @ raw @ M_neghalf) @ P
    blocks = {"raw": raw, "A": A, "B": B, "Loc_u": Loc_u, "Loc_v": Loc_v,
              "Lco_u": Lco_u, "Lco_v": Lco_v, "cc_u": cc_u, "cc_v": cc_v}
    rm = ResponseMatrix(layout=layout, L=L, P=P, M_half=M_half,
                        M_neghalf=M_neghalf, blocks=blocks, state=state,
                        metric_clipped=clipped)
    rm.null_vectors = zero_mode_vectors_dist(rm)
    return rm


def zero_mode_vectors_dist(rm: ResponseMatrix) -> np.ndarray:
    """Analytic null vectors: 2 (sum_j M_j^2 + 1) columns.

    Ground orbitals of DOF j fill the u slots of the same DOF, the
    coefficient vector fills C_u; block-swapped conjugates double the set.
    """
    layout = rm.layout
    state = rm.state
    cols = []
    for j in range(layout.Q):
        phi = state.sets[j].scaled
        for a in range(layout.M_list[j]):
            for b in range(layout.M_list[j]):
                z = np.zeros(layout.D, dtype=complex)
                z[layout.u_slice(j, a)] = phi[b]
                cols.append(z)
    z = np.zeros(layout.D, dtype=complex)
    z[layout.cu_slice] = state.C
    cols.append(z)
    mirrors = []
    for c in cols:
        m = np.zeros_like(c)
        m[layout.orb:2 * layout.orb] = c[:layout.orb].conj()
        m[layout.cv_slice] = c[layout.cu_slice].conj()
        mirrors.append(m)
    return np.column_stack(cols + mirrors)


def build_R_dist(state: DistGroundState, pert: DistPerturbationSpec,
                 rm: ResponseMatrix | None = None) -> np.ndarray:
    """Projected driving vector for per-DOF and all-body probes."""
    _require_converged(state)
    if rm is None:
        rm = assemble_L_dist(state)
    layout = rm.layout
    space, C = state.space, state.C
    scaled = [s.scaled for s in state.sets]

    S1 = np.zeros(layout.D, dtype=complex)
    S2 = np.zeros(layout.D, dtype=complex)

    f_dags = pert.f_dags or (None,) * layout.Q
    f_mats = []
    for j, f in enumerate(f_dags):
        if f is None:
            f_mats.append(None)
            continue
        F = f.matrix
        f_mats.append(ham.one_body_elements(state.sets[j], f))
        for a in range(layout.M_list[j]):
            S1[layout.u_slice(j, a)] = -(F @ scaled[j][a])
            S1[layout.v_slice(j, a)] = F.conj() @ scaled[j][a].conj()
    if any(m is not None for m in f_mats):
        h_list = [m if m is not None else np.zeros((layout.M_list[j],) * 2)
                  for j, m in enumerate(f_mats)]
        S1[layout.cu_slice] = -fs.apply_hamiltonian_dist(space, C, h_list)
        S1[layout.cv_slice] = fs.apply_hamiltonian_dist(
            space, C.conj(), [m.T for m in h_list])

    if pert.g_dag is not None:
        for j in range(layout.Q):
            om = ham.mean_fields_dist(space, C, state.sets, pert.g_dag, j)
            for a in range(layout.M_list[j]):
                acc = np.einsum("bx,bx->x", om[a], scaled[j])
                S2[layout.u_slice(j, a)] = -acc
                accs = np.einsum("bx,bx->x", om[a].conj(),
                                 np.conj(scaled[j]))
                S2[layout.v_slice(j, a)] = accs
        G = ham.config_coupling_matrix(pert.g_dag, state.sets, space)
        S2[layout.cu_slice] = -(G @ C)
        S2[layout.cv_slice] = G.T @ C.conj()

    return rm.P @ (rm.M_half @ S1 + rm.M_neghalf @ S2)
