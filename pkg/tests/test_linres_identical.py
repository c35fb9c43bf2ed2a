"""Block structure and physics of the identical-particle response matrix."""

import numpy as np
import pytest

from mclr import TwoBodyKernel, position_operator
from mclr import fockspace as fs
from mclr import groundstate as gs
from mclr import hamiltonian as ham
from mclr import linres_identical as li
from mclr import oracle as orc
from mclr import spectrum as spm


def test_layout_partition(bos_m2):
    lay = li.ResponseLayout(2, 64, 3)
    assert lay.D == 2 * (2 * 64 + 3)
    covered = np.zeros(lay.D, dtype=int)
    for k in range(2):
        covered[lay.u_slice(k)] += 1
        covered[lay.v_slice(k)] += 1
    covered[lay.cu_slice] += 1
    covered[lay.cv_slice] += 1
    assert np.all(covered == 1)


def test_oo_block_free_case(grid64, h64):
    # no interaction: exchange vanishes and the block is rho h - mu exactly
    sp = fs.enumerate_configs("boson", N=2, M=2)
    st = gs.solve_mchx(sp, grid64, h64, TwoBodyKernel("none"))
    A, B = li.build_oo_block(st)
    assert np.abs(B).max() == 0.0
    lay = li.ResponseLayout(2, 64, 3)
    rho = st.rho.rho1
    mu = 0.5 * (st.mu + st.mu.conj().T)
    for k in range(2):
        for q in range(2):
            ref = rho[k, q] * h64.matrix - mu[k, q] * np.eye(64)
            assert np.abs(A[lay.u_slice(k), lay.u_slice(q)] - ref).max() < 1e-12


def test_oo_submatrix_relations(bos_m3):
    A, B = li.build_oo_block(bos_m3)
    assert np.abs(A - A.conj().T).max() < 1e-10
    assert np.abs(B - B.T).max() < 1e-10


def test_oc_co_adjoint_relations(bos_m3):
    Loc_u, Loc_v, Lco_u, Lco_v = li.build_oc_co_blocks(bos_m3)
    d_u, d_v = li._co_blocks_direct(bos_m3)
    assert np.abs(Lco_u - d_u).max() < 1e-10
    assert np.abs(Lco_v - d_v).max() < 1e-10


def test_cc_block_annihilates_ground_vector(bos_m2):
    cc_u, cc_v = li.build_cc_block(bos_m2)
    assert np.abs(cc_u @ bos_m2.C).max() < 1e-9
    assert np.abs(cc_v @ bos_m2.C.conj()).max() < 1e-9


def test_cc_block_star_is_transpose_for_real_orbitals(bos_m2):
    # converged trap orbitals are real up to a global phase, so the starred
    # block equals the transpose
    cc_u, cc_v = li.build_cc_block(bos_m2)
    assert np.abs(cc_u.imag).max() < 1e-9
    assert np.abs(cc_v + cc_u.T).max() < 1e-9


def test_cc_block_gaps_are_ci_excitations(bos_m2):
    cc_u, _ = li.build_cc_block(bos_m2)
    H = ham.hamiltonian_matrix(bos_m2.space, bos_m2.orbitals, bos_m2.h_op,
                               bos_m2.kernel_matrix)
    vals = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
    gaps = vals[1:] - vals[0]
    # eigenvalues of (H - eps) on the complement of C
    Pc = np.eye(3) - np.outer(bos_m2.C, bos_m2.C.conj())
    proj = Pc @ cc_u @ Pc
    got = np.sort(np.linalg.eigvalsh(0.5 * (proj + proj.conj().T)))[1:]
    assert np.allclose(got, gaps, atol=1e-9)


def test_assembled_dimension_and_projection(bos_m2):
    rm = li.assemble_L(bos_m2)
    assert rm.D == 2 * (2 * 64 + 3)
    assert np.abs(rm.P @ rm.L @ rm.P - rm.L).max() < 1e-10
    assert np.abs(rm.P @ rm.P - rm.P).max() < 1e-12
    assert np.abs(rm.P - rm.P.conj().T).max() < 1e-12


@pytest.mark.parametrize("fixture", ["bos_m2", "bos_m3", "ferm_m2", "ferm_m3"])
def test_pairing_symmetries(fixture, request):
    st = request.getfixturevalue(fixture)
    rm = li.assemble_L(st)
    S1, S3 = li.sigma1(rm.layout), li.sigma3(rm.layout)
    assert np.abs(S1 @ rm.L @ S1 + rm.L.conj()).max() < 1e-9
    assert np.abs(S3 @ rm.L @ S3 - rm.L.conj().T).max() < 1e-9


def test_statistics_toggle_flips_exchange_only(bos_m3):
    # rebuilding with the opposite statistics sign changes exactly twice the
    # exchange part of the u-u block and nothing else
    st = bos_m3
    A_b, B_b = li.build_oo_block(st)
    flipped = gs.GroundState(
        space=fs.enumerate_configs("fermion", N=3, M=3), grid=st.grid,
        h_op=st.h_op, kernel=st.kernel, kernel_matrix=st.kernel_matrix,
        orbitals=st.orbitals, C=None, rho=st.rho, mu=st.mu,
        energy=st.energy, residuals=dict(st.residuals))
    A_f, B_f = li.build_oo_block(flipped)
    assert np.abs(B_b - B_f).max() == 0.0
    diff = A_b - A_f
    lay = li.ResponseLayout(3, st.grid.n_points, st.space.size)
    phi = st.orbitals.scaled
    K1 = np.einsum("lx,xy,sy->slxy", phi, st.kernel_matrix, phi.conj())
    kap1 = np.einsum("kslq,slxy->kqxy", st.rho.rho2, K1)
    for k in range(3):
        for q in range(3):
            assert np.abs(diff[lay.u_slice(k), lay.u_slice(q)]
                          - 2.0 * kap1[k, q]).max() < 1e-10


def test_single_configuration_limit_has_trivial_coefficient_sector(ferm_m3):
    # N_conf = 1: the coefficient projector is zero, so the projected matrix
    # has empty coefficient rows and columns
    rm = li.assemble_L(ferm_m3)
    lay = rm.layout
    assert lay.n_conf == 1
    assert np.abs(rm.L[lay.cu_slice, :]).max() < 1e-12
    assert np.abs(rm.L[:, lay.cu_slice]).max() < 1e-12


def test_null_vectors_annihilated(bos_m2):
    rm = li.assemble_L(bos_m2)
    Z = rm.null_vectors
    assert Z.shape[1] == 2 * (2 * 2 + 1)
    assert np.abs(rm.L @ Z).max() < 1e-8


def test_unconverged_state_rejected(bos_m2):
    bad = gs.GroundState(space=bos_m2.space, grid=bos_m2.grid,
                         h_op=bos_m2.h_op, kernel=bos_m2.kernel,
                         kernel_matrix=bos_m2.kernel_matrix,
                         orbitals=bos_m2.orbitals, C=bos_m2.C,
                         rho=bos_m2.rho, mu=bos_m2.mu, energy=bos_m2.energy,
                         residuals={"orb_residual": 1e-2})
    with pytest.raises(ValueError):
        li.build_oo_block(bad)


def test_bdg_reduction(bos_m1):
    rm = li.assemble_L(bos_m1)
    spec = spm.eigensolve(rm)
    bdg = orc.bdg_reference(bos_m1.grid, bos_m1.h_op, 0.1, 2,
                            condensate=bos_m1.orbitals.orbitals[0])
    lr = np.sort(spec.omega)[:5]
    assert np.abs(lr - bdg["frequencies"][:5]).max() < 1e-7


def test_driving_vector_lives_in_projected_space(bos_m2_48):
    pert = li.PerturbationSpec(f_dag=position_operator(bos_m2_48.grid),
                               omega=0.55)
    rm = li.assemble_L(bos_m2_48)
    R = li.build_R(bos_m2_48, pert, rm)
    assert np.abs(rm.P @ R - R).max() < 1e-12
    assert np.linalg.norm(R) > 1e-3


def test_driving_vector_zero_fields(bos_m2_48):
    rm = li.assemble_L(bos_m2_48)
    R = li.build_R(bos_m2_48, li.PerturbationSpec(omega=0.5), rm)
    assert np.abs(R).max() == 0.0


def test_driving_vector_parity_structure(bos_m2_48):
    # dipole probe on a parity-symmetric ground state: each orbital entry has
    # the opposite parity of its orbital (x flips parity)
    st = bos_m2_48
    rm = li.assemble_L(st)
    R = li.build_R(st, li.PerturbationSpec(
        f_dag=position_operator(st.grid), omega=0.55), rm)
    lay = rm.layout
    flip = slice(None, None, -1)
    phi = st.orbitals.orbitals
    for k in range(lay.M):
        orbital_even = np.abs(phi[k] - phi[k][flip]).max() < 1e-9
        u = R[lay.u_slice(k)]
        defect = (u + u[flip]) if orbital_even else (u - u[flip])
        assert np.abs(defect).max() < 1e-9 * max(1.0, np.abs(u).max())
    # coefficient entries couple only parity-flipping configurations:
    # (2,0) and (0,2) keep total parity, (1,1) flips it
    cu = R[lay.cu_slice]
    sp = st.space
    assert abs(cu[sp.rank((2, 0))]) < 1e-10
    assert abs(cu[sp.rank((0, 2))]) < 1e-10
    assert abs(cu[sp.rank((1, 1))]) > 1e-3


def test_pair_probe_selects_even_modes(bos_m2_48):
    # a parity-even interaction probe cannot drive the odd dipole mode but
    # does drive the even breathing-type modes
    st = bos_m2_48
    rm = li.assemble_L(st)
    spec = spm.eigensolve(rm)
    pert = li.PerturbationSpec(
        g_dag=TwoBodyKernel("gaussian", strength=0.2, width=0.6), omega=0.7)
    R = li.build_R(st, pert, rm)
    assert np.linalg.norm(R) > 1e-6
    w = spm.response_weights(spec, R)
    order = np.argsort(spec.omega)
    dipole = order[0]
    assert spec.omega[dipole] == pytest.approx(1.0, abs=1e-3)
    assert abs(w.gamma_plus[dipole]) < 1e-8
    assert max(abs(w.gamma_plus[i]) for i in order[1:4]) > 1e-4


def test_linearization_derivative(bos_m2_48):
    """Finite differences of the nonlinear flow reproduce the raw blocks."""
    st = bos_m2_48
    g, sp = st.grid, st.space
    A, B = li.build_oo_block(st)
    Loc_u, Loc_v, Lco_u, Lco_v = li.build_oc_co_blocks(st)
    cc_u, _ = li.build_cc_block(st)

    rng = np.random.default_rng(7)
    phi = st.orbitals.orbitals
    n, M = g.n_points, sp.M
    du = rng.standard_normal((M, n)) + 1j * rng.standard_normal((M, n))
    du -= (g.weight * (phi.conj() @ du.T)).T @ phi
    dC = rng.standard_normal(sp.size) + 1j * rng.standard_normal(sp.size)
    dC -= st.C * np.vdot(st.C, dC)

    du_t = np.sqrt(g.weight) * du
    pred_u = (A @ du_t.reshape(-1) + B @ du_t.conj().reshape(-1)
              + Loc_u @ dC + Loc_v @ dC.conj()).reshape(M, n)
    pred_c = cc_u @ dC + Lco_u @ du_t.reshape(-1) + Lco_v @ du_t.conj().reshape(-1)
    ph_t = st.orbitals.scaled
    pred_u = pred_u - (ph_t.conj() @ pred_u.T).T @ ph_t
    pred_c = pred_c - st.C * np.vdot(st.C, pred_c)

    def rhs(phi_mat, C):
        orbs = ham.OrbitalSet(phi_mat, g)
        rho = fs.reduced_densities(sp, C)
        Bv = gs.orbital_eom_rhs(g, orbs, st.h_op, st.kernel_matrix, rho)
        h = ham.one_body_elements(orbs, st.h_op)
        W = ham.two_body_tensor(orbs, st.kernel_matrix)
        hc = fs.apply_second_quantized(sp, C, h, W)
        return np.sqrt(g.weight) * Bv, hc - C * np.vdot(C, hc)

    B0, c0 = rhs(phi, st.C)
    etas = np.array([1e-3, 3e-4, 1e-4, 3e-5, 1e-5])
    errs = []
    scale = max(np.abs(pred_u).max(), np.abs(pred_c).max())
    for eta in etas:
        B1, c1 = rhs(phi + eta * du, st.C + eta * dC)
        err = max(np.abs((B1 - B0) / eta - pred_u).max(),
                  np.abs((c1 - c0) / eta - pred_c).max())
        errs.append(err / scale)
    slope = np.polyfit(np.log(etas), np.log(errs), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)
