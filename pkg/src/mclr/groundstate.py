"""Self-consistent ground states and the projected equations of motion.

The stationary state is found by alternating two relaxation moves until the
stationarity residuals vanish:

  (a) with orbitals frozen, the lowest eigenpair of the configuration-space
      Hamiltonian gives the coefficient vector and the energy;
  (b) with coefficients frozen, the orbitals follow projected imaginary-time
      steps of the equations of motion, re-orthonormalized after every step.

Inverses of the one-body density matrix are regularized by flooring its
eigenvalues at ``rho_floor * N``; imaginary-time steps backtrack (halving
the step) whenever the energy fails to decrease, which keeps the outer
iteration variationally monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import fockspace as fs
from .fockspace import ConfigSpace, ReducedDensities
from .grid import Grid, OneBodyOperator, TwoBodyKernel, discretize_kernel
from . import hamiltonian as ham
from .hamiltonian import OrbitalSet

__all__ = [
    "SolverOptions",
    "GroundState",
    "DistGroundState",
    "NonConvergenceError",
    "solve_mchx",
    "solve_mch_dist",
    "lagrange_multipliers",
    "propagate_check",
    "perturbed_state",
    "orbital_eom_rhs",
    "regularized_inverse",
    "regularized_power",
]


class NonConvergenceError(RuntimeError):
    """Raised when the self-consistent loop exhausts its iteration budget."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


@dataclass
class SolverOptions:
    tol_orb: float = 1e-8
    tol_c: float = 1e-10
    max_iter: int = 500
    tau: float = 0.01
    inner_steps: int = 40
    rho_floor: float = 1e-10
    ci_dense_cutoff: int = 500
    verbose: bool = False


@dataclass
class GroundState:
    """Converged stationary state of identical particles."""

    space: ConfigSpace
    grid: Grid
    h_op: OneBodyOperator
    kernel: TwoBodyKernel
    kernel_matrix: np.ndarray = field(repr=False)
    orbitals: OrbitalSet = None
    C: np.ndarray = field(default=None, repr=False)
    rho: ReducedDensities = None
    mu: np.ndarray = field(default=None, repr=False)
    energy: float = 0.0
    residuals: dict = field(default_factory=dict)

    def natural_occupations(self):
        return self.rho.natural_occupations()


@dataclass
class DistGroundState:
    """Converged stationary state of distinguishable degrees of freedom."""

    space: ConfigSpace
    grids: list
    h_ops: list
    coupling: object
    sets: list = None
    C: np.ndarray = field(default=None, repr=False)
    rho1: list = None
    mu: list = None
    energy: float = 0.0
    residuals: dict = field(default_factory=dict)

    def natural_occupations(self):
        return [np.sort(np.linalg.eigvalsh(r))[::-1] for r in self.rho1]


def regularized_power(mat: np.ndarray, power: float, floor: float):
    """Hermitian matrix power with an eigenvalue floor.

    Returns (result, clipped) where ``clipped`` reports whether any
    eigenvalue had to be lifted to the floor.
    """
    m = 0.5 * (mat + mat.conj().T)
    vals, vecs = np.linalg.eigh(m)
    clipped = bool(np.any(vals < floor))
    vals = np.maximum(vals.real, floor)
    return (vecs * vals**power) @ vecs.conj().T, clipped


def regularized_inverse(mat: np.ndarray, floor: float) -> np.ndarray:
    inv, _ = regularized_power(mat, -1.0, floor)
    return inv


# ---------------------------------------------------------------------------
# identical particles


def orbital_eom_rhs(grid, orbs, h_op, kernel_matrix, rho, project=True,
                    return_unprojected=False):
    """Right-hand side of the orbital equations of motion, one row per k:

        B_k = P [ sum_q rho_kq h |phi_q> + sum_slq rho_kslq W_sl |phi_q> ].
    """
    phi = orbs.orbitals
    h_phi = phi @ h_op.matrix.T
    g = np.asarray(rho.rho1) @ h_phi
    if kernel_matrix is not None and np.any(kernel_matrix):
        w = ham.local_potentials(orbs, kernel_matrix)            # (s, l, x)
        om = np.einsum("kslq,slx->kqx", rho.rho2, w)
        g = g + np.einsum("kqx,qx->kx", om, phi)
    if not project:
        return g
    overlaps = grid.weight * (phi.conj() @ g.T)                  # (j, k)
    proj = g - overlaps.T @ phi
    if return_unprojected:
        return proj, g
    return proj


def _mu_matrix(grid, orbs, g_unprojected):
    """mu_kq = <phi_q| g_k >, the Lagrange multipliers of the stationary set."""
    return grid.weight * (g_unprojected @ orbs.orbitals.conj().T)


def lagrange_multipliers(state: GroundState) -> np.ndarray:
    """Recompute mu from the state; hermiticity defect goes to residuals."""
    g = orbital_eom_rhs(state.grid, state.orbitals, state.h_op,
                        state.kernel_matrix, state.rho, project=False)
    mu = _mu_matrix(state.grid, state.orbitals, g)
    state.residuals["mu_defect"] = float(np.abs(mu - mu.conj().T).max())
    return mu


def _lowest_eigenpair(space, orbs, h_op, kernel_matrix, opts, v0=None):
    h = ham.one_body_elements(orbs, h_op)
    W = None
    if kernel_matrix is not None and np.any(kernel_matrix):
        W = ham.two_body_tensor(orbs, kernel_matrix)
    if space.size <= opts.ci_dense_cutoff:
        H = ham.hamiltonian_matrix(space, orbs, h_op, kernel_matrix)
        vals, vecs = np.linalg.eigh(0.5 * (H + H.conj().T))
        eps, C = vals[0], vecs[:, 0]
    else:
        op = spla.LinearOperator(
            (space.size, space.size), dtype=complex,
            matvec=lambda c: fs.apply_second_quantized(space, c, h, W))
        vals, vecs = spla.eigsh(op, k=1, which="SA", v0=v0)
        eps, C = vals[0], vecs[:, 0]
        H = None
    # deterministic global phase: largest component real and positive
    pivot = np.argmax(np.abs(C))
    C = C * np.exp(-1j * np.angle(C[pivot]))
    return float(eps), C, H


def _config_residual(space, C, eps, orbs, h_op, kernel_matrix):
    h = ham.one_body_elements(orbs, h_op)
    W = None
    if kernel_matrix is not None and np.any(kernel_matrix):
        W = ham.two_body_tensor(orbs, kernel_matrix)
    r = fs.apply_second_quantized(space, C, h, W) - eps * C
    return float(np.linalg.norm(r))


def solve_mchx(space: ConfigSpace, grid: Grid, h_op: OneBodyOperator,
               kernel: TwoBodyKernel, opts: SolverOptions | None = None,
               initial: OrbitalSet | None = None) -> GroundState:
    """Self-consistent stationary state for identical bosons or fermions."""
    if not space.identical:
        raise ValueError("identical-particle spaces only; see solve_mch_dist")
    opts = opts or SolverOptions()
    kernel_matrix = discretize_kernel(grid, kernel)

    if initial is None:
        _, vecs = np.linalg.eigh(h_op.matrix)
        phi = vecs[:, :space.M].T / np.sqrt(grid.weight)
        orbs = OrbitalSet(phi, grid)
    else:
        orbs = initial.orthonormalized()

    floor = opts.rho_floor * space.N
    tau = opts.tau
    energy = np.inf
    history = []
    C = np.full(space.size, 1.0 / np.sqrt(space.size), dtype=complex)
    orb_res = c_res = np.inf

    for outer in range(opts.max_iter):
        eps, C, _ = _lowest_eigenpair(space, orbs, h_op, kernel_matrix, opts, v0=C)
        rho = fs.reduced_densities(space, C)
        rho_inv = regularized_inverse(rho.rho1, floor)

        B = orbital_eom_rhs(grid, orbs, h_op, kernel_matrix, rho)
        orb_res = max(grid.norm(b) for b in B)
        c_res = _config_residual(space, C, eps, orbs, h_op, kernel_matrix)
        history.append(eps)
        if opts.verbose:
            print(f"  iter {outer:3d}  E={eps:.12f}  orb={orb_res:.2e}  c={c_res:.2e}")
        if orb_res < opts.tol_orb and c_res < opts.tol_c:
            energy = eps
            break

        # imaginary-time block on the orbitals at fixed C, with backtracking
        for _ in range(3):
            trial = orbs
            for _ in range(opts.inner_steps):
                B1 = orbital_eom_rhs(grid, trial, h_op, kernel_matrix, rho)
                half = OrbitalSet(trial.orbitals - 0.5 * tau * (rho_inv @ B1),
                                  grid).orthonormalized()
                B2 = orbital_eom_rhs(grid, half, h_op, kernel_matrix, rho)
                trial = OrbitalSet(trial.orbitals - tau * (rho_inv @ B2),
                                   grid).orthonormalized()
            e_trial, _, _ = _lowest_eigenpair(space, trial, h_op, kernel_matrix,
                                              opts, v0=C)
            if e_trial <= eps + 1e-13 * max(1.0, abs(eps)):
                orbs = trial
                break
            tau *= 0.5
        else:
            orbs = trial  # accept anyway once tau is tiny; residual check decides
        energy = eps
    else:
        raise NonConvergenceError(
            f"no convergence after {opts.max_iter} iterations "
            f"(orbital residual {orb_res:.3e}, coefficient residual {c_res:.3e})",
            residuals={"orb_residual": orb_res, "c_residual": c_res},
        )

    _, g = orbital_eom_rhs(grid, orbs, h_op, kernel_matrix, rho,
                           return_unprojected=True)
    mu = _mu_matrix(grid, orbs, g)
    residuals = {
        "orb_residual": orb_res,
        "c_residual": c_res,
        "mu_defect": float(np.abs(mu - mu.conj().T).max()),
        "iterations": outer + 1,
        "energy_history": history,
        "tol_orb": opts.tol_orb,
        "tol_c": opts.tol_c,
    }
    return GroundState(space=space, grid=grid, h_op=h_op, kernel=kernel,
                       kernel_matrix=kernel_matrix, orbitals=orbs, C=C,
                       rho=rho, mu=mu, energy=energy, residuals=residuals)


# ---------------------------------------------------------------------------
# distinguishable degrees of freedom


def _dist_hamiltonian(space, sets, h_ops, coupling):
    mats = [ham.one_body_elements(sets[j], h_ops[j]) for j in range(len(sets))]
    H = np.zeros((space.size, space.size), dtype=complex)
    for j, hj in enumerate(mats):
        left = int(np.prod(space.M_list[:j], initial=1))
        right = int(np.prod(space.M_list[j + 1:], initial=1))
        H += np.kron(np.kron(np.eye(left), hj), np.eye(right))
    if coupling is not None:
        H += ham.config_coupling_matrix(coupling, sets, space)
    return H


def _dist_orbital_rhs(space, sets, h_ops, coupling, C, rho1, project=True,
                      return_unprojected=False):
    """Per-DOF equation-of-motion right-hand sides (list of (M_j, n_j) arrays)."""
    Q = len(sets)
    out, raw = [], []
    for j in range(Q):
        phi = sets[j].orbitals
        g = rho1[j] @ (phi @ h_ops[j].matrix.T)
        if coupling is not None:
            om = ham.mean_fields_dist(space, C, sets, coupling, j)
            g = g + np.einsum("nmx,mx->nx", om, phi)
        raw.append(g)
        if project:
            overlaps = sets[j].grid.weight * (phi.conj() @ g.T)
            out.append(g - overlaps.T @ phi)
    if not project:
        return raw
    if return_unprojected:
        return out, raw
    return out


def solve_mch_dist(space: ConfigSpace, grids, h_ops, coupling,
                   opts: SolverOptions | None = None) -> DistGroundState:
    """Self-consistent stationary state for coupled distinguishable DOFs."""
    if space.identical:
        raise ValueError("distinguishable spaces only; see solve_mchx")
    opts = opts or SolverOptions()
    Q = len(space.M_list)

    sets = []
    for j in range(Q):
        _, vecs = np.linalg.eigh(h_ops[j].matrix)
        phi = vecs[:, :space.M_list[j]].T / np.sqrt(grids[j].weight)
        sets.append(OrbitalSet(phi, grids[j]))

    tau = opts.tau
    history = []
    orb_res = c_res = np.inf
    C = np.full(space.size, 1.0 / np.sqrt(space.size), dtype=complex)

    def ci_step(cur_sets):
        H = _dist_hamiltonian(space, cur_sets, h_ops, coupling)
        vals, vecs = np.linalg.eigh(0.5 * (H + H.conj().T))
        c = vecs[:, 0]
        pivot = np.argmax(np.abs(c))
        c = c * np.exp(-1j * np.angle(c[pivot]))
        return vals[0], c, H

    for outer in range(opts.max_iter):
        eps, C, H = ci_step(sets)
        rho1 = [fs.dist_reduced_density(space, C, (j,)) for j in range(Q)]
        inv = [regularized_inverse(rho1[j], opts.rho_floor) for j in range(Q)]

        B = _dist_orbital_rhs(space, sets, h_ops, coupling, C, rho1)
        orb_res = max(grids[j].norm(b) for j in range(Q) for b in B[j])
        c_res = float(np.linalg.norm(H @ C - eps * C))
        history.append(eps)
        if opts.verbose:
            print(f"  iter {outer:3d}  E={eps:.12f}  orb={orb_res:.2e}  c={c_res:.2e}")
        if orb_res < opts.tol_orb and c_res < opts.tol_c:
            break

        for _ in range(3):
            trial = [OrbitalSet(s.orbitals.copy(), s.grid) for s in sets]
            for _ in range(opts.inner_steps):
                B1 = _dist_orbital_rhs(space, trial, h_ops, coupling, C, rho1)
                half = [OrbitalSet(trial[j].orbitals - 0.5 * tau * (inv[j] @ B1[j]),
                                   grids[j]).orthonormalized() for j in range(Q)]
                B2 = _dist_orbital_rhs(space, half, h_ops, coupling, C, rho1)
                trial = [OrbitalSet(trial[j].orbitals - tau * (inv[j] @ B2[j]),
                                    grids[j]).orthonormalized() for j in range(Q)]
            e_trial, _, _ = ci_step(trial)
            if e_trial <= eps + 1e-13 * max(1.0, abs(eps)):
                sets = trial
                break
            tau *= 0.5
        else:
            sets = trial
    else:
        raise NonConvergenceError(
            f"no convergence after {opts.max_iter} iterations "
            f"(orbital residual {orb_res:.3e}, coefficient residual {c_res:.3e})",
            residuals={"orb_residual": orb_res, "c_residual": c_res},
        )

    raw = _dist_orbital_rhs(space, sets, h_ops, coupling, C, rho1, project=False)
    mu = [grids[j].weight * (raw[j] @ sets[j].orbitals.conj().T) for j in range(Q)]
    residuals = {
        "orb_residual": orb_res,
        "c_residual": c_res,
        "mu_defect": max(float(np.abs(m - m.conj().T).max()) for m in mu),
        "iterations": outer + 1,
        "energy_history": history,
        "tol_orb": opts.tol_orb,
        "tol_c": opts.tol_c,
    }
    return DistGroundState(space=space, grids=list(grids), h_ops=list(h_ops),
                           coupling=coupling, sets=sets, C=C, rho1=rho1, mu=mu,
                           energy=float(eps), residuals=residuals)


# ---------------------------------------------------------------------------
# real-time propagation check


def perturbed_state(state: GroundState, eta: float, seed: int = 0) -> GroundState:
    """Copy of the state with a small random, properly normalized distortion."""
    rng = np.random.default_rng(seed)
    phi = state.orbitals.orbitals
    noise = rng.standard_normal(phi.shape) + 1j * rng.standard_normal(phi.shape)
    orbs = OrbitalSet(phi + eta * noise, state.grid).orthonormalized()
    dc = rng.standard_normal(state.C.shape) + 1j * rng.standard_normal(state.C.shape)
    C = state.C + eta * dc
    C = C / np.linalg.norm(C)
    rho = fs.reduced_densities(state.space, C)
    return GroundState(space=state.space, grid=state.grid, h_op=state.h_op,
                       kernel=state.kernel, kernel_matrix=state.kernel_matrix,
                       orbitals=orbs, C=C, rho=rho, mu=None,
                       energy=np.nan, residuals=dict(state.residuals))


def propagate_check(state: GroundState, dt: float, n_steps: int,
                    use_coeff_projector: bool = True) -> dict:
    """Integrate the (optionally fully projected) equations of motion.

    Returns the maxima over all steps of |<phi_k|dphi_q/dt>|, |C^dag dC/dt|,
    |<Psi|dPsi/dt>|, and the orthonormality/norm drifts.  Steps are rejected
    if the coefficient norm drifts beyond 1e-6.
    """
    space, grid = state.space, state.grid
    h_op, km = state.h_op, state.kernel_matrix
    floor = 1e-12

    def h_elems(orbs):
        h = ham.one_body_elements(orbs, h_op)
        W = ham.two_body_tensor(orbs, km) if np.any(km) else None
        return h, W

    def rhs(phi_mat, C):
        orbs = OrbitalSet(phi_mat, grid)
        rho = fs.reduced_densities(space, C)
        B = orbital_eom_rhs(grid, orbs, h_op, km, rho)
        rho_inv = regularized_inverse(rho.rho1, floor)
        phi_dot = -1j * (rho_inv @ B)
        h, W = h_elems(orbs)
        hc = fs.apply_second_quantized(space, C, h, W)
        if use_coeff_projector:
            hc = hc - C * np.vdot(C, hc)
        c_dot = -1j * hc
        return phi_dot, c_dot, rho

    phi = state.orbitals.orbitals.copy()
    C = state.C.copy()
    diag = {"orb_diff_cond": 0.0, "coeff_diff_cond": 0.0, "full_diff_cond": 0.0,
            "orthonormality_drift": 0.0, "norm_drift": 0.0}
    for _ in range(n_steps):
        phi_dot, c_dot, rho = rhs(phi, C)
        overlaps = grid.weight * (phi.conj() @ phi_dot.T)
        psi_dot = np.vdot(C, c_dot) + np.einsum("kq,kq->", rho.rho1, overlaps)
        diag["orb_diff_cond"] = max(diag["orb_diff_cond"],
                                    float(np.abs(overlaps).max()))
        diag["coeff_diff_cond"] = max(diag["coeff_diff_cond"],
                                      float(abs(np.vdot(C, c_dot))))
        diag["full_diff_cond"] = max(diag["full_diff_cond"], float(abs(psi_dot)))

        # classical RK4
        k1p, k1c, _ = phi_dot, c_dot, rho
        k2p, k2c, _ = rhs(phi + 0.5 * dt * k1p, C + 0.5 * dt * k1c)
        k3p, k3c, _ = rhs(phi + 0.5 * dt * k2p, C + 0.5 * dt * k2c)
        k4p, k4c, _ = rhs(phi + dt * k3p, C + dt * k3c)
        phi = phi + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        C = C + dt / 6.0 * (k1c + 2 * k2c + 2 * k3c + k4c)

        onb = OrbitalSet(phi, grid).orthonormality_defect()
        drift = abs(np.linalg.norm(C) - 1.0)
        diag["orthonormality_drift"] = max(diag["orthonormality_drift"], onb)
        diag["norm_drift"] = max(diag["norm_drift"], drift)
        if drift > 1e-6:
            raise RuntimeError(f"norm drift {drift:.3e} exceeds 1e-6; reduce dt")
    return diag
