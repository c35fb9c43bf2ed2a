"""Spectral analysis of the response matrix.

The matrix is non-Hermitian but carries two structural symmetries that
organize its spectrum:

* Sigma1 L Sigma1 = -conj(L): eigenvalues come in pairs (w, -conj(w)) with
  partner eigenvectors Sigma1 conj(R);
* Sigma3 L Sigma3 = adjoint(L): for a real eigenvalue, Sigma3 R is a left
  eigenvector, so left vectors cost no second eigensolve.

Retained modes are the positive-branch eigenvalues above the zero-mode
threshold.  Each is normalized against the Sigma3 pseudo-metric; the sign
of the pseudo-norm ("sng") fixes the left-vector normalization.  Degenerate
clusters are rotated to make the pseudo-metric diagonal inside the cluster,
which keeps biorthogonality exact under degeneracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .linres_identical import ResponseMatrix, sigma1, sigma3, zero_mode_vectors

__all__ = [
    "LRSpectrum",
    "ResponseWeights",
    "Reconstruction",
    "eigensolve",
    "classify_zero_modes",
    "response_weights",
    "reconstruct",
    "resolution_checks",
    "spectrum_rows",
    "save_spectrum_csv",
]


@dataclass
class LRSpectrum:
    rm: ResponseMatrix
    eigenvalues: np.ndarray = field(repr=False)       # all D, sorted by Re
    right_all: np.ndarray = field(repr=False)         # columns, same order
    zero_modes: np.ndarray = None                     # indices into eigenvalues
    retained: np.ndarray = None                       # indices, positive branch
    right: np.ndarray = field(default=None, repr=False)   # normalized columns
    left: np.ndarray = field(default=None, repr=False)
    right_neg: np.ndarray = field(default=None, repr=False)
    left_neg: np.ndarray = field(default=None, repr=False)
    sng: np.ndarray = None
    sng_undefined: np.ndarray = None
    pairing: dict = field(default_factory=dict)
    pairing_residual: float = 0.0
    reality_defect: float = 0.0
    unstable: bool = False
    tol_zero: float = 0.0
    tol_im: float = 0.0

    @property
    def omega(self) -> np.ndarray:
        """Retained positive excitation energies (real parts)."""
        return self.eigenvalues[self.retained].real


def eigensolve(rm: ResponseMatrix, tol_zero: float | None = None,
               tol_im: float | None = None,
               cluster_tol: float | None = None) -> LRSpectrum:
    """Dense eigendecomposition plus pairing and biorthogonal bookkeeping."""
    w, V = sla.eig(rm.L)
    order = np.lexsort((w.imag, w.real))
    w, V = w[order], V[:, order]
    scale = max(np.abs(w).max(), 1.0)
    if tol_zero is None:
        tol_zero = 1e-6 * scale
    re_scale = max(np.abs(w.real).max(), 1e-30)
    if tol_im is None:
        tol_im = 1e-7 * re_scale
    if cluster_tol is None:
        cluster_tol = 1e-8 * scale

    zero = np.where(np.abs(w) < tol_zero)[0]
    retained = np.where(w.real > tol_zero)[0]
    unstable = bool(np.any(np.abs(w.imag) > tol_im))
    reality_defect = float(np.abs(w[retained].imag).max()) if len(retained) else 0.0

    S3 = sigma3(rm.layout)
    S1 = sigma1(rm.layout)

    R = V[:, retained].copy()
    wr = w[retained]
    # Sigma3-orthogonalize inside (near-)degenerate clusters
    i = 0
    while i < len(wr):
        j = i + 1
        while j < len(wr) and abs(wr[j] - wr[i]) <= cluster_tol:
            j += 1
        if j - i > 1:
            block = R[:, i:j]
            G = block.conj().T @ S3 @ block
            vals, U = np.linalg.eigh(0.5 * (G + G.conj().T))
            R[:, i:j] = block @ U
        i = j

    sng = np.zeros(len(wr))
    undef = np.zeros(len(wr), dtype=bool)
    for i in range(len(wr)):
        pseudo = np.vdot(R[:, i], S3 @ R[:, i]).real
        if abs(pseudo) < 1e-10:
            undef[i] = True
            continue
        R[:, i] /= np.sqrt(abs(pseudo))
        sng[i] = np.sign(pseudo)
    left = (S3 @ R) * sng
    right_neg = S1 @ R.conj()
    left_neg = S1 @ left.conj()

    # match each retained mode to a computed partner at -conj(w)
    neg = np.where(w.real < -tol_zero)[0]
    pairing = {}
    pairing_residual = 0.0
    if len(retained) and len(neg):
        cost = np.abs(w[neg][None, :] + w[retained].conj()[:, None])
        rows, cols = linear_sum_assignment(cost)
        for r, c in zip(rows, cols):
            pairing[int(retained[r])] = int(neg[c])
            pairing_residual = max(pairing_residual, float(cost[r, c]))

    return LRSpectrum(rm=rm, eigenvalues=w, right_all=V, zero_modes=zero,
                      retained=retained, right=R, left=left,
                      right_neg=right_neg, left_neg=left_neg, sng=sng,
                      sng_undefined=undef, pairing=pairing,
                      pairing_residual=pairing_residual,
                      reality_defect=reality_defect, unstable=unstable,
                      tol_zero=tol_zero, tol_im=tol_im)


def classify_zero_modes(spec: LRSpectrum, expected_count: int | None = None,
                        annihilation_tol: float = 1e-8) -> dict:
    """Zero-mode census plus verification of the analytic null vectors.

    For M orbitals the analytic count is 2 (M^2 + 1): ground orbitals placed
    in the u slots, the coefficient vector in the C_u slot, and their
    block-swapped conjugates.  A count mismatch is reported, not silenced.
    """
    rm = spec.rm
    Z = rm.null_vectors if rm.null_vectors is not None else zero_mode_vectors(rm)
    if expected_count is None:
        expected_count = Z.shape[1]
    Lnorm = max(np.abs(rm.L).max(), 1.0)
    resid = np.linalg.norm(rm.L @ Z, axis=0) / (np.linalg.norm(Z, axis=0) * Lnorm)
    report = {
        "indices": spec.zero_modes,
        "count": int(len(spec.zero_modes)),
        "expected": expected_count,
        "constructed_residual": float(resid.max()),
        "constructed_ok": bool(resid.max() < annihilation_tol),
        "tol_zero": spec.tol_zero,
    }
    if expected_count is not None and report["count"] != expected_count:
        report["mismatch"] = (
            f"found {report['count']} eigenvalues below tol_zero="
            f"{spec.tol_zero:.3e} but expected {expected_count}; "
            "check metric regularization or the threshold")
    return report


def expected_zero_modes(M=None, M_list=None) -> int:
    if M_list is not None:
        return 2 * (int(sum(m * m for m in M_list)) + 1)
    return 2 * (M * M + 1)


@dataclass
class ResponseWeights:
    gamma_plus: np.ndarray          # aligned with spec.retained
    gamma_minus: np.ndarray
    flagged: np.ndarray             # sng-undefined modes excluded from sums


def response_weights(spec: LRSpectrum, R_vec: np.ndarray) -> ResponseWeights:
    """Driving weights gamma_k = -(L^k)^dag R and their negative partners."""
    gp = -(spec.left.conj().T @ R_vec)
    gm = -(spec.left_neg.conj().T @ R_vec)
    gp = np.where(spec.sng_undefined, 0.0, gp)
    gm = np.where(spec.sng_undefined, 0.0, gm)
    return ResponseWeights(gamma_plus=gp, gamma_minus=gm,
                           flagged=spec.sng_undefined.copy())


@dataclass
class Reconstruction:
    """Driven first-order orbitals and coefficients at frequency omega.

    delta_phi(t) = minus * exp(-i omega t) + plus * exp(+i omega t), grid
    values; likewise for the coefficient parts.
    """

    omega: float
    dphi_minus: np.ndarray = field(repr=False)
    dphi_plus: np.ndarray = field(repr=False)
    dC_minus: np.ndarray = field(repr=False)
    dC_plus: np.ndarray = field(repr=False)
    grid: object = None
    state: object = None

    def dphi(self, t: float) -> np.ndarray:
        return (self.dphi_minus * np.exp(-1j * self.omega * t)
                + self.dphi_plus * np.exp(+1j * self.omega * t))

    def dC(self, t: float) -> np.ndarray:
        return (self.dC_minus * np.exp(-1j * self.omega * t)
                + self.dC_plus * np.exp(+1j * self.omega * t))

    def orbital_norms(self, t: float = 0.0) -> np.ndarray:
        d = self.dphi(t)
        return np.array([self.grid.inner(x, x).real for x in d])

    def wavefunction_terms(self, t: float = 0.0) -> list:
        """Expansion data of the driven wavefunction.

        Returns (config, kind, coefficient) rows: the zeroth-order and
        first-order coefficient parts on the unchanged configurations, plus
        one branch per (config, orbital) moving a particle into the
        response orbital, weighted by sqrt(n_j) ||delta phi_j|| and the
        statistics phase (-1)^(occupations above j) for fermions.
        """
        state = self.state
        space = state.space
        norms = np.sqrt(self.orbital_norms(t))
        dc = self.dC(t)
        rows = []
        fermion = space.statistics == "fermion"
        for i, occ in enumerate(space.configs):
            rows.append((occ, "static", complex(state.C[i])))
            rows.append((occ, "coefficient", complex(dc[i])))
            for j, nj in enumerate(occ):
                if nj == 0:
                    continue
                phase = (-1.0) ** sum(occ[j + 1:]) if fermion else 1.0
                rows.append((occ, f"response_orbital_{j}",
                             complex(state.C[i] * phase * np.sqrt(nj) * norms[j])))
        return rows


def reconstruct(spec: LRSpectrum, weights: ResponseWeights, omega: float,
                resonance_tol: float = 1e-6) -> Reconstruction:
    """Sum the driven response over retained modes at probe frequency omega."""
    rm = spec.rm
    layout = rm.layout
    state = rm.state
    wr = spec.eigenvalues[spec.retained].real
    hit = np.where(np.abs(omega - wr) < resonance_tol)[0]
    if len(hit) == 0:
        hit = np.where(np.abs(omega + wr) < resonance_tol)[0]
    if len(hit):
        raise ValueError(
            f"probe frequency {omega} is resonant with excitation "
            f"{wr[hit[0]]:.9g}; response diverges")

    n, M = layout.n_points, layout.M
    from .groundstate import regularized_power
    rho1 = 0.5 * (state.rho.rho1 + state.rho.rho1.conj().T)
    neghalf, _ = regularized_power(rho1, -0.5, 1e-10 * state.space.N)

    dphi_m = np.zeros((M, n), dtype=complex)
    dphi_p = np.zeros((M, n), dtype=complex)
    dC_m = np.zeros(layout.n_conf, dtype=complex)
    dC_p = np.zeros(layout.n_conf, dtype=complex)
    for i, k in enumerate(spec.retained):
        if spec.sng_undefined[i]:
            continue
        wk = spec.eigenvalues[k].real
        u, v, cu, cv = layout.split(spec.right[:, i])
        gp, gm = weights.gamma_plus[i], weights.gamma_minus[i]
        du = neghalf @ u
        dv = neghalf.conj() @ v
        dphi_m += (gp * du) / (omega - wk) + (gm * dv.conj()) / (omega + wk)
        dphi_p += (np.conj(gp) * dv.conj()) / (omega - wk) \
            + (np.conj(gm) * du) / (omega + wk)
        dC_m += (gp * cu) / (omega - wk) + (gm * cv.conj()) / (omega + wk)
        dC_p += (np.conj(gp) * cv.conj()) / (omega - wk) \
            + (np.conj(gm) * cu) / (omega + wk)

    root_dx = np.sqrt(state.grid.weight) if hasattr(state, "grid") else 1.0
    return Reconstruction(omega=omega, dphi_minus=dphi_m / root_dx,
                          dphi_plus=dphi_p / root_dx, dC_minus=dC_m,
                          dC_plus=dC_p,
                          grid=getattr(state, "grid", None), state=state)


def resolution_checks(spec: LRSpectrum) -> dict:
    """Completeness defects of the retained modes on the projected subspace.

    identity: || sum_k R L^dag + R~ L~^dag  -  P ||_maxabs
    spectral: || sum_k w_k (R L^dag - R~ L~^dag)  -  L ||_maxabs
    """
    rm = spec.rm
    mask = ~spec.sng_undefined
    R = spec.right[:, mask]
    Lv = spec.left[:, mask]
    Rn = spec.right_neg[:, mask]
    Ln = spec.left_neg[:, mask]
    wr = spec.eigenvalues[spec.retained].real[mask]
    ident = R @ Lv.conj().T + Rn @ Ln.conj().T
    spectral = (R * wr) @ Lv.conj().T - (Rn * wr) @ Ln.conj().T
    return {
        "identity_defect": float(np.abs(ident - rm.P).max()),
        "spectral_defect": float(np.abs(spectral - rm.L).max()),
        "modes_used": int(mask.sum()),
    }


def spectrum_rows(spec: LRSpectrum, weights: ResponseWeights | None = None):
    """(index, Re w, Im w, sng, is_zero_mode, |gamma_k|, |gamma_-k|) rows."""
    rows = []
    ret_pos = {int(k): i for i, k in enumerate(spec.retained)}
    zero_set = set(int(z) for z in spec.zero_modes)
    for idx in range(len(spec.eigenvalues)):
        w = spec.eigenvalues[idx]
        is_zero = idx in zero_set
        sng = 0.0
        gp = gm = 0.0
        if idx in ret_pos:
            i = ret_pos[idx]
            sng = float(spec.sng[i])
            if weights is not None:
                gp = abs(weights.gamma_plus[i])
                gm = abs(weights.gamma_minus[i])
        rows.append((idx, w.real, w.imag, sng, int(is_zero), gp, gm))
    return rows


def save_reconstruction(path, rec: Reconstruction, t: float = 0.0) -> None:
    """Dump the driven first-order state in the binary checkpoint container."""
    from .checkpoint import save_arrays
    header = {"kind": "reconstruction", "omega": rec.omega, "t": t}
    save_arrays(path, header, {
        "dphi_minus": rec.dphi_minus,
        "dphi_plus": rec.dphi_plus,
        "dC_minus": rec.dC_minus,
        "dC_plus": rec.dC_plus,
        "orbital_norms": rec.orbital_norms(t),
    })


def save_spectrum_csv(path, spec: LRSpectrum,
                      weights: ResponseWeights | None = None,
                      header_lines=()) -> None:
    fmt = "%.17g"
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("index,re_omega,im_omega,sng,is_zero_mode,abs_gamma_plus,"
                 "abs_gamma_minus\n")
        for idx, re, im, sng, z, gp, gm in spectrum_rows(spec, weights):
            fh.write(",".join([str(idx), fmt % re, fmt % im, fmt % sng,
                               str(z), fmt % gp, fmt % gm]) + "\n")
