"""Batch front-end: ground-state solves, response spectra, oracle tables.

Subcommands
-----------
ground    solve the stationary state described by a config file and write a
          checkpoint (exit 2 on non-convergence)
linres    assemble and diagonalize the response matrix of a checkpoint,
          write spectrum.csv / weights.csv, report zero modes and symmetry
          defects
oracle    run an independent reference (bdg | se | osc) and print a
          comparison table
propcheck real-time propagation diagnostics of the differential conditions

Configs are flat INI files with sections [system], [grid], [trap],
[interaction], [solver], [perturbation]; every output embeds the resolved
config and its SHA-256 so runs can be reproduced bit for bit.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import fockspace as fs
from . import grid as gr
from . import groundstate as gs
from . import hamiltonian as ham
from . import linres_distinguishable as ld
from . import linres_identical as li
from . import oracle as orc
from . import spectrum as spm

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOCONV = 2


class ConfigError(Exception):
    pass


def _load_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        # configparser messages carry the offending line numbers
        raise ConfigError(f"config parse error in {path}: {exc}")
    return parser, text


def _need(cfg, section, key):
    if not cfg.has_option(section, key):
        raise ConfigError(f"missing mandatory key [{section}] {key}")
    return cfg.get(section, key)


def _config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _build_grid_j(cfg, j=None):
    sec = "grid"
    suffix = "" if j is None else f"_{j + 1}"
    n = int(cfg.get(sec, f"points{suffix}",
                    fallback=_need(cfg, sec, "points")))
    x_min = float(cfg.get(sec, f"x_min{suffix}",
                          fallback=_need(cfg, sec, "x_min")))
    x_max = float(cfg.get(sec, f"x_max{suffix}",
                          fallback=_need(cfg, sec, "x_max")))
    return gr.build_grid(n, x_min, x_max)


def _build_h(cfg, grid, j=None):
    suffix = "" if j is None else f"_{j + 1}"
    mass = float(cfg.get("system", "mass", fallback="1.0"))
    h = gr.kinetic_matrix(grid, mass).matrix
    trap = cfg.get("trap", "type", fallback="harmonic")
    if trap == "harmonic":
        omega = float(cfg.get("trap", f"omega{suffix}",
                              fallback=cfg.get("trap", "omega", fallback="1.0")))
        h = h + gr.harmonic_potential(grid, omega).matrix
    elif trap == "none":
        pass
    else:
        raise ConfigError(f"unknown trap type {trap!r}")
    return gr.OneBodyOperator(h)


def _build_kernel(cfg):
    kind = cfg.get("interaction", "type", fallback="none")
    if kind == "none":
        return gr.TwoBodyKernel("none")
    strength = float(_need(cfg, "interaction", "strength"))
    if kind == "contact":
        return gr.TwoBodyKernel("contact", strength=strength)
    if kind == "gaussian":
        width = float(_need(cfg, "interaction", "width"))
        return gr.TwoBodyKernel("gaussian", strength=strength, width=width)
    raise ConfigError(f"unknown interaction type {kind!r}")


def _build_coupling(cfg, grids):
    kind = cfg.get("interaction", "type", fallback="none")
    if kind == "none":
        return None
    strength = float(_need(cfg, "interaction", "strength"))
    pair = cfg.get("interaction", "pair", fallback="1-2")
    a, b = (int(t) - 1 for t in pair.split("-"))
    if kind == "bilinear":
        return ham.PairCoupling.bilinear(grids, a, b, strength)
    if kind == "gaussian_pair":
        width = float(_need(cfg, "interaction", "width"))
        return ham.PairCoupling.gaussian_pair(grids, a, b, strength, width)
    raise ConfigError(f"unknown coupling type {kind!r}")


def _solver_options(cfg):
    opts = gs.SolverOptions()
    if cfg.has_section("solver"):
        for name in ("tol_orb", "tol_c", "tau"):
            if cfg.has_option("solver", name):
                setattr(opts, name, cfg.getfloat("solver", name))
        for name in ("max_iter", "inner_steps", "ci_dense_cutoff"):
            if cfg.has_option("solver", name):
                setattr(opts, name, cfg.getint("solver", name))
    return opts


def _probe_operator(grid, kind, strength):
    if kind == "x":
        return gr.OneBodyOperator(strength * np.diag(grid.points))
    if kind == "x2":
        return gr.OneBodyOperator(strength * np.diag(grid.points**2))
    if kind == "gaussian_bump":
        return gr.OneBodyOperator(
            strength * np.diag(np.exp(-grid.points**2)))
    raise ConfigError(f"unknown probe type {kind!r}")


def _build_perturbation(cfg, state):
    if not cfg.has_section("perturbation"):
        raise ConfigError("missing mandatory section [perturbation]")
    omega = float(_need(cfg, "perturbation", "omega"))
    f_kind = cfg.get("perturbation", "f_type", fallback="none")
    g_kind = cfg.get("perturbation", "g_type", fallback="none")
    if isinstance(state, gs.GroundState):
        f_op = None
        if f_kind != "none":
            f_op = _probe_operator(
                state.grid, f_kind,
                float(cfg.get("perturbation", "f_strength", fallback="1.0")))
        g_op = None
        if g_kind != "none":
            g_strength = float(cfg.get("perturbation", "g_strength",
                                       fallback="1.0"))
            if g_kind == "contact":
                g_op = gr.TwoBodyKernel("contact", strength=g_strength)
            elif g_kind == "gaussian":
                g_op = gr.TwoBodyKernel(
                    "gaussian", strength=g_strength,
                    width=float(_need(cfg, "perturbation", "g_width")))
            else:
                raise ConfigError(f"unknown pair probe {g_kind!r}")
        return li.PerturbationSpec(f_dag=f_op, g_dag=g_op, omega=omega)
    # distinguishable: per-DOF probes f_type_1, f_type_2, ... or one for all
    f_ops = []
    for j, grid in enumerate(state.grids):
        kind = cfg.get("perturbation", f"f_type_{j + 1}", fallback=f_kind)
        if kind == "none":
            f_ops.append(None)
        else:
            strength = float(cfg.get(
                "perturbation", f"f_strength_{j + 1}",
                fallback=cfg.get("perturbation", "f_strength", fallback="1.0")))
            f_ops.append(_probe_operator(grid, kind, strength))
    g = None
    if g_kind == "bilinear":
        g_strength = float(cfg.get("perturbation", "g_strength", fallback="1.0"))
        pair = cfg.get("perturbation", "g_pair", fallback="1-2")
        a, b = (int(t) - 1 for t in pair.split("-"))
        g = ham.PairCoupling.bilinear(state.grids, a, b, g_strength)
    elif g_kind != "none":
        raise ConfigError(f"unknown pair probe {g_kind!r}")
    return ld.DistPerturbationSpec(f_dags=tuple(f_ops), g_dag=g, omega=omega)


def _solve_from_config(cfg, statistics_override=None):
    statistics = statistics_override or _need(cfg, "system", "statistics")
    opts = _solver_options(cfg)
    if statistics in ("boson", "fermion"):
        N = int(_need(cfg, "system", "particles"))
        M = int(_need(cfg, "system", "orbitals"))
        space = fs.enumerate_configs(statistics, N=N, M=M)
        grid = _build_grid_j(cfg)
        h_op = _build_h(cfg, grid)
        kernel = _build_kernel(cfg)
        return gs.solve_mchx(space, grid, h_op, kernel, opts)
    if statistics in ("dist", "distinguishable"):
        M_list = tuple(int(t) for t in
                       _need(cfg, "system", "orbitals").split(","))
        space = fs.enumerate_configs("distinguishable", M_list=M_list)
        grids = [_build_grid_j(cfg, j) for j in range(len(M_list))]
        h_ops = [_build_h(cfg, grids[j], j) for j in range(len(M_list))]
        coupling = _build_coupling(cfg, grids)
        return gs.solve_mch_dist(space, grids, h_ops, coupling, opts)
    raise ConfigError(f"unknown statistics {statistics!r}")


def _print_state_summary(state, cfg_hash):
    print(f"# config sha256 {cfg_hash}")
    print(f"energy = {state.energy:.17g}")
    occ = state.natural_occupations()
    if isinstance(occ, list):
        for j, o in enumerate(occ):
            print(f"natural_occupations_{j + 1} = "
                  + " ".join(f"{x.real:.12g}" for x in o))
    else:
        print("natural_occupations = " + " ".join(f"{x.real:.12g}" for x in occ))
    res = state.residuals
    print(f"orbital_residual = {res['orb_residual']:.3e}")
    print(f"coefficient_residual = {res['c_residual']:.3e}")
    print(f"iterations = {res['iterations']}")


def cmd_ground(args):
    cfg, text = _load_config(args.config)
    cfg_hash = _config_hash(text)
    out = Path(args.checkpoint or "ground.ckpt")
    if args.resume and out.exists():
        state = ckpt.load_state(out)
        print(f"# resumed from {out}")
        _print_state_summary(state, cfg_hash)
        return EXIT_OK
    try:
        state = _solve_from_config(cfg, statistics_override=args.statistics)
    except gs.NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    ckpt.save_state(out, state)
    _print_state_summary(state, cfg_hash)
    print(f"checkpoint = {out}")
    return EXIT_OK


def cmd_linres(args):
    state = ckpt.load_state(args.checkpoint)
    res = state.residuals
    if res.get("orb_residual", np.inf) > 1e-6:
        print("error: checkpoint is not converged; refusing to linearize",
              file=sys.stderr)
        return EXIT_USAGE
    cfg, text = _load_config(args.config)
    cfg_hash = _config_hash(text)
    pert = _build_perturbation(cfg, state)

    if isinstance(state, gs.GroundState):
        rm = li.assemble_L(state, floor=None)
        R = li.build_R(state, pert, rm)
        expected = spm.expected_zero_modes(M=state.space.M)
    else:
        rm = ld.assemble_L_dist(state)
        R = ld.build_R_dist(state, pert, rm)
        expected = spm.expected_zero_modes(M_list=state.space.M_list)

    tol_zero = args.tol_zero
    spec = spm.eigensolve(rm, tol_zero=tol_zero)
    S1, S3 = li.sigma1(rm.layout), li.sigma3(rm.layout)
    sig1 = float(np.abs(S1 @ rm.L @ S1 + rm.L.conj()).max())
    sig3 = float(np.abs(S3 @ rm.L @ S3 - rm.L.conj().T).max())
    zrep = spm.classify_zero_modes(spec, expected_count=expected)
    weights = spm.response_weights(spec, R)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = [f"config sha256 {cfg_hash}", f"checkpoint {args.checkpoint}",
              f"tol_zero {spec.tol_zero:.6g}"]
    spm.save_spectrum_csv(out_dir / "spectrum.csv", spec, weights, header)
    _save_weights_csv(out_dir / "weights.csv", spec, weights, header)

    reconstruction_note = None
    if isinstance(state, gs.GroundState):
        try:
            rec = spm.reconstruct(spec, weights, pert.omega)
            spm.save_reconstruction(out_dir / "reconstruction.ckpt", rec)
        except ValueError as exc:
            reconstruction_note = str(exc)

    print(f"# config sha256 {cfg_hash}")
    print(f"dimension = {rm.D}")
    print(f"zero_modes = {zrep['count']} (expected {zrep['expected']})")
    if "mismatch" in zrep:
        print(f"zero_mode_warning = {zrep['mismatch']}")
    print(f"null_vector_residual = {zrep['constructed_residual']:.3e}")
    print(f"symmetry_defect_sigma1 = {sig1:.3e}")
    print(f"symmetry_defect_sigma3 = {sig3:.3e}")
    print(f"pairing_residual = {spec.pairing_residual:.3e}")
    print(f"unstable = {spec.unstable}")
    low = np.sort(spec.omega)[:8]
    print("lowest_excitations = " + " ".join(f"{w:.12g}" for w in low))
    if args.dump_matrix:
        ckpt.save_arrays(out_dir / "response_matrix.ckpt",
                         {"kind": "response_matrix", "D": rm.D},
                         {"L": rm.L, "P": rm.P, "R": R})
        print(f"matrix_dump = {out_dir / 'response_matrix.ckpt'}")
    if reconstruction_note:
        print(f"reconstruction_skipped = {reconstruction_note}")
    elif isinstance(state, gs.GroundState):
        print(f"reconstruction = {out_dir / 'reconstruction.ckpt'}")
    print(f"spectrum_csv = {out_dir / 'spectrum.csv'}")
    return EXIT_OK


def _save_weights_csv(path, spec, weights, header_lines=()):
    fmt = "%.17g"
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("mode,omega,sng,abs_gamma_plus,abs_gamma_minus\n")
        for i, k in enumerate(spec.retained):
            fh.write(",".join([
                str(int(k)), fmt % spec.eigenvalues[k].real,
                fmt % spec.sng[i], fmt % abs(weights.gamma_plus[i]),
                fmt % abs(weights.gamma_minus[i])]) + "\n")


def cmd_oracle(args):
    cfg, text = _load_config(args.config)
    cfg_hash = _config_hash(text)
    which = args.which
    print(f"# config sha256 {cfg_hash}")
    if which == "osc":
        lam = float(_need(cfg, "interaction", "strength"))
        ref = orc.coupled_oscillators_reference(lam)
        state = _solve_from_config(cfg)
        rm = ld.assemble_L_dist(state)
        spec = spm.eigensolve(rm)
        low = np.sort(spec.omega)[:2]
        print("mode  reference      computed       abs_diff")
        for i in range(2):
            print(f"{i:4d}  {ref[i]:.10f}  {low[i]:.10f}  "
                  f"{abs(ref[i] - low[i]):.3e}")
        return EXIT_OK
    if which == "bdg":
        state = _solve_from_config(cfg)
        lam = state.kernel.strength
        bdg = orc.bdg_reference(state.grid, state.h_op, lam, state.space.N,
                                condensate=state.orbitals.orbitals[0])
        rm = li.assemble_L(state)
        spec = spm.eigensolve(rm)
        low = np.sort(spec.omega)[:5]
        ref = bdg["frequencies"][:5]
        print("mode  bdg            response       abs_diff")
        for i in range(min(len(low), len(ref))):
            print(f"{i:4d}  {ref[i]:.10f}  {low[i]:.10f}  "
                  f"{abs(ref[i] - low[i]):.3e}")
        print(f"max_diff = {np.abs(low[:len(ref)] - ref[:len(low)]).max():.3e}")
        return EXIT_OK
    if which == "se":
        N = int(_need(cfg, "system", "particles"))
        statistics = _need(cfg, "system", "statistics")
        grid = _build_grid_j(cfg)
        h_op = _build_h(cfg, grid)
        kernel = _build_kernel(cfg)
        eigsys = orc.exact_diag_grid(N, statistics, grid, h_op, kernel)
        f_op = gr.position_operator(grid)
        omega = float(cfg.get("perturbation", "omega", fallback="0.37"))
        res = orc.se_linear_response(eigsys, f_op, omega)
        err = np.abs(res["omega_plus"] - res["gaps"]).max()
        print(f"branch_match_defect = {err:.3e}")
        print(f"identity_defect = {res['identity_defect']:.3e}")
        print(f"spectral_defect = {res['spectral_defect']:.3e}")
        ok = (err < 1e-12 * max(1.0, res["gaps"].max())
              and res["identity_defect"] < 1e-10
              and res["spectral_defect"] < 1e-10)
        print("PASS" if ok else "FAIL")
        return EXIT_OK if ok else EXIT_USAGE
    raise ConfigError(f"unknown oracle {which!r}")


def cmd_propcheck(args):
    state = ckpt.load_state(args.checkpoint)
    if not isinstance(state, gs.GroundState):
        print("error: propagation check supports identical-particle "
              "checkpoints only", file=sys.stderr)
        return EXIT_USAGE
    if args.perturb > 0:
        state = gs.perturbed_state(state, args.perturb, seed=args.seed)
    diag = gs.propagate_check(state, args.dt, args.steps,
                              use_coeff_projector=not args.no_coeff_projector)
    for key, val in diag.items():
        print(f"{key} = {val:.6e}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mclr",
        description="excitation spectra from linearized multiconfigurational "
                    "Hartree ground states")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground", help="solve a stationary state")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--statistics", choices=("boson", "fermion", "dist"),
                   default=None, help="override the config value")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("linres", help="response spectrum of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--dump-matrix", action="store_true")
    p.add_argument("--tol-zero", type=float, default=None)
    p.set_defaults(func=cmd_linres)

    p = sub.add_parser("oracle", help="independent reference comparisons")
    p.add_argument("--config", required=True)
    p.add_argument("--which", choices=("bdg", "se", "osc"), required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("propcheck", help="differential-condition diagnostics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--perturb", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-coeff-projector", action="store_true")
    p.set_defaults(func=cmd_propcheck)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except gs.NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
