"""Binary state checkpoints: JSON header plus raw little-endian arrays.

Layout: 8-byte magic, u32 format version, u64 header length, UTF-8 JSON
header, then the concatenated array payload.  The header carries scalar
metadata and an array directory (name, dtype, shape, byte offset).  Arrays
round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from . import fockspace as fs
from .grid import Grid, OneBodyOperator, TwoBodyKernel, build_grid
from .groundstate import DistGroundState, GroundState
from .hamiltonian import AllBodyTable, OrbitalSet, PairCoupling

MAGIC = b"MCLRCKPT"
VERSION = 1

__all__ = ["save_state", "load_state", "save_arrays", "load_arrays"]


def _encode(header: dict, arrays: dict) -> bytes:
    directory = []
    payload = b""
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<")
        raw = arr.astype(dtype, copy=False).tobytes()
        directory.append({"name": name, "dtype": dtype.str,
                          "shape": list(arr.shape), "offset": len(payload)})
        payload += raw
    header = dict(header)
    header["arrays"] = directory
    blob = json.dumps(header, sort_keys=True).encode()
    return MAGIC + struct.pack("<IQ", VERSION, len(blob)) + blob + payload


def _decode(data: bytes):
    if data[:8] != MAGIC:
        raise ValueError("not a checkpoint file")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    header = json.loads(data[20:20 + hlen].decode())
    base = 20 + hlen
    arrays = {}
    for entry in header["arrays"]:
        dt = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], initial=1))
        start = base + entry["offset"]
        arr = np.frombuffer(data[start:start + count * dt.itemsize], dtype=dt)
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return header, arrays


def save_arrays(path, header: dict, arrays: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(_encode(header, arrays))


def load_arrays(path):
    with open(path, "rb") as fh:
        return _decode(fh.read())


def _grid_meta(grid: Grid) -> dict:
    return {"n_points": grid.n_points, "x_min": grid.x_min, "x_max": grid.x_max}


def save_state(path, state) -> None:
    if isinstance(state, GroundState):
        header = {
            "kind": "identical",
            "statistics": state.space.statistics,
            "N": state.space.N,
            "M": state.space.M,
            "grid": _grid_meta(state.grid),
            "energy": state.energy,
            "residuals": {k: v for k, v in state.residuals.items()
                          if not isinstance(v, (list, np.ndarray))},
            "kernel": {"kind": state.kernel.kind,
                       "strength": state.kernel.strength,
                       "width": state.kernel.width},
        }
        arrays = {
            "orbitals": state.orbitals.orbitals,
            "C": state.C,
            "mu": state.mu,
            "h_matrix": state.h_op.matrix,
            "kernel_matrix": state.kernel_matrix,
        }
        if state.kernel.kind == "general":
            arrays["kernel_table"] = state.kernel.table
        save_arrays(path, header, arrays)
        return
    if isinstance(state, DistGroundState):
        coupling = state.coupling
        if coupling is None:
            cmeta = {"type": "none"}
            ctables = {}
        elif isinstance(coupling, PairCoupling):
            cmeta = {"type": "pair",
                     "pairs": [[a, b] for a, b, _ in coupling.terms]}
            ctables = {f"coupling_{i}": t for i, (_, _, t) in
                       enumerate(coupling.terms)}
        elif isinstance(coupling, AllBodyTable):
            cmeta = {"type": "table"}
            ctables = {"coupling_table": coupling.table}
        else:
            raise TypeError(f"cannot serialize coupling {type(coupling)!r}")
        header = {
            "kind": "distinguishable",
            "statistics": "distinguishable",
            "M_list": list(state.space.M_list),
            "grids": [_grid_meta(g) for g in state.grids],
            "energy": state.energy,
            "residuals": {k: v for k, v in state.residuals.items()
                          if not isinstance(v, (list, np.ndarray))},
            "coupling": cmeta,
        }
        arrays = {}
        for j, s in enumerate(state.sets):
            arrays[f"orbitals_{j}"] = s.orbitals
            arrays[f"mu_{j}"] = state.mu[j]
            arrays[f"h_matrix_{j}"] = state.h_ops[j].matrix
        arrays["C"] = state.C
        arrays.update(ctables)
        save_arrays(path, header, arrays)
        return
    raise TypeError(f"cannot serialize {type(state)!r}")


def load_state(path):
    header, arrays = load_arrays(path)
    if header["kind"] == "identical":
        g = header["grid"]
        grid = build_grid(g["n_points"], g["x_min"], g["x_max"])
        space = fs.enumerate_configs(header["statistics"], N=header["N"],
                                     M=header["M"])
        kmeta = header["kernel"]
        kernel = TwoBodyKernel(kind=kmeta["kind"], strength=kmeta["strength"],
                               width=kmeta["width"],
                               table=arrays.get("kernel_table"))
        orbs = OrbitalSet(arrays["orbitals"], grid)
        C = arrays["C"]
        state = GroundState(
            space=space, grid=grid,
            h_op=OneBodyOperator(arrays["h_matrix"], hermitian=False),
            kernel=kernel, kernel_matrix=arrays["kernel_matrix"],
            orbitals=orbs, C=C, rho=fs.reduced_densities(space, C),
            mu=arrays["mu"], energy=header["energy"],
            residuals=dict(header["residuals"]))
        return state
    if header["kind"] == "distinguishable":
        grids = [build_grid(g["n_points"], g["x_min"], g["x_max"])
                 for g in header["grids"]]
        space = fs.enumerate_configs("distinguishable",
                                     M_list=header["M_list"])
        Q = len(grids)
        sets = [OrbitalSet(arrays[f"orbitals_{j}"], grids[j]) for j in range(Q)]
        h_ops = [OneBodyOperator(arrays[f"h_matrix_{j}"], hermitian=False)
                 for j in range(Q)]
        mu = [arrays[f"mu_{j}"] for j in range(Q)]
        cmeta = header["coupling"]
        if cmeta["type"] == "none":
            coupling = None
        elif cmeta["type"] == "pair":
            coupling = PairCoupling([(a, b, arrays[f"coupling_{i}"])
                                     for i, (a, b) in enumerate(cmeta["pairs"])])
        else:
            coupling = AllBodyTable(arrays["coupling_table"])
        C = arrays["C"]
        rho1 = [fs.dist_reduced_density(space, C, (j,)) for j in range(Q)]
        return DistGroundState(space=space, grids=grids, h_ops=h_ops,
                               coupling=coupling, sets=sets, C=C, rho1=rho1,
                               mu=mu, energy=header["energy"],
                               residuals=dict(header["residuals"]))
    raise ValueError(f"unknown checkpoint kind {header['kind']!r}")
