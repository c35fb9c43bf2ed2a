"""Bit-exact round trips of the binary checkpoint format."""

import numpy as np

from mclr import checkpoint as ckpt


def test_identical_roundtrip(tmp_path, bos_m2):
    path = tmp_path / "state.ckpt"
    ckpt.save_state(path, bos_m2)
    loaded = ckpt.load_state(path)
    assert loaded.space.statistics == "boson"
    assert loaded.space.N == 2 and loaded.space.M == 2
    assert loaded.energy == bos_m2.energy                        # bit exact
    assert np.array_equal(loaded.orbitals.orbitals, bos_m2.orbitals.orbitals)
    assert np.array_equal(loaded.C, bos_m2.C)
    assert np.array_equal(loaded.mu, bos_m2.mu)
    assert np.array_equal(loaded.kernel_matrix, bos_m2.kernel_matrix)
    assert loaded.grid.weight == bos_m2.grid.weight


def test_identical_double_roundtrip_is_stable(tmp_path, bos_m1):
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    ckpt.save_state(p1, bos_m1)
    ckpt.save_state(p2, ckpt.load_state(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_distinguishable_roundtrip(tmp_path, dist_11):
    path = tmp_path / "dist.ckpt"
    ckpt.save_state(path, dist_11)
    loaded = ckpt.load_state(path)
    assert loaded.space.M_list == (1, 1)
    assert loaded.energy == dist_11.energy
    for a, b in zip(loaded.sets, dist_11.sets):
        assert np.array_equal(a.orbitals, b.orbitals)
    assert np.array_equal(loaded.C, dist_11.C)
    for a, b in zip(loaded.coupling.terms, dist_11.coupling.terms):
        assert a[0] == b[0] and a[1] == b[1]
        assert np.array_equal(a[2], b[2])


def test_array_blob_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {
        "z": rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5)),
        "r": rng.standard_normal(7),
        "i": np.arange(4, dtype=np.int64),
    }
    path = tmp_path / "blob.ckpt"
    ckpt.save_arrays(path, {"kind": "test"}, arrays)
    header, loaded = ckpt.load_arrays(path)
    assert header["kind"] == "test"
    for name, arr in arrays.items():
        assert np.array_equal(loaded[name], arr)
        assert loaded[name].dtype == arr.dtype
