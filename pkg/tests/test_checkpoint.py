"""Checkpoint round-trips and failure diagnostics."""

import numpy as np
import pytest

from placerisk import gradcore as gc


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    blobs = {
        "a.weight": rng.standard_normal((3, 4, 2, 2)),
        "a.bias": rng.standard_normal(4).astype(np.float32),
        "scalar": np.array(1.25),
    }
    path = tmp_path / "model.ckpt"
    gc.save_checkpoint(path, blobs)
    loaded = gc.load_checkpoint(path)
    assert set(loaded) == set(blobs)
    for name, arr in blobs.items():
        assert loaded[name].dtype == arr.dtype
        np.testing.assert_array_equal(loaded[name], arr)


def test_round_trip_from_parameters(tmp_path):
    params = [gc.Parameter(np.arange(6, dtype=np.float64).reshape(2, 3), "w")]
    path = tmp_path / "p.ckpt"
    gc.save_checkpoint(path, params)
    loaded = gc.load_checkpoint(path)
    np.testing.assert_array_equal(loaded["w"], params[0].data)


def test_restore_parameters(tmp_path):
    p = gc.Parameter(np.zeros((2, 2)), "w")
    gc.save_checkpoint(tmp_path / "c.ckpt", {"w": np.ones((2, 2))})
    gc.restore_parameters([p], gc.load_checkpoint(tmp_path / "c.ckpt"))
    np.testing.assert_array_equal(p.data, np.ones((2, 2)))


def test_restore_rejects_missing_and_mismatched(tmp_path):
    gc.save_checkpoint(tmp_path / "c.ckpt", {"w": np.ones((2, 2))})
    blobs = gc.load_checkpoint(tmp_path / "c.ckpt")
    with pytest.raises(KeyError):
        gc.restore_parameters([gc.Parameter(np.zeros(2), "missing")], blobs)
    with pytest.raises(ValueError, match="shape"):
        gc.restore_parameters([gc.Parameter(np.zeros(3), "w")], blobs)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        gc.load_checkpoint(path)


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "c.ckpt"
    gc.save_checkpoint(path, {"w": np.ones((4, 4))})
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 8])
    with pytest.raises(ValueError, match="truncated"):
        gc.load_checkpoint(path)
