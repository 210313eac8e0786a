import numpy as np
import pytest

from typegtr.checkpoint import (
    CheckpointError,
    MAGIC,
    load_model,
    save_model,
    serialize_model,
)

from conftest import tiny_model


class TestCheckpointRoundTrip:
    def test_reload_is_bit_exact(self, tmp_path):
        model = tiny_model(seed=3, n_layers=2)
        path = tmp_path / "m.ckpt"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.vocab.tokens == model.vocab.tokens
        assert loaded.dims == model.dims
        assert loaded.seed == model.seed
        for name, tensor in model.tensors.items():
            # float64 -> float32 -> float64: equal at float32 precision,
            # and stable under a second round trip.
            assert np.array_equal(
                loaded.tensors[name], tensor.astype(np.float32).astype(np.float64)
            )

    def test_second_round_trip_byte_identical(self, tmp_path):
        model = tiny_model(seed=9)
        blob1 = serialize_model(model)
        path = tmp_path / "m.ckpt"
        save_model(model, path)
        blob2 = serialize_model(load_model(path))
        assert blob1 == blob2

    def test_no_temp_files_left(self, tmp_path):
        save_model(tiny_model(), tmp_path / "m.ckpt")
        assert [p.name for p in tmp_path.iterdir()] == ["m.ckpt"]

    def test_overwrite_is_atomic_replace(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_model(tiny_model(seed=1), path)
        save_model(tiny_model(seed=2), path)
        assert load_model(path).seed == 2


class TestCheckpointErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.ckpt"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
        with pytest.raises(CheckpointError):
            load_model(path)

    def test_truncated_tensors(self, tmp_path):
        blob = serialize_model(tiny_model())
        path = tmp_path / "m.ckpt"
        path.write_bytes(blob[: len(blob) - 10])
        with pytest.raises(CheckpointError):
            load_model(path)

    def test_trailing_bytes(self, tmp_path):
        blob = serialize_model(tiny_model())
        path = tmp_path / "m.ckpt"
        path.write_bytes(blob + b"xx")
        with pytest.raises(CheckpointError):
            load_model(path)

    def test_magic_prefix_present(self):
        assert serialize_model(tiny_model()).startswith(MAGIC)
