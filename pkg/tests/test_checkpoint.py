import numpy as np
import pytest

from wavebound import (
    DataError,
    EmaMirror,
    Rng,
    checkpoint_load,
    checkpoint_save,
    ema_init,
    mlp_forward_batch,
    new_forecaster,
)
from wavebound.checkpoint import MAGIC


def params_equal(a, b):
    return (
        a.input_shape == b.input_shape
        and a.output_shape == b.output_shape
        and a.activations == b.activations
        and all(np.array_equal(x, y) for x, y in zip(a.tensors(), b.tensors()))
    )


@pytest.fixture
def model():
    return new_forecaster(8, 4, 2, 6, Rng(13))


class TestRoundTrip:
    def test_params_bit_exact(self, tmp_path, model):
        path = tmp_path / "m.ckpt"
        checkpoint_save(path, model)
        loaded, mirror = checkpoint_load(path)
        assert mirror is None
        assert params_equal(loaded, model)

    def test_with_mirror(self, tmp_path, model):
        mirror = ema_init(model, 0.99)
        mirror.target.weights[0][0, 0] += 0.125  # make mirror differ from source
        path = tmp_path / "m.ckpt"
        checkpoint_save(path, model, mirror)
        loaded, loaded_mirror = checkpoint_load(path)
        assert params_equal(loaded, model)
        assert loaded_mirror is not None
        assert loaded_mirror.decay == 0.99
        assert params_equal(loaded_mirror.target, mirror.target)

    def test_save_load_save_byte_identical(self, tmp_path, model):
        mirror = ema_init(model, 0.5)
        p1 = tmp_path / "a.ckpt"
        p2 = tmp_path / "b.ckpt"
        checkpoint_save(p1, model, mirror)
        loaded, loaded_mirror = checkpoint_load(p1)
        checkpoint_save(p2, loaded, loaded_mirror)
        assert p1.read_bytes() == p2.read_bytes()

    def test_forward_agreement(self, tmp_path, model):
        path = tmp_path / "m.ckpt"
        checkpoint_save(path, model)
        loaded, _ = checkpoint_load(path)
        x = Rng(4).normal(size=(3, 8, 2))
        assert np.array_equal(mlp_forward_batch(loaded, x), mlp_forward_batch(model, x))

    def test_extreme_values_survive(self, tmp_path, model):
        model.weights[0][0, 0] = np.nextafter(1.0, 2.0)
        model.biases[-1][0] = -1e-300
        path = tmp_path / "m.ckpt"
        checkpoint_save(path, model)
        loaded, _ = checkpoint_load(path)
        assert params_equal(loaded, model)


class TestCorruption:
    def saved(self, tmp_path, model, mirror=None):
        path = tmp_path / "m.ckpt"
        checkpoint_save(path, model, mirror)
        return path

    def test_truncation_every_prefix_errors(self, tmp_path, model):
        path = self.saved(tmp_path, model, ema_init(model, 0.9))
        blob = path.read_bytes()
        bad = tmp_path / "bad.ckpt"
        for cut in (0, 4, len(MAGIC), 20, len(blob) // 2, len(blob) - 1):
            bad.write_bytes(blob[:cut])
            with pytest.raises(DataError):
                checkpoint_load(bad)

    def test_trailing_garbage(self, tmp_path, model):
        path = self.saved(tmp_path, model)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(DataError, match="trailing"):
            checkpoint_load(path)

    def test_bad_magic(self, tmp_path, model):
        path = self.saved(tmp_path, model)
        blob = path.read_bytes()
        path.write_bytes(b"X" + blob[1:])
        with pytest.raises(DataError, match="magic"):
            checkpoint_load(path)

    def test_unsupported_version(self, tmp_path, model):
        path = self.saved(tmp_path, model)
        blob = bytearray(path.read_bytes())
        blob[len(MAGIC)] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="version"):
            checkpoint_load(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            checkpoint_load(tmp_path / "nope.ckpt")

    def test_error_names_path(self, tmp_path, model):
        path = self.saved(tmp_path, model)
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(DataError, match="m.ckpt"):
            checkpoint_load(path)
