# tests/test_training/test_checkpoint.py
import struct

import numpy as np
import pytest

from exceptions import (
    MagicMismatchError,
    MissingKeyError,
    PayloadSizeError,
    ProfileMismatchError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from models import expected_keys
from training import (
    AdamState,
    Checkpoint,
    checkpoint_from_network,
    load_checkpoint,
    network_from_checkpoint,
    save_checkpoint,
)


@pytest.fixture
def checkpoint(test_network, rng):
    optimizer = AdamState(lr=3e-4, step=7)
    for key, param in test_network.parameters().items():
        optimizer.m[key] = rng.normal(size=param.shape).astype(np.float32)
        optimizer.v[key] = rng.uniform(size=param.shape).astype(np.float32)
    return checkpoint_from_network(test_network, epoch=12, seed=0, loss_curve=[1.5, 0.25, 0.1],
                                   optimizer=optimizer, extra={"lambda": "1e-06", "augment": "true"})


def test_round_trip(checkpoint, tmp_path):
    path = tmp_path / "model.ptck"
    size = save_checkpoint(checkpoint, str(path))
    assert size == path.stat().st_size
    loaded = load_checkpoint(str(path))

    assert (loaded.profile, loaded.variant, loaded.epoch, loaded.seed) == ("test", "cgru", 12, 0)
    assert loaded.loss_curve == [1.5, 0.25, 0.1]
    assert loaded.extra == {"lambda": "1e-06", "augment": "true"}
    assert list(loaded.tensors) == expected_keys("test", "cgru")
    for key, value in checkpoint.tensors.items():
        np.testing.assert_array_equal(loaded.tensors[key], value)
    assert loaded.optimizer.step == 7
    assert loaded.optimizer.lr == 3e-4
    for key in checkpoint.optimizer.m:
        np.testing.assert_array_equal(loaded.optimizer.m[key], checkpoint.optimizer.m[key])
        np.testing.assert_array_equal(loaded.optimizer.v[key], checkpoint.optimizer.v[key])


def test_resave_is_byte_identical(checkpoint, tmp_path):
    first, second = tmp_path / "a.ptck", tmp_path / "b.ptck"
    save_checkpoint(checkpoint, str(first))
    save_checkpoint(load_checkpoint(str(first)), str(second))
    assert first.read_bytes() == second.read_bytes()


def test_restored_network_predicts_identically(test_network, checkpoint, phantom_sequence):
    restored = network_from_checkpoint(checkpoint)
    np.testing.assert_array_equal(restored.predict_sequence(phantom_sequence.frames),
                                  test_network.predict_sequence(phantom_sequence.frames))


def test_profile_mismatch(checkpoint, tmp_path):
    path = tmp_path / "model.ptck"
    save_checkpoint(checkpoint, str(path))
    with pytest.raises(ProfileMismatchError):
        load_checkpoint(str(path), expected_profile="full")


def test_missing_key(checkpoint, tmp_path):
    del checkpoint.tensors["cgru.W_hr"]
    path = tmp_path / "model.ptck"
    save_checkpoint(checkpoint, str(path))
    with pytest.raises(MissingKeyError, match="cgru.W_hr"):
        load_checkpoint(str(path))


def test_payload_size_mismatch(checkpoint, tmp_path):
    checkpoint.tensors["head.fc2.weight"] = np.zeros((1, 7), dtype=np.float32)
    path = tmp_path / "model.ptck"
    save_checkpoint(checkpoint, str(path))
    with pytest.raises(PayloadSizeError):
        load_checkpoint(str(path))


def test_framewise_checkpoint_has_no_recurrent_keys(framewise_network, tmp_path):
    path = tmp_path / "fw.ptck"
    save_checkpoint(checkpoint_from_network(framewise_network), str(path))
    loaded = load_checkpoint(str(path))
    assert loaded.variant == "framewise"
    assert loaded.optimizer is None
    assert not any(key.startswith("cgru.") for key in loaded.tensors)


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.ptck"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(MagicMismatchError):
        load_checkpoint(str(path))


def test_unsupported_version(tmp_path):
    path = tmp_path / "future.ptck"
    path.write_bytes(b"PTCK" + struct.pack("<II", 99, 0))
    with pytest.raises(UnsupportedVersionError):
        load_checkpoint(str(path))


def test_truncated(checkpoint, tmp_path):
    path = tmp_path / "model.ptck"
    save_checkpoint(checkpoint, str(path))
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(TruncatedPayloadError):
        load_checkpoint(str(path))


def test_metadata_rejects_newlines(test_network, tmp_path):
    ckpt = checkpoint_from_network(test_network, extra={"note": "two\nlines"})
    with pytest.raises(ValueError):
        save_checkpoint(ckpt, str(tmp_path / "bad.ptck"))


def test_checkpoint_snapshot_is_a_copy(test_network):
    ckpt = checkpoint_from_network(test_network)
    assert isinstance(ckpt, Checkpoint)
    test_network.parameters()["head.fc2.bias"].value[...] = 42.0
    assert ckpt.tensors["head.fc2.bias"][0] != 42.0
