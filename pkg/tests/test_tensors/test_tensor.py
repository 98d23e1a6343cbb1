# tests/test_tensors/test_tensor.py
import io

import numpy as np
import pytest

from exceptions import NumericalError, ShapeError, TruncatedPayloadError
from tensors import (
    Param,
    assert_finite,
    get_default_dtype,
    kaiming_uniform,
    precision,
    read_tensor,
    tensor_to_bytes,
    write_tensor,
)


def test_param_grad_starts_at_zero_and_accumulates():
    p = Param(np.ones((2, 3)), name="w")
    assert p.grad.shape == (2, 3)
    assert not p.grad.any()
    p.accumulate(np.ones((2, 3)))
    p.accumulate(np.ones((2, 3)))
    assert np.all(p.grad == 2)
    p.zero_grad()
    assert not p.grad.any()


def test_param_rejects_wrong_gradient_shape():
    p = Param(np.ones(3), name="b")
    with pytest.raises(ShapeError, match="'b'"):
        p.accumulate(np.ones(4))


def test_precision_switch_is_scoped():
    before = get_default_dtype()
    with precision("float64"):
        assert get_default_dtype() is np.float64
    assert get_default_dtype() is before


def test_kaiming_bound(rng):
    w = kaiming_uniform((64, 9), fan_in=9, rng=rng)
    assert np.abs(w).max() <= np.sqrt(6.0 / 9) + 1e-6


def test_assert_finite():
    assert_finite(np.zeros(3), "ok")
    with pytest.raises(NumericalError):
        assert_finite(np.array([0.0, np.nan]), "conv")


def test_tensor_blob_layout():
    blob = tensor_to_bytes(np.arange(6, dtype=np.float32).reshape(2, 3))
    assert blob[:4] == (2).to_bytes(4, "little")
    assert blob[4:12] == (2).to_bytes(8, "little")
    assert blob[12:20] == (3).to_bytes(8, "little")
    assert len(blob) == 4 + 2 * 8 + 6 * 4


def test_tensor_round_trip(rng):
    x = rng.normal(size=(3, 1, 4)).astype(np.float32)
    fh = io.BytesIO()
    write_tensor(fh, x)
    fh.seek(0)
    back = read_tensor(fh, dtype=np.float32)
    np.testing.assert_array_equal(back, x)
    assert back.shape == (3, 1, 4)


def test_truncated_tensor():
    blob = tensor_to_bytes(np.ones(4, dtype=np.float32))
    with pytest.raises(TruncatedPayloadError):
        read_tensor(io.BytesIO(blob[:-2]))
