# tests/test_gradient_utils.py
import numpy as np
import pytest

from tests.gradient_utils import ABS_FLOOR, numerical_gradient, relative_error


def test_relative_above_floor():
    assert relative_error(np.array([1.0]), np.array([1.0001])) == pytest.approx(1e-4 / 2.0001)


def test_absolute_below_floor():
    # both entries tiny: the error is scaled by the floor, not by their magnitude
    assert relative_error(np.array([1e-9]), np.array([2e-9])) == pytest.approx(1e-9 / ABS_FLOOR)
    assert relative_error(np.array([1e-9]), np.array([2e-9]), floor=1e-12) == pytest.approx(1 / 3)


def test_numerical_gradient_of_quadratic():
    x = np.array([1.0, -2.0, 0.5])

    def objective():
        return float((x ** 2).sum())

    assert relative_error(2 * x, numerical_gradient(objective, x), floor=1e-12) <= 1e-8
