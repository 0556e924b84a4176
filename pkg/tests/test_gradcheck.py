"""Tests for the finite-difference gradient oracle itself, then the registry.

The oracle is validated against closed-form derivatives (linear and
quadratic functions where central differences are exact to machine noise),
and against a deliberately wrong gradient that it must flag.
"""

import numpy as np
import pytest

from carafe.errors import NumericError
from carafe.gradcheck import (CheckProblem, DEFAULT_TOL, check_op,
                              check_problem, finite_diff, finite_diff_array,
                              registered_ops, relative_error)
from carafe.tensor import Tensor


class TestRelativeError:
    def test_zero_for_equal(self):
        a = np.array([1.0, -2.0, 0.0])
        assert np.all(relative_error(a, a.copy()) == 0.0)

    def test_symmetric(self):
        a = np.array([1.0, 2.0])
        b = np.array([1.5, -2.0])
        assert np.array_equal(relative_error(a, b), relative_error(b, a))

    def test_tiny_denominator_floor(self):
        # both near zero: denominator floors at 1e-12
        a = np.array([1e-15])
        b = np.array([0.0])
        assert relative_error(a, b)[0] == pytest.approx(1e-3)


class TestOracleClosedForms:
    def test_linear_function_exact(self):
        # f(x) = <c, x> has gradient c; central differences are exact for
        # linear functions up to rounding.
        rng = np.random.default_rng(40)
        c = rng.standard_normal((2, 3, 4, 4))
        x = Tensor(rng.standard_normal((2, 3, 4, 4)))
        g = finite_diff(lambda t: float(np.sum(c * t.data)), x)
        np.testing.assert_allclose(g.data, c, rtol=1e-8)

    def test_quadratic_function_exact(self):
        # f(x) = sum(x^2): central differences cancel the cubic term, so the
        # estimate ((x+h)^2 - (x-h)^2) / 2h == 2x exactly.
        rng = np.random.default_rng(41)
        x = Tensor(rng.standard_normal((1, 2, 3, 3)))
        g = finite_diff(lambda t: float(np.sum(t.data ** 2)), x)
        np.testing.assert_allclose(g.data, 2 * x.data, rtol=1e-7)

    def test_array_is_restored_exactly(self):
        rng = np.random.default_rng(42)
        arr = rng.standard_normal(10)
        before = arr.copy()
        finite_diff_array(lambda: float(np.sum(arr ** 3)), arr)
        assert np.array_equal(arr, before)

    def test_relative_step_scaling(self):
        # elements much larger than 1 get a proportional step, keeping the
        # quotient accurate for f(x) = sum(x^2) at x ~ 1e6
        arr = np.array([1e6, -3e6])
        g = finite_diff_array(lambda: float(np.sum(arr ** 2)), arr)
        np.testing.assert_allclose(g, 2 * arr, rtol=1e-9)

    def test_bad_eps_rejected(self):
        with pytest.raises(ValueError):
            finite_diff_array(lambda: 0.0, np.zeros(2), eps=0.0)

    def test_non_finite_loss_raises(self):
        arr = np.array([0.5])

        def loss():
            return float("inf") if arr[0] > 0.6 else float(arr[0])

        with pytest.raises(NumericError):
            finite_diff_array(loss, arr, eps=0.2)


class TestCheckProblem:
    @staticmethod
    def _quadratic_problem(wrong: bool):
        arr = np.random.default_rng(43).standard_normal(6)

        def loss():
            return float(np.sum(arr ** 2))

        def analytic():
            g = 2 * arr
            if wrong:
                g = g.copy()
                g[3] = -g[3]  # sign flip the oracle must catch
            return {"x": g}

        return CheckProblem(loss=loss, targets=[("x", arr)], analytic=analytic)

    def test_correct_gradient_passes(self):
        report = check_problem("quad", self._quadratic_problem(wrong=False))
        assert report.passed
        assert report.max_rel_error < 1e-8
        assert report.per_target == {"x": report.max_rel_error}

    def test_sign_flip_caught(self):
        report = check_problem("quad", self._quadratic_problem(wrong=True))
        assert not report.passed
        assert report.max_rel_error > 0.5
        assert report.worst_index == ("x", 3)

    def test_missing_analytic_target(self):
        arr = np.zeros(3)
        problem = CheckProblem(loss=lambda: 0.0, targets=[("x", arr)],
                               analytic=lambda: {})
        with pytest.raises(KeyError):
            check_problem("broken", problem)

    def test_report_payload_shape(self):
        report = check_problem("quad", self._quadratic_problem(wrong=False))
        payload = report.to_payload()
        assert payload["op"] == "quad"
        assert payload["passed"] is True
        assert set(payload) == {"op", "max_rel_error", "max_abs_error",
                                "worst_index", "tol", "passed", "per_target"}


class TestRegistry:
    def test_unknown_op(self):
        with pytest.raises(KeyError):
            check_op("warp")

    def test_registry_covers_core_and_baselines(self):
        ops = set(registered_ops())
        for needed in ("conv2d", "transposed_conv", "relu", "affine_norm",
                       "softmax_group", "pixel_shuffle", "reassemble_down",
                       "reassemble_up", "carafe_down", "carafe_up"):
            assert needed in ops

    @pytest.mark.parametrize("name", sorted(registered_ops()))
    def test_registered_op_passes(self, name):
        report = check_op(name, seed=0)
        assert report.passed, (
            f"{name}: max rel error {report.max_rel_error:.3e} at "
            f"{report.worst_index}")

    def test_seed_changes_problem_not_outcome(self):
        a = check_op("conv2d", seed=1)
        b = check_op("conv2d", seed=2)
        assert a.passed and b.passed
        assert a.max_rel_error != b.max_rel_error
