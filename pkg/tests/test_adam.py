"""Adam optimizer: closed-form single step, defaults, and rejection paths."""

import numpy as np
import pytest

from placerisk import gradcore as gc


def make_param(value, name="p"):
    return gc.Parameter(np.array(value, dtype=np.float64), name)


class TestAdam:
    def test_zero_gradient_leaves_parameters_unchanged(self):
        p = make_param([1.0, -2.0, 3.0])
        opt = gc.Adam([p])
        before = p.data.copy()
        opt.step()
        np.testing.assert_array_equal(p.data, before)

    def test_single_step_closed_form(self):
        # After one step from zero moments:
        #   m1 = (1-b1) g,  v1 = (1-b2) g^2
        #   m̂ = g,  v̂ = g^2,  Δθ = -lr * g / (|g| + eps)
        g = 0.731
        p = make_param([0.5])
        p.grad = np.array([g])
        lr, b1, b2, eps = 5e-4, 0.99, 0.9, 1e-8
        opt = gc.Adam([p], lr=lr, beta1=b1, beta2=b2, eps=eps)
        opt.step()
        expected = 0.5 - lr * g / (np.sqrt(g * g) + eps)
        np.testing.assert_allclose(p.data, [expected], rtol=1e-12)

    def test_two_step_recurrence_matches_direct_formula(self):
        grads = [np.array([0.2, -1.3]), np.array([-0.7, 0.4])]
        p = make_param([0.0, 0.0])
        lr, b1, b2, eps = 1e-2, 0.99, 0.9, 1e-8
        opt = gc.Adam([p], lr=lr, beta1=b1, beta2=b2, eps=eps)

        theta = np.zeros(2)
        m = np.zeros(2)
        v = np.zeros(2)
        for t, g in enumerate(grads, start=1):
            p.grad = g.copy()
            opt.step()
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mhat = m / (1 - b1**t)
            vhat = v / (1 - b2**t)
            theta = theta - lr * mhat / (np.sqrt(vhat) + eps)
        np.testing.assert_allclose(p.data, theta, rtol=1e-12)

    def test_default_hyperparameters(self):
        opt = gc.Adam([make_param([0.0])])
        assert opt.lr == 5e-4
        assert opt.beta1 == 0.99
        assert opt.beta2 == 0.9
        assert opt.eps == 1e-8

    def test_step_counter_increments_by_one(self):
        p = make_param([1.0])
        opt = gc.Adam([p])
        assert opt.state.t == 0
        opt.step()
        opt.step()
        assert opt.state.t == 2

    def test_non_finite_gradient_rejected(self):
        p = make_param([1.0])
        p.grad = np.array([np.nan])
        opt = gc.Adam([p])
        with pytest.raises(FloatingPointError, match="non-finite"):
            opt.step()

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            gc.Adam([make_param([0.0], "a"), make_param([1.0], "a")])

    def test_moments_match_parameter_shapes(self):
        p = make_param(np.zeros((3, 4)), "w")
        opt = gc.Adam([p])
        assert opt.state.m["w"].shape == (3, 4)
        assert opt.state.v["w"].shape == (3, 4)

    def test_zero_grad_resets(self):
        p = make_param([1.0])
        p.grad = np.array([5.0])
        opt = gc.Adam([p])
        opt.zero_grad()
        np.testing.assert_array_equal(p.grad, [0.0])
