"""Analytic SE(3) chain-rule Jacobians against the finite-difference oracle."""

import numpy as np
import pytest

from floatbase import diff as dm
from floatbase import liegroups as lg
from floatbase import se3chain as sc
from floatbase.errors import UnregisteredPrimitive

from conftest import random_rotation


def _fd(expr, x):
    return dm.jacobian_fd(lambda z: sc.evaluate(expr, z), x)


def test_log_exp_identity_chain(rng):
    expr = sc.Log(sc.Exp(sc.Var(0)))
    for _ in range(50):
        x = rng.normal(scale=0.8, size=6)
        assert np.max(np.abs(sc.evaluate(expr, x) - x)) < 1e-10
        J = sc.jacobian_se3_chain(expr, x)
        assert np.max(np.abs(J - np.eye(6))) < 1e-9


def test_ominus_of_two_exps(rng):
    expr = sc.Ominus(sc.Exp(sc.Var(0)), sc.Exp(sc.Var(6)))
    for _ in range(100):
        x = rng.normal(scale=0.7, size=12)
        J = sc.jacobian_se3_chain(expr, x)
        assert np.max(np.abs(J - _fd(expr, x))) < 1e-6


def test_inverse_and_const_nodes(rng):
    for _ in range(50):
        T = lg.Se3Pose(random_rotation(rng, 2.0), rng.normal(size=3))
        expr = sc.Log(sc.Compose(sc.Const(T), sc.Inv(sc.Exp(sc.Var(0)))))
        x = rng.normal(scale=0.6, size=6)
        J = sc.jacobian_se3_chain(expr, x)
        assert np.max(np.abs(J - _fd(expr, x))) < 1e-6


def test_scale_node(rng):
    h = 0.05
    expr = sc.Log(sc.Exp(sc.Scale(sc.Var(0), h)))
    for _ in range(50):
        x = rng.normal(size=6)
        assert np.max(np.abs(sc.evaluate(expr, x) - h * x)) < 1e-10
        J = sc.jacobian_se3_chain(expr, x)
        assert np.max(np.abs(J - h * np.eye(6))) < 1e-9


def test_integration_residual_expr(rng):
    h = 0.05
    expr = sc.integration_residual_expr(h)
    for _ in range(100):
        x = rng.normal(scale=0.6, size=18)
        J = sc.jacobian_se3_chain(expr, x)
        assert np.max(np.abs(J - _fd(expr, x))) < 1e-6


def test_integration_residual_zero_on_exact_step(rng):
    h = 0.05
    expr = sc.integration_residual_expr(h)
    for _ in range(50):
        xi = rng.normal(scale=0.6, size=6)
        tw = rng.normal(size=6)
        nxt = lg.log_se3(lg.exp_se3(xi).compose(lg.exp_se3(h * tw)))
        x = np.concatenate([xi, np.asarray(nxt, float), tw])
        assert np.max(np.abs(sc.evaluate(expr, x))) < 1e-10


def test_type_errors():
    with pytest.raises(UnregisteredPrimitive):
        sc.jacobian_se3_chain(sc.Exp(sc.Var(0)), np.zeros(6))  # pose-valued top
    with pytest.raises(UnregisteredPrimitive):
        sc.evaluate(sc.Log(sc.Var(0)), np.zeros(6))            # Log of a vector
    with pytest.raises(UnregisteredPrimitive):
        sc.Var(0) + sc.Var(6)                                  # no '+' on poses
