"""Shared fixtures: asset paths and seeded RNGs."""

import os

import numpy as np
import pytest

import floatbase

ASSET_DIR = os.path.join(os.path.dirname(floatbase.__file__), "assets")
DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def asset(*parts):
    return os.path.join(ASSET_DIR, *parts)


def data(*parts):
    return os.path.join(DATA_DIR, *parts)


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)


def random_rotation(rng, max_angle=np.pi - 1e-3):
    """Uniform axis, angle scaled to stay below the log branch cut."""
    from floatbase import liegroups as lg
    w = rng.normal(size=3)
    w *= rng.uniform(0.0, max_angle) / np.linalg.norm(w)
    return np.asarray(lg.exp_so3(w), dtype=float)


def make_lagrangian_tau():
    """tau(q, qd, qdd) for the double_pendulum fixture, derived symbolically
    from the Lagrangian — fully independent of the package's recursive
    Newton-Euler implementation.

    Geometry from double_pendulum.yaml: both joints rotate about +y; link1
    com (0,0,-0.25), Iyy=2e-2, m=1.2; elbow at (0,0,-0.5) on link1; link2
    com (0,0,-0.2), Iyy=1.2e-2, m=0.8; g = 9.81 downward.
    """
    import sympy as sp
    t = sp.Symbol("t")
    q1, q2 = sp.Function("q1")(t), sp.Function("q2")(t)
    m1, m2 = sp.Rational(12, 10), sp.Rational(8, 10)
    I1, I2 = sp.Rational(2, 100), sp.Rational(12, 1000)
    g = sp.Rational(981, 100)

    def Ry(a):
        return sp.Matrix([[sp.cos(a), 0, sp.sin(a)],
                          [0, 1, 0],
                          [-sp.sin(a), 0, sp.cos(a)]])

    c1 = Ry(q1) * sp.Matrix([0, 0, sp.Rational(-1, 4)])
    c2 = (Ry(q1) * sp.Matrix([0, 0, sp.Rational(-1, 2)])
          + Ry(q1) * Ry(q2) * sp.Matrix([0, 0, sp.Rational(-1, 5)]))
    v1 = c1.diff(t)
    v2 = c2.diff(t)
    ke = (m1 * v1.dot(v1) / 2 + m2 * v2.dot(v2) / 2
          + I1 * q1.diff(t) ** 2 / 2 + I2 * (q1.diff(t) + q2.diff(t)) ** 2 / 2)
    pe = g * (m1 * c1[2] + m2 * c2[2])
    L = ke - pe

    qs = [q1, q2]
    s_q = sp.symbols("sq1 sq2")
    s_qd = sp.symbols("sqd1 sqd2")
    s_qdd = sp.symbols("sqdd1 sqdd2")
    taus = []
    for qi in qs:
        eq = sp.diff(sp.diff(L, qi.diff(t)), t) - sp.diff(L, qi)
        sub = {}
        for j, qj in enumerate(qs):
            sub[sp.Derivative(qj, (t, 2))] = s_qdd[j]
            sub[sp.Derivative(qj, t)] = s_qd[j]
            sub[qj] = s_q[j]
        taus.append(sp.simplify(eq.subs(sub)))
    return sp.lambdify((*s_q, *s_qd, *s_qdd), taus, "numpy")
