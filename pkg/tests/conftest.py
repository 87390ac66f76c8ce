"""Shared builders for the test-suite: reference systems, random expressions,
and jets lying on smooth curves."""

from __future__ import annotations

import math

import numpy as np
import pytest

from delayham import expr as E
from delayham import model as M
from delayham import solver as S


@pytest.fixture(scope="session")
def oscillator():
    """Nondegenerate delay oscillator: L = qd*qdm - q*qm, H = p*pm + q*qm."""
    lag = M.QuadraticLagrangian(0, 1, 0, E.parse("q*qm"))
    ham = M.DelayHamiltonian(E.parse("p*pm + q*qm"), (1, 0, 0, 1))
    return lag, ham


@pytest.fixture(scope="session")
def degenerate_oscillator():
    """Degenerate delay oscillator: L = (qd+qdm)^2/2 - (q+qm)^2/2."""
    lag = M.QuadraticLagrangian(1, 1, 1, E.parse("(q+qm)^2/2"))
    ham = M.DelayHamiltonian(E.parse("(p+pm)^2/2 + (q+qm)^2/2"), (1, 1, 1, 1))
    return lag, ham


@pytest.fixture(scope="session")
def oscillator_generators():
    return {
        "sin": M.Generator(E.ZERO, E.parse("sin(t)"), E.parse("cos(t)")),
        "cos": M.Generator(E.ZERO, E.parse("cos(t)"), E.parse("-sin(t)")),
        "time": M.Generator(E.ONE, E.ZERO, E.ZERO),
        "scale": M.Generator(E.ZERO, E.q, E.p),
        "rotate": M.Generator(E.ZERO, E.p, E.neg(E.q)),
    }


@pytest.fixture(scope="session")
def sincos_history():
    return S.History(0.0, 1.0, E.parse("sin(t)"), E.parse("cos(t)"))


# ---------------------------------------------------------------------------
# random builders
# ---------------------------------------------------------------------------


def random_expr(rng: np.random.Generator, atoms, depth: int = 3) -> E.Expr:
    """Random expression over the surface grammar; kept numerically tame."""
    if depth == 0 or rng.uniform() < 0.25:
        r = rng.uniform()
        if r < 0.35:
            return E.const(round(float(rng.uniform(-2, 2)), 3))
        return atoms[rng.integers(len(atoms))]
    op = rng.integers(7)
    if op == 0:
        return E.add(random_expr(rng, atoms, depth - 1), random_expr(rng, atoms, depth - 1))
    if op == 1:
        return E.sub(random_expr(rng, atoms, depth - 1), random_expr(rng, atoms, depth - 1))
    if op == 2:
        return E.mul(random_expr(rng, atoms, depth - 1), random_expr(rng, atoms, depth - 1))
    if op == 3:
        return E.neg(random_expr(rng, atoms, depth - 1))
    if op == 4:
        return E.powi(random_expr(rng, atoms, depth - 1), int(rng.integers(2, 4)))
    if op == 5:
        return E.sin(random_expr(rng, atoms, depth - 1))
    return E.cos(random_expr(rng, atoms, depth - 1))


def random_polynomial(rng: np.random.Generator, atoms, terms: int = 3) -> E.Expr:
    out = []
    for _ in range(terms):
        coeff = E.const(int(rng.integers(-3, 4)) or 1)
        factors = [atoms[rng.integers(len(atoms))] for _ in range(int(rng.integers(1, 3)))]
        out.append(E.mul(coeff, *factors))
    return E.add(*out)


def random_quadratic_hamiltonian(rng: np.random.Generator) -> M.DelayHamiltonian:
    a = int(rng.integers(-3, 4))
    b = int(rng.integers(1, 4))
    c = int(rng.integers(-3, 4))
    phi = random_polynomial(rng, [E.q, E.qm], terms=2)
    quad = M.QuadraticHamiltonian(a, b, c, phi)
    alphas = tuple(int(x) for x in rng.integers(-2, 3, size=4))
    return M.DelayHamiltonian(quad.expr(), alphas)


def random_generator(rng: np.random.Generator, affine_xi: bool = False) -> M.Generator:
    atoms = [E.t, E.q, E.p]
    if affine_xi:
        xi = E.add(E.mul(E.const(int(rng.integers(-2, 3))), E.t), E.const(int(rng.integers(-2, 3))))
    else:
        xi = random_polynomial(rng, atoms, terms=2)
    eta = random_polynomial(rng, atoms, terms=2)
    nu = random_polynomial(rng, atoms, terms=2)
    return M.Generator(xi, eta, nu)


# ---------------------------------------------------------------------------
# jets on smooth curves
# ---------------------------------------------------------------------------

CURVE_Q = (
    lambda s: math.sin(s) + 0.3 * s,
    lambda s: math.cos(s) + 0.3,
    lambda s: -math.sin(s),
)
CURVE_P = (
    lambda s: math.cos(2 * s) - 0.2 * s * s,
    lambda s: -2 * math.sin(2 * s) - 0.4 * s,
    lambda s: -4 * math.cos(2 * s) - 0.4,
)


def curve_jet(t_value: float, tau_value: float, fq=CURVE_Q, fp=CURVE_P) -> E.JetPoint:
    """Jet sampled from fixed smooth curves respecting the shift structure."""
    values = {}
    for sh in (-1, 0, 1):
        s = t_value + sh * tau_value
        suffix = {-1: "m", 0: "", 1: "p"}[sh]
        values["q" + "d" * 0 + suffix] = fq[0](s)
        values["qd" + suffix] = fq[1](s)
        values["qdd" + suffix] = fq[2](s)
        values["p" + suffix] = fp[0](s)
        values["pd" + suffix] = fp[1](s)
        values["pdd" + suffix] = fp[2](s)
    return E.JetPoint(tau_value, values, t_value=t_value)
