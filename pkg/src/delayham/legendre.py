"""Delay Legendre transforms between quadratic Lagrangians and Hamiltonians.

Four variants: forward (nondegenerate and degenerate quadratic kinetic part),
reverse (quadratic Hamiltonian back to a Lagrangian), and the extended family
with state-dependent coefficients.  The transform is pinned down by the
compatibility requirement that the momentum defined at the current time is
the forward shift of the momentum defined one delay earlier, which forces the
pairing weights (a1, a2, a3, a4) up to one free scale a1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as ex
from .expr import (
    Expr,
    add,
    div,
    mul,
    neg,
    partial,
    powi,
    shift,
    sub,
    symbol,
)
from .model import (
    DelayHamiltonian,
    Number,
    QuadraticHamiltonian,
    QuadraticLagrangian,
    _check_symbols,
    _num,
    momentum_substitution,
    variational_p,
    variational_q,
)


class LegendreError(ValueError):
    pass


class DegenerateSignError(LegendreError):
    """Degenerate kinetic forms are only handled for alpha > 0, gamma > 0,
    beta = +sqrt(alpha*gamma); other sign patterns have no supported closed
    form and are rejected rather than guessed."""


def _sqrt(x: Number) -> Number:
    """Exact square root for perfect-square rationals, float otherwise."""
    if isinstance(x, Fraction):
        ns = math.isqrt(x.numerator)
        ds = math.isqrt(x.denominator)
        if ns * ns == x.numerator and ds * ds == x.denominator:
            return Fraction(ns, ds)
    return math.sqrt(float(x))


@dataclass(frozen=True)
class LegendreResult:
    hamiltonian: DelayHamiltonian
    quadratic: QuadraticHamiltonian
    momentum_map: tuple[Expr, Expr] | None
    inverse_map: tuple[Expr, Expr] | None
    merged_relation: Expr | None
    degenerate: bool


def pairing_weights(l: QuadraticLagrangian, alpha1: Number) -> tuple[Number, ...]:
    """The four weights fixed by shift compatibility, scaled by alpha1."""
    a1 = _num(alpha1)
    return (a1, a1 * l.gamma / l.beta, a1 * l.alpha / l.beta, a1)


def legendre_forward(l: QuadraticLagrangian, alpha1: Number | None = None) -> LegendreResult:
    """Quadratic delay Lagrangian -> delay Hamiltonian.

    `alpha1` is the free scale of the pairing weights; it defaults to beta,
    which makes the momentum map the identity p = qd.
    """
    a1 = _num(l.beta if alpha1 is None else alpha1)
    if a1 == 0:
        raise LegendreError("alpha1 must be nonzero")
    alphas = pairing_weights(l, a1)
    ratio = a1 / l.beta
    coeff_a = ratio * ratio * l.alpha
    coeff_b = ratio * a1
    coeff_c = ratio * ratio * l.gamma

    if not l.degenerate:
        quad = QuadraticHamiltonian(coeff_a, coeff_b, coeff_c, l.phi)
        ham = DelayHamiltonian(quad.expr(), alphas)
        p_map = mul(div(l.beta, a1), ex.qd)
        pm_map = mul(div(l.beta, a1), ex.qdm)
        inv_q = mul(div(a1, l.beta), ex.p)
        inv_qm = mul(div(a1, l.beta), ex.pm)
        return LegendreResult(ham, quad, (p_map, pm_map), (inv_q, inv_qm), None, False)

    if not (l.alpha > 0 and l.gamma > 0 and l.beta > 0):
        raise DegenerateSignError(
            "degenerate kinetic form supported only for alpha > 0, gamma > 0, "
            "beta = +sqrt(alpha*gamma); got "
            f"alpha={l.alpha}, beta={l.beta}, gamma={l.gamma}"
        )
    ra = _sqrt(l.alpha)
    rg = _sqrt(l.gamma)
    c_here = div(a1, rg)
    c_lag = div(a1, ra)
    combo = add(mul(c_here, ex.p), mul(c_lag, ex.pm))
    h_expr = add(div(powi(combo, 2), 2), l.phi)
    quad = QuadraticHamiltonian(a1 * a1 / l.gamma, a1 * a1 / l.beta, a1 * a1 / l.alpha, l.phi)
    ham = DelayHamiltonian(h_expr, alphas)
    merged = sub(combo, add(mul(ra, ex.qd), mul(rg, ex.qdm)))
    return LegendreResult(ham, quad, None, None, merged, True)


def legendre_reverse(
    h: QuadraticHamiltonian, alpha1: Number | None = None
) -> tuple[QuadraticLagrangian, tuple[Number, ...], tuple[Expr, Expr]]:
    """Quadratic delay Hamiltonian -> Lagrangian, weights, and velocity map."""
    a1 = _num(h.b if alpha1 is None else alpha1)
    if a1 == 0:
        raise LegendreError("alpha1 must be nonzero")
    alphas = (a1, a1 * h.c / h.b, a1 * h.a / h.b, a1)
    ratio = a1 / h.b
    lag = QuadraticLagrangian(ratio * ratio * h.a, ratio * a1, ratio * ratio * h.c, h.phi)
    vel_map = (mul(div(h.b, a1), ex.p), mul(div(h.b, a1), ex.pm))
    return lag, alphas, vel_map


def alphas_alternative(l: QuadraticLagrangian) -> tuple[Number, ...]:
    """Pairing weights from the point-relation route.

    Splitting the momentum relations term by term and imposing shift
    compatibility on each piece yields weights proportional to
    (beta, gamma, alpha, beta); nondegenerate and degenerate kinetic forms are
    covered uniformly.
    """
    return (l.beta, l.gamma, l.alpha, l.beta)


# ---------------------------------------------------------------------------
# extended transform: state-dependent coefficients
# ---------------------------------------------------------------------------

_Q_ONLY = frozenset((symbol("q", 0, 0),))
_Q_PAIR = frozenset((symbol("q", 0, 0), symbol("q", -1, 0)))


@dataclass(frozen=True)
class ExtendedLagrangian:
    """Kinetic coefficients depending on (q, qm), linear terms generated by a
    gauge function lam(q), and a momentum scale mu(q)."""

    alpha: Expr
    beta: Expr
    gamma: Expr
    lam: Expr
    mu: Expr
    phi: Expr

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "phi"):
            _check_symbols(getattr(self, name), _Q_PAIR, name)
        _check_symbols(self.lam, _Q_ONLY, "lam")
        _check_symbols(self.mu, _Q_ONLY, "mu")
        self._sample_checks()

    def _sample_checks(self):
        grid = np.linspace(-2.0, 2.0, 17)
        fa = ex.compiled(self.alpha)
        fb = ex.compiled(self.beta)
        fg = ex.compiled(self.gamma)
        fm = ex.compiled(self.mu)
        slots = [math.nan] * ex.NSLOTS
        qi = symbol("q", 0, 0).index
        qmi = symbol("q", -1, 0).index
        for qv in grid:
            slots[qi] = qv
            if abs(fm(slots)) < 1e-9:
                raise LegendreError(f"mu vanishes near q={qv} (singular momentum map)")
            for qmv in grid:
                slots[qmi] = qmv
                b = fb(slots)
                if abs(b) < 1e-12:
                    raise LegendreError(f"beta vanishes near (q={qv}, qm={qmv})")
                if abs(fa(slots) * fg(slots) - b * b) < 1e-12:
                    raise LegendreError(
                        f"alpha*gamma - beta^2 vanishes near (q={qv}, qm={qmv})"
                    )

    def expr(self) -> Expr:
        lam_m = shift(self.lam, -1)
        return add(
            mul(div(self.alpha, 2), powi(ex.qd, 2)),
            mul(self.beta, ex.qd, ex.qdm),
            mul(div(self.gamma, 2), powi(ex.qdm, 2)),
            neg(mul(add(mul(self.alpha, self.lam), mul(self.beta, lam_m)), ex.qd)),
            neg(mul(add(mul(self.beta, self.lam), mul(self.gamma, lam_m)), ex.qdm)),
            neg(self.phi),
        )


@dataclass(frozen=True)
class ExtendedLegendreResult:
    h: Expr
    alphas: tuple[Expr, Expr, Expr, Expr]
    velocity_map: tuple[Expr, Expr]


def legendre_extended(l: ExtendedLagrangian) -> ExtendedLegendreResult:
    """Extended transform; pairing weights become functions of (q, qm)."""
    mu_m = shift(l.mu, -1)
    lam_m = shift(l.lam, -1)
    r_here = add(mul(l.mu, ex.p), l.lam)
    r_lag = add(mul(mu_m, ex.pm), lam_m)
    h_expr = add(
        mul(div(l.alpha, 2), powi(r_here, 2)),
        mul(l.beta, r_here, r_lag),
        mul(div(l.gamma, 2), powi(r_lag, 2)),
        l.phi,
    )
    alphas = (mul(l.beta, mu_m), mul(l.gamma, mu_m), mul(l.alpha, l.mu), mul(l.beta, l.mu))
    return ExtendedLegendreResult(h_expr, alphas, (r_here, r_lag))


def extended_action_density(res: ExtendedLegendreResult) -> Expr:
    a1, a2, a3, a4 = res.alphas
    return add(
        mul(ex.pm, add(mul(a1, ex.qd), mul(a2, ex.qdm))),
        mul(ex.p, add(mul(a3, ex.qd), mul(a4, ex.qdm))),
        neg(res.h),
    )


def extended_residuals(res: ExtendedLegendreResult) -> tuple[Expr, Expr]:
    """Vertical variational residuals of the extended phase-space density."""
    density = extended_action_density(res)
    return variational_p(density), variational_q(density)


def extended_momentum_substitution(l: ExtendedLagrangian) -> dict:
    """Symbol map p -> (qd - lam(q)) / mu(q), with shifted and dotted copies."""
    p_of_qd = div(sub(ex.qd, l.lam), l.mu)
    return momentum_substitution(p_of_qd)


def extended_elsgolts_display(l: ExtendedLagrangian) -> Expr:
    """The expanded second-order variational equation of the extended family.

    Written out term by term (coefficient derivatives times velocity
    products); agrees with the operator route `elsgolts_residual_general`
    applied to `l.expr()`, which the test-suite verifies by sampling.
    """
    a, b, g = l.alpha, l.beta, l.gamma
    lam = l.lam
    lam_m = shift(lam, -1)
    lam_p = shift(lam, +1)
    a_q = partial(a, "q")
    a_qm = partial(a, "qm")
    b_q = partial(b, "q")
    b_qm = partial(b, "qm")
    g_q = partial(g, "q")
    g_qm = partial(g, "qm")
    # the dotted gauge terms are derivatives with respect to the argument q
    lam_dot = partial(lam, "q")
    bp = shift(b, +1)
    gp = shift(g, +1)
    return add(
        neg(mul(bp, ex.qddp)),
        neg(mul(add(a, gp), ex.qdd)),
        neg(mul(b, ex.qddm)),
        mul(sub(div(shift(a_qm, +1), 2), shift(b_q, +1)), powi(ex.qdp, 2)),
        neg(mul(shift(g_q, +1), ex.qdp, ex.qd)),
        neg(mul(div(add(a_q, shift(g_qm, +1)), 2), powi(ex.qd, 2))),
        neg(mul(a_qm, ex.qd, ex.qdm)),
        mul(sub(div(g_q, 2), b_qm), powi(ex.qdm, 2)),
        mul(
            add(
                mul(bp, sub(shift(lam_dot, +1), lam_dot)),
                mul(sub(shift(b_q, +1), shift(a_qm, +1)), lam_p),
                mul(sub(shift(g_q, +1), shift(b_qm, +1)), lam),
            ),
            ex.qdp,
        ),
        mul(
            add(
                mul(b, sub(shift(lam_dot, -1), lam_dot)),
                mul(sub(a_qm, b_q), lam),
                mul(sub(b_qm, g_q), lam_m),
            ),
            ex.qdm,
        ),
        neg(partial(l.phi, "q")),
        neg(shift(partial(l.phi, "qm"), +1)),
    )
