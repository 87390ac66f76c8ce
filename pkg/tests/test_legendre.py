from fractions import Fraction

import numpy as np
import pytest

from delayham import expr as E
from delayham import legendre as L
from delayham import model as M


def z(e, seed=0, samples=40, tol=1e-10):
    return E.is_zero(e, samples=samples, tol=tol, seed=seed)


# ---------------------------------------------------------------------------
# forward transform
# ---------------------------------------------------------------------------


def test_forward_nondegenerate_golden(oscillator):
    lag, _ = oscillator
    res = L.legendre_forward(lag, 1)
    assert res.hamiltonian.h is E.parse("p*pm + q*qm")
    assert res.hamiltonian.alphas == (1, 0, 0, 1)
    assert not res.degenerate
    assert res.momentum_map == (E.qd, E.qdm)
    assert res.inverse_map == (E.p, E.pm)


def test_forward_degenerate_golden(degenerate_oscillator):
    lag, _ = degenerate_oscillator
    res = L.legendre_forward(lag, 1)
    assert res.hamiltonian.h is E.parse("(p+pm)^2/2 + (q+qm)^2/2")
    assert res.hamiltonian.alphas == (1, 1, 1, 1)
    assert res.degenerate
    assert res.momentum_map is None
    assert z(E.sub(res.merged_relation, E.parse("p + pm - (qd + qdm)"))).ok


def test_forward_mixed_coefficients():
    lag = M.QuadraticLagrangian(2, 1, 0, E.ZERO)
    res = L.legendre_forward(lag, 1)
    assert z(E.sub(res.hamiltonian.h, E.parse("p^2 + p*pm"))).ok
    assert res.hamiltonian.alphas == (1, 0, 2, 1)


def test_forward_default_scale_is_beta():
    lag = M.QuadraticLagrangian(0, 3, 0, E.ZERO)
    res = L.legendre_forward(lag)
    assert res.momentum_map[0] is E.qd


def test_forward_errors():
    lag = M.QuadraticLagrangian(0, 1, 0, E.ZERO)
    with pytest.raises(L.LegendreError):
        L.legendre_forward(lag, 0)
    with pytest.raises(L.DegenerateSignError):
        L.legendre_forward(M.QuadraticLagrangian(-1, 1, -1, E.ZERO), 1)


def test_momentum_and_inverse_maps_are_mutually_inverse():
    lag = M.QuadraticLagrangian(1, 2, 0, E.ZERO)
    res = L.legendre_forward(lag, 3)
    recovered = E.substitute(res.inverse_map[0], {"p": res.momentum_map[0]})
    assert z(E.sub(recovered, E.qd)).ok
    recovered_m = E.substitute(res.momentum_map[1], {"qdm": res.inverse_map[1]})
    assert z(E.sub(recovered_m, E.pm)).ok


def test_shift_compatibility_of_momentum_map():
    for alpha, beta, gamma, a1 in [(0, 1, 0, 1), (2, 1, 0, 3), (1, 2, 1, 2)]:
        res = L.legendre_forward(M.QuadraticLagrangian(alpha, beta, gamma, E.ZERO), a1)
        gap = E.sub(E.shift(res.momentum_map[1], +1), res.momentum_map[0])
        assert z(gap).ok


# ---------------------------------------------------------------------------
# reverse transform and round trips
# ---------------------------------------------------------------------------


def test_reverse_golden(oscillator):
    lag, _ = oscillator
    quad = M.QuadraticHamiltonian(0, 1, 0, E.parse("q*qm"))
    back, alphas, vel = L.legendre_reverse(quad, 1)
    assert back == lag
    assert back.expr() is E.parse("qd*qdm - q*qm")
    assert alphas == (1, 0, 0, 1)
    assert vel[0] is E.p


def test_reverse_degenerate_golden(degenerate_oscillator):
    lag, _ = degenerate_oscillator
    quad = M.QuadraticHamiltonian(1, 1, 1, E.parse("(q+qm)^2/2"))
    back, alphas, _ = L.legendre_reverse(quad, 1)
    assert back == lag
    assert alphas == (1, 1, 1, 1)


def test_round_trips_exact():
    # the reverse scale must match the forward one; the default (beta for the
    # forward, B for the reverse) does exactly that
    for alpha, beta, gamma in [(0, 1, 0), (2, 1, 0), (1, 2, 1), (1, 1, 1)]:
        lag = M.QuadraticLagrangian(alpha, beta, gamma, E.parse("q*qm"))
        res = L.legendre_forward(lag)
        back, _, _ = L.legendre_reverse(res.quadratic)
        # structural equality after constant folding
        assert back.expr() is lag.expr()
        res1 = L.legendre_forward(lag, 1)
        back1, _, _ = L.legendre_reverse(res1.quadratic, 1)
        assert back1.expr() is lag.expr()


def test_reverse_errors():
    quad = M.QuadraticHamiltonian(0, 1, 0, E.ZERO)
    with pytest.raises(L.LegendreError):
        L.legendre_reverse(quad, 0)
    with pytest.raises(ValueError):
        M.QuadraticHamiltonian(1, 0, 1, E.ZERO)


# ---------------------------------------------------------------------------
# dynamics equivalence
# ---------------------------------------------------------------------------


def test_momentum_shell_reproduces_second_order_equation():
    rng = np.random.default_rng(42)
    for _ in range(6):
        alpha = int(rng.integers(-2, 3))
        beta = int(rng.integers(1, 4))
        gamma = int(rng.integers(-2, 3))
        if alpha * gamma == beta * beta:
            continue
        lag = M.QuadraticLagrangian(alpha, beta, gamma, E.parse("q^2*qm"))
        res = L.legendre_forward(lag)
        rp, rq, _ = M.variational_residuals(res.hamiltonian)
        sub = M.momentum_substitution(res.momentum_map[0])
        assert E.is_zero(E.substitute(rp, sub), samples=50, tol=1e-9, seed=3).ok
        gap = E.sub(E.substitute(rq, sub), M.elsgolts_residual(lag))
        assert E.is_zero(gap, samples=50, tol=1e-9, seed=3).ok


def test_degenerate_canonical_pair_matches_displayed_equations(degenerate_oscillator):
    lag, _ = degenerate_oscillator
    res = L.legendre_forward(lag, 1)
    rp, rq, _ = M.variational_residuals(res.hamiltonian)
    assert z(E.sub(rp, E.parse("qdp + 2*qd + qdm - (pp + 2*p + pm)"))).ok
    dphi = E.add(E.partial(lag.phi, "q"), E.shift(E.partial(lag.phi, "qm"), +1))
    assert z(E.sub(rq, E.neg(E.add(E.parse("pdp + 2*pd + pdm"), dphi)))).ok


# ---------------------------------------------------------------------------
# alternative weight derivation
# ---------------------------------------------------------------------------


def test_alternative_weights_golden(oscillator, degenerate_oscillator):
    assert L.alphas_alternative(oscillator[0]) == (1, 0, 0, 1)
    assert L.alphas_alternative(degenerate_oscillator[0]) == (1, 1, 1, 1)
    lag = M.QuadraticLagrangian(2, 1, 0, E.ZERO)
    assert L.alphas_alternative(lag) == (1, 0, 2, 1)


def test_alternative_weights_proportional_to_forward():
    rng = np.random.default_rng(7)
    for _ in range(20):
        alpha = float(rng.uniform(-3, 3))
        beta = float(rng.uniform(0.2, 3))
        gamma = float(rng.uniform(-3, 3))
        lag = M.QuadraticLagrangian(alpha, beta, gamma, E.ZERO)
        alt = L.alphas_alternative(lag)
        fwd = L.pairing_weights(lag, 1)
        factor = float(alt[0]) / float(fwd[0])
        for a, f in zip(alt, fwd):
            assert float(a) == pytest.approx(factor * float(f), rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------------------
# negative control: weights not from the transform
# ---------------------------------------------------------------------------


def test_incompatible_weights_change_the_equations(oscillator):
    _, ham = oscillator
    bad = M.DelayHamiltonian(ham.h, (0, 0, 1, 0))
    rp_bad, rq_bad, _ = M.variational_residuals(bad)
    assert z(E.sub(rp_bad, E.parse("qd - (pp + pm)"))).ok
    rp, _, _ = M.variational_residuals(ham)
    ratios = []
    for k in range(6):
        jet = E.random_jet(900, k)
        ratios.append(E.evaluate(rp_bad, jet) / E.evaluate(rp, jet))
    assert np.std(ratios) > 1e-3  # not a constant multiple


# ---------------------------------------------------------------------------
# extended transform
# ---------------------------------------------------------------------------


def _extended_constant(third=Fraction(1, 3)):
    return L.ExtendedLagrangian(
        E.const(2), E.const(1), E.const(third), E.q, E.const(2), E.parse("q*qm")
    )


def test_extended_reduces_to_constant_transform():
    ext = L.ExtendedLagrangian(
        E.const(2), E.const(1), E.const(Fraction(1, 3)), E.ZERO, E.ONE, E.parse("q*qm")
    )
    res = L.legendre_extended(ext)
    fwd = L.legendre_forward(M.QuadraticLagrangian(2, 1, Fraction(1, 3), E.parse("q*qm")))
    assert z(E.sub(res.h, fwd.hamiltonian.h)).ok
    for a_ext, a_fwd in zip(res.alphas, fwd.hamiltonian.alphas):
        assert z(E.sub(a_ext, E.const(a_fwd))).ok


def test_extended_oscillator_reduction(oscillator):
    ext = L.ExtendedLagrangian(E.ZERO, E.ONE, E.ZERO, E.ZERO, E.ONE, E.parse("q*qm"))
    res = L.legendre_extended(ext)
    assert res.h is E.parse("p*pm + q*qm")
    assert [E.to_source(a) for a in res.alphas] == ["1", "0", "0", "1"]


def test_extended_display_matches_operator_route():
    mu = E.parse("2 + q^2/4")
    lam = E.parse("q/2 + q^2/8")
    ext = L.ExtendedLagrangian(
        E.parse("2 + q*qm/8"),
        E.parse("1 + q/16"),
        E.parse("1/3 + qm/32"),
        lam,
        mu,
        E.parse("q^2*qm/3"),
    )
    gap = E.sub(L.extended_elsgolts_display(ext), M.elsgolts_residual_general(ext.expr()))
    assert E.is_zero(gap, samples=100, tol=1e-10, seed=19).ok


def test_extended_residuals_match_second_order_equation():
    ext = _extended_constant()
    res = L.legendre_extended(ext)
    rp, rq = L.extended_residuals(res)
    sub = L.extended_momentum_substitution(ext)
    assert E.is_zero(E.substitute(rp, sub), samples=30, tol=1e-8, seed=17).ok
    gap = E.sub(E.substitute(rq, sub), L.extended_elsgolts_display(ext))
    assert E.is_zero(gap, samples=30, tol=1e-8, seed=17).ok


def test_extended_velocity_map():
    ext = _extended_constant()
    res = L.legendre_extended(ext)
    assert z(E.sub(res.velocity_map[0], E.parse("2*p + q"))).ok
    assert z(E.sub(res.velocity_map[1], E.parse("2*pm + qm"))).ok


def test_extended_rejects_vanishing_mu():
    with pytest.raises(L.LegendreError):
        L.ExtendedLagrangian(E.const(2), E.ONE, E.const(Fraction(1, 3)), E.ZERO, E.q, E.ZERO)


def test_extended_rejects_degenerate_kinetic_form():
    with pytest.raises(L.LegendreError):
        L.ExtendedLagrangian(E.const(2), E.ONE, E.const(Fraction(1, 2)), E.ZERO, E.ONE, E.ZERO)
