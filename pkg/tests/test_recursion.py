import math
import warnings

import numpy as np
import pytest

from delayham import expr as E
from delayham import model as M
from delayham import noether as N
from delayham import recursion as R
from delayham import solver as S


def test_recovered_constants_match_closed_forms(sincos_history):
    a, b = R.recover_constants(sincos_history, 0)
    u = math.sin(0.0) + math.sin(-2.0)
    v = math.cos(0.0) + math.cos(-2.0)
    assert a == pytest.approx(-math.cos(1.0) * u - math.sin(1.0) * v, abs=1e-14)
    assert b == pytest.approx(-math.sin(1.0) * u + math.cos(1.0) * v, abs=1e-14)
    # the sine/cosine history is the exact solution: a = 0, b = 2 cos(tau)
    assert abs(a) < 1e-14
    assert b == pytest.approx(2 * math.cos(1.0), abs=1e-14)


def test_zero_history_gives_zero_constants_and_solution():
    hist = S.History(0.0, 1.0, E.ZERO, E.ZERO)
    a, b = R.recover_constants(hist, 0)
    assert a == 0.0 and b == 0.0
    traj = R.recurse(R.relation_from_constants(0, a, b), hist, 4.0, 16)
    assert np.allclose(traj.q, 0.0)
    assert np.allclose(traj.p, 0.0)


def test_middle_coefficient_constants_match_measured_integrals(sincos_history):
    ham = M.DelayHamiltonian(E.parse("(p+pm)^2/2 + (q+qm)^2/2"), (1, 1, 1, 1))
    a, b = R.recover_constants(sincos_history, 2)
    traj = S.step_hamiltonian(ham, sincos_history, 6.0, 128)
    want_a = N.drift(E.parse("sin(t)*(pp + 2*p + pm) - cos(t)*(qp + 2*q + qm)"), traj, "differential")
    want_b = N.drift(E.parse("cos(t)*(pp + 2*p + pm) + sin(t)*(qp + 2*q + qm)"), traj, "differential")
    assert abs(a - want_a.reference) <= 1e-6
    assert abs(b - want_b.reference) <= 1e-6


def test_first_window_formula(sincos_history):
    rel = R.relation_from_history(sincos_history, 0)
    traj = R.recurse(rel, sincos_history, 6.0, 64)
    sel = (traj.t >= 0) & (traj.t <= 2.0)
    expected = (
        -np.sin(traj.t[sel] - 2.0)
        - rel.a * np.cos(traj.t[sel] - 1.0)
        + rel.b * np.sin(traj.t[sel] - 1.0)
    )
    assert np.max(np.abs(traj.q[sel] - expected)) <= 1e-13
    expected_p = (
        -np.cos(traj.t[sel] - 2.0)
        + rel.a * np.sin(traj.t[sel] - 1.0)
        + rel.b * np.cos(traj.t[sel] - 1.0)
    )
    assert np.max(np.abs(traj.p[sel] - expected_p)) <= 1e-13


def test_second_window_formula(sincos_history):
    rel = R.relation_from_history(sincos_history, 0)
    traj = R.recurse(rel, sincos_history, 6.0, 64)
    sel = (traj.t >= 2.0) & (traj.t <= 4.0)
    ts = traj.t[sel]
    expected = (
        np.sin(ts - 4.0)
        + rel.a * np.cos(ts - 3.0)
        - rel.b * np.sin(ts - 3.0)
        - rel.a * np.cos(ts - 1.0)
        + rel.b * np.sin(ts - 1.0)
    )
    assert np.max(np.abs(traj.q[sel] - expected)) <= 1e-13


def test_sum_relations_hold_to_roundoff(sincos_history):
    for c_mid in (0, 2):
        rel = R.relation_from_history(sincos_history, c_mid)
        traj = R.recurse(rel, sincos_history, 6.0, 64)
        worst_q, worst_p = R.relation_residuals(rel, traj)
        assert worst_q <= 1e-12
        assert worst_p <= 1e-12


def test_recursion_matches_numerical_solution(oscillator, sincos_history):
    _, ham = oscillator
    rel = R.relation_from_history(sincos_history, 0)
    a = S.step_hamiltonian(ham, sincos_history, 6.0, 128)
    b = R.recurse(rel, sincos_history, 6.0, 128)
    report = R.compare(a, b)
    assert report.components["q"].max_abs <= 1e-5
    assert report.components["p"].max_abs <= 1e-5


def test_recursion_integrals_drift_is_roundoff(sincos_history):
    rel = R.relation_from_history(sincos_history, 0)
    traj = R.recurse(rel, sincos_history, 6.0, 64)
    for integral in (
        E.parse("sin(t)*(pp + pm) - cos(t)*(qp + qm)"),
        E.parse("cos(t)*(pp + pm) + sin(t)*(qp + qm)"),
    ):
        assert N.drift(integral, traj, "differential").max_drift <= 1e-12


def test_recovered_constants_keep_seam_continuous():
    hist = S.History(0.0, 1.0, E.parse("sin(t)"), E.parse("cos(t) + t/4"))
    rel = R.relation_from_history(hist, 0)
    gap_q, gap_p = R.seam_gap(rel, hist)
    assert gap_q <= 1e-12 and gap_p <= 1e-12
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        R.recurse(rel, hist, 4.0, 16)  # must not warn


def test_inconsistent_constants_warn_and_jump(sincos_history):
    rel = R.relation_from_history(sincos_history, 0)
    perturbed = R.relation_from_constants(0, rel.a + 1e-2, rel.b)
    gap_q, _ = R.seam_gap(perturbed, sincos_history)
    assert gap_q == pytest.approx(1e-2 * math.cos(1.0), rel=1e-9)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = R.recurse(perturbed, sincos_history, 6.0, 64)
    assert len(caught) == 1 and "seam" in str(caught[0].message)
    reference = R.recurse(rel, sincos_history, 6.0, 64)
    deviation = R.compare(reference, traj).components["q"].max_abs
    assert deviation >= 1e-3  # perturbing a constant by 1e-2 is clearly visible


def test_compare_identical_trajectories(sincos_history):
    rel = R.relation_from_history(sincos_history, 0)
    traj = R.recurse(rel, sincos_history, 4.0, 32)
    report = R.compare(traj, traj)
    assert report.max_component() == 0.0


def test_compare_rejects_grid_mismatch(sincos_history):
    rel = R.relation_from_history(sincos_history, 0)
    a = R.recurse(rel, sincos_history, 4.0, 32)
    b = R.recurse(rel, sincos_history, 4.0, 64)
    with pytest.raises(S.SolverError):
        R.compare(a, b)


def test_relation_validation():
    with pytest.raises(R.RecursionError_):
        R.relation_from_constants(1, 0.0, 0.0)
    hist = S.History(0.0, 1.0, E.parse("sin(t)"), None)
    with pytest.raises(R.RecursionError_):
        R.recover_constants(hist, 0)
