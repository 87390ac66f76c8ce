"""Invariance analysis and first integrals for delay Hamiltonian systems.

The invariance residual of a generator acting on the phase-space action
density decomposes, identically in all jet coordinates, into the three
variational residuals plus a total-derivative part C and a shift-difference
part P.  For (divergence-)invariant generators this yields conserved
quantities along solutions: a differential first integral I = C - V when the
difference part telescopes into a total derivative, and a difference first
integral J = P - W in the opposite case.  V and W are found by a linear fit
over a fixed monomial-times-trigonometric dictionary and re-verified by
sampling; user-supplied candidates are always accepted for checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from . import expr as ex
from .expr import (
    Expr,
    ZeroCheck,
    add,
    as_expr,
    is_zero,
    is_zero_at,
    mul,
    neg,
    partial,
    shift,
    sub,
    symbol,
    symbols_of,
    total_derivative,
)
from .model import (
    DelayHamiltonian,
    Generator,
    action_density,
    on_shell_jet,
    variational_p,
    variational_q,
    variational_residuals,
    variational_t,
)

D = total_derivative


class IntegralVerificationError(RuntimeError):
    def __init__(self, message: str, worst: float):
        super().__init__(f"{message} (max on-shell residual {worst:.3e})")
        self.worst = worst


class DriftError(RuntimeError):
    pass


class Classification(str, Enum):
    VARIATIONAL = "variational"
    DIVERGENCE = "divergence"
    NONE = "none"


@dataclass
class InvarianceResidual:
    omega: Expr
    classification: Classification
    v: Expr | None = None
    w: Expr | None = None


@dataclass
class NoetherQuantities:
    c: Expr
    p_quantity: Expr
    differential_integral: Expr | None = None
    difference_integral: Expr | None = None


# ---------------------------------------------------------------------------
# invariance residual and conserved-quantity parts
# ---------------------------------------------------------------------------


def invariance_residual(h: DelayHamiltonian, g: Generator) -> Expr:
    """Residual of the invariance condition of the delay action functional."""
    a1, a2, a3, a4 = h.alphas
    eta_m = shift(g.eta, -1)
    nu_m = shift(g.nu, -1)
    xi_m = shift(g.xi, -1)
    deta = D(g.eta)
    deta_m = D(eta_m)
    dxi = D(g.xi)
    return add(
        mul(nu_m, add(mul(a1, ex.qd), mul(a2, ex.qdm))),
        mul(ex.pm, add(mul(a1, deta), mul(a2, deta_m))),
        mul(g.nu, add(mul(a3, ex.qd), mul(a4, ex.qdm))),
        mul(ex.p, add(mul(a3, deta), mul(a4, deta_m))),
        mul(add(mul(a2, ex.pm), mul(a4, ex.p)), ex.qdm, D(sub(g.xi, xi_m))),
        neg(mul(g.xi, partial(h.h, "t"))),
        neg(mul(g.eta, partial(h.h, "q"))),
        neg(mul(g.nu, partial(h.h, "p"))),
        neg(mul(xi_m, partial(h.h, "tm"))),
        neg(mul(eta_m, partial(h.h, "qm"))),
        neg(mul(nu_m, partial(h.h, "pm"))),
        neg(mul(h.h, dxi)),
    )


def invariance_residual_via_action(h: DelayHamiltonian, g: Generator) -> Expr:
    """Same residual built as X(density) + density*D(xi) with the prolonged
    generator; agreement with `invariance_residual` is a sampling test."""
    density = action_density(h)
    return add(g.apply(density), mul(density, D(g.xi)))


def noether_parts(h: DelayHamiltonian, g: Generator) -> NoetherQuantities:
    """The total-derivative part C and the shift-difference part P."""
    a1, a2, a3, a4 = h.alphas
    eta_m = shift(g.eta, -1)
    nu_m = shift(g.nu, -1)
    xi_m = shift(g.xi, -1)
    mixed = add(mul(a2, ex.pm), mul(a4, ex.p))
    c = sub(
        mul(g.eta, add(mul(a4, ex.pp), mul(a2 + a3, ex.p), mul(a1, ex.pm))),
        mul(
            g.xi,
            add(
                mul(a2, sub(mul(ex.p, ex.qd), mul(ex.pm, ex.qdm))),
                mul(a4, sub(mul(ex.pp, ex.qd), mul(ex.p, ex.qdm))),
                h.h,
            ),
        ),
    )
    p_quantity = add(
        mul(mixed, D(eta_m)),
        mul(nu_m, add(mul(a1, ex.qd), mul(a2, ex.qdm))),
        neg(mul(mixed, ex.qdm, D(xi_m))),
        neg(mul(xi_m, partial(h.h, "tm"))),
        neg(mul(eta_m, partial(h.h, "qm"))),
        neg(mul(nu_m, partial(h.h, "pm"))),
    )
    return NoetherQuantities(c, p_quantity)


def hamiltonian_identity_residual(h: DelayHamiltonian, g: Generator) -> Expr:
    """Invariance residual minus its variational decomposition.

    Identically zero for every smooth Hamiltonian and generator; checked by
    off-shell sampling rather than symbolic simplification.
    """
    rp, rq, rt = variational_residuals(h)
    parts = noether_parts(h, g)
    decomposition = add(
        mul(g.xi, rt),
        mul(g.eta, rq),
        mul(g.nu, rp),
        D(parts.c),
        parts.p_quantity,
        neg(shift(parts.p_quantity, +1)),
    )
    return sub(invariance_residual(h, g), decomposition)


def verify_hamiltonian_identity(
    h: DelayHamiltonian, g: Generator, samples: int = 100, tol: float = 1e-9, seed: int = 0
) -> ZeroCheck:
    return is_zero(hamiltonian_identity_residual(h, g), samples=samples, tol=tol, seed=seed)


# ---------------------------------------------------------------------------
# divergence fitting
# ---------------------------------------------------------------------------


def _trig_factors() -> list[Expr]:
    return [ex.ONE, ex.sin(ex.t), ex.cos(ex.t), ex.sin(ex.tm), ex.cos(ex.tm), ex.t]


def _v_dictionary() -> list[Expr]:
    singles = [ex.q, ex.qm, ex.qp, ex.p, ex.pm, ex.pp]
    monos = list(singles)
    for i, a in enumerate(singles):
        for b in singles[i:]:
            monos.append(mul(a, b))
    return [mul(m, f) for m in monos for f in _trig_factors()]


def _w_dictionary() -> list[Expr]:
    values = [ex.q, ex.qm, ex.p, ex.pm]
    rates = [ex.qd, ex.qdm, ex.pd, ex.pdm]
    monos = list(values) + list(rates)
    for i, a in enumerate(values):
        for b in values[i:]:
            monos.append(mul(a, b))
    for r in rates:
        for v in values:
            monos.append(mul(r, v))
    return [mul(m, f) for m in monos for f in _trig_factors()]


def _fit(
    target: Expr,
    columns: list[Expr],
    column_images: list[Expr],
    *,
    seed: int,
    on_shell: DelayHamiltonian | None,
    samples: int | None,
    fit_tol: float,
    verify_tol: float,
) -> Expr | None:
    """Least-squares fit of target = sum_i c_i * image_i, re-verified exactly."""
    n = samples or max(400, 3 * len(columns))
    need_second = any(
        s.order >= 2 for e in column_images + [target] for s in symbols_of(e)
    )
    if on_shell is None:
        jets = [ex.random_jet(seed, k) for k in range(n)]
    else:
        jets = [on_shell_jet(on_shell, seed, k, second_order=need_second) for k in range(n)]
    fns = [ex.compiled(e) for e in column_images]
    ftarget = ex.compiled(target)
    a_mat = np.empty((n, len(columns)))
    b_vec = np.empty(n)
    for k, jet in enumerate(jets):
        slots = jet.slots()
        for i, fn in enumerate(fns):
            a_mat[k, i] = fn(slots)
        b_vec[k] = ftarget(slots)
    coeffs, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)
    rel = np.linalg.norm(a_mat @ coeffs - b_vec) / (1.0 + np.linalg.norm(b_vec))
    if rel > fit_tol:
        return None
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    cleaned: list[tuple[int, object]] = []
    for i, c in enumerate(coeffs):
        if abs(c) < 1e-9 * scale:
            continue
        frac = Fraction(float(c)).limit_denominator(24)
        cleaned.append((i, frac if abs(float(frac) - c) <= 1e-6 * max(1.0, abs(c)) else float(c)))
    candidate = add(*[mul(ex.const(c), columns[i]) for i, c in cleaned])
    residual = sub(target, add(*[mul(ex.const(c), column_images[i]) for i, c in cleaned]))
    if on_shell is None:
        check = is_zero(residual, samples=120, tol=verify_tol, seed=seed + 7919)
    else:
        jets2 = (
            on_shell_jet(on_shell, seed + 7919, k, second_order=need_second)
            for k in range(120)
        )
        check = is_zero_at(residual, jets2, tol=verify_tol)
    return candidate if check.ok else None


def fit_total_derivative(
    target: Expr,
    *,
    seed: int = 0,
    on_shell: DelayHamiltonian | None = None,
    samples: int | None = None,
    fit_tol: float = 1e-6,
    verify_tol: float = 1e-8,
) -> Expr | None:
    """Find V in the dictionary span with D(V) = target; None when absent."""
    columns = _v_dictionary()
    images = [D(c) for c in columns]
    return _fit(
        target, columns, images,
        seed=seed, on_shell=on_shell, samples=samples,
        fit_tol=fit_tol, verify_tol=verify_tol,
    )


def fit_shift_difference(
    target: Expr,
    *,
    seed: int = 0,
    on_shell: DelayHamiltonian | None = None,
    samples: int | None = None,
    fit_tol: float = 1e-6,
    verify_tol: float = 1e-8,
) -> Expr | None:
    """Find W in the dictionary span with (S+ - 1)W = target; None when absent."""
    columns = _w_dictionary()
    images = [sub(shift(c, +1), c) for c in columns]
    return _fit(
        target, columns, images,
        seed=seed, on_shell=on_shell, samples=samples,
        fit_tol=fit_tol, verify_tol=verify_tol,
    )


def classify_invariance(
    h: DelayHamiltonian,
    g: Generator,
    v: Expr | None = None,
    w: Expr | None = None,
    *,
    fit: bool = True,
    samples: int = 100,
    tol: float = 1e-9,
    seed: int = 0,
) -> InvarianceResidual:
    """Variational (residual vanishes), divergence (residual is D(V)+(1-S+)W),
    or none.  User-supplied V/W are checked as given; otherwise V is searched
    automatically over the monomial dictionary (off-shell, so a reported
    divergence form is an identity, not merely an on-shell coincidence)."""
    om = invariance_residual(h, g)
    if is_zero(om, samples=samples, tol=tol, seed=seed).ok:
        return InvarianceResidual(om, Classification.VARIATIONAL)
    if v is not None or w is not None:
        vv = as_expr(v if v is not None else 0)
        ww = as_expr(w if w is not None else 0)
        residual = sub(om, add(D(vv), sub(ww, shift(ww, +1))))
        if is_zero(residual, samples=samples, tol=tol, seed=seed).ok:
            return InvarianceResidual(om, Classification.DIVERGENCE, vv, ww)
    if fit:
        fitted = fit_total_derivative(om, seed=seed + 1)
        if fitted is not None:
            return InvarianceResidual(om, Classification.DIVERGENCE, fitted, ex.ZERO)
    return InvarianceResidual(om, Classification.NONE)


# ---------------------------------------------------------------------------
# first integrals
# ---------------------------------------------------------------------------


def differential_integral(
    parts: NoetherQuantities,
    v: Expr,
    *,
    v_div: Expr | None = None,
    w_div: Expr | None = None,
    ham: DelayHamiltonian | None = None,
    samples: int = 80,
    tol: float = 1e-8,
    seed: int = 0,
) -> Expr:
    """I = C - V, where V collects the divergence part and the telescoped
    difference part.  With `ham` given, the telescoping premise is re-checked
    on sampled on-shell jets before the integral is returned."""
    v = as_expr(v)
    vd = as_expr(v_div if v_div is not None else 0)
    wd = as_expr(w_div if w_div is not None else 0)
    if ham is not None:
        p_eff = sub(parts.p_quantity, wd)
        residual = sub(sub(shift(p_eff, +1), p_eff), D(sub(v, vd)))
        jets = (on_shell_jet(ham, seed, k) for k in range(samples))
        check = is_zero_at(residual, jets, tol=tol)
        if not check.ok:
            raise IntegralVerificationError(
                "difference part does not telescope into the supplied total derivative",
                check.worst,
            )
    integral = sub(parts.c, v)
    parts.differential_integral = integral
    return integral


def difference_integral(
    parts: NoetherQuantities,
    w: Expr,
    *,
    v_div: Expr | None = None,
    w_div: Expr | None = None,
    ham: DelayHamiltonian | None = None,
    samples: int = 80,
    tol: float = 1e-8,
    seed: int = 0,
) -> Expr:
    """J = P - W, the two-point conserved quantity of the opposite splitting."""
    w = as_expr(w)
    vd = as_expr(v_div if v_div is not None else 0)
    wd = as_expr(w_div if w_div is not None else 0)
    if ham is not None:
        w_extra = sub(w, wd)
        residual = sub(D(sub(parts.c, vd)), sub(shift(w_extra, +1), w_extra))
        need_second = any(s.order >= 2 for s in symbols_of(residual))
        jets = (on_shell_jet(ham, seed, k, second_order=need_second) for k in range(samples))
        check = is_zero_at(residual, jets, tol=tol)
        if not check.ok:
            raise IntegralVerificationError(
                "total-derivative part is not the supplied shift difference",
                check.worst,
            )
    integral = sub(parts.p_quantity, w)
    parts.difference_integral = integral
    return integral


# ---------------------------------------------------------------------------
# variational-derivative identities for the invariance residual
# ---------------------------------------------------------------------------


@dataclass
class IdentityReport:
    ok: bool
    checks: dict[str, ZeroCheck]

    def __bool__(self) -> bool:
        return self.ok


def variational_derivative_identities(
    h: DelayHamiltonian,
    g: Generator,
    samples: int = 100,
    tol: float = 1e-9,
    seed: int = 0,
) -> IdentityReport:
    """Off-shell identities tying variations of the invariance residual to the
    prolonged generator acting on the variational residuals.

    They hold for generators whose time coefficient depends on t alone (affine
    plus delay-periodic); the variational operators in q and p are the
    three-point extended ones.
    """
    density = action_density(h)
    rp = variational_p(density)
    rq = variational_q(density)
    rt = variational_t(density)
    om = invariance_residual(h, g)
    xid = D(g.xi)
    checks: dict[str, ZeroCheck] = {}

    lhs_p = variational_p(om, extended=True)
    rhs_p = add(
        g.apply(rp),
        mul(partial(g.eta, "p"), rq),
        mul(add(partial(g.nu, "p"), xid), rp),
    )
    checks["p"] = is_zero(sub(lhs_p, rhs_p), samples=samples, tol=tol, seed=seed)

    lhs_q = variational_q(om, extended=True)
    rhs_q = add(
        g.apply(rq),
        mul(add(partial(g.eta, "q"), xid), rq),
        mul(partial(g.nu, "q"), rp),
    )
    checks["q"] = is_zero(sub(lhs_q, rhs_q), samples=samples, tol=tol, seed=seed)

    lhs_t = variational_t(om)
    rhs_t = add(
        g.apply(rt),
        mul(2, xid, rt),
        mul(partial(g.eta, "t"), rq),
        mul(partial(g.nu, "t"), rp),
    )
    checks["t"] = is_zero(sub(lhs_t, rhs_t), samples=samples, tol=tol, seed=seed)

    orbit = add(mul(g.xi, rt), mul(g.eta, rq), mul(g.nu, rp))
    lhs_orbit = add(
        mul(g.xi, lhs_t),
        mul(g.eta, variational_q(om, extended=True)),
        mul(g.nu, variational_p(om, extended=True)),
    )
    rhs_orbit = add(g.apply(orbit), mul(xid, orbit))
    checks["orbit"] = is_zero(sub(lhs_orbit, rhs_orbit), samples=samples, tol=tol, seed=seed)

    return IdentityReport(all(c.ok for c in checks.values()), checks)


# ---------------------------------------------------------------------------
# drift monitoring along trajectories
# ---------------------------------------------------------------------------


@dataclass
class DriftReport:
    kind: str
    max_drift: float
    t_at_max: float
    reference: float
    n_points: int


def _node_slots(traj, i: int, n: int) -> list[float]:
    slots = [math.nan] * ex.NSLOTS
    slots[ex.TAU_INDEX] = traj.tau

    def put(base: str, arr, darr, sh: int, j: int):
        slots[symbol(base, sh, 0).index] = arr[j]
        if darr is not None:
            slots[symbol(base, sh, 1).index] = darr[j]

    for sh, j in ((-1, i - n), (0, i), (1, i + n)):
        if j < 0 or j >= len(traj.t):
            continue
        slots[symbol("t", sh, 0).index] = traj.t[j]
        put("q", traj.q, traj.qd, sh, j)
        if traj.p is not None:
            put("p", traj.p, traj.pd, sh, j)
    return slots


def drift(integral: Expr, traj, kind: str = "differential") -> DriftReport:
    """Deviation of a candidate first integral along a trajectory.

    Differential integrals are compared against their value at the first
    admissible node; difference integrals are compared against their own value
    one delay later.
    """
    if kind not in ("differential", "difference"):
        raise ValueError("kind must be 'differential' or 'difference'")
    syms = symbols_of(integral)
    if any(s.order >= 2 for s in syms):
        raise DriftError("integrals may involve first derivatives only")
    if kind == "difference" and any(s.shift > 0 for s in syms):
        raise DriftError("a difference integral must not reference the forward point")
    needs_p = any(s.base == "p" for s in syms)
    if needs_p and traj.p is None:
        raise DriftError("trajectory carries no momentum samples")
    needs_rate = any(s.order == 1 for s in syms)
    if needs_rate and traj.qd is None:
        raise DriftError("trajectory carries no derivative samples")
    n = traj.steps_per_delay
    m = len(traj.t) - 1
    if m < 2 * n:
        raise DriftError("trajectory is shorter than the span of the integral")
    fn = ex.compiled(integral)
    worst = 0.0
    t_at = traj.t[n]
    npts = 0
    if kind == "differential":
        ref = fn(_node_slots(traj, n, n))
        for i in range(n, m - n + 1):
            val = fn(_node_slots(traj, i, n))
            npts += 1
            dev = abs(val - ref)
            if dev > worst:
                worst, t_at = dev, traj.t[i]
        return DriftReport("differential", worst, t_at, ref, npts)
    ref = fn(_node_slots(traj, n, n))
    for i in range(n, m - n + 1):
        here = fn(_node_slots(traj, i, n))
        there = fn(_node_slots(traj, i + n, n))
        npts += 1
        dev = abs(there - here)
        if dev > worst:
            worst, t_at = dev, traj.t[i]
    return DriftReport("difference", worst, t_at, ref, npts)


def constrained_difference_check(parts: NoetherQuantities, traj) -> tuple[DriftReport, float]:
    """Monitoring for the constrained route: when (S+ - 1)P = 0 is imposed,
    C itself is the candidate integral; returns its drift and the largest
    constraint violation observed along the trajectory."""
    report = drift(parts.c, traj, kind="differential")
    n = traj.steps_per_delay
    m = len(traj.t) - 1
    fn = ex.compiled(parts.p_quantity)
    worst = 0.0
    for i in range(n, m - n + 1):
        gap = abs(fn(_node_slots(traj, i + n, n)) - fn(_node_slots(traj, i, n)))
        worst = max(worst, gap)
    return report, worst


# ---------------------------------------------------------------------------
# analysis pipeline
# ---------------------------------------------------------------------------


@dataclass
class GeneratorReport:
    name: str
    invariance: InvarianceResidual
    parts: NoetherQuantities
    identity: ZeroCheck
    notes: list[str] = field(default_factory=list)
    drift_differential: DriftReport | None = None
    drift_difference: DriftReport | None = None


def analyze_generator(
    h: DelayHamiltonian,
    g: Generator,
    name: str = "X",
    *,
    v: Expr | None = None,
    w: Expr | None = None,
    traj=None,
    fit: bool = True,
    samples: int = 100,
    tol: float = 1e-9,
    seed: int = 0,
) -> GeneratorReport:
    """Full treatment of one generator: identity check, classification,
    conserved-quantity derivation, and optional drift monitoring."""
    identity = verify_hamiltonian_identity(h, g, samples=samples, tol=tol, seed=seed)
    inv = classify_invariance(h, g, v, w, fit=fit, samples=samples, tol=tol, seed=seed)
    parts = noether_parts(h, g)
    report = GeneratorReport(name, inv, parts, identity)

    if inv.classification is Classification.NONE:
        report.notes.append("not a variational or divergence invariance; no conserved quantity")
        return report

    eta_zero = is_zero(g.eta, samples=10, tol=1e-12, seed=seed).ok
    nu_zero = is_zero(g.nu, samples=10, tol=1e-12, seed=seed).ok
    xi_zero = is_zero(g.xi, samples=10, tol=1e-12, seed=seed).ok
    if eta_zero and nu_zero and not xi_zero:
        report.notes.append(
            "purely temporal generator: the canonical pair alone yields no "
            "conserved quantity; a different determined system would be needed"
        )
        return report

    v_div = inv.v if inv.v is not None else ex.ZERO
    w_div = inv.w if inv.w is not None else ex.ZERO
    can_shell = h.alphas[0] != 0 and h.alphas[3] != 0

    p_eff = sub(parts.p_quantity, w_div)
    diff_target = sub(shift(p_eff, +1), p_eff)
    v_extra = fit_total_derivative(diff_target, seed=seed + 11)
    if v_extra is None and can_shell:
        v_extra = fit_total_derivative(diff_target, seed=seed + 11, on_shell=h)
    if v_extra is not None:
        integral = differential_integral(parts, add(v_div, v_extra), v_div=v_div, w_div=w_div)
        if is_zero(integral, samples=40, tol=1e-10, seed=seed + 3).ok:
            # the fit absorbed everything through the equations of motion
            parts.differential_integral = None
            report.notes.append("differential conversion yields only the zero quantity")
    else:
        report.notes.append("difference part not convertible: no differential integral found")

    c_target = D(sub(parts.c, v_div))
    w_extra = fit_shift_difference(c_target, seed=seed + 13)
    if w_extra is None and can_shell:
        w_extra = fit_shift_difference(c_target, seed=seed + 13, on_shell=h)
    if w_extra is not None:
        integral = difference_integral(parts, add(w_div, w_extra), v_div=v_div, w_div=w_div)
        if is_zero(integral, samples=40, tol=1e-10, seed=seed + 5).ok:
            parts.difference_integral = None
            report.notes.append("difference conversion yields only the zero quantity")
    else:
        report.notes.append("derivative part not convertible: no difference integral found")

    if traj is not None:
        if parts.differential_integral is not None:
            report.drift_differential = drift(
                parts.differential_integral, traj, kind="differential"
            )
        if parts.difference_integral is not None:
            report.drift_difference = drift(
                parts.difference_integral, traj, kind="difference"
            )
    return report
