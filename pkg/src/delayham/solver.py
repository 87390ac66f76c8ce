"""Method-of-steps integration of the advance-delay variational equations.

The canonical pair relates the state at t - tau, t, and t + tau.  Rebasing the
equations one delay back turns them into an explicit ODE for the newest
segment: the unknowns at time t enter only through the shifted slots of the
rebased equation.  Each delay-length interval is integrated with classical
fixed-step fourth-order Runge-Kutta; the grid step is an exact divisor of the
delay so shifted values sit on nodes, and lagged values at stage midpoints
come from cubic Hermite interpolation of stored (value, derivative) pairs.

Derivatives of the solution jump at the knots t0 + k*tau (the usual smoothing
behaviour of delay equations).  Both one-sided derivatives are stored at every
node: interpolation over a segment uses the derivative branch belonging to
that segment, and integration never steps across a knot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .expr import Expr, partial, symbol, symbols_of
from .model import DelayHamiltonian, QuadraticLagrangian, shifted_pair_partial, variational_residuals

_T_ONLY = frozenset((symbol("t", 0, 0),))


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class History:
    """Smooth starting data on [t0 - 2*tau, t0], given as expressions in t."""

    t0: float
    tau: float
    q: Expr
    p: Expr | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        bad = symbols_of(self.q) - _T_ONLY
        if self.p is not None:
            bad |= symbols_of(self.p) - _T_ONLY
        if bad:
            names = ", ".join(sorted(s.name for s in bad))
            raise ValueError(f"history expressions may only involve t (got {names})")

    def _fn(self, e: Expr):
        return ex.compiled(e)

    def _eval(self, e: Expr, tv: float) -> float:
        slots = [math.nan] * ex.NSLOTS
        slots[ex.TAU_INDEX] = self.tau
        slots[symbol("t", 0, 0).index] = tv
        out = self._fn(e)(slots)
        if not math.isfinite(out):
            raise SolverError(f"history expression is not finite at t={tv}")
        return out

    def q_at(self, tv: float) -> float:
        return self._eval(self.q, tv)

    def qd_at(self, tv: float) -> float:
        return self._eval(partial(self.q, "t"), tv)

    def qdd_at(self, tv: float) -> float:
        return self._eval(partial(partial(self.q, "t"), "t"), tv)

    def p_at(self, tv: float) -> float:
        if self.p is None:
            raise SolverError("history carries no momentum expression")
        return self._eval(self.p, tv)

    def pd_at(self, tv: float) -> float:
        if self.p is None:
            raise SolverError("history carries no momentum expression")
        return self._eval(partial(self.p, "t"), tv)


@dataclass
class Trajectory:
    """Uniform-grid samples; the delay is exactly `steps_per_delay` grid steps.

    Node times are t0 + i*h with integer i, so forward/backward delay shifts
    are exact index offsets.  `qd`/`pd` hold the right-limit derivative at
    knots (left limit at the final node); the `*_left` arrays carry the other
    one-sided limit where it differs.
    """

    tau: float
    steps_per_delay: int
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray | None
    qd: np.ndarray | None
    pd: np.ndarray | None
    qd_left: np.ndarray | None = None
    pd_left: np.ndarray | None = None
    qdd: np.ndarray | None = None
    qdd_left: np.ndarray | None = None
    start_index: int = 0

    @property
    def h(self) -> float:
        return self.tau / self.steps_per_delay

    def knot_indices(self) -> list[int]:
        n = self.steps_per_delay
        return list(range(self.start_index, len(self.t), n))


def _hermite(theta: float, h: float, y0: float, d0: float, y1: float, d1: float) -> float:
    t2 = theta * theta
    t3 = t2 * theta
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + theta) * h * d0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * d1
    )


def _hermite_rate(theta: float, h: float, y0: float, d0: float, y1: float, d1: float) -> float:
    t2 = theta * theta
    return (
        (6 * t2 - 6 * theta) * y0 / h
        + (3 * t2 - 4 * theta + 1) * d0
        + (-6 * t2 + 6 * theta) * y1 / h
        + (3 * t2 - 2 * theta) * d1
    )


class _Segmented:
    """Lagged lookup over one smooth piece [lo, hi] (grid indices)."""

    def __init__(self, values, d_right, d_left, h):
        self.values = values
        self.d_right = d_right
        self.d_left = d_left
        self.h = h

    def at(self, x: float, lo: int, hi: int) -> tuple[float, float]:
        j = int(math.floor(x + 1e-9))
        frac = x - j
        if abs(frac) < 1e-9:
            if j <= lo:
                return self.values[j], self.d_right[j]
            if j >= hi:
                return self.values[j], self.d_left[j]
            return self.values[j], self.d_right[j]
        y0, d0 = self.values[j], self.d_right[j]
        y1, d1 = self.values[j + 1], self.d_left[j + 1]
        return (
            _hermite(frac, self.h, y0, d0, y1, d1),
            _hermite_rate(frac, self.h, y0, d0, y1, d1),
        )


def _grid(hist: History, t_end: float, n: int) -> tuple[int, float, np.ndarray]:
    if n < 8:
        raise SolverError("steps_per_delay must be at least 8")
    span = t_end - hist.t0
    k = round(span / hist.tau)
    if k < 1 or abs(span - k * hist.tau) > 1e-9 * max(1.0, abs(t_end)):
        raise SolverError(
            f"t_end must be t0 + k*tau for an integer k >= 1 (got span {span}, tau {hist.tau})"
        )
    h = hist.tau / n
    m = (k + 2) * n
    t = hist.t0 + (np.arange(m + 1) - 2 * n) * h
    return k, h, t


def step_hamiltonian(
    ham: DelayHamiltonian, hist: History, t_end: float, steps_per_delay: int
) -> Trajectory:
    """Integrate the delay canonical pair forward from smooth history.

    Rebasing one delay back requires solving for the newest derivatives, which
    is possible exactly when the outermost pairing weights are nonzero.
    """
    a1, a2, a3, a4 = (float(a) for a in ham.alphas)
    if a1 == 0.0 or a4 == 0.0:
        raise SolverError(
            "cannot rebase the canonical equations: the outermost pairing "
            f"weights must be nonzero (got a1={a1}, a4={a4})"
        )
    a23 = a2 + a3
    if hist.p is None:
        raise SolverError("the canonical equations need a momentum history")
    n = steps_per_delay
    k, h, t = _grid(hist, t_end, n)
    m = len(t) - 1

    q = np.full(m + 1, np.nan)
    p = np.full(m + 1, np.nan)
    qd_r = np.full(m + 1, np.nan)
    qd_l = np.full(m + 1, np.nan)
    pd_r = np.full(m + 1, np.nan)
    pd_l = np.full(m + 1, np.nan)

    for i in range(2 * n + 1):
        tv = t[i]
        q[i] = hist.q_at(tv)
        p[i] = hist.p_at(tv)
        qd_r[i] = qd_l[i] = hist.qd_at(tv)
        pd_r[i] = pd_l[i] = hist.pd_at(tv)

    phi_p = ex.compiled(shifted_pair_partial(ham.h, "p"))
    phi_q = ex.compiled(shifted_pair_partial(ham.h, "q"))
    slots = [math.nan] * ex.NSLOTS
    slots[ex.TAU_INDEX] = hist.tau
    idx = {name: symbol(*key).index for name, key in {
        "t": ("t", 0, 0), "tm": ("t", -1, 0), "tp": ("t", 1, 0),
        "q": ("q", 0, 0), "qm": ("q", -1, 0), "qp": ("q", 1, 0),
        "p": ("p", 0, 0), "pm": ("p", -1, 0), "pp": ("p", 1, 0),
    }.items()}

    look_q = _Segmented(q, qd_r, qd_l, h)
    look_p = _Segmented(p, pd_r, pd_l, h)

    def rhs(x: float, qv: float, pv: float, lo1: int, hi1: int) -> tuple[float, float]:
        # x is the grid index of the current time; the rebased equation sits
        # one delay back and references two smooth pieces of history.
        lo2, hi2 = lo1 - n, hi1 - n
        qs, dqs = look_q.at(x - n, lo1, hi1)
        ps, dps = look_p.at(x - n, lo1, hi1)
        qs2, dqs2 = look_q.at(x - 2 * n, lo2, hi2)
        ps2, dps2 = look_p.at(x - 2 * n, lo2, hi2)
        tv = hist.t0 + (x - 2 * n) * h
        slots[idx["t"]] = tv - hist.tau
        slots[idx["tm"]] = tv - 2 * hist.tau
        slots[idx["tp"]] = tv
        slots[idx["q"]] = qs
        slots[idx["qm"]] = qs2
        slots[idx["qp"]] = qv
        slots[idx["p"]] = ps
        slots[idx["pm"]] = ps2
        slots[idx["pp"]] = pv
        qdot = (phi_p(slots) - a23 * dqs - a4 * dqs2) / a1
        pdot = (-phi_q(slots) - a23 * dps - a1 * dps2) / a4
        return qdot, pdot

    for j in range(1, k + 1):
        b = 2 * n + (j - 1) * n
        lo1, hi1 = b - n, b
        qd_r[b], pd_r[b] = rhs(b, q[b], p[b], lo1, hi1)
        for step in range(n):
            i = b + step
            qv, pv = q[i], p[i]
            k1q, k1p = qd_r[i], pd_r[i]
            k2q, k2p = rhs(i + 0.5, qv + h / 2 * k1q, pv + h / 2 * k1p, lo1, hi1)
            k3q, k3p = rhs(i + 0.5, qv + h / 2 * k2q, pv + h / 2 * k2p, lo1, hi1)
            k4q, k4p = rhs(i + 1.0, qv + h * k3q, pv + h * k3p, lo1, hi1)
            q[i + 1] = qv + h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
            p[i + 1] = pv + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
            dq, dp = rhs(i + 1.0, q[i + 1], p[i + 1], lo1, hi1)
            if i + 1 < b + n:
                qd_r[i + 1] = qd_l[i + 1] = dq
                pd_r[i + 1] = pd_l[i + 1] = dp
            else:
                qd_l[i + 1] = dq
                pd_l[i + 1] = dp

    qd = qd_r.copy()
    pd = pd_r.copy()
    qd[m] = qd_l[m]
    pd[m] = pd_l[m]
    return Trajectory(
        hist.tau, n, t, q, p, qd, pd,
        qd_left=qd_l, pd_left=pd_l, start_index=2 * n,
    )


def step_elsgolts(
    lag: QuadraticLagrangian, hist: History, t_end: float, steps_per_delay: int
) -> Trajectory:
    """Integrate the second-order delay variational equation for q alone."""
    beta = float(lag.beta)
    ag = float(lag.alpha + lag.gamma)
    n = steps_per_delay
    k, h, t = _grid(hist, t_end, n)
    m = len(t) - 1

    q = np.full(m + 1, np.nan)
    v = np.full(m + 1, np.nan)
    dd_r = np.full(m + 1, np.nan)
    dd_l = np.full(m + 1, np.nan)
    for i in range(2 * n + 1):
        tv = t[i]
        q[i] = hist.q_at(tv)
        v[i] = hist.qd_at(tv)
        dd_r[i] = dd_l[i] = hist.qdd_at(tv)

    psi = ex.compiled(shifted_pair_partial(lag.phi, "q"))
    slots = [math.nan] * ex.NSLOTS
    slots[ex.TAU_INDEX] = hist.tau
    qi = symbol("q", 0, 0).index
    qmi = symbol("q", -1, 0).index
    qpi = symbol("q", 1, 0).index

    look_q = _Segmented(q, v, v, h)
    look_a = _Segmented(v, dd_r, dd_l, h)

    def accel(x: float, qv: float, lo1: int, hi1: int) -> float:
        lo2, hi2 = lo1 - n, hi1 - n
        qs, _ = look_q.at(x - n, lo1, hi1)
        qs2, _ = look_q.at(x - 2 * n, lo2, hi2)
        _, as1 = look_a.at(x - n, lo1, hi1)
        _, as2 = look_a.at(x - 2 * n, lo2, hi2)
        slots[qi] = qs
        slots[qmi] = qs2
        slots[qpi] = qv
        return -(ag * as1 + beta * as2 + psi(slots)) / beta

    for j in range(1, k + 1):
        b = 2 * n + (j - 1) * n
        lo1, hi1 = b - n, b
        dd_r[b] = accel(b, q[b], lo1, hi1)
        for step in range(n):
            i = b + step
            qv, vv = q[i], v[i]
            k1q, k1v = vv, dd_r[i]
            k2v = accel(i + 0.5, qv + h / 2 * k1q, lo1, hi1)
            k2q = vv + h / 2 * k1v
            k3v = accel(i + 0.5, qv + h / 2 * k2q, lo1, hi1)
            k3q = vv + h / 2 * k2v
            k4v = accel(i + 1.0, qv + h * k3q, lo1, hi1)
            k4q = vv + h * k3v
            q[i + 1] = qv + h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
            v[i + 1] = vv + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            dd = accel(i + 1.0, q[i + 1], lo1, hi1)
            if i + 1 < b + n:
                dd_r[i + 1] = dd_l[i + 1] = dd
            else:
                dd_l[i + 1] = dd

    # velocities are continuous here; second derivatives carry the jumps
    qdd = dd_r.copy()
    qdd[m] = dd_l[m]
    return Trajectory(
        hist.tau, n, t, q, None, v.copy(), None,
        qd_left=v.copy(), qdd=qdd, qdd_left=dd_l, start_index=2 * n,
    )


# ---------------------------------------------------------------------------
# residual evaluation along a trajectory
# ---------------------------------------------------------------------------


@dataclass
class ResidualTable:
    indices: np.ndarray
    t: np.ndarray
    rp: np.ndarray
    rq: np.ndarray
    rt: np.ndarray

    def max_abs(self) -> dict[str, float]:
        def mx(a):
            good = a[np.isfinite(a)]
            return float(np.max(np.abs(good))) if good.size else math.nan

        return {"Rp": mx(self.rp), "Rq": mx(self.rq), "Rt": mx(self.rt)}


def residual_report(traj: Trajectory, ham: DelayHamiltonian) -> ResidualTable:
    """Evaluate the three variational residuals at every interior node.

    First derivatives come from the stored samples (right-limit branch, so
    the check is one-sidedly consistent at knots); second derivatives, needed
    only by the horizontal residual, are centered finite differences.  The
    horizontal residual is reported, not asserted: it does not vanish on
    solutions of the canonical pair.
    """
    if traj.p is None:
        raise SolverError("residual evaluation needs a phase-space trajectory")
    rp_e, rq_e, rt_e = variational_residuals(ham)
    fns = [ex.compiled(e) for e in (rp_e, rq_e, rt_e)]
    n = traj.steps_per_delay
    m = len(traj.t) - 1
    h = traj.h
    slots_template = [math.nan] * ex.NSLOTS
    slots_template[ex.TAU_INDEX] = traj.tau

    def second(arr, j):
        if j - 1 < 0 or j + 1 > m:
            return math.nan
        return (arr[j + 1] - arr[j - 1]) / (2 * h)

    rows = []
    for i in range(n, m - n + 1):
        slots = list(slots_template)
        for sh, j in ((-1, i - n), (0, i), (1, i + n)):
            slots[symbol("t", sh, 0).index] = traj.t[j]
            slots[symbol("q", sh, 0).index] = traj.q[j]
            slots[symbol("p", sh, 0).index] = traj.p[j]
            slots[symbol("q", sh, 1).index] = traj.qd[j]
            slots[symbol("p", sh, 1).index] = traj.pd[j]
            slots[symbol("q", sh, 2).index] = second(traj.qd, j)
            slots[symbol("p", sh, 2).index] = second(traj.pd, j)
        rows.append((i, traj.t[i], fns[0](slots), fns[1](slots), fns[2](slots)))
    arr = np.array(rows)
    return ResidualTable(arr[:, 0].astype(int), arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4])


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

CSV_HEADER = "t,q,p,qdot,pdot,Rp,Rq,Rt"


def write_csv(traj: Trajectory, stream, residuals: ResidualTable | None = None) -> None:
    """Emit the trajectory in the fixed column schema, 17 significant digits."""
    close = False
    if isinstance(stream, (str,)):
        stream = open(stream, "w", encoding="utf-8", newline="\n")
        close = True
    try:
        stream.write(CSV_HEADER + "\n")
        res = {}
        if residuals is not None:
            for row, tv in enumerate(residuals.indices):
                res[int(tv)] = (residuals.rp[row], residuals.rq[row], residuals.rt[row])
        for i in range(len(traj.t)):
            cells = [
                traj.t[i],
                traj.q[i],
                traj.p[i] if traj.p is not None else math.nan,
                traj.qd[i] if traj.qd is not None else math.nan,
                traj.pd[i] if traj.pd is not None else math.nan,
                *res.get(i, (math.nan, math.nan, math.nan)),
            ]
            stream.write(",".join(f"{c:.17g}" for c in cells) + "\n")
    finally:
        if close:
            stream.close()


@dataclass
class CsvTrajectory:
    tau: float
    steps_per_delay: int
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray | None
    qd: np.ndarray | None
    pd: np.ndarray | None


def read_csv(path_or_stream) -> CsvTrajectory:
    """Read the fixed schema back; delay metadata is left unset (zero)."""
    if isinstance(path_or_stream, str):
        with open(path_or_stream, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = path_or_stream.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != CSV_HEADER:
        raise SolverError(f"expected header '{CSV_HEADER}'")
    data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    def col(i):
        column = data[:, i]
        return None if np.all(np.isnan(column)) else column
    return CsvTrajectory(0.0, 0, data[:, 0], data[:, 1], col(2), col(3), col(4))


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------


def observed_orders(errors: list[float]) -> list[float]:
    """log2 ratios of consecutive errors for a step-halving sequence."""
    out = []
    for a, b in zip(errors, errors[1:]):
        if b == 0:
            out.append(math.inf)
        else:
            out.append(math.log2(a / b))
    return out


def fitted_order(ns: list[int], errors: list[float]) -> float:
    """Least-squares slope of log2(error) against log2(N)."""
    xs = np.log2(np.array(ns, dtype=float))
    ys = np.log2(np.array(errors, dtype=float))
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope)
