"""Batch front door: transform, simulate, noether, recurse, compare, check-identity.

Configuration is a single JSON document; commands read it, run the library,
and emit JSON reports or CSV trajectories.  Outputs are deterministic for a
fixed config and seed.  Exit codes: 0 success, 2 configuration error,
3 numeric failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import expr as ex
from . import legendre, noether, recursion, solver
from .classical import ClassicalHamiltonian, classical_identity_residual
from .expr import Expr, ParseError, parse, to_source
from .model import (
    DelayHamiltonian,
    Generator,
    QuadraticLagrangian,
    xi_admissible,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4


class ConfigError(Exception):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"config error at {pointer}: {message}")
        self.pointer = pointer


def _parse_expr(source: Any, pointer: str) -> Expr:
    if not isinstance(source, str):
        raise ConfigError(pointer, "expected an expression string")
    try:
        return parse(source)
    except ParseError as err:
        raise ConfigError(pointer, str(err)) from None


def _number(value: Any, pointer: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(pointer, "expected a number")
    return value


@dataclass
class RunConfig:
    raw: dict
    tau: float
    seed: int
    tol: float
    samples: int
    steps_per_delay: int
    horizon: float | None
    t0: float
    lagrangian: QuadraticLagrangian | None
    hamiltonian: DelayHamiltonian | None
    extended: legendre.ExtendedLagrangian | None
    history: solver.History | None
    generators: list[tuple[str, Generator, Expr | None, Expr | None]]


def load_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("/", "top level must be an object")
    tau = _number(raw.get("tau", 1.0), "/tau")
    if not tau > 0:
        raise ConfigError("/tau", "must be positive")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("/seed", "must be an integer")
    tol = _number(raw.get("tol", 1e-9), "/tol")
    if not tol > 0:
        raise ConfigError("/tol", "must be positive")
    samples = raw.get("samples", 100)
    if not isinstance(samples, int) or samples < 1:
        raise ConfigError("/samples", "must be a positive integer")
    n = raw.get("steps_per_delay", 64)
    if not isinstance(n, int) or n < 8:
        raise ConfigError("/steps_per_delay", "must be an integer >= 8")
    horizon = raw.get("horizon")
    if horizon is not None:
        horizon = _number(horizon, "/horizon")
        k = round(horizon / tau)
        if k < 1 or abs(horizon - k * tau) > 1e-9 * max(1.0, abs(horizon)):
            raise ConfigError("/horizon", "must be a positive integer multiple of tau")
    t0 = _number(raw.get("t0", 0.0), "/t0")

    lag = ham = extended = None
    if "lagrangian" in raw:
        node = raw["lagrangian"]
        if not isinstance(node, dict):
            raise ConfigError("/lagrangian", "must be an object")
        try:
            lag = QuadraticLagrangian(
                _number(node.get("alpha", 0), "/lagrangian/alpha"),
                _number(node.get("beta", 1), "/lagrangian/beta"),
                _number(node.get("gamma", 0), "/lagrangian/gamma"),
                _parse_expr(node.get("phi", "0"), "/lagrangian/phi"),
            )
        except ValueError as err:
            raise ConfigError("/lagrangian", str(err)) from None
    if "hamiltonian" in raw:
        node = raw["hamiltonian"]
        if not isinstance(node, dict):
            raise ConfigError("/hamiltonian", "must be an object")
        alphas = node.get("alphas", [1, 0, 0, 1])
        if not isinstance(alphas, list) or len(alphas) != 4:
            raise ConfigError("/hamiltonian/alphas", "must be a list of four numbers")
        try:
            ham = DelayHamiltonian(
                _parse_expr(node.get("H", "0"), "/hamiltonian/H"),
                tuple(_number(a, f"/hamiltonian/alphas/{i}") for i, a in enumerate(alphas)),
            )
        except ValueError as err:
            raise ConfigError("/hamiltonian", str(err)) from None
    if "extended_lagrangian" in raw:
        node = raw["extended_lagrangian"]
        if not isinstance(node, dict):
            raise ConfigError("/extended_lagrangian", "must be an object")
        try:
            extended = legendre.ExtendedLagrangian(
                _parse_expr(node.get("alpha", "0"), "/extended_lagrangian/alpha"),
                _parse_expr(node.get("beta", "1"), "/extended_lagrangian/beta"),
                _parse_expr(node.get("gamma", "0"), "/extended_lagrangian/gamma"),
                _parse_expr(node.get("lambda", "0"), "/extended_lagrangian/lambda"),
                _parse_expr(node.get("mu", "1"), "/extended_lagrangian/mu"),
                _parse_expr(node.get("phi", "0"), "/extended_lagrangian/phi"),
            )
        except ValueError as err:
            raise ConfigError("/extended_lagrangian", str(err)) from None

    history = None
    if "history" in raw:
        node = raw["history"]
        if not isinstance(node, dict):
            raise ConfigError("/history", "must be an object")
        q_src = _parse_expr(node.get("q", "0"), "/history/q")
        p_src = _parse_expr(node["p"], "/history/p") if "p" in node else None
        try:
            history = solver.History(t0, tau, q_src, p_src)
        except ValueError as err:
            raise ConfigError("/history", str(err)) from None

    generators: list[tuple[str, Generator, Expr | None, Expr | None]] = []
    for i, node in enumerate(raw.get("generators", [])):
        ptr = f"/generators/{i}"
        if not isinstance(node, dict):
            raise ConfigError(ptr, "must be an object")
        name = node.get("name", f"X{i + 1}")
        try:
            gen = Generator(
                _parse_expr(node.get("xi", "0"), ptr + "/xi"),
                _parse_expr(node.get("eta", "0"), ptr + "/eta"),
                _parse_expr(node.get("nu", "0"), ptr + "/nu"),
            )
        except ValueError as err:
            raise ConfigError(ptr, str(err)) from None
        v = _parse_expr(node["V"], ptr + "/V") if "V" in node else None
        w = _parse_expr(node["W"], ptr + "/W") if "W" in node else None
        generators.append((str(name), gen, v, w))

    return RunConfig(
        raw, tau, seed, tol, samples, n, horizon, t0,
        lag, ham, extended, history, generators,
    )


def _resolved_hamiltonian(cfg: RunConfig) -> DelayHamiltonian:
    if cfg.hamiltonian is not None:
        return cfg.hamiltonian
    if cfg.lagrangian is not None:
        return legendre.legendre_forward(cfg.lagrangian).hamiltonian
    raise ConfigError("/", "needs a 'hamiltonian' or 'lagrangian' section")


def _emit(payload: dict, out_path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _maybe(e: Expr | None) -> str | None:
    return None if e is None else to_source(e)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_transform(cfg: RunConfig, args) -> int:
    if cfg.extended is not None:
        res = legendre.legendre_extended(cfg.extended)
        payload = {
            "H": to_source(res.h),
            "alphas": [to_source(a) for a in res.alphas],
            "velocity_map": {
                "qd": to_source(res.velocity_map[0]),
                "qdm": to_source(res.velocity_map[1]),
            },
        }
    elif cfg.lagrangian is not None:
        res = legendre.legendre_forward(cfg.lagrangian, args.alpha1)
        payload = {
            "H": to_source(res.hamiltonian.h),
            "alphas": [float(a) for a in res.hamiltonian.alphas],
            "degenerate": res.degenerate,
            "momentum_map": (
                {"merged_relation": to_source(res.merged_relation)}
                if res.degenerate
                else {
                    "p": to_source(res.momentum_map[0]),
                    "pm": to_source(res.momentum_map[1]),
                    "qd": to_source(res.inverse_map[0]),
                    "qdm": to_source(res.inverse_map[1]),
                }
            ),
        }
    elif cfg.hamiltonian is not None:
        quad = _as_quadratic(cfg.hamiltonian)
        lag, alphas, vel = legendre.legendre_reverse(quad, args.alpha1)
        payload = {
            "L": to_source(lag.expr()),
            "lagrangian": {
                "alpha": float(lag.alpha),
                "beta": float(lag.beta),
                "gamma": float(lag.gamma),
                "phi": to_source(lag.phi),
            },
            "alphas": [float(a) for a in alphas],
            "velocity_map": {"qd": to_source(vel[0]), "qdm": to_source(vel[1])},
        }
    else:
        raise ConfigError("/", "transform needs a model section")
    _emit(payload, args.out)
    return EXIT_OK


def _as_quadratic(h: DelayHamiltonian):
    from .model import QuadraticHamiltonian

    expr_h = h.h
    a = ex.evaluate(ex.partial(ex.partial(expr_h, "p"), "p"), ex.random_jet(1, 0))
    b = ex.evaluate(ex.partial(ex.partial(expr_h, "p"), "pm"), ex.random_jet(1, 0))
    c = ex.evaluate(ex.partial(ex.partial(expr_h, "pm"), "pm"), ex.random_jet(1, 0))
    phi = ex.substitute(expr_h, {"p": ex.ZERO, "pm": ex.ZERO})
    quad = QuadraticHamiltonian(a, b, c, phi)
    gap = ex.sub(expr_h, quad.expr())
    if not ex.is_zero(gap, samples=40, tol=1e-9, seed=2).ok:
        raise ConfigError(
            "/hamiltonian/H", "reverse transform needs a quadratic-in-momenta Hamiltonian"
        )
    return quad


def cmd_simulate(cfg: RunConfig, args) -> int:
    if cfg.history is None:
        raise ConfigError("/history", "simulate needs a history section")
    if cfg.horizon is None:
        raise ConfigError("/horizon", "simulate needs a horizon")
    t_end = cfg.t0 + cfg.horizon
    if args.formulation == "lagrangian":
        if cfg.lagrangian is None:
            raise ConfigError("/lagrangian", "lagrangian formulation requested")
        traj = solver.step_elsgolts(cfg.lagrangian, cfg.history, t_end, cfg.steps_per_delay)
        residuals = None
    else:
        ham = _resolved_hamiltonian(cfg)
        traj = solver.step_hamiltonian(ham, cfg.history, t_end, cfg.steps_per_delay)
        residuals = solver.residual_report(traj, ham)
    if args.out:
        solver.write_csv(traj, args.out, residuals)
    else:
        solver.write_csv(traj, sys.stdout, residuals)
    return EXIT_OK


def cmd_noether(cfg: RunConfig, args) -> int:
    ham = _resolved_hamiltonian(cfg)
    traj = None
    if cfg.history is not None and cfg.horizon is not None and not args.skip_drift:
        if float(ham.alphas[0]) != 0.0 and float(ham.alphas[3]) != 0.0:
            traj = solver.step_hamiltonian(
                ham, cfg.history, cfg.t0 + cfg.horizon, cfg.steps_per_delay
            )
    reports = []
    for name, gen, v, w in cfg.generators:
        rep = noether.analyze_generator(
            ham, gen, name, v=v, w=w, traj=traj,
            samples=cfg.samples, tol=cfg.tol, seed=cfg.seed,
        )
        reports.append(
            {
                "name": rep.name,
                "classification": rep.invariance.classification.value,
                "xi_admissible": xi_admissible(gen, seed=cfg.seed),
                "omega": to_source(rep.invariance.omega),
                "V": _maybe(rep.invariance.v),
                "W": _maybe(rep.invariance.w),
                "C": to_source(rep.parts.c),
                "P": to_source(rep.parts.p_quantity),
                "I": _maybe(rep.parts.differential_integral),
                "J": _maybe(rep.parts.difference_integral),
                "identity_ok": rep.identity.ok,
                "notes": rep.notes,
                "drift": {
                    "I": None
                    if rep.drift_differential is None
                    else {
                        "max": rep.drift_differential.max_drift,
                        "t_at_max": rep.drift_differential.t_at_max,
                        "reference": rep.drift_differential.reference,
                    },
                    "J": None
                    if rep.drift_difference is None
                    else {
                        "max": rep.drift_difference.max_drift,
                        "t_at_max": rep.drift_difference.t_at_max,
                        "reference": rep.drift_difference.reference,
                    },
                },
            }
        )
    _emit({"generators": reports}, args.out)
    if any(not r["identity_ok"] for r in reports):
        return EXIT_VERIFY
    return EXIT_OK


def cmd_recurse(cfg: RunConfig, args) -> int:
    if cfg.history is None or cfg.horizon is None:
        raise ConfigError("/", "recurse needs history and horizon")
    c_mid = args.c_mid
    if c_mid is None:
        ham = _resolved_hamiltonian(cfg)
        a1, a2, a3, a4 = (float(a) for a in ham.alphas)
        if a1 == 0 or a1 != a4:
            raise ConfigError("/hamiltonian/alphas", "sum-form recursion needs a1 = a4 != 0")
        ratio = (a2 + a3) / a1
        if abs(ratio - round(ratio)) > 1e-12 or round(ratio) not in (0, 2):
            raise ConfigError(
                "/hamiltonian/alphas",
                "only the middle coefficients 0 and 2 are supported",
            )
        c_mid = int(round(ratio))
    rel = recursion.relation_from_history(cfg.history, c_mid)
    traj = recursion.recurse(rel, cfg.history, cfg.t0 + cfg.horizon, cfg.steps_per_delay)
    if args.out:
        solver.write_csv(traj, args.out)
    else:
        solver.write_csv(traj, sys.stdout)
    return EXIT_OK


def cmd_compare(cfg: RunConfig | None, args) -> int:
    a = solver.read_csv(args.a)
    b = solver.read_csv(args.b)
    report = recursion.compare(a, b)
    payload = {
        name: {"max": stats.max_abs, "l2": stats.l2, "t_at_max": stats.t_at_max}
        for name, stats in report.components.items()
    }
    _emit({"components": payload}, args.out)
    if args.max_diff is not None and report.max_component() > args.max_diff:
        return EXIT_VERIFY
    return EXIT_OK


def cmd_check_identity(cfg: RunConfig, args) -> int:
    checks = []
    rng = np.random.default_rng(cfg.seed)
    if args.classical:
        for k in range(args.pairs):
            coeffs = rng.uniform(-1.5, 1.5, size=6)
            h_expr = (
                ex.const(float(coeffs[0])) * ex.p**2
                + ex.const(float(coeffs[1])) * ex.q**2
                + ex.const(float(coeffs[2])) * ex.p * ex.q
                + ex.const(float(coeffs[3])) * ex.sin(ex.t) * ex.q
            )
            gen = Generator(
                ex.const(float(coeffs[4])) * ex.t,
                ex.const(float(coeffs[5])) * ex.q + ex.sin(ex.t),
                ex.const(float(coeffs[0])) * ex.p,
            )
            res = classical_identity_residual(ClassicalHamiltonian(h_expr), gen)
            chk = ex.is_zero(res, samples=cfg.samples, tol=cfg.tol, seed=cfg.seed + k)
            checks.append({"name": f"classical-identity-{k}", "ok": chk.ok, "worst": chk.worst})
    else:
        ham = _resolved_hamiltonian(cfg)
        for name, gen, _, _ in cfg.generators:
            chk = noether.verify_hamiltonian_identity(
                ham, gen, samples=cfg.samples, tol=cfg.tol, seed=cfg.seed
            )
            checks.append({"name": f"identity-{name}", "ok": chk.ok, "worst": chk.worst})
            rep = noether.variational_derivative_identities(
                ham, gen, samples=cfg.samples, tol=cfg.tol, seed=cfg.seed
            )
            for key, sub_chk in rep.checks.items():
                checks.append(
                    {"name": f"variation-{key}-{name}", "ok": sub_chk.ok, "worst": sub_chk.worst}
                )
    _emit({"checks": checks}, args.out)
    return EXIT_OK if all(c["ok"] for c in checks) else EXIT_VERIFY


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delayham",
        description="Hamiltonian structure, symmetries, and first integrals "
        "for delay differential equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--tol", type=float, help="override the config tolerance")
        p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("transform", help="Legendre transform of the configured model")
    common(p)
    p.add_argument("--alpha1", type=float, default=None, help="free scale of the pairing weights")

    p = sub.add_parser("simulate", help="method-of-steps integration")
    common(p)
    p.add_argument("--model", help="JSON file with the model section (merged into config)")
    p.add_argument("--history", help="JSON file with the history section (merged)")
    p.add_argument("--tau", type=float, help="override tau")
    p.add_argument("--steps-per-delay", type=int, dest="steps_per_delay")
    p.add_argument("--horizon", type=float)
    p.add_argument(
        "--formulation",
        choices=["hamiltonian", "lagrangian"],
        default="hamiltonian",
    )

    p = sub.add_parser("noether", help="invariance analysis and first integrals")
    common(p)
    p.add_argument("--skip-drift", action="store_true")

    p = sub.add_parser("recurse", help="integration-free propagation")
    common(p)
    p.add_argument("--c-mid", type=int, choices=[0, 2], default=None, dest="c_mid")

    p = sub.add_parser("compare", help="compare two trajectory CSV files")
    common(p)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--max-diff", type=float, default=None, dest="max_diff")

    p = sub.add_parser("check-identity", help="off-shell identity suites")
    common(p)
    p.add_argument("--classical", action="store_true")
    p.add_argument("--pairs", type=int, default=10)

    return parser


def _load_json(path: str, pointer: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(pointer, f"file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(pointer, f"invalid JSON: {err}") from None


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        raw: dict = {}
        if args.config:
            raw = _load_json(args.config, "/")
        if getattr(args, "model", None):
            raw.update(_load_json(args.model, "/model"))
        if getattr(args, "history", None):
            hist_doc = _load_json(args.history, "/history")
            raw["history"] = hist_doc.get("history", hist_doc)
        if getattr(args, "tau", None) is not None:
            raw["tau"] = args.tau
        if getattr(args, "steps_per_delay", None) is not None:
            raw["steps_per_delay"] = args.steps_per_delay
        if getattr(args, "horizon", None) is not None:
            raw["horizon"] = args.horizon
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.tol is not None:
            raw["tol"] = args.tol
        cfg = load_config(raw) if (raw or args.command != "compare") else None
    except ConfigError as err:
        print(str(err), file=sys.stderr)
        return EXIT_CONFIG

    handlers = {
        "transform": cmd_transform,
        "simulate": cmd_simulate,
        "noether": cmd_noether,
        "recurse": cmd_recurse,
        "compare": cmd_compare,
        "check-identity": cmd_check_identity,
    }
    try:
        return handlers[args.command](cfg, args)
    except ConfigError as err:
        print(str(err), file=sys.stderr)
        return EXIT_CONFIG
    except (solver.SolverError, recursion.RecursionError_, legendre.LegendreError,
            noether.DriftError, ex.EvalError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except noether.IntegralVerificationError as err:
        print(f"verification failure: {err}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
