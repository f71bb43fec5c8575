"""Command-line front end.

Exit codes: 0 success, 1 malformed input or unwritable output, 2 the
parameters are in the wrong existence regime for the command, 3 a numerical
verification failed.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from .criterion import Function, Power, criterion_nprime2, criterion_power, criterion_quadrature
from .params import ParameterError, ProblemParams, RegimeError, classify, derive
from .radial import IntegratorConfig
from .serialize import OutputError, document, dumps_csv, dumps_json, profile_csv, write_text
from .solver import NoCrossing, VerificationError, solve_supercritical, verify_nonexistence
from .spectral import (eigen_condition_tau_lt_minus2, l1_operator, linearized_annulus_eigenvalue,
                       principal_eigenvalue, root_coefficient, weighted_laplacian)

RANGE_TOL = 1e-12

EXIT_OK, EXIT_INPUT, EXIT_REGIME, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_number(text: str):
    """``"3"`` -> int, ``"1/2"`` or ``"1.5"`` -> exact Fraction-backed value, else float.

    Decimal literals are kept exact so that boundary cases such as
    ``p = p_s`` classify without rounding.
    """
    text = text.strip()
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        try:
            x = float(text)
        except ValueError:
            raise UsageError(f"not a number: {text!r}") from None
        if not math.isfinite(x):
            raise UsageError(f"not a finite number: {text!r}")
        return x
    return int(value) if value.denominator == 1 else value


def parse_axis(text: str) -> list:
    """Comma list of numbers or ``start:stop:step``; stop is kept if within 1e-12 of a grid point."""
    if ":" not in text:
        return [parse_number(t) for t in text.split(",") if t.strip()] or _empty(text)
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be start:stop:step, got {text!r}")
    start, stop, step = (parse_number(t) for t in parts)
    if not step > 0 or stop < start:
        raise UsageError(f"range needs step > 0 and stop >= start, got {text!r}")
    count = math.floor((stop - start) / step + RANGE_TOL) + 1
    values = []
    for k in range(count):
        v = start + k * step
        if isinstance(v, Fraction) and v.denominator == 1:
            v = int(v)
        values.append(v)
    return values


def _empty(text):
    raise UsageError(f"empty value list: {text!r}")


def _add_params(sp, axes=False):
    kind = parse_axis if axes else parse_number
    sp.add_argument("--n", type=int, required=True, help="dimension N")
    sp.add_argument("--theta", type=kind, default=[0] if axes else 0, help="weight exponent theta")
    sp.add_argument("--ell", type=kind, default=[0] if axes else 0, help="source weight exponent ell")
    sp.add_argument("--p", type=kind, required=True, help="nonlinearity exponent p")


def _add_integrator(sp):
    sp.add_argument("--rtol", type=float, default=IntegratorConfig.rtol)
    sp.add_argument("--atol", type=float, default=IntegratorConfig.atol)
    sp.add_argument("--rmax", type=float, default=IntegratorConfig.r_max, help="outer radius (radial coordinates)")


def _add_output(sp, formats=("json", "csv")):
    sp.add_argument("--out", default=None, help="output file (default: standard output)")
    sp.add_argument("--format", choices=formats, default=formats[0])


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lane-emden-exterior",
                 description="Existence regimes and radial solutions of -div(|x|^theta grad u) = |x|^ell u^p outside the unit ball.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("classify", help="existence regime and derived exponents")
    _add_params(sp)
    _add_output(sp, ("json",))

    sp = sub.add_parser("solve", help="construct the positive radial solution (p > p_s)")
    _add_params(sp)
    _add_integrator(sp)
    sp.add_argument("--alpha", type=float, default=1.0, help="interior shooting height")
    _add_output(sp)

    sp = sub.add_parser("verify", help="shoot from u(1)=0 and check every trajectory crosses zero")
    _add_params(sp)
    _add_integrator(sp)
    sp.add_argument("--betas", type=parse_axis, default=[0.01, 0.1, 1, 10, 100])
    sp.add_argument("--jobs", type=int, default=1)
    _add_output(sp)

    sp = sub.add_parser("criterion", help="integral test for f(t) = t^p (-ln t)^(-q)")
    _add_params(sp)
    sp.add_argument("--log-exponent", type=float, default=0.0, help="q in the log factor (default 0)")
    sp.add_argument("--delta", type=float, default=1.0)
    _add_output(sp, ("json",))

    sp = sub.add_parser("eigen", help="principal eigenvalue of a radial weighted operator")
    _add_params(sp)
    sp.add_argument("--operator", choices=("l1", "laplacian", "linearized"), default="l1")
    sp.add_argument("--mesh", type=int, default=64, help="cells on the coarsest mesh (>= 64)")
    sp.add_argument("--coefficient", type=float, default=1.0, help="potential coefficient for l1")
    sp.add_argument("--find-root", action="store_true", help="also locate the coefficient with lambda1 = 0")
    sp.add_argument("--annulus", type=parse_axis, default=None, help="a,b for the linearized operator or an annulus Laplacian")
    _add_integrator(sp)
    _add_output(sp)

    sp = sub.add_parser("sweep", help="classify (or verify) over parameter axes",
                        description="Axes take comma lists or start:stop:step ranges; the stop value is "
                                    f"included when it lies within {RANGE_TOL:g} of a grid point.")
    _add_params(sp, axes=True)
    sp.add_argument("--task", choices=("classify", "verify"), default="classify")
    sp.add_argument("--betas", type=parse_axis, default=[0.01, 0.1, 1, 10, 100])
    sp.add_argument("--jobs", type=int, default=1)
    _add_integrator(sp)
    _add_output(sp, ("csv", "json"))
    return ap


def _params(args) -> ProblemParams:
    return ProblemParams(args.n, args.theta, args.ell, args.p)


def _config(args) -> IntegratorConfig:
    return IntegratorConfig(rtol=args.rtol, atol=args.atol, r_max=args.rmax)


def _emit_json(args, command, params, result):
    write_text(dumps_json(document(command, params, result)), args.out)


def cmd_classify(args) -> int:
    params = _params(args)
    regime = classify(params)
    d = derive(params)
    _emit_json(args, "classify", params, {"regime": regime.kind, "reason": regime.reason, "p_s": d.p_s})
    return EXIT_OK


def cmd_solve(args) -> int:
    params = _params(args)
    rep = solve_supercritical(params, _config(args), alpha=args.alpha)
    if args.format == "csv":
        write_text(profile_csv(rep.profile.grid, rep.profile.values, rep.profile.derivs), args.out)
    else:
        _emit_json(args, "solve", params, dict(rep.to_dict(), regime=classify(params).kind))
    return EXIT_OK


def cmd_verify(args) -> int:
    params = _params(args)
    rep = verify_nonexistence(params, args.betas, _config(args), jobs=args.jobs)
    if args.format == "csv":
        rows = [(o.beta, o.kind, o.radius, o.log_radius, o.coordinates, o.energy_drift) for o in rep.outcomes]
        write_text(dumps_csv(["beta", "kind", "radius", "log_radius", "coordinates", "energy_drift"], rows), args.out)
    else:
        _emit_json(args, "verify", params, rep.to_dict())
    return EXIT_OK if rep.all_crossed else EXIT_VERIFY


def cmd_criterion(args) -> int:
    params = _params(args)
    d = derive(params)
    p, q = float(d.p), args.log_exponent
    if float(d.n_prime) == 2:
        if q != 0:
            f = Function(lambda t: t**p * math.log(t) ** (-q), f"t^{p} (ln t)^-{q}")
        else:
            f = Power(p)
        _emit_json(args, "criterion", params, {"nprime2": criterion_nprime2(f)})
        return EXIT_OK
    if not 0 < args.delta < 1 and q != 0:
        raise ParameterError("the log factor needs 0 < delta < 1")
    result = {}
    if q == 0:
        result["closed_form"] = criterion_power(p, d, args.delta)
        f = Power(p)
    else:
        f = Function(lambda t: t**p * (-math.log(t)) ** (-q), f"t^{p} (-ln t)^-{q}")
    result["quadrature"] = criterion_quadrature(f, d, args.delta)
    _emit_json(args, "criterion", params, result)
    return EXIT_OK


def cmd_eigen(args) -> int:
    params = _params(args)
    d = derive(params)
    result = {}
    if args.operator == "l1":
        lam, verdict = eigen_condition_tau_lt_minus2(params, args.mesh, args.coefficient)
        res = principal_eigenvalue(l1_operator(params, args.coefficient), args.mesh)
        result.update(verdict=verdict)
        if args.find_root:
            result["root_coefficient"] = root_coefficient(params, args.mesh)
    elif args.operator == "laplacian":
        domain = (0.0, 1.0) if args.annulus is None else tuple(float(x) for x in args.annulus)
        res = principal_eigenvalue(weighted_laplacian(float(d.n_prime), domain), args.mesh)
    else:
        if args.annulus is None or len(args.annulus) != 2:
            raise ParameterError("the linearized operator needs --annulus a,b")
        profile = solve_supercritical(params, _config(args)).profile
        res = linearized_annulus_eigenvalue(profile, tuple(float(x) for x in args.annulus), args.mesh)
    if args.format == "csv":
        write_text(dumps_csv(["r", "value"], zip(res.mesh, res.eigenfunction)), args.out)
    else:
        result.update(res.to_dict())
        _emit_json(args, "eigen", params, result)
    return EXIT_OK


_SWEEP_CLASSIFY = ["n", "theta", "ell", "p", "n_prime", "tau", "p_s", "p_s_prime", "regime"]
_SWEEP_VERIFY = ["n", "theta", "ell", "p", "n_prime", "tau", "p_s", "regime", "all_crossed", "failures"]


def _sweep_row(task, params, betas, config):
    d = derive(params)
    try:
        regime = classify(params).kind.value
    except ParameterError:
        regime = "Unclassified"
    base = [params.n_dim, params.theta, params.ell, params.p, d.n_prime, d.tau, d.p_s]
    if task == "classify":
        return base + [d.p_s_prime, regime]
    if regime != "NoPositiveSolution" or not float(d.n_prime) > 2:
        return base + [regime, None, None]
    rep = verify_nonexistence(params, betas, config)
    return base + [regime, rep.all_crossed, ";".join(format(b, "g") for b in rep.failures)]


def cmd_sweep(args) -> int:
    grid = [ProblemParams(args.n, th, el, p) for th in args.theta for el in args.ell for p in args.p]
    config = _config(args)
    jobs = max(1, args.jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        # map keeps input order whatever the completion order
        rows = list(pool.map(lambda pp: _sweep_row(args.task, pp, args.betas, config), grid))
    columns = _SWEEP_CLASSIFY if args.task == "classify" else _SWEEP_VERIFY
    if args.format == "csv":
        write_text(dumps_csv(columns, rows), args.out)
    else:
        _emit_json(args, "sweep", None, {"columns": columns, "rows": rows})
    failed = args.task == "verify" and any(row[-2] is False for row in rows)
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "criterion": cmd_criterion,
    "eigen": cmd_eigen,
    "sweep": cmd_sweep,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (VerificationError, NoCrossing) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ParameterError, OutputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
