"""Command-line interface: ``privamp {profile,amplify,verify,mgf,figures}``.

Every command accepts ``--config FILE.json`` whose keys are the long option
names (dashes or underscores); explicit flags override file values.  CSV goes
to stdout unless ``--out`` is given, in which case the effective
configuration is also written next to it as ``<out>.meta.json``.

Exit codes: 0 success, 1 verification failure, 2 invalid configuration,
3 unsupported pairing or a numerically divergent quantity.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from privamp.amplification import (
    Poisson,
    Relation,
    WithoutReplacement,
    WithReplacement,
    amplify,
)
from privamp.errors import AccountingError, BadParams, DivergentIntegrand, UnsupportedPairing
from privamp.figures import build_bundles, format_csv
from privamp.mgf import mgf_from_profiles, renyi_epsilon
from privamp.oracle.checks import load_scenario, run_scenario
from privamp.oracle.suites import SEEDED, SUITES
from privamp.profiles import (
    GroupMode,
    PrivacyProfile,
    calibrate_theta,
    gaussian_profile,
    laplace_profile,
    rr_profile,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3
MECHANISMS = ("laplace", "gaussian", "rr")
SCHEMES = ("poisson", "wor", "wr")


class ConfigError(BadParams):
    """Invalid command-line or config-file value; the message names the field."""


def parse_number(token: str) -> float:
    """Float literal, ``e``, or ``lnX`` / ``ln(X)`` for the natural log of X."""
    t = token.strip().lower()
    if t == "e":
        return math.e
    if t.startswith("ln"):
        arg = t[2:].strip("()")
        return math.log(parse_number(arg))
    return float(t)


def parse_grid(spec: str | list | float, log: bool = False, field: str = "eps") -> list[float]:
    """``start:stop:count`` (linear, or geometric with ``log``), a comma list, or a single value."""
    try:
        if isinstance(spec, (int, float)):
            return [float(spec)]
        if isinstance(spec, list):
            return [parse_number(str(v)) for v in spec]
        if spec.count(":") == 2:
            a, b, c = spec.split(":")
            start, stop, count = parse_number(a), parse_number(b), int(c)
            if count < 1:
                raise ConfigError(f"{field}: grid count must be >= 1")
            if log:
                if not (start > 0 and stop > 0):
                    raise ConfigError(f"{field}: a log grid needs positive endpoints")
                return np.geomspace(start, stop, count).tolist()
            return np.linspace(start, stop, count).tolist()
        return [parse_number(t) for t in spec.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"{field}: cannot parse {spec!r} ({e})") from None


def _eps_grid(args) -> list[float]:
    grid = parse_grid(args.eps, args.log, "eps")
    if not grid:
        raise ConfigError("eps: grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("eps: grid must be strictly increasing")
    return grid


def _split(value, field: str, allowed) -> list[str]:
    items = value if isinstance(value, list) else [v.strip() for v in str(value).split(",") if v.strip()]
    for v in items:
        if v not in allowed:
            raise ConfigError(f"{field}: unknown value {v!r}; choose from {', '.join(allowed)}")
    if not items:
        raise ConfigError(f"{field}: no value given")
    return items


def _make_profile(mech: str, args) -> PrivacyProfile:
    if mech == "rr":
        if args.p is None:
            raise ConfigError("p: required for mechanism rr")
        return rr_profile(args.p)
    if args.theta is None:
        raise ConfigError(f"theta: required for mechanism {mech}")
    return (laplace_profile if mech == "laplace" else gaussian_profile)(args.theta)


def _calibrated(mech: str, delta0: float) -> PrivacyProfile:
    if not 0.0 < delta0 < 1.0:
        raise ConfigError("calibrate_delta0: must lie in (0, 1)")
    if mech == "rr":
        return rr_profile((1.0 + delta0) / 2.0)
    make = laplace_profile if mech == "laplace" else gaussian_profile
    return make(calibrate_theta(make, delta0))


def _fmt(v: float) -> str:
    return f"{v:.15g}"


def _emit(args, text: str, meta: dict) -> None:
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, newline="\n")
        _write_meta(out.with_name(out.name + ".meta.json"), args, meta)
    else:
        sys.stdout.write(text)


def _effective_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}


def _write_meta(path: Path, args, extra: dict) -> None:
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    doc = {"command": args.command, "config": _effective_config(args), "version": version, **extra}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", newline="\n")


# Commands --------------------------------------------------------------------

def cmd_profile(args) -> int:
    mechs = _split(args.mech, "mech", MECHANISMS)
    grid = _eps_grid(args)
    if args.calibrate_delta0 is not None:
        profiles = {m: _calibrated(m, args.calibrate_delta0) for m in mechs}
    else:
        profiles = {m: _make_profile(m, args) for m in mechs}
    header = ["epsilon", "delta"] if len(mechs) == 1 else ["epsilon"] + [f"delta_{m}" for m in mechs]
    rows = [[e] + [profiles[m](e) for m in mechs] for e in grid]
    params = {m: {"theta": p.theta} if hasattr(p, "theta") else {"p": p.p} for m, p in profiles.items()}
    _emit(args, format_csv(header, rows), {"profiles": params})
    return EXIT_OK


def _scheme(name: str, args):
    need = {"poisson": ("gamma",), "wor": ("n", "m"), "wr": ("n", "m")}[name]
    for f in need:
        if getattr(args, f) is None:
            raise ConfigError(f"{f}: required for scheme {name}")
    if name == "poisson":
        return Poisson(args.gamma)
    cls = WithoutReplacement if name == "wor" else WithReplacement
    return cls(args.n, args.m)


def cmd_amplify(args) -> int:
    schemes = _split(args.scheme, "scheme", SCHEMES)
    mechs = _split(args.mech, "mech", MECHANISMS)
    if len(mechs) != 1:
        raise ConfigError("mech: amplify takes exactly one mechanism")
    base = _make_profile(mechs[0], args)
    grid = _eps_grid(args)
    if grid[0] < 0:
        raise ConfigError("eps: amplification needs eps >= 0")
    group = args.group or ("blackbox" if mechs[0] == "rr" else "whitebox")
    try:
        group = GroupMode(group)
    except ValueError:
        raise ConfigError(f"group: unknown mode {args.group!r}") from None
    columns, notes = [], {}
    for name in schemes:
        scheme = _scheme(name, args)
        relation = Relation(args.relation) if args.relation else (
            Relation.REMOVE_ADD if name == "poisson" else Relation.SUBSTITUTE)
        if isinstance(scheme, Poisson) and relation is Relation.SUBSTITUTE and args.n is None:
            raise ConfigError("n: required for poisson under substitution")
        n_ctx = args.n if name != "wor" else None
        eps_out, delta_out, seen = [], [], set()
        best = 1.0
        for e in grid:
            b = amplify(scheme, relation, base, e, group_mode=group, n=n_ctx)
            best = min(best, b.delta_out)
            eps_out.append(b.eps_out)
            delta_out.append(best)
            seen.update(b.notes)
        columns.append((name, eps_out, delta_out))
        kind = "poisson_substitution" if isinstance(scheme, Poisson) and relation is Relation.SUBSTITUTE else "tight"
        notes[name] = {"relation": relation.value, "eta": b.eta, "bound": kind, "notes": sorted(seen)}
    if len(columns) == 1:
        header = ["eps_in", "eps_out", "delta_out"]
    else:
        header = ["eps_in"] + [f"{c}_{name}" for name, _, _ in columns for c in ("eps_out", "delta_out")]
    rows = [[e] + [v for _, eo, do in columns for v in (eo[i], do[i])] for i, e in enumerate(grid)]
    _emit(args, format_csv(header, rows), {"schemes": notes, "group": group.value})
    return EXIT_OK


def _report(name: str, checks, stream) -> bool:
    ok = True
    for c in checks:
        ok &= c.passed
        stream.write(f"{'PASS' if c.passed else 'FAIL'} {name}: {c.label} exact={_fmt(c.exact)} "
                     f"bound={_fmt(c.bound)} gap={_fmt(c.gap)}\n")
    return ok


def cmd_verify(args) -> int:
    if args.scenario:
        sc = load_scenario(args.scenario)
        from privamp.oracle.checks import rows_to_csv
        from privamp.oracle.suites import Check
        rows = run_scenario(sc)
        tight = sc.membership_p is not None
        checks = [Check(f"{name} eps={_fmt(e)}", ex, bd, gap,
                        abs(gap) <= args.tol if tight else gap >= -args.tol)
                  for name, e, ex, bd, gap in rows]
        ok = _report(sc.name, checks, sys.stdout)
        if args.out:
            _emit(args, rows_to_csv(rows), {"passed": ok})
        return EXIT_OK if ok else EXIT_FAIL
    names = list(SUITES) if args.suite == "all" else _split(args.suite, "suite", tuple(SUITES))
    all_ok = True
    for name in names:
        kwargs = {}
        if name in SEEDED:
            if args.trials is not None:
                kwargs["trials"] = args.trials
            if args.seed is not None:
                kwargs["seed"] = args.seed
        res = SUITES[name](**kwargs)
        ok = _report(name, res.checks, sys.stdout)
        sys.stdout.write(f"{'PASS' if ok else 'FAIL'} suite {name}: {len(res.checks)} checks\n")
        all_ok &= ok
    return EXIT_OK if all_ok else EXIT_FAIL


def cmd_mgf(args) -> int:
    mechs = _split(args.mech, "mech", MECHANISMS)
    if len(mechs) != 1:
        raise ConfigError("mech: mgf takes exactly one mechanism")
    profile = _make_profile(mechs[0], args)
    s_values = parse_grid(args.s, False, "s")
    rows = []
    for s in s_values:
        if s < 0:
            raise ConfigError("s: must be >= 0")
        phi = mgf_from_profiles(profile, None, s)
        lam = s + 1.0
        rows.append([s, phi, lam, renyi_epsilon(phi, lam) if s > 0 else math.nan])
    _emit(args, format_csv(["s", "phi", "renyi_lambda", "renyi_eps"], rows), {})
    return EXIT_OK


def cmd_figures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundles = build_bundles(delta0=args.calibrate_delta0, gaussian_theta=args.gaussian_theta,
                            laplace_theta=args.laplace_theta, n=args.n, m=args.m,
                            eps_max=args.eps_max, points=args.points)
    params = {}
    for b in bundles:
        (out / f"{b.name}.csv").write_text(b.to_csv(), newline="\n")
        params[b.name] = {"title": b.title, **b.params}
    _write_meta(out / "figures.meta.json", args, {"bundles": params})
    for b in bundles:
        sys.stdout.write(f"{out / (b.name + '.csv')}\n")
    return EXIT_OK


# Parser ----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_help="write CSV here instead of stdout") -> None:
    p.add_argument("--config", help="JSON file of option values; flags take precedence")
    p.add_argument("--out", help=out_help)


def _mechanism_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mech", default="laplace", help="laplace, gaussian or rr (comma list for profile)")
    p.add_argument("--theta", type=float, help="sensitivity over noise scale (laplace, gaussian)")
    p.add_argument("--p", type=float, help="randomized response bias in [1/2, 1]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privamp", description="Privacy profiles and subsampling amplification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="evaluate privacy profiles on an eps grid")
    _common(p)
    _mechanism_opts(p)
    p.add_argument("--eps", default="0:3:31", help="start:stop:count, comma list, or value (ln2 allowed)")
    p.add_argument("--log", action="store_true", help="geometric spacing for start:stop:count grids")
    p.add_argument("--calibrate-delta0", type=float, help="choose theta/p so every curve has this delta(0)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("amplify", help="amplification bounds for a subsampling scheme")
    _common(p)
    _mechanism_opts(p)
    p.add_argument("--scheme", default="poisson", help="poisson, wor or wr (comma list to compare)")
    p.add_argument("--relation", choices=[r.value for r in Relation],
                   help="neighbouring relation (default: removeadd for poisson, substitute otherwise)")
    p.add_argument("--gamma", type=float, help="Poisson inclusion probability")
    p.add_argument("--n", type=int, help="dataset size")
    p.add_argument("--m", type=int, help="subsample size")
    p.add_argument("--group", help="group profiles for with-replacement: whitebox, blackbox or constant")
    p.add_argument("--eps", default="0:3:31")
    p.add_argument("--log", action="store_true")
    p.set_defaults(func=cmd_amplify)

    p = sub.add_parser("verify", help="run oracle verification suites or a scenario file")
    _common(p, "write the scenario CSV here")
    p.add_argument("--suite", default="all", help=f"one of {', '.join(SUITES)}, a comma list, or all")
    p.add_argument("--scenario", help="JSON scenario file")
    p.add_argument("--trials", type=int, help="trial count for seeded suites")
    p.add_argument("--seed", type=int, help="seed for seeded suites")
    p.add_argument("--tol", type=float, default=1e-10, help="scenario tolerance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("mgf", help="moment generating function of the privacy loss")
    _common(p)
    _mechanism_opts(p)
    p.add_argument("--s", default="0.5,1,2", help="orders s >= 0 (grid syntax as for --eps)")
    p.set_defaults(func=cmd_mgf)

    p = sub.add_parser("figures", help="write the figure CSV bundles into a directory")
    p.add_argument("--config", help="JSON file of option values; flags take precedence")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--calibrate-delta0", type=float, default=0.25)
    p.add_argument("--gaussian-theta", type=float, default=1.0)
    p.add_argument("--laplace-theta", type=float, default=3.0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--eps-max", type=float, default=3.0)
    p.add_argument("--points", type=int, default=61)
    p.set_defaults(func=cmd_figures)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"config: cannot read {args.config}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest for a in subparser._actions}
    clean = {}
    for k, v in data.items():
        key = k.replace("-", "_")
        if key not in dests or key in ("help", "config", "func"):
            raise ConfigError(f"config: unknown field {k!r} for command {args.command}")
        clean[key] = v
    subparser.set_defaults(**clean)
    # Required options may come from the file; re-parse so flags still win.
    for a in subparser._actions:
        if a.dest in clean:
            a.required = False
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except (UnsupportedPairing, DivergentIntegrand) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except AccountingError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
