"""mhsdiv command line: evaluation, divisible sets, criteria, sequences and scans.

Exit codes: 0 success, 1 usage error, 2 budget or precision exhausted,
3 internal inconsistency (two routes disagree, or a theorem check fails).
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

from sympy import primerange

from .cache import SCHEMA_VERSION, NullCache, ResultCache, canonical_key, default_cache_dir, dumps
from .errors import BudgetExceeded, InconsistencyError, NotApplicable, PrecisionUnderflow
from .jsets import UNDETERMINED, Budget, criterion_check, finiteness_verdict
from .mhs import Composition, default_precision, mhs_exact, mhs_padic

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_INCONSISTENT = 0, 1, 2, 3
FORMATS = ("json", "csv", "bfile", "text")
SUITES = ("wolstenholme", "hstar", "halfway", "j12sd", "h1l2p", "h121")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    budget: Budget = field(default_factory=Budget)
    precision: Optional[int] = None
    workers: int = 1
    cache_dir: Optional[Path] = None
    use_cache: bool = True
    fmt: Optional[str] = None

    def __post_init__(self):
        if self.workers < 1:
            raise UsageError("--workers must be positive")
        if self.precision is not None and self.precision < 1:
            raise UsageError("--precision must be positive")
        if self.fmt is not None and self.fmt not in FORMATS:
            raise UsageError(f"unknown format {self.fmt!r}")

    def cache(self) -> ResultCache:
        if not self.use_cache:
            return NullCache()
        return ResultCache(self.cache_dir if self.cache_dir else default_cache_dir())

    def format_for(self, default: str, allowed: tuple[str, ...]) -> str:
        fmt = self.fmt or default
        if fmt not in allowed:
            raise UsageError(f"format {fmt!r} not available here (choose from {', '.join(allowed)})")
        return fmt


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _composition(text: str) -> Composition:
    try:
        return Composition.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _prime(text: str) -> int:
    from sympy import isprime

    p = int(text)
    if not isprime(p):
        raise argparse.ArgumentTypeError(f"{p} is not prime")
    return p


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--format", dest="fmt", choices=FORMATS)
    g.add_argument("--workers", type=_positive, default=1)
    g.add_argument("--cache-dir", type=Path)
    g.add_argument("--no-cache", action="store_true")
    g.add_argument("--max-level", type=_positive, default=Budget.max_level)
    g.add_argument("--max-index", type=_positive, default=Budget.max_index)
    g.add_argument("--max-nodes", type=_positive, default=Budget.max_nodes)
    g.add_argument("--max-exact-n", type=_positive, default=Budget.max_exact_n)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog="mhsdiv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", parents=[common], help="H(s;n) exactly or in Q_p")
    p.add_argument("s", type=_composition)
    p.add_argument("n", type=int)
    p.add_argument("--prime", type=_prime)
    p.add_argument("--precision", type=_positive)

    p = sub.add_parser("jset", parents=[common], help="the p-divisible set J(s|p)")
    p.add_argument("s", type=_composition)
    p.add_argument("p", type=_prime)

    p = sub.add_parser("criterion", parents=[common], help="the finiteness criterion on one level")
    p.add_argument("s", type=_composition)
    p.add_argument("p", type=_prime)
    p.add_argument("tau", type=_positive)

    p = sub.add_parser("reserved", parents=[common], help="reserved polynomials RJ(s)")
    p.add_argument("s", type=_composition)
    p.add_argument("--prime", type=_prime, help="also evaluate at this prime")

    p = sub.add_parser("density", parents=[common], help="share of primes with J = RJ")
    p.add_argument("s", type=_composition)
    p.add_argument("X", type=_positive)
    p.add_argument("--mode", choices=("levels", "full"), default="levels")
    p.add_argument("--levels", type=_positive, default=1)

    p = sub.add_parser("seq", parents=[common], help="the 2-adic track of H(s,1;n)")
    p.add_argument("s", type=_positive)
    p.add_argument("--tmax", type=int, default=21)
    p.add_argument("--which", choices=("n", "w"), default="n")
    p.add_argument("--method", choices=("auto", "recursion", "scan"), default="auto")

    p = sub.add_parser("congruence", parents=[common], help="run a congruence suite")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--pmin", type=int, default=3)
    p.add_argument("--pmax", type=int, default=100)
    p.add_argument("--smax", type=_positive, default=4)
    p.add_argument("--lmax", type=_positive, default=3)
    p.add_argument("--nmax", type=_positive, default=3)

    p = sub.add_parser("simulate", parents=[common], help="critical branching heuristic")
    p.add_argument("p", type=_prime)
    p.add_argument("G", type=_positive)
    p.add_argument("N", type=_positive)
    p.add_argument("--seed", type=int, default=20240601)
    return parser


def config_from_args(args) -> RunConfig:
    budget = Budget(args.max_level, args.max_index, args.max_nodes, args.max_exact_n)
    return RunConfig(budget=budget, precision=getattr(args, "precision", None),
                     workers=args.workers, cache_dir=args.cache_dir,
                     use_cache=not args.no_cache, fmt=args.fmt)


# ---------------------------------------------------------------- commands


def _budget_key(cfg: RunConfig) -> dict:
    return asdict(cfg.budget)


def cmd_eval(args, cfg: RunConfig) -> tuple[str, int]:
    s, n = args.s, args.n
    if n < 0:
        raise UsageError("n must be >= 0")
    fmt = cfg.format_for("text", ("text", "json"))
    if args.prime is None:
        value = mhs_exact(s, n, max_exact_n=cfg.budget.max_exact_n)
        payload = {"composition": list(s.parts), "n": n, "value": str(value)}
        return (str(value) if fmt == "text" else dumps(payload)), EXIT_OK
    k = cfg.precision or default_precision(s)
    x = mhs_padic(s, n, args.prime, k)
    if x.is_zero:
        payload = {"composition": list(s.parts), "n": n, "prime": args.prime, "digits": k,
                   "valuation": None, "unit": 0}
        text = f"0 (mod {args.prime}^{k})"
    else:
        payload = {"composition": list(s.parts), "n": n, "prime": args.prime, "digits": k,
                   "valuation": x.valuation, "unit": x.unit}
        text = f"v={x.valuation} unit={x.unit} (mod {args.prime}^{x.precision})"
    return (text if fmt == "text" else dumps(payload)), EXIT_OK


def jset_payload(s: Composition, p: int, cfg: RunConfig) -> dict:
    key = canonical_key("jset", composition=list(s.parts), prime=p, budget=_budget_key(cfg),
                        version=SCHEMA_VERSION)

    def compute():
        report = finiteness_verdict(s, p, cfg.budget)
        d = report.to_dict()
        if report.verdict == UNDETERMINED and report.certificate.get("see") == "seq":
            d["certificate"]["hint"] = f"mhsdiv seq {s.parts[0]} --tmax 21"
        d["schema_version"] = SCHEMA_VERSION
        return d

    value, _ = cfg.cache().fetch(key, compute)
    return value


def cmd_jset(args, cfg: RunConfig) -> tuple[str, int]:
    fmt = cfg.format_for("json", ("json", "text"))
    d = jset_payload(args.s, args.p, cfg)
    code = EXIT_OK
    if d["verdict"] == UNDETERMINED and "exhausted" in d["certificate"].get("reason", ""):
        code = EXIT_BUDGET
    if fmt == "json":
        return dumps(d), code
    elements = ", ".join(map(str, d["elements"]))
    lines = [f"J({args.s}|{args.p}) = {{{elements}}}", f"verdict: {d['verdict']}"]
    if "hint" in d["certificate"]:
        lines.append(f"see: {d['certificate']['hint']}")
    return "\n".join(lines), code


def cmd_criterion(args, cfg: RunConfig) -> tuple[str, int]:
    fmt = cfg.format_for("json", ("json", "text"))
    key = canonical_key("criterion", composition=list(args.s.parts), prime=args.p, tau=args.tau,
                        budget=_budget_key(cfg), version=SCHEMA_VERSION)
    d, _ = cfg.cache().fetch(
        key, lambda: criterion_check(args.s, args.p, args.tau, cfg.budget, cfg.precision).to_dict())
    if fmt == "json":
        return dumps(d), EXIT_OK
    rel = ">" if d["passes"] else "<="
    verdict = "passes" if d["passes"] else "fails"
    return f"{verdict} (f={d['f']} {rel} {d['threshold']}, witness n={d['witness']})", EXIT_OK


def cmd_reserved(args, cfg: RunConfig) -> tuple[str, int]:
    from .reserved import reserved_set

    fmt = cfg.format_for("json", ("json", "text"))
    rs = reserved_set(args.s)
    polys = rs.to_strings()
    if fmt == "text":
        out = "{" + ", ".join(polys) + "}"
        if args.prime:
            out += f"\nRJ({args.s};{args.prime}) = {rs.values(args.prime)}"
        return out, EXIT_OK
    if args.prime is None:
        return dumps(polys), EXIT_OK
    return dumps({"polynomials": polys, "case": rs.case, "extrapolated": rs.extrapolated,
                  "values": rs.values(args.prime), "prime": args.prime}), EXIT_OK


def cmd_density(args, cfg: RunConfig) -> tuple[str, int]:
    from .congruences import density_scan

    fmt = cfg.format_for("json", ("json", "csv", "text"))
    key = canonical_key("density", composition=list(args.s.parts), X=args.X, mode=args.mode,
                        levels=args.levels, budget=_budget_key(cfg), version=SCHEMA_VERSION)
    d, _ = cfg.cache().fetch(key, lambda: density_scan(
        args.s, args.X, args.mode, args.levels, cfg.budget, cfg.workers).to_dict())
    if fmt == "json":
        return dumps(d), EXIT_OK
    if fmt == "text":
        return (f"{d['reserved_count']}/{d['prime_count']} = {d['density_float']:.4f} "
                f"({d['undetermined_count']} undetermined)"), EXIT_OK
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "match", "J", "RJ"])
    for p, e in d["ledger"].items():
        w.writerow([p, e["match"], " ".join(map(str, e["J"])), " ".join(map(str, e["RJ"]))])
    return buf.getvalue().rstrip("\n"), EXIT_OK


def cmd_seq(args, cfg: RunConfig) -> tuple[str, int]:
    from .dyadic import track_dyadic

    if args.tmax < 2:
        raise UsageError("--tmax must be >= 2")
    fmt = cfg.format_for("bfile", ("bfile", "csv", "json", "text"))
    key = canonical_key("seq", s=args.s, tmax=args.tmax, method=args.method,
                        version=SCHEMA_VERSION)

    def compute():
        track = track_dyadic(args.s, args.tmax, args.method)
        return {"s": args.s, "method": track.method, "rows": track.to_rows(),
                "schema_version": SCHEMA_VERSION}

    d, _ = cfg.cache().fetch(key, compute)
    rows = d["rows"]
    if fmt == "json":
        return dumps(d), EXIT_OK
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "n", "w", "r", "case"])
        for r in rows:
            w.writerow([r["t"], r["n"], "" if r["w"] is None else r["w"], r["r"], r["case"] or ""])
        return buf.getvalue().rstrip("\n"), EXIT_OK
    if fmt == "text":
        return ", ".join(str(r[args.which]) for r in rows), EXIT_OK
    # the last row is n_{tmax+1}; its w is only a lower-level bound, so w files stop before it
    use = rows if args.which == "n" else rows[:-1]
    return "\n".join(f"{r['t']} {r[args.which]}" for r in use), EXIT_OK


def _suite_records(args) -> list[dict]:
    from . import congruences as C

    out = []
    primes = list(primerange(max(args.pmin, 2), args.pmax + 1))
    for p in primes:
        if args.suite == "wolstenholme":
            recs = [C.wolstenholme_check(s, l, p)
                    for s in range(1, args.smax + 1) for l in range(1, args.lmax + 1)]
        elif args.suite == "hstar":
            recs = [C.hstar_check(s, l, p, n) for s in range(1, args.smax + 1)
                    for l in range(1, args.lmax + 1) for n in range(1, args.nmax + 1)]
        elif args.suite == "halfway":
            if p < 3:
                continue
            recs = [C.halfway_classify(s, p) for s in range(1, args.smax + 1)]
        elif args.suite == "j12sd":
            recs = [C.j12sd_membership(s, l, p)
                    for s in range(1, args.smax + 1) for l in range(1, args.lmax + 1)]
        elif args.suite == "h1l2p":
            recs = [C.h1l_2p_congruences(l, p) for l in range(1, args.lmax + 1)]
        else:
            if p < 7:
                continue
            ok = C.h121_2p_check(p)
            out.append({"name": "h121_2p", "params": {"p": p},
                        "status": C.HOLDS if ok else C.FAILS})
            continue
        out.extend(_record_dict(r) for r in recs)
    return out


def _record_dict(r) -> dict:
    d = r.to_dict()
    if "name" not in d:
        d = {"name": "halfway", "params": {"s": d.pop("s"), "p": d.pop("p")}, **d}
    if isinstance(d.get("irregular_link"), tuple):
        d["irregular_link"] = list(d["irregular_link"])
    return d


def cmd_congruence(args, cfg: RunConfig) -> tuple[str, int]:
    from .congruences import FAILS, HOLDS

    fmt = cfg.format_for("json", ("json", "csv", "text"))
    records = _suite_records(args)
    failures = [r for r in records if r["status"] == FAILS]
    summary = {"suite": args.suite, "pmin": args.pmin, "pmax": args.pmax,
               "checked": sum(r["status"] == HOLDS for r in records) + len(failures),
               "holds": sum(r["status"] == HOLDS for r in records),
               "failures": len(failures),
               "not_applicable": sum(r["status"] not in (HOLDS, FAILS) for r in records)}
    code = EXIT_INCONSISTENT if failures else EXIT_OK
    if fmt == "json":
        return dumps({"summary": summary, "records": records}), code
    if fmt == "text":
        lines = [f"{summary['suite']}: {summary['holds']} hold, {summary['failures']} fail, "
                 f"{summary['not_applicable']} not applicable"]
        lines += [f"FAIL {r['name']} {r['params']}" for r in failures]
        return "\n".join(lines), code
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "params", "status"])
    for r in records:
        w.writerow([r["name"], " ".join(f"{k}={v}" for k, v in sorted(r["params"].items())),
                    r["status"]])
    return buf.getvalue().rstrip("\n"), code


def cmd_simulate(args, cfg: RunConfig) -> tuple[str, int]:
    from .dyadic import branching_simulation

    fmt = cfg.format_for("json", ("json", "csv"))
    key = canonical_key("simulate", p=args.p, G=args.G, N=args.N, seed=args.seed,
                        version=SCHEMA_VERSION)
    d, _ = cfg.cache().fetch(key, lambda: branching_simulation(
        args.p, args.G, args.N, args.seed, cfg.workers).summary())
    if fmt == "json":
        return dumps(d), EXIT_OK
    rows = ["generation,extinct_fraction"]
    rows += [f"{g},{f}" for g, f in sorted(d["extinct_fraction"].items(), key=lambda kv: int(kv[0]))]
    return "\n".join(rows), EXIT_OK


COMMANDS: dict[str, Callable] = {
    "eval": cmd_eval, "jset": cmd_jset, "criterion": cmd_criterion, "reserved": cmd_reserved,
    "density": cmd_density, "seq": cmd_seq, "congruence": cmd_congruence,
    "simulate": cmd_simulate,
}


def run(argv: list[str] | None = None) -> tuple[str, str, int]:
    """(stdout, stderr, exit code) for one invocation."""
    from .reserved import NoReservedSet

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return "", "", int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        out, code = COMMANDS[args.command](args, cfg)
        return out + "\n", "", code
    except (UsageError, NotApplicable, NoReservedSet, ValueError) as exc:
        return "", f"mhsdiv: {exc}\n", EXIT_USAGE
    except (BudgetExceeded, PrecisionUnderflow) as exc:
        return "", f"mhsdiv: budget exhausted: {exc}\n", EXIT_BUDGET
    except InconsistencyError as exc:
        return "", f"mhsdiv: inconsistency: {exc}\n", EXIT_INCONSISTENT


def main(argv: list[str] | None = None) -> int:
    out, err, code = run(argv)
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code


if __name__ == "__main__":
    sys.exit(main())
