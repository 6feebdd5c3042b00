"""Command-line front end: ``densitylab <command> ...``.

Exit codes: 0 success, 1 a checked bound or assertion failed (or I/O
failed), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, List, Optional, Sequence, Union

from . import __version__
from .density import (
    density_profile,
    estimate_limits,
    factorial_array_witnesses,
    finite_partition_bound,
    geometric_schedule,
    linear_domination_check,
    upper_density_checkpoints,
)
from .errors import (
    ConstructionBugError,
    DecisionTimeout,
    DensityLabError,
    InsufficientMembersError,
    ParameterError,
    PermutationIntegrityError,
)
from .genericcase import (
    brute_force_halting,
    decide_from_generic,
    adversary_permutation,
    halting_index_set,
    index_set_test_double,
    inverting_functional,
    oracle_mode,
    permutation_battery,
    triviality_census,
    uniform_family_mode,
)
from .permute import image_set, verify_density_transfer
from .selfcheck import run_selfcheck
from .stochastic import (
    mutual_intersection_experiment,
    nested_construction,
    oblivious_rule,
    select_after_one,
    select_all,
    select_trace,
    thinning_experiment,
)
from .tokens import (
    indexed_library,
    parse_description,
    parse_injection,
    parse_permutation,
    parse_permutation_list,
    parse_set,
    pre_inverting_builder,
)

SEED_ENV = "DENSITYLAB_SEED"


class CheckFailed(Exception):
    """A checked property did not hold; maps to exit code 1."""


class UsageError(Exception):
    """Bad arguments detected after parsing; maps to exit code 2."""


# -- output ------------------------------------------------------------------

def emit_csv(rows: Iterable[dict], path: Union[str, Path, IO[str], None],
             fieldnames: Optional[Sequence[str]] = None) -> None:
    """Write rows with a header and LF line endings, in the given order.

    ``path`` may be a file path, an open text stream, or ``None``/``"-"``
    for stdout.  With no rows the file holds only the header, which then
    needs ``fieldnames``.
    """
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []

    def write(fh):
        w = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        if fieldnames:
            w.writeheader()
        w.writerows(rows)

    if path is None or path == "-":
        write(sys.stdout)
    elif hasattr(path, "write"):
        write(path)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write(fh)


@dataclass
class RunManifest:
    command_line: List[str]
    config_digest: str
    seeds: List[int] = field(default_factory=list)
    horizons: List[int] = field(default_factory=list)
    started: str = ""
    finished: str = ""
    outputs: List[str] = field(default_factory=list)
    version: str = __version__

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def config_digest(args: argparse.Namespace) -> str:
    """SHA-256 over the resolved options, excluding output locations."""
    skip = {"func", "out", "csv"}
    data = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    blob = json.dumps(data, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


class _Output:
    """Routes each command's CSV to stdout, ``--csv`` or ``--out DIR``."""

    def __init__(self, args, argv):
        self.args = args
        self.dir = Path(args.out) if getattr(args, "out", None) else None
        self.csv = getattr(args, "csv", None)
        self.written: List[str] = []
        self.manifest = RunManifest(list(argv), config_digest(args), started=_now())

    def emit(self, rows, name, fieldnames=None):
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            path = self.dir / (self.csv or f"{name}.csv")
        elif self.csv:
            path = Path(self.csv)
        else:
            emit_csv(rows, None, fieldnames)
            return
        emit_csv(rows, path, fieldnames)
        self.written.append(str(path))

    def close(self):
        if not self.written:
            return
        m = self.manifest
        m.finished = _now()
        m.outputs = list(self.written)
        if self.dir is not None:
            target = self.dir / "manifest.json"
        else:
            first = Path(self.written[0])
            target = first.with_name(first.name + ".manifest.json")
        m.write(target)


def _note(msg):
    print(msg, file=sys.stderr)


# -- argument helpers ------------------------------------------------------------

def _fraction(text):
    try:
        if "." in text:
            raise ValueError
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected an exact rational like 11/10, got {text!r}")


def _positive(text):
    try:
        v = int(text.replace("_", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {v}")
    return v


def _natural(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a natural number, got {v}")
    return v


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}")


def _seeds(args, count, single_ok=False):
    """Explicit ``--seeds``; else ``--seed`` (alone when one run is meaningful); else
    ``count`` consecutive seeds from the default."""
    if args.seeds:
        return list(args.seeds)
    if args.seed is not None and single_ok:
        return [args.seed]
    base = args.seed if args.seed is not None else _default_seed()
    return [base + i for i in range(count)]


def _schedule(text):
    """``geometric:<ratio>`` or an explicit comma-separated list of checkpoints."""
    if text.startswith("geometric:"):
        try:
            ratio = Fraction(text.split(":", 1)[1])  # decimal strings are read exactly
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"bad ratio in {text!r}")
        if ratio <= 1:
            raise argparse.ArgumentTypeError("schedule ratio must exceed 1")
        return ratio
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"schedule must be geometric:<ratio> or a list of integers, got {text!r}")


def _checkpoints(schedule, to):
    if isinstance(schedule, Fraction):
        return geometric_schedule(to, schedule)
    return [c for c in schedule if c <= to]


# -- commands ----------------------------------------------------------------------

def cmd_density_profile(args, out):
    s = parse_set(args.set)
    prof = density_profile(s, _checkpoints(args.schedule, args.to), args.tail_window)
    out.manifest.horizons.append(args.to)
    out.emit(prof.rows(), "profile")
    if len(prof.values) >= 2:
        est = estimate_limits(prof)
        _note(f"{s.label}: tail estimates lower={float(est.lower_est):.6f} "
              f"upper={float(est.upper_est):.6f} (finite-horizon estimates)")


def cmd_density_principal(args, out):
    s = parse_set(args.set)
    rows = []
    for n, pd in upper_density_checkpoints(s, args.n):
        v = pd.value
        rows.append({"n": n, "p": pd.horizon, "density_exact_num": v.numerator,
                     "density_exact_den": v.denominator, "density_float": float(v)})
    out.emit(rows, "principal", ["n", "p", "density_exact_num", "density_exact_den", "density_float"])


def cmd_density_domination(args, out):
    s = parse_set(args.set)
    rows = [{"slope": str(r.slope), "horizon": r.horizon,
             "last_crossing": "" if r.last_crossing is None else r.last_crossing,
             "dominated_from": "" if r.dominated_from is None else r.dominated_from}
            for r in linear_domination_check(s, args.slopes, args.to)]
    out.emit(rows, "domination")


def cmd_density_factorial(args, out):
    s = parse_set(args.set)
    rows = [{"n": n, "horizon": pd.horizon, "count": pd.count,
             "density_exact_num": pd.value.numerator, "density_exact_den": pd.value.denominator,
             "density_float": float(pd)}
            for n, pd in factorial_array_witnesses(s, args.n_max)]
    out.emit(rows, "factorial",
             ["n", "horizon", "count", "density_exact_num", "density_exact_den", "density_float"])


def cmd_density_partition(args, out):
    s = parse_set(args.set)
    pb = finite_partition_bound(s, args.m, args.to)
    rows = [{"residue": i, "count": pd.count, "horizon": pd.horizon, "density_float": float(pd)}
            for i, pd in enumerate(pb.residues)]
    out.emit(rows, "partition")


def cmd_permute_check(args, out):
    pi = parse_permutation(args.perm)
    pi.check_roundtrip(args.to)
    out.emit([{"permutation": pi.label, "horizon": args.to, "roundtrip": "ok"}], "roundtrip")


def cmd_permute_transfer(args, out):
    p = parse_injection(args.inj)
    rows = []
    for tok in args.sets.split(";"):
        s = parse_set(tok)
        try:
            rep = verify_density_transfer(p, s, args.to)
        except ConstructionBugError as exc:
            raise CheckFailed(str(exc))
        rows.append({"injection": p.label, "set": s.label, "horizon": rep.horizon,
                     "max_diff_num": rep.max_difference.numerator,
                     "max_diff_den": rep.max_difference.denominator,
                     "worst_margin": rep.worst_margin, "worst_n": rep.worst_n})
    out.emit(rows, "transfer")


def cmd_permute_image(args, out):
    pi, s = parse_permutation(args.perm), parse_set(args.set)
    prof = density_profile(image_set(pi, s), _checkpoints(args.schedule, args.to))
    out.emit(prof.rows(), "image")


def cmd_experiment_thinning(args, out):
    a = parse_set(args.set)
    rows = []
    for seed in _seeds(args, 5, single_ok=True):
        res = thinning_experiment(a, seed, args.to)
        out.manifest.seeds.append(seed)
        for cp in res.checkpoints:
            bias = cp.selection.bias
            rows.append({"seed": seed, "checkpoint": cp.n, "count_a": cp.count_a,
                         "count_ab": cp.count_ab, "selected": cp.selection.selected,
                         "selected_ones": cp.selection.ones,
                         "bias_float": "" if bias is None else float(bias),
                         "factorization": "exact" if cp.factorization_holds else "FAILED"})
        if not all(cp.factorization_holds for cp in res.checkpoints):
            out.emit(rows, "thinning")
            raise CheckFailed(f"seed {seed}: product identity failed")
    out.manifest.horizons.append(args.to)
    out.emit(rows, "thinning")


def cmd_experiment_intersect(args, out):
    seeds = _seeds(args, args.k)
    res = mutual_intersection_experiment(args.k, seeds, args.to)
    out.manifest.seeds.extend(seeds)
    out.manifest.horizons.append(args.to)
    d = res.density
    out.emit([{"k": res.k, "seeds": " ".join(map(str, seeds)), "horizon": d.horizon,
               "count": d.count, "density_float": float(d),
               "target_float": float(res.target), "deviation": res.deviation}], "intersect")


def cmd_experiment_nested(args, out):
    seeds = _seeds(args, args.levels + 1)
    res = nested_construction(seeds, args.to)
    out.manifest.seeds.extend(seeds)
    out.manifest.horizons.append(args.to)
    out.emit(res.profile.rows(), "nested_profile")
    out.emit([{"level": j, "lo": lo, "hi": hi} for j, (lo, hi) in enumerate(res.intervals)],
             "nested_intervals")


def cmd_experiment_select(args, out):
    s = parse_set(args.set)
    if args.rule == "all":
        rule = select_all()
    elif args.rule == "after-one":
        rule = select_after_one()
    elif args.rule.startswith("in:"):
        rule = oblivious_rule(parse_set(args.rule[3:]))
    else:
        raise UsageError("rule must be all, after-one or in:<set>")
    rows = []
    for rep in select_trace(rule, s, geometric_schedule(args.to, 2)):
        bias = rep.bias
        rows.append({"rule": rep.label, "checkpoint": rep.horizon, "selected": rep.selected,
                     "ones": rep.ones, "bias_float": "" if bias is None else float(bias)})
    out.emit(rows, "selection")


CENSUS_FIELDS = ["horizon", "budget", "halting", "diverging", "undecided",
                 "decided_density_num", "decided_density_den"]


def cmd_census(args, out):
    rows = []
    for b in args.budget:
        rows.extend(triviality_census(args.horizon, b).rows())
    out.manifest.horizons.append(args.horizon)
    out.emit(rows, "census", CENSUS_FIELDS)


def cmd_igc_battery(args, out):
    a = parse_set(args.set)
    if args.mode == "uniform":
        report = uniform_family_mode(pre_inverting_builder(a), indexed_library(), a,
                                     args.to, args.budget)
    else:
        perms = parse_permutation_list(args.perms)
        if args.mode == "oracle":
            report = oracle_mode(inverting_functional(a), perms, a, args.to, args.budget)
        else:
            report = permutation_battery(parse_description(args.description, a), a, perms,
                                         args.to, args.budget)
    out.manifest.horizons.append(args.to)
    out.emit(report.rows(), "battery")
    _note(report.caveat)
    if not report.all_consistent:
        raise CheckFailed("a description disagreed with its target set")


def cmd_igc_decide(args, out):
    pi = adversary_permutation()
    psi = index_set_test_double(halting_index_set(args.steps), pi, cost=args.steps + 1)
    es = args.e if args.e else list(range(args.below))
    rows, mismatches = [], 0
    for e in es:
        try:
            d = decide_from_generic(psi, e, args.budgets)
        except DecisionTimeout as exc:
            raise CheckFailed(str(exc))
        truth = brute_force_halting(e, args.steps)
        mismatches += d.bit != truth
        rows.append({"e": e, "bit": d.bit, "k": d.k, "budget": d.budget,
                     "evaluations": d.evaluations, "brute_force": truth})
    out.emit(rows, "decide")
    if mismatches:
        raise CheckFailed(f"{mismatches} decisions disagree with the brute-force oracle")


def cmd_selfcheck(args, out):
    t0 = time.perf_counter()
    results = run_selfcheck()
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        line = f"{status} {r.module}.{r.name} ({r.seconds:.2f}s)"
        print(line + (f": {r.detail}" if r.detail else ""))
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed "
          f"in {time.perf_counter() - t0:.1f}s")
    if failed:
        raise CheckFailed(f"{len(failed)} selfcheck(s) failed")


# -- parser ------------------------------------------------------------------------

def _outputs(p):
    p.add_argument("--csv", help="write the CSV here instead of stdout")
    p.add_argument("--out", help="run directory for CSV outputs and manifest.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="densitylab",
        description="Density experiments on computable sets and permutations.",
        epilog="Options may also come from --config FILE (key=value lines); "
               f"{SEED_ENV} overrides the default seed.")
    parser.add_argument("--version", action="version", version=f"densitylab {__version__}")
    parser.add_argument("--config", help="key=value file supplying option defaults")
    top = parser.add_subparsers(dest="command", required=True)

    dens = top.add_parser("density", help="partial densities and principal functions")
    dsub = dens.add_subparsers(dest="action", required=True)
    p = dsub.add_parser("profile", help="partial densities on a geometric schedule")
    p.add_argument("--set", required=True)
    p.add_argument("--to", type=_positive, required=True)
    p.add_argument("--schedule", type=_schedule, default=Fraction(11, 10),
                   help="geometric:<ratio> (default geometric:1.1) or a list like 2,4,8")
    p.add_argument("--tail-window", type=_fraction, default=Fraction(1, 2))
    _outputs(p)
    p.set_defaults(func=cmd_density_profile)
    p = dsub.add_parser("principal", help="p_S(n) and rho at p_S(n)")
    p.add_argument("--set", required=True)
    p.add_argument("--n", type=_natural, required=True)
    _outputs(p)
    p.set_defaults(func=cmd_density_principal)
    p = dsub.add_parser("domination", help="where p_S(n) <= k*n last holds")
    p.add_argument("--set", required=True)
    p.add_argument("--slopes", type=lambda t: [_fraction(x) for x in t.split(",")], required=True)
    p.add_argument("--to", type=_positive, required=True)
    _outputs(p)
    p.set_defaults(func=cmd_density_domination)
    p = dsub.add_parser("factorial", help="witnesses on the intervals [n!, (n+1)!)")
    p.add_argument("--set", required=True)
    p.add_argument("--n-max", type=_positive, default=10)
    _outputs(p)
    p.set_defaults(func=cmd_density_factorial)
    p = dsub.add_parser("partition", help="member counts per residue class")
    p.add_argument("--set", required=True)
    p.add_argument("--m", type=_positive, required=True)
    p.add_argument("--to", type=_positive, required=True)
    _outputs(p)
    p.set_defaults(func=cmd_density_partition)

    perm = top.add_parser("permute", help="permutations and density transfer")
    psub = perm.add_subparsers(dest="action", required=True)
    p = psub.add_parser("check", help="round-trip a permutation on [0, to)")
    p.add_argument("--perm", required=True)
    p.add_argument("--to", type=_positive, required=True)
    _outputs(p)
    p.set_defaults(func=cmd_permute_check)
    p = psub.add_parser("transfer", help="check the 2/sqrt(n) bound for inj2perm")
    p.add_argument("--inj", required=True)
    p.add_argument("--sets", required=True, help="set tokens separated by ';'")
    p.add_argument("--to", type=_positive, required=True)
    _outputs(p)
    p.set_defaults(func=cmd_permute_transfer)
    p = psub.add_parser("image", help="density profile of pi(S)")
    p.add_argument("--perm", required=True)
    p.add_argument("--set", required=True)
    p.add_argument("--to", type=_positive, required=True)
    p.add_argument("--schedule", type=_schedule, default=Fraction(11, 10))
    _outputs(p)
    p.set_defaults(func=cmd_permute_image)

    exp = top.add_parser("experiment", help="seeded experiments on pseudo-random sets")
    esub = exp.add_subparsers(dest="action", required=True)

    def seeded(q):
        q.add_argument("--seeds", type=_int_list, help="explicit seeds, comma separated")
        q.add_argument("--seed", type=int, help=f"base seed (default: ${SEED_ENV} or 0)")
        _outputs(q)

    p = esub.add_parser("thinning", help="intersect a set with PRNG sets")
    p.add_argument("--set", required=True)
    p.add_argument("--to", type=_positive, default=10 ** 6)
    seeded(p)
    p.set_defaults(func=cmd_experiment_thinning)
    p = esub.add_parser("intersect", help="k-fold intersection of PRNG sets")
    p.add_argument("--k", type=_positive, default=3)
    p.add_argument("--to", type=_positive, default=10 ** 6)
    seeded(p)
    p.set_defaults(func=cmd_experiment_intersect)
    p = esub.add_parser("nested", help="nested shrinking construction")
    p.add_argument("--levels", type=_positive, default=6, help="J; uses J+1 seeds")
    p.add_argument("--to", type=_positive, default=10 ** 6)
    seeded(p)
    p.set_defaults(func=cmd_experiment_nested)
    p = esub.add_parser("select", help="run a monotone selection rule")
    p.add_argument("--rule", default="after-one", help="all | after-one | in:<set>")
    p.add_argument("--set", required=True)
    p.add_argument("--to", type=_positive, default=10 ** 5)
    _outputs(p)
    p.set_defaults(func=cmd_experiment_select)

    p = top.add_parser("census", help="trivial halting / divergence census")
    p.add_argument("--horizon", type=_positive, required=True)
    p.add_argument("--budget", type=lambda t: [_positive(x) for x in t.split(",")], required=True,
                   help="one budget or a comma-separated list")
    _outputs(p)
    p.set_defaults(func=cmd_census)

    igc = top.add_parser("igc", help="generic-case descriptions under permutations")
    isub = igc.add_subparsers(dest="action", required=True)
    p = isub.add_parser("battery", help="check descriptions under a list of permutations")
    p.add_argument("--description", default="total", help="total | never | avoid:<set>")
    p.add_argument("--set", required=True)
    p.add_argument("--perms", default="identity")
    p.add_argument("--mode", choices=("strong", "oracle", "uniform"), default="strong")
    p.add_argument("--to", type=_positive, default=10 ** 4)
    p.add_argument("--budget", type=_positive, default=1000)
    _outputs(p)
    p.set_defaults(func=cmd_igc_battery)
    p = isub.add_parser("decide", help="decide the halting index set via the adversary")
    p.add_argument("--e", type=_int_list, help="program indices (default: 0 .. below-1)")
    p.add_argument("--below", type=_positive, default=50)
    p.add_argument("--budgets", type=_int_list, default=[10, 100, 1000, 10000])
    p.add_argument("--steps", type=_positive, default=256)
    _outputs(p)
    p.set_defaults(func=cmd_igc_decide)

    p = top.add_parser("selfcheck", help="run the invariant suites at small horizons")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def _apply_config(argv: List[str]) -> List[str]:
    """Splice ``--config`` entries in as flags placed before the user's own."""
    rest, path, i = [], None, 0
    while i < len(argv):
        a = argv[i]
        if a == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config needs a file")
            path, i = argv[i + 1], i + 2
            continue
        if a.startswith("--config="):
            path = a.split("=", 1)[1]
        else:
            rest.append(a)
        i += 1
    if path is None:
        return rest
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    extra = []
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key=value")
        extra += [f"--{key.strip().replace('_', '-')}", value.strip()]
    cut = next((k for k, a in enumerate(rest) if a.startswith("-")), len(rest))
    return rest[:cut] + extra + rest[cut:]


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_apply_config(argv))
    except UsageError as exc:
        _note(f"densitylab: error: {exc}")
        return 2
    except SystemExit as exc:  # argparse: usage errors, --help, --version
        return 0 if exc.code in (0, None) else 2
    try:
        out = _Output(args, argv)
        args.func(args, out)
        out.close()
    except (UsageError, ParameterError) as exc:
        _note(f"densitylab: error: {exc}")
        return 2
    except (CheckFailed, ConstructionBugError, PermutationIntegrityError,
            InsufficientMembersError, DecisionTimeout) as exc:
        _note(f"densitylab: check failed: {exc}")
        return 1
    except DensityLabError as exc:
        _note(f"densitylab: {exc}")
        return 1
    except OSError as exc:
        _note(f"densitylab: I/O error: {exc}")
        return 1
    return 0


def main() -> None:
    sys.exit(parse_and_dispatch())
