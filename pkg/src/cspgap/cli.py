"""Command-line driver: predicate certification, spectra, instance
generation, solving, brute-force oracle, and batch gap experiments.

Exit codes are a stable contract:
  0 ok, 1 infeasible profile, 2 degenerate solve, 3 bad arguments,
  4 partial experiment failure, 5 capacity exceeded.

All emitted JSON/CSV is canonical (sorted keys, "p/q" rationals, floats at
12 significant digits, no timestamps), so identical invocations produce
byte-identical files.
"""

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .csp import Assignment, CspInstance, gen_planted, gen_uniform, value
from .errors import (
    CapacityError,
    CspGapError,
    DegenerateProfileError,
    InfeasibleBiasError,
    IntegralityError,
    InvalidRequestError,
)
from .fourier import PredicateSet, low_degree_report, scan_degree3_support, wht_spectrum
from .oracle import brute_max_csp
from .predicates import (
    BiasProfile,
    MixtureDistribution,
    build_mixture,
    check_pairwise_independence,
    search_bias_profiles,
    test_moments,
)
from .rational import format_fraction, parse_fraction
from .solver import RoundingConfig, bilin_two_round

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_DEGENERATE = 2
EXIT_BAD_ARGS = 3
EXIT_PARTIAL = 4
EXIT_CAPACITY = 5


class CliArgumentError(CspGapError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliArgumentError(message)


def fmt_float(x):
    return format(float(x), ".12g")


def _write_json(doc, path):
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _master_seed(args):
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("SEED")
    return int(env) if env else 0


def _parse_rho(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise CliArgumentError("expected three comma-separated rationals for --rho")
    return tuple(parse_fraction(p) for p in parts)


def _parse_positions(text, k, seed):
    if text == "sweep":
        from itertools import combinations

        if k <= 8:
            return list(combinations(range(k), 3))
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xBEEF)))
        triples = set()
        while len(triples) < 20:
            triples.add(tuple(sorted(int(v) for v in rng.choice(k, size=3, replace=False))))
        return sorted(triples)
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3:
        raise CliArgumentError("positions must be three comma-separated indices or 'sweep'")
    return [tuple(parts)]


def _predicate_from_args(args):
    if getattr(args, "spec", None):
        with open(args.spec) as fh:
            doc = json.load(fh)
        mixture = MixtureDistribution.from_json_dict(doc)
        return PredicateSet.from_mixture(mixture), mixture
    if getattr(args, "rho", None):
        profile = BiasProfile(args.k, _parse_rho(args.rho))
        mixture = build_mixture(profile)
        return PredicateSet.from_mixture(mixture), mixture
    if getattr(args, "slices", None):
        slices = tuple(int(s) for s in args.slices.split(","))
        return PredicateSet(args.k, slices), None
    raise CliArgumentError("need --rho, --slices, or --spec to define a predicate")


# ---------------------------------------------------------------------------
# predicate
# ---------------------------------------------------------------------------


def _predicate_doc(mixture):
    predicate = PredicateSet.from_mixture(mixture)
    report = check_pairwise_independence(mixture)
    moments = test_moments(mixture)
    lo, hi, per_slice = scan_degree3_support(predicate)
    doc = mixture.to_json_dict()
    doc.update(
        {
            "cardinality": predicate.cardinality,
            "baseline": format_fraction(predicate.baseline),
            "pairwise_independent": report.pairwise_independent,
            "balanced": report.balanced,
            "bias": format_fraction(report.bias),
            "alpha": format_fraction(moments.alpha),
            "min_p3_on_support": format_fraction(lo),
            "max_p3_on_support": format_fraction(hi),
            "p3_per_slice": {str(m): format_fraction(v) for m, v in per_slice.items()},
        }
    )
    return doc


def cmd_predicate(args):
    if args.search:
        profiles = search_bias_profiles(args.k)
        if not profiles:
            print("no feasible profile at k=%d" % args.k)
            return EXIT_INFEASIBLE
        print("found %d profile(s) at k=%d:" % (len(profiles), args.k))
        for p in profiles:
            psi = build_mixture(p).weights
            print(
                "  rho=(%s)  slices=%s  psi=(%s)"
                % (
                    ", ".join(format_fraction(r) for r in p.rho),
                    list(p.slice_weights()),
                    ", ".join(format_fraction(w) for w in psi),
                )
            )
        mixture = build_mixture(profiles[0])
    else:
        if not args.rho:
            raise CliArgumentError("need --rho or --search")
        mixture = build_mixture(BiasProfile(args.k, _parse_rho(args.rho)))

    doc = _predicate_doc(mixture)
    print("k=%d slices=%s" % (doc["k"], doc["slices"]))
    print("psi = (%s)" % ", ".join(doc["psi"]))
    print(
        "pairwise independent: %s (balanced: %s, bias %s)"
        % (doc["pairwise_independent"], doc["balanced"], doc["bias"])
    )
    print("|C| = %d, baseline |C|/2^k = %s = %s" % (
        doc["cardinality"], doc["baseline"], fmt_float(parse_fraction(doc["baseline"]))))
    print("alpha = %s = %s" % (doc["alpha"], fmt_float(parse_fraction(doc["alpha"]))))
    print(
        "min P3 over support = %s = %s"
        % (doc["min_p3_on_support"], fmt_float(parse_fraction(doc["min_p3_on_support"])))
    )
    if args.out:
        _write_json(doc, args.out)
        print("wrote %s" % args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------


def cmd_spectrum(args):
    predicate, _ = _predicate_from_args(args)
    if args.min_p3:
        lo, _, _ = scan_degree3_support(predicate)
        print(fmt_float(lo))
        return EXIT_OK
    if args.dump:
        spectrum = wht_spectrum(predicate)
        with open(args.dump, "w", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["subset_bitmask", "degree", "coefficient"])
            for mask, degree, coef in spectrum.nonzero_items():
                writer.writerow([mask, degree, format_fraction(coef)])
        print("wrote %s" % args.dump)
        return EXIT_OK
    rep = low_degree_report(predicate)
    print("constant = %s" % format_fraction(rep.constant))
    print("max |deg1| = %s" % format_fraction(rep.deg1_max_abs))
    print("max |deg2| = %s" % format_fraction(rep.deg2_max_abs))
    print(
        "deg3 on support: min %s  max %s"
        % (format_fraction(rep.deg3_min_on_support), format_fraction(rep.deg3_max_on_support))
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# instance gen
# ---------------------------------------------------------------------------


def cmd_instance_gen(args):
    predicate, mixture = _predicate_from_args(args)
    seed = _master_seed(args)
    if args.regime == "planted":
        source = mixture if mixture is not None else predicate
        inst, planted = gen_planted(source, args.n, args.m, args.eps, seed)
        if args.planted_out:
            _write_json({"assignment": list(planted.values)}, args.planted_out)
    else:
        inst = gen_uniform(predicate, args.n, args.m, seed)
    inst.dump_json(args.out)
    print("wrote %s (%d constraints over %d variables)" % (args.out, inst.m, inst.n))
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve / oracle
# ---------------------------------------------------------------------------


def _result_doc(inst, result, config, seed):
    return {
        "config": {
            "truncation": None if config.truncation is None else fmt_float(config.truncation),
            "repetitions": config.repetitions,
            "positions": list(result.positions),
            "seed": seed,
        },
        "degenerate": result.degenerate,
        "selected": result.selected,
        "stage_values": {
            "relaxation_round1": None
            if result.relaxation_round1 is None
            else fmt_float(result.relaxation_round1),
            "rounded_bilinear": None
            if result.rounded_bilinear is None
            else format_fraction(result.rounded_bilinear),
            "relaxation_round2": None
            if result.relaxation_round2 is None
            else fmt_float(result.relaxation_round2),
            "rounded_trilinear": None
            if result.rounded_trilinear is None
            else format_fraction(result.rounded_trilinear),
        },
        "candidates": {k: format_fraction(v) for k, v in sorted(result.candidates.items())},
        "assignment": list(result.assignment.values),
        "value": format_fraction(result.final_value),
        "baseline": format_fraction(result.baseline),
        "advantage": format_fraction(result.advantage),
    }


def cmd_solve(args):
    inst = CspInstance.load_json(args.instance)
    seed = _master_seed(args)
    config = RoundingConfig(truncation=args.truncation, repetitions=args.repetitions, seed=seed)
    best = None
    for positions in _parse_positions(args.positions, inst.k, seed):
        result = bilin_two_round(inst, positions=positions, config=config, collapse_rule=args.collapse)
        if best is None or (result.final_value, result.assignment.lex_key()) > (
            best.final_value,
            best.assignment.lex_key(),
        ):
            best = result
    doc = _result_doc(inst, best, config, seed)
    if args.out:
        _write_json(doc, args.out)
    print(
        "value %s (baseline %s, advantage %s)%s"
        % (
            doc["value"],
            doc["baseline"],
            doc["advantage"],
            " [degenerate]" if best.degenerate else "",
        )
    )
    return EXIT_DEGENERATE if best.degenerate else EXIT_OK


def cmd_oracle(args):
    inst = CspInstance.load_json(args.instance)
    report = brute_max_csp(inst, ceiling=args.ceiling)
    doc = {
        "optimum": format_fraction(report.optimum),
        "assignment": list(report.assignment.values),
        "evaluations": report.evaluations,
    }
    if args.out:
        _write_json(doc, args.out)
    print("optimum %s over %d assignments" % (doc["optimum"], doc["evaluations"]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Validated batch-experiment parameters."""

    k: int
    rho: tuple
    n: int
    m: int
    eps: float
    seeds: tuple
    repetitions: int = 64
    truncation: float = None
    positions: tuple = (0, 1, 2)
    collapse: str = "first_copy"
    oracle_limit: int = 20
    master_seed: int = 0

    def validate(self):
        profile = BiasProfile(self.k, tuple(self.rho))
        mixture = build_mixture(profile)
        if self.n < self.k:
            raise InvalidRequestError("n must be >= k")
        if self.m < 1:
            raise InvalidRequestError("need at least one constraint")
        if not 0 <= self.eps < 1:
            raise InvalidRequestError("eps must lie in [0, 1)")
        if not self.seeds:
            raise InvalidRequestError("need at least one seed")
        RoundingConfig(self.truncation, self.repetitions, 0)
        if len(set(self.positions)) != 3 or any(not 0 <= p < self.k for p in self.positions):
            raise InvalidRequestError("positions must be three distinct indices in [0, k)")
        return mixture

    def to_json_dict(self):
        return {
            "k": self.k,
            "rho": [format_fraction(r) for r in self.rho],
            "n": self.n,
            "m": self.m,
            "eps": fmt_float(self.eps),
            "seeds": list(self.seeds),
            "repetitions": self.repetitions,
            "truncation": None if self.truncation is None else fmt_float(self.truncation),
            "positions": list(self.positions),
            "collapse": self.collapse,
            "oracle_limit": self.oracle_limit,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, doc):
        seeds = doc.get("seeds", [0])
        if isinstance(seeds, dict):
            seeds = list(range(int(seeds.get("base", 0)), int(seeds.get("base", 0)) + int(seeds["count"])))
        return cls(
            k=int(doc["k"]),
            rho=tuple(parse_fraction(r) for r in doc["rho"]),
            n=int(doc["n"]),
            m=int(doc["m"]),
            eps=float(doc.get("eps", 0.0)),
            seeds=tuple(int(s) for s in seeds),
            repetitions=int(doc.get("repetitions", 64)),
            truncation=None if doc.get("truncation") is None else float(doc["truncation"]),
            positions=tuple(doc.get("positions", (0, 1, 2))),
            collapse=doc.get("collapse", "first_copy"),
            oracle_limit=int(doc.get("oracle_limit", 20)),
            master_seed=int(doc.get("master_seed", 0)),
        )


@dataclass
class GapReport:
    """Per-seed rows plus aggregates for the two-regime comparison."""

    config: ExperimentConfig
    rows: list = field(default_factory=list)

    def aggregates(self):
        out = {}
        by_regime = {}
        for row in self.rows:
            if row.get("error"):
                continue
            by_regime.setdefault(row["regime"], []).append(float(parse_fraction(row["advantage"])))
        for regime, adv in sorted(by_regime.items()):
            arr = np.array(adv)
            out[regime] = {
                "count": int(arr.size),
                "mean_advantage": fmt_float(arr.mean()),
                "std_advantage": fmt_float(arr.std(ddof=1)) if arr.size > 1 else fmt_float(0.0),
                "min_advantage": fmt_float(arr.min()),
                "max_advantage": fmt_float(arr.max()),
            }
        if "planted" in by_regime and "uniform" in by_regime:
            p = np.array(by_regime["planted"])
            u = np.array(by_regime["uniform"])
            if p.size > 1 and u.size > 1:
                pooled = math.sqrt(p.var(ddof=1) / p.size + u.var(ddof=1) / u.size)
                diff = float(p.mean() - u.mean())
                out["separation"] = {
                    "difference": fmt_float(diff),
                    "pooled_se": fmt_float(pooled),
                    "z": fmt_float(diff / pooled) if pooled > 0 else None,
                }
        return out

    def to_json_dict(self):
        return {
            "config": self.config.to_json_dict(),
            "rows": self.rows,
            "aggregates": self.aggregates(),
        }

    CSV_COLUMNS = [
        "regime",
        "seed",
        "oracle_value",
        "solver_value",
        "advantage",
        "relaxation_round1",
        "rounded_bilinear",
        "relaxation_round2",
        "rounded_trilinear",
        "degenerate",
        "selected",
        "error",
    ]

    def write_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({col: ("" if row.get(col) is None else row.get(col)) for col in self.CSV_COLUMNS})


def _experiment_row(config, mixture, regime, seed):
    ss = np.random.SeedSequence((config.master_seed, seed))
    gen_seed, solve_seed = (int(s) for s in ss.generate_state(2))
    predicate = PredicateSet.from_mixture(mixture)
    row = {"regime": regime, "seed": seed, "error": None}
    try:
        if regime == "planted":
            inst, _ = gen_planted(mixture, config.n, config.m, config.eps, gen_seed)
        else:
            inst = gen_uniform(predicate, config.n, config.m, gen_seed)
        rounding = RoundingConfig(config.truncation, config.repetitions, solve_seed)
        result = bilin_two_round(
            inst, positions=config.positions, config=rounding, collapse_rule=config.collapse
        )
        oracle_value = None
        if config.n <= config.oracle_limit:
            oracle_value = format_fraction(brute_max_csp(inst).optimum)
        row.update(
            {
                "oracle_value": oracle_value,
                "solver_value": format_fraction(result.final_value),
                "advantage": format_fraction(result.advantage),
                "relaxation_round1": None
                if result.relaxation_round1 is None
                else fmt_float(result.relaxation_round1),
                "rounded_bilinear": None
                if result.rounded_bilinear is None
                else format_fraction(result.rounded_bilinear),
                "relaxation_round2": None
                if result.relaxation_round2 is None
                else fmt_float(result.relaxation_round2),
                "rounded_trilinear": None
                if result.rounded_trilinear is None
                else format_fraction(result.rounded_trilinear),
                "degenerate": result.degenerate,
                "selected": result.selected,
            }
        )
    except CspGapError as exc:
        row["error"] = "%s: %s" % (type(exc).__name__, exc)
    return row


def run_experiment(config: ExperimentConfig):
    mixture = config.validate()
    report = GapReport(config)
    for seed in config.seeds:
        for regime in ("planted", "uniform"):
            report.rows.append(_experiment_row(config, mixture, regime, seed))
    report.rows.sort(key=lambda r: (r["regime"], r["seed"]))
    return report


def cmd_experiment(args):
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    for key, attr in (
        ("k", "k"),
        ("n", "n"),
        ("m", "m"),
        ("eps", "eps"),
        ("repetitions", "repetitions"),
        ("master_seed", "seed"),
    ):
        val = getattr(args, attr, None)
        if val is not None:
            doc[key] = val
    if args.rho:
        doc["rho"] = [format_fraction(r) for r in _parse_rho(args.rho)]
    if args.seeds:
        doc["seeds"] = [int(s) for s in args.seeds.split(",")]
    if args.oracle_limit is not None:
        doc["oracle_limit"] = args.oracle_limit
    config = ExperimentConfig.from_dict(doc)
    report = run_experiment(config)
    if args.out_json:
        _write_json(report.to_json_dict(), args.out_json)
    if args.out_csv:
        report.write_csv(args.out_csv)
    agg = report.aggregates()
    for regime in sorted(k for k in agg if k != "separation"):
        stats = agg[regime]
        print(
            "%s: %d rows, mean advantage %s (std %s)"
            % (regime, stats["count"], stats["mean_advantage"], stats["std_advantage"])
        )
    if "separation" in agg:
        print(
            "separation: diff %s, pooled se %s, z %s"
            % (agg["separation"]["difference"], agg["separation"]["pooled_se"], agg["separation"]["z"])
        )
    failed = sum(1 for row in report.rows if row.get("error"))
    if failed:
        print("%d row(s) failed" % failed, file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="cspgap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predicate", help="construct and certify a predicate profile")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--rho", type=str, default=None, help="comma-separated rational triple")
    p.add_argument("--search", action="store_true", help="enumerate admissible profiles")
    p.add_argument("--out", type=str, default=None, help="write the predicate spec JSON here")
    p.set_defaults(func=cmd_predicate)

    p = sub.add_parser("spectrum", help="predicate spectrum dumps and reports")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--rho", type=str, default=None)
    p.add_argument("--slices", type=str, default=None, help="comma-separated slice weights")
    p.add_argument("--spec", type=str, default=None, help="predicate spec JSON file")
    p.add_argument("--dump", type=str, default=None, help="write nonzero coefficients CSV here")
    p.add_argument("--min-p3", dest="min_p3", action="store_true")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("instance", help="instance file operations")
    inst_sub = p.add_subparsers(dest="instance_command", required=True)
    g = inst_sub.add_parser("gen", help="generate a planted or uniform instance")
    g.add_argument("--k", type=int, default=None)
    g.add_argument("--rho", type=str, default=None)
    g.add_argument("--slices", type=str, default=None)
    g.add_argument("--spec", type=str, default=None)
    g.add_argument("--regime", choices=("planted", "uniform"), required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--eps", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", type=str, required=True)
    g.add_argument("--planted-out", dest="planted_out", type=str, default=None)
    g.set_defaults(func=cmd_instance_gen)

    p = sub.add_parser("solve", help="run the two-round solver on an instance file")
    p.add_argument("--instance", type=str, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--repetitions", type=int, default=64)
    p.add_argument("--truncation", type=float, default=None)
    p.add_argument("--positions", type=str, default="0,1,2", help="three indices or 'sweep'")
    p.add_argument("--collapse", choices=("first_copy", "majority"), default="first_copy")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="brute-force optimum of an instance file")
    p.add_argument("--instance", type=str, required=True)
    p.add_argument("--ceiling", type=int, default=26)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("experiment", help="batch two-regime gap experiment")
    p.add_argument("--config", type=str, default=None, help="JSON config file")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--rho", type=str, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--seeds", type=str, default=None, help="comma-separated seed list")
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--oracle-limit", dest="oracle_limit", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--out-json", dest="out_json", type=str, default=None)
    p.add_argument("--out-csv", dest="out_csv", type=str, default=None)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliArgumentError as exc:
        print("argument error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_ARGS
    except (InfeasibleBiasError, DegenerateProfileError, IntegralityError) as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return EXIT_INFEASIBLE
    except CapacityError as exc:
        print("capacity: %s" % exc, file=sys.stderr)
        return EXIT_CAPACITY
    except CspGapError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_ARGS
    except OSError as exc:
        print("io error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_ARGS


if __name__ == "__main__":
    sys.exit(main())
