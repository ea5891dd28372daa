"""``ghzcs`` command line: build, run, recover, fidelity, experiment.

Exit codes: 0 success, 2 invalid config, 3 resource limit, 4 empty
post-selection, 5 recovery degeneracy.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from . import circuit as cir
from .coverage import greedy_flag_placement
from .errors import GHZCSError, InvalidConfigError
from .experiments import (ACCURACY_HEADER, FLAG_HEADER, SUCCESS_HEADER, ExperimentConfig,
                          accuracy_sweep, execute, flag_sweep,
                          mitigation_configurations, qem_sweep, success_sweep, summarize)
from .fidelity import DEFAULT_RESAMPLES, RecoveryConfig, attach_ci, bootstrap_ci, estimate_fidelity
from .io import (read_json, read_parity_samples, write_csv, write_json,
                 write_parity_samples)
from .mitigate import ConfusionModel, rem_population, rem_samples
from .recover import RecoveryResult, default_n_max, recover_coherence
from .simulate import CountsTable, population_from_counts, postselect_flags

log = logging.getLogger("ghzcs")

SUMMARY_HEADER = ["count", "failures", "median", "p5", "p95"]


def parse_int_list(text: str) -> list[int]:
    """``"10"``, ``"5,10,20"`` or an inclusive range ``"5:40"`` / ``"5:40:5"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            bounds = [int(v) for v in part.split(":")]
            start, stop = bounds[0], bounds[1]
            step = bounds[2] if len(bounds) > 2 else 1
            out.extend(range(start, stop + 1, step))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"no integers in {text!r}")
    return out


def _m_samples(text: str):
    return text if not text.strip().isdigit() else int(text)


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON config; flags below override its fields")
    p.add_argument("--n", type=parse_int_list, help="GHZ size(s), e.g. 10 or 5,10,20 or 5:40")
    p.add_argument("--flags", type=parse_int_list, help="flag-pair counts k")
    p.add_argument("--shots", type=int)
    p.add_argument("--m-samples", type=_m_samples, help="sample count or '5lnN'")
    p.add_argument("--m-values", type=parse_int_list, help="M values for success_sweep")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=["trajectory", "emulator"])
    p.add_argument("--mitigation", help="comma list from none,rem,dd")
    p.add_argument("--p1q", type=float)
    p.add_argument("--p2q", type=float)
    p.add_argument("--pro", type=float, help="readout flip probability")
    p.add_argument("--phase-offset", type=float, help="theta injected by the emulator")
    p.add_argument("--bootstrap", type=int, nargs="?", const=DEFAULT_RESAMPLES,
                   help=f"bootstrap resamples (bare flag: {DEFAULT_RESAMPLES}, 0 disables)")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out-dir", type=Path, default=Path("."))


def load_config(args) -> ExperimentConfig:
    data = read_json(args.config) if args.config else {}
    noise = dict(data.get("noise", {}))
    simple = {"n": args.n, "flags_k": args.flags, "shots": args.shots,
              "m_samples": args.m_samples, "m_values": args.m_values, "trials": args.trials,
              "seed": args.seed, "backend": args.backend, "bootstrap": args.bootstrap,
              "jobs": args.jobs}
    for key, value in simple.items():
        if value is not None:
            data[key] = value
    if args.mitigation is not None:
        data["mitigation"] = [m.strip() for m in args.mitigation.split(",") if m.strip()]
    for key, flag in (("p_1q", "p1q"), ("p_2q", "p2q"), ("p_ro", "pro"),
                      ("phase_offset", "phase_offset")):
        value = getattr(args, flag)
        if value is not None:
            noise[key] = value
    data["noise"] = noise
    try:
        return ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GHZCSError):
            raise
        raise InvalidConfigError(str(exc)) from exc


def _setup_log(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "ghzcs.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)


# subcommands ---------------------------------------------------------------

def cmd_build(args) -> int:
    if args.tree == "perfect":
        tree = cir.perfect_binary_tree(args.levels)
        base = cir.circuit_from_tree(tree)
    else:
        if args.n is None or len(args.n) != 1:
            raise InvalidConfigError("build needs a single --n")
        base, tree = cir.build_ghz_tree(args.n[0])
    k = args.flags[0] if args.flags else 0
    plan = greedy_flag_placement(tree, k)
    circuit = cir.attach_flag_checks(base, tree, plan.pairs)
    out = args.out_dir
    write_json(out / "circuit.json", circuit.to_dict())
    write_json(out / "flag_plan.json", plan.to_dict())
    print(f"{'k':>3} {'pair':>10} {'gain':>5} {'coverage':>9}")
    covered = 0
    for i, (pair, gain) in enumerate(zip(plan.pairs, plan.marginal_gains), start=1):
        covered += gain
        print(f"{i:>3} {str(tuple(pair)):>10} {gain:>5} {100 * covered / tree.n:>8.2f}%")
    print(f"total coverage {100 * plan.total_ratio:.2f}% of {tree.n} qubits")
    return 0


def cmd_run(args) -> int:
    config = load_config(args)
    _setup_log(args.out_dir)
    n = config.n[0]
    k = config.flags_k[0] if config.flags_k else 0
    dd = "dd" in config.mitigation
    log.info("run n=%d k=%d backend=%s", n, k, config.backend)
    run = execute(config, n, k, dd)
    out = args.out_dir
    write_parity_samples(out / "parity_samples.csv", run.samples)
    write_json(out / "population_counts.json", run.population_counts.to_dict())
    write_json(out / "run.json", {"config": config.to_dict(), "n": n, "k": k, "dd": dd,
                                  "flag_plan": run.plan.to_dict(),
                                  "retained_fraction": run.retained_fraction})
    write_json(out / "circuit.json", run.circuit.to_dict())
    print(f"wrote {len(run.samples)} parity samples, retained fraction "
          f"{run.retained_fraction:.4f}")
    return 0


def cmd_recover(args) -> int:
    samples = read_parity_samples(args.samples)
    if args.mitigation:
        if args.n_data is None:
            raise InvalidConfigError("--mitigation needs --n-data")
        samples = rem_samples(samples, args.n_data, ConfusionModel.from_dict(read_json(args.mitigation)))
    result = recover_coherence(samples, args.n_max, args.alpha_ratio)
    write_json(args.out, result.to_dict())
    print(f"n_rec={result.n_rec} C={result.coherence:.6f} theta={result.theta:.6f}"
          + (" [low signal]" if result.low_signal else ""))
    return 0


def cmd_fidelity(args) -> int:
    recovery = RecoveryResult.from_dict(read_json(args.recovery))
    counts = CountsTable.from_dict(read_json(args.population))
    counts, retained = postselect_flags(counts)
    confusion = ConfusionModel.from_dict(read_json(args.mitigation)) if args.mitigation else None
    provenance = None
    if confusion is not None:
        corrected = rem_population(counts, confusion)
        population = min(max(corrected, 0.0), 1.0)
        provenance = {"method": "rem", "confusion": confusion.to_dict(),
                      "population_raw": population_from_counts(counts),
                      "population_corrected": corrected}
    else:
        population = population_from_counts(counts)
    report = estimate_fidelity(population, recovery, retained)
    report.mitigation = provenance
    if args.bootstrap:
        if args.samples is None:
            raise InvalidConfigError("--bootstrap needs --samples")
        samples = read_parity_samples(args.samples)
        rconf = RecoveryConfig(default_n_max(counts.n_bits) if args.n_max is None else args.n_max,
                               args.alpha_ratio, counts.n_bits, confusion)
        report = attach_ci(report, bootstrap_ci(samples, counts, args.bootstrap, args.seed, rconf))
    write_json(args.out, report.to_dict())
    print(f"P={report.population:.4f} C={report.coherence:.4f} F_std={report.f_standard:.4f} "
          f"F_rot={report.f_rotated:.4f} GME={'yes' if report.gme_certified else 'no'}")
    return 0


def cmd_experiment(args) -> int:
    config = load_config(args)
    _setup_log(args.out_dir)
    out = args.out_dir
    kind = args.kind
    log.info("experiment %s config=%s", kind, config.to_dict())
    write_json(out / f"{kind}_config.json", config.to_dict())
    schema = f"ghzcs.{kind}/v1"
    if kind == "accuracy_sweep":
        rows = accuracy_sweep(config)
        write_csv(out / f"{kind}.csv", schema, ACCURACY_HEADER, rows)
        summary = summarize(rows, "n", "abs_error")
        write_csv(out / f"{kind}_summary.csv", f"ghzcs.{kind}_summary/v1",
                  ["n"] + SUMMARY_HEADER, summary)
        for s in summary:
            print(f"N={s['n']:>3} median={s['median']:.4f} p95={s['p95']:.4f}")
    elif kind == "success_sweep":
        rows, trials = success_sweep(config)
        write_csv(out / f"{kind}.csv", f"{schema} shots_per_angle={config.shots}",
                  SUCCESS_HEADER, rows)
        write_csv(out / f"{kind}_trials.csv", f"ghzcs.{kind}_trials/v1",
                  ["m", "trial", "n_rec", "success", "abs_error", "status"], trials)
        write_csv(out / f"{kind}_summary.csv", f"ghzcs.{kind}_summary/v1",
                  ["m"] + SUMMARY_HEADER, summarize(trials, "m", "abs_error"))
        for r in rows:
            print(f"M={r['m']:>3} success={r['success_rate']:.2f}")
    elif kind in ("flag_sweep", "qem_sweep"):
        if kind == "qem_sweep":
            rows, reports = qem_sweep(config)
        else:
            rows, reports = flag_sweep(config, mitigation_configurations(config))
        write_csv(out / f"{kind}.csv", f"{schema} noise=depolarizing-only", FLAG_HEADER, rows)
        for row in rows:
            row["group"] = f"k={row['k']}|{row['mitigation']}"
        write_csv(out / f"{kind}_summary.csv", f"ghzcs.{kind}_summary/v1",
                  ["group"] + SUMMARY_HEADER, summarize(rows, "group", "f_rotated"))
        for row, report in zip(rows, reports):
            if report is not None:
                name = f"report_k{row['k']}_t{row['trial']}_{row['mitigation'].replace('+', '-')}.json"
                write_json(out / "reports" / name, report.to_dict())
            print(f"k={row['k']} {row['mitigation']:>6} cov={row['coverage_ratio']:.2f} "
                  f"F_std={row['f_standard']:.4f} F_rot={row['f_rotated']:.4f} {row['status']}")
        failed = [r for r in rows if r["status"] != "ok"]
        if failed and len(failed) == len(rows):
            return 4 if all("EmptyPostSelection" in r["status"] for r in failed) else 1
    else:
        raise InvalidConfigError(f"unknown experiment kind {kind!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghzcs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="write the GHZ circuit and greedy flag plan")
    p.add_argument("--n", type=parse_int_list)
    p.add_argument("--flags", type=parse_int_list)
    p.add_argument("--tree", choices=["doubling", "perfect"], default="doubling")
    p.add_argument("--levels", type=int, default=4, help="levels of the perfect tree")
    p.add_argument("--out-dir", type=Path, default=Path("."))
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("run", help="simulate parity and Z-basis circuits")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("recover", help="compressed-sensing recovery from a samples CSV")
    p.add_argument("--samples", type=Path, required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--alpha-ratio", type=float, default=0.1)
    p.add_argument("--mitigation", type=Path, help='confusion JSON {"p01": .., "p10": ..}')
    p.add_argument("--n-data", type=int)
    p.add_argument("--out", type=Path, default=Path("recovery.json"))
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("fidelity", help="fidelity report from a recovery and Z-basis counts")
    p.add_argument("--recovery", type=Path, required=True)
    p.add_argument("--population", type=Path, required=True)
    p.add_argument("--mitigation", type=Path)
    p.add_argument("--samples", type=Path, help="parity samples, needed for --bootstrap")
    p.add_argument("--bootstrap", type=int, nargs="?", const=DEFAULT_RESAMPLES, default=0,
                   help=f"bootstrap resamples (bare flag: {DEFAULT_RESAMPLES})")
    p.add_argument("--n-max", type=int)
    p.add_argument("--alpha-ratio", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("fidelity.json"))
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("experiment", help="run a sweep and write plot-ready CSV")
    p.add_argument("kind", choices=["accuracy_sweep", "success_sweep", "flag_sweep", "qem_sweep"])
    _add_config_flags(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GHZCSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InvalidConfigError.exit_code
    except OSError as exc:
        print(f"error: {exc.strerror or exc}: {exc.filename}", file=sys.stderr)
        return 1
    finally:
        for handler in list(log.handlers):
            handler.close()
            log.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
