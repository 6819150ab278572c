"""Command-line interface.

Subcommands: ``run`` (decoy procedure on an ingested matrix),
``simulate`` (Monte-Carlo study presets), ``baseline`` (BH / Storey on
p-values), and ``report`` (re-render a stored JSON report).

Exit codes: 0 success, 2 usage, 3 invalid value, 4 I/O failure,
5 malformed input data.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .baselines import (bh_reject, pooled_permutation_pvalues,
                        rank_sum_pvalues, storey_qvalues, t_pvalues)
from .dataset import MatrixFormatError, ingest_matrix
from .harness import (PRESETS, emit_report, load_experiment_config,
                      render_report_markdown, run_experiment,
                      summary_to_json_dict)
from .procedure import (BOTTOM_MARKER, LABEL_UNUSED, TdConfig, Variant,
                        adaptive_run, run_procedure)
from .scores import ScoreKind

EXIT_OK = 0
EXIT_INVALID_VALUE = 3
EXIT_IO = 4
EXIT_DATA_FORMAT = 5

_CLI_SCORES = {
    "abs-t": ScoreKind.ABS_T,
    "signed-t": ScoreKind.SIGNED_T,
    "ranksum": ScoreKind.RANK_SUM_CENTERED,
}


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _manifest(outdir, args, seed, inputs, outputs, started, extra=None):
    payload = {
        "version": __version__,
        "command": " ".join(args),
        "seed": seed,
        "inputs": inputs,
        "outputs": sorted(os.path.basename(p) for p in outputs),
        "runtime_seconds": round(time.perf_counter() - started, 3),
    }
    if extra:
        payload.update(extra)
    path = os.path.join(outdir, "manifest.json")
    _write_json(path, payload)
    return path


def _add_matrix_args(parser):
    parser.add_argument("--input", required=True, help="delimited matrix file")
    parser.add_argument("--cases", required=True,
                        help="case columns, e.g. '1-3' or 'a,b,c' (1-based "
                             "over data columns)")
    parser.add_argument("--controls", required=True, help="control columns")
    parser.add_argument("--delimiter", default="\t")
    parser.add_argument("--no-header", dest="header", action="store_false",
                        help="matrix has no header line")
    parser.add_argument("--no-ids", dest="ids", action="store_false",
                        help="matrix has no leading id column")


def _ingest(args):
    return ingest_matrix(args.input, args.cases, args.controls,
                         delimiter=args.delimiter, header=args.header,
                         ids=args.ids)


def _float_repr(x):
    return repr(float(x))


def cmd_run(args, argv):
    started = time.perf_counter()
    ingest = _ingest(args)
    dataset = ingest.dataset
    kind = _CLI_SCORES[args.score]
    variant = Variant(args.variant)
    grid = tuple(float(x) for x in args.r_grid.split(",")) if args.r_grid \
        else TdConfig.adaptive_r_grid
    config = TdConfig(
        variant=variant, r=args.r, alpha=args.alpha,
        tau=args.permutations + 1, seed=args.seed,
        adaptive_r_grid=grid, adaptive_n2=args.n2)
    if variant is Variant.ADAPTIVE:
        decisions = adaptive_run(dataset, kind, config)
    else:
        decisions = run_procedure(dataset, kind, config)

    os.makedirs(args.output, exist_ok=True)
    results_path = os.path.join(args.output, "results.tsv")
    rejected = decisions.rejected_mask()
    with open(results_path, "w", encoding="utf-8") as fh:
        fh.write("id\ttarget_score\tlabel\tfinal_rank\tfinal_score\t"
                 "rejected\n")
        for j in range(decisions.m):
            label = str(decisions.labels[j])
            target = decisions.target_scores[j]
            final = (BOTTOM_MARKER if label == LABEL_UNUSED
                     else _float_repr(decisions.final_scores[j]))
            fh.write("\t".join([
                str(dataset.ids[j]),
                "NA" if np.isnan(target) else _float_repr(target),
                label,
                str(int(decisions.global_ranks[j])),
                final,
                "1" if rejected[j] else "0"]) + "\n")

    summary = {
        "k": decisions.k,
        "alpha": decisions.alpha,
        "r": decisions.r,
        "t": decisions.t,
        "variant": decisions.variant.value,
        "score": args.score,
        "n_tests": decisions.m,
        "n_rejected": int(decisions.rejected_ids.size),
        "estimated_fdr": decisions.estimated_fdr,
        "no_discoveries": decisions.no_discoveries,
        "n_degenerate": decisions.n_degenerate,
        "n_dropped_rows": ingest.n_dropped,
        "selected_r": decisions.selected_r,
        "seed": args.seed,
        "version": __version__,
    }
    summary_path = os.path.join(args.output, "summary.json")
    _write_json(summary_path, summary)
    _manifest(args.output, argv, args.seed,
              {"path": args.input, "sha256": _sha256(args.input)},
              [results_path, summary_path], started,
              extra={"n_dropped_rows": ingest.n_dropped})
    return EXIT_OK


def cmd_simulate(args, argv):
    started = time.perf_counter()
    if bool(args.preset) == bool(args.config):
        raise ValueError("specify exactly one of --preset or --config")
    os.makedirs(args.output, exist_ok=True)
    outputs = []
    sections = []
    if args.preset:
        preset = PRESETS.get(args.preset)
        if preset is None:
            raise ValueError(f"unknown preset {args.preset!r}; have "
                             f"{sorted(PRESETS)}")
        reps = args.reps or preset.reps
        alphas = args.alphas or preset.alphas
        scenarios = preset.scenarios
        methods = preset.methods
    else:
        spec, methods, cfg_alphas = load_experiment_config(args.config)
        scenarios = (("experiment", spec),)
        reps = args.reps or spec.reps
        alphas = args.alphas or cfg_alphas
    for tag, spec in scenarios:
        summary = run_experiment(spec, methods, reps=reps, alphas=alphas,
                                 seed=args.seed, jobs=args.jobs)
        outputs += emit_report(summary, args.output, stem=tag, title=tag)
        sections.append(render_report_markdown(summary, title=tag))
    combined = os.path.join(args.output, "combined.md")
    with open(combined, "w", encoding="utf-8") as fh:
        fh.write("\n".join(sections))
    outputs.append(combined)
    _manifest(args.output, argv, args.seed,
              {"preset": args.preset, "config": args.config},
              outputs, started,
              extra={"reps": reps, "alphas": list(alphas),
                     "methods": list(methods), "jobs": args.jobs})
    return EXIT_OK


def cmd_baseline(args, argv):
    started = time.perf_counter()
    ingest = _ingest(args)
    dataset = ingest.dataset
    if args.pvalues == "t":
        pvals = t_pvalues(dataset)
    elif args.pvalues == "ranksum":
        pvals = rank_sum_pvalues(dataset)
    else:
        rng = np.random.default_rng(args.seed)
        pvals = pooled_permutation_pvalues(dataset, ScoreKind.ABS_T,
                                           args.draws, rng)
    p = pvals.p
    if args.procedure == "bh":
        rejected_idx = bh_reject(p, args.alpha)
        q = None
    else:
        q = storey_qvalues(p, lam=args.storey_lambda)
        rejected_idx = np.nonzero(q <= args.alpha)[0]
    rejected = np.zeros(dataset.m, dtype=bool)
    rejected[rejected_idx] = True

    os.makedirs(args.output, exist_ok=True)
    results_path = os.path.join(args.output, "results.tsv")
    with open(results_path, "w", encoding="utf-8") as fh:
        header = "id\tp_value" + ("\tq_value" if q is not None else "") + \
            "\trejected\n"
        fh.write(header)
        for j in range(dataset.m):
            cells = [str(dataset.ids[j]), _float_repr(p[j])]
            if q is not None:
                cells.append(_float_repr(q[j]))
            cells.append("1" if rejected[j] else "0")
            fh.write("\t".join(cells) + "\n")
    summary = {
        "procedure": args.procedure,
        "pvalues": pvals.method,
        "alpha": args.alpha,
        "n_tests": dataset.m,
        "n_rejected": int(rejected_idx.size),
        "n_dropped_rows": ingest.n_dropped,
        "storey_lambda": args.storey_lambda if args.procedure == "storey"
        else None,
        "seed": args.seed,
        "version": __version__,
    }
    summary_path = os.path.join(args.output, "summary.json")
    _write_json(summary_path, summary)
    _manifest(args.output, argv, args.seed,
              {"path": args.input, "sha256": _sha256(args.input)},
              [results_path, summary_path], started)
    return EXIT_OK


def cmd_report(args, argv):
    with open(args.input, encoding="utf-8") as fh:
        payload = json.load(fh)
    # rebuild a summary-like table from the stored cells
    lines = []
    if args.format == "markdown":
        alphas = payload["alphas"]
        head = "| method | " + " | ".join(repr(a) for a in alphas) + " |"
        rule = "|---" * (len(alphas) + 1) + "|"
        cells = {(c["method"], c["alpha"]): c for c in payload["cells"]}
        lines += ["Observed FDR (mean FDP); * marks cells above alpha", "",
                  head, rule]
        for method in payload["methods"]:
            row = []
            for a in alphas:
                c = cells[(method, a)]
                row.append(f"{c['mean_fdp']:.4f}"
                           f"{'*' if c['fdr_exceeds_alpha'] else ''}")
            lines.append("| " + method + " | " + " | ".join(row) + " |")
        lines += ["", "Mean rejections", "", head, rule]
        for method in payload["methods"]:
            row = []
            for a in alphas:
                c = cells[(method, a)]
                row.append(f"{c['mean_rejections']:.1f}"
                           f"{'*' if c['fdr_exceeds_alpha'] else ''}")
            lines.append("| " + method + " | " + " | ".join(row) + " |")
        text = "\n".join(lines) + "\n"
    else:
        cols = ("method", "alpha", "mean_fdp", "fdp_se", "mean_rejections",
                "mean_true_rejections", "fdr_exceeds_alpha")
        lines.append("\t".join(cols))
        for c in payload["cells"]:
            lines.append("\t".join([
                c["method"], repr(c["alpha"]), repr(c["mean_fdp"]),
                repr(c["fdp_se"]), repr(c["mean_rejections"]),
                repr(c["mean_true_rejections"]),
                "1" if c["fdr_exceeds_alpha"] else "0"]))
        text = "\n".join(lines) + "\n"
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def _alpha_list(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tdfdr",
        description="Decoy-competition FDR control for two-group testing")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a decoy procedure on a matrix")
    _add_matrix_args(run_p)
    run_p.add_argument("--score", choices=sorted(_CLI_SCORES), default="abs-t")
    run_p.add_argument("--variant", choices=[v.value for v in Variant],
                       default="simplified")
    run_p.add_argument("--alpha", type=float, default=0.05)
    run_p.add_argument("--r", type=float, default=1.0,
                       help="decoy-to-target odds (standard variant)")
    run_p.add_argument("--permutations", type=int, default=49,
                       help="decoy count cap per test (t - 1)")
    run_p.add_argument("--r-grid", default="",
                       help="adaptive r grid, comma-separated")
    run_p.add_argument("--n2", type=int, default=None,
                       help="adaptive per-group holdout size")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--output", default=".")
    run_p.set_defaults(handler=cmd_run)

    sim_p = sub.add_parser("simulate", help="run a Monte-Carlo study")
    sim_p.add_argument("--preset", default="",
                       help=f"one of {sorted(PRESETS)}")
    sim_p.add_argument("--config", default="",
                       help="key=value experiment config file")
    sim_p.add_argument("--reps", type=int, default=0,
                       help="replicates (0 = preset default)")
    sim_p.add_argument("--alphas", type=_alpha_list, default=(),
                       help="comma-separated control levels")
    sim_p.add_argument("--jobs", type=int, default=1)
    sim_p.add_argument("--seed", type=int, default=0)
    sim_p.add_argument("--output", default=".")
    sim_p.set_defaults(handler=cmd_simulate)

    base_p = sub.add_parser("baseline", help="run a p-value baseline")
    _add_matrix_args(base_p)
    base_p.add_argument("--pvalues", choices=["t", "ranksum", "pooledperm"],
                        default="t")
    base_p.add_argument("--procedure", choices=["bh", "storey"], default="bh")
    base_p.add_argument("--alpha", type=float, default=0.05)
    base_p.add_argument("--storey-lambda", type=float, default=0.5)
    base_p.add_argument("--draws", type=int, default=10,
                        help="pooled-permutation draws per test")
    base_p.add_argument("--seed", type=int, default=0)
    base_p.add_argument("--output", default=".")
    base_p.set_defaults(handler=cmd_baseline)

    rep_p = sub.add_parser("report", help="re-render a stored JSON report")
    rep_p.add_argument("--input", required=True)
    rep_p.add_argument("--format", choices=["markdown", "tsv"],
                       default="markdown")
    rep_p.add_argument("--output", default="-")
    rep_p.set_defaults(handler=cmd_report)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args, ["tdfdr"] + argv)
    except MatrixFormatError as exc:
        print(f"tdfdr: {exc}", file=sys.stderr)
        return EXIT_DATA_FORMAT
    except ValueError as exc:
        print(f"tdfdr: {exc}", file=sys.stderr)
        return EXIT_INVALID_VALUE
    except OSError as exc:
        print(f"tdfdr: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
