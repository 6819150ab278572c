"""Monte-Carlo experiment runner: per-replicate FDP and power, aggregated.

Every method sees the same generated dataset within a replicate (paired
comparison), replicates draw independent seeds, and aggregation is a
deterministic reduction ordered by replicate index, so reports are
byte-identical at any parallelism level.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .baselines import (bh_reject, pooled_permutation_pvalues,
                        rank_sum_pvalues, storey_reject, t_pvalues)
from .procedure import TdConfig, Variant, adaptive_run_multi, run_procedure_multi
from .scores import ScoreKind
from .simgen import Model, SimSpec, adaptive_small_spec, gen_dataset

#: Method-tag score tokens.  "t" is the signed t statistic, which is what
#: the simulation tables are calibrated against; "abs-t" gives the
#: two-sided orientation used for real-data runs.
_SCORE_KINDS = {
    "t": ScoreKind.SIGNED_T,
    "abs-t": ScoreKind.ABS_T,
    "ranksum": ScoreKind.RANK_SUM_CENTERED,
}


@dataclass(frozen=True)
class MethodSpec:
    """A named analysis method: decoy procedure or p-value baseline."""

    name: str
    family: str                    # "td", "bh", or "storey"
    score: str                     # "t", "ranksum", or "pooledperm"
    variant: Variant | None = None
    r: float = 1.0
    decoys: int = 49
    storey_lambda: float = 0.5
    pooled_draws: int = 10


def parse_method(name):
    """Parse a method tag.

    Decoy procedures: ``td-<score>-<decoys>`` (simplified),
    ``td-standard-<score>-<decoys>-r<r>``, ``td-adaptive-<score>-<decoys>``,
    with score in t, abs-t, ranksum.  Baselines: ``bh-<p>`` or
    ``storey-<p>`` with p in t, ranksum, pooledperm.
    """
    if isinstance(name, MethodSpec):
        return name
    parts = name.split("-")
    try:
        if parts[0] == "td":
            rest = parts[1:]
            variant = Variant.SIMPLIFIED
            r = 1.0
            if rest[0] == "standard":
                variant = Variant.STANDARD
                rest = rest[1:]
            elif rest[0] == "adaptive":
                variant = Variant.ADAPTIVE
                rest = rest[1:]
            if len(rest) >= 2 and "-".join(rest[:2]) in _SCORE_KINDS:
                score = "-".join(rest[:2])
                rest = rest[2:]
            elif rest[0] in _SCORE_KINDS:
                score = rest[0]
                rest = rest[1:]
            else:
                raise ValueError
            decoys = int(rest[0])
            rest = rest[1:]
            if rest:
                if variant is not Variant.STANDARD or not rest[0].startswith("r"):
                    raise ValueError
                r = float(rest[0][1:])
                rest = rest[1:]
            if rest:
                raise ValueError
            return MethodSpec(name=name, family="td", score=score,
                              variant=variant, r=r, decoys=decoys)
        if parts[0] in ("bh", "storey") and len(parts) == 2:
            if parts[1] not in ("t", "ranksum", "pooledperm"):
                raise ValueError
            return MethodSpec(name=name, family=parts[0], score=parts[1])
    except (ValueError, IndexError):
        pass
    raise ValueError(f"cannot parse method tag: {name!r}")


@dataclass(frozen=True)
class RepResult:
    """One (replicate, method, alpha) outcome."""

    replicate: int
    method: str
    alpha: float
    rejections: int
    true_rejections: int
    fdp: float


def fdp(decisions, false_null):
    """Realized false discovery proportion of a DecisionSet.

    #{rejected true nulls} / max(#rejected, 1); zero when nothing is
    rejected.
    """
    rejected = decisions.rejected_ids
    if rejected.size == 0:
        return 0.0
    false_rejections = int((~np.asarray(false_null, dtype=bool)[rejected]).sum())
    return false_rejections / rejected.size


def _method_seed(seed, replicate, method_index):
    ss = np.random.SeedSequence(seed, spawn_key=(replicate, method_index + 1))
    return int(ss.generate_state(1, np.uint64)[0])


def _rejections_for(method, sim, alphas, seed):
    """Rejected index arrays for one method at each alpha."""
    data = sim.data
    if method.family == "td":
        kind = _SCORE_KINDS[method.score]
        config = TdConfig(
            variant=method.variant,
            r=method.r if method.variant is Variant.STANDARD else 1.0,
            tau=method.decoys + 1, seed=seed)
        if method.variant is Variant.ADAPTIVE:
            decisions = adaptive_run_multi(data, kind, config, alphas)
        else:
            decisions = run_procedure_multi(data, kind, config, alphas)
        return [d.rejected_ids for d in decisions]
    if method.score == "t":
        pvals = t_pvalues(data)
    elif method.score == "ranksum":
        pvals = rank_sum_pvalues(data)
    else:
        rng = np.random.default_rng(seed)
        pvals = pooled_permutation_pvalues(data, ScoreKind.ABS_T,
                                           method.pooled_draws, rng)
    if method.family == "bh":
        return [bh_reject(pvals, alpha) for alpha in alphas]
    return [storey_reject(pvals, alpha, lam=method.storey_lambda)
            for alpha in alphas]


def _replicate_results(spec, replicate, methods, alphas, seed):
    sim = gen_dataset(spec, replicate)
    false_null = sim.false_null
    results = []
    for mi, method in enumerate(methods):
        rejected_sets = _rejections_for(method, sim, alphas,
                                        _method_seed(seed, replicate, mi))
        for alpha, rejected in zip(alphas, rejected_sets):
            n_rej = int(rejected.size)
            true_rej = int(false_null[rejected].sum())
            results.append(RepResult(
                replicate=replicate, method=method.name, alpha=float(alpha),
                rejections=n_rej, true_rejections=true_rej,
                fdp=(n_rej - true_rej) / max(n_rej, 1)))
    return results


def _replicate_worker(payload):
    spec, replicate, methods, alphas, seed = payload
    return _replicate_results(spec, replicate, methods, alphas, seed)


@dataclass(frozen=True)
class CellStats:
    """Aggregates for one (method, alpha) cell."""

    mean_fdp: float
    fdp_se: float
    mean_rejections: float
    mean_true_rejections: float
    fdr_exceeds_alpha: bool


@dataclass
class ExperimentSummary:
    """Aggregated experiment results plus full per-replicate detail."""

    spec: SimSpec
    methods: list
    alphas: list
    reps: int
    seed: int
    cells: dict
    detail: dict

    def cell(self, method, alpha):
        return self.cells[(method, float(alpha))]


def run_experiment(spec, methods, reps=None, alphas=(0.05, 0.10), seed=None,
                   jobs=1):
    """Run every method on ``reps`` shared replicates of ``spec``.

    ``seed`` overrides the spec seed (data and method streams both derive
    from it); ``jobs > 1`` runs replicates in worker processes without
    changing any output byte.
    """
    methods = [parse_method(m) for m in methods]
    if seed is None:
        seed = spec.seed
    else:
        spec = replace(spec, seed=seed)
    if reps is None:
        reps = spec.reps
    if reps < 2:
        raise ValueError("need at least two replicates")
    alphas = [float(a) for a in alphas]

    payloads = [(spec, rep, methods, alphas, seed) for rep in range(reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_rep = list(pool.map(_replicate_worker, payloads, chunksize=4))
    else:
        per_rep = [_replicate_worker(p) for p in payloads]

    detail = {m.name: {a: {"fdp": np.empty(reps),
                           "rejections": np.zeros(reps, dtype=np.int64),
                           "true_rejections": np.zeros(reps, dtype=np.int64)}
                       for a in alphas} for m in methods}
    for rep_results in per_rep:
        for res in rep_results:
            slot = detail[res.method][res.alpha]
            slot["fdp"][res.replicate] = res.fdp
            slot["rejections"][res.replicate] = res.rejections
            slot["true_rejections"][res.replicate] = res.true_rejections

    cells = {}
    for m in methods:
        for a in alphas:
            slot = detail[m.name][a]
            mean_fdp = float(slot["fdp"].mean())
            se = float(slot["fdp"].std(ddof=1) / np.sqrt(reps))
            cells[(m.name, a)] = CellStats(
                mean_fdp=mean_fdp, fdp_se=se,
                mean_rejections=float(slot["rejections"].mean()),
                mean_true_rejections=float(slot["true_rejections"].mean()),
                fdr_exceeds_alpha=mean_fdp > a)
    return ExperimentSummary(spec=spec, methods=[m.name for m in methods],
                             alphas=alphas, reps=reps, seed=seed,
                             cells=cells, detail=detail)


# ---------------------------------------------------------------------------
# reports

_TSV_COLUMNS = ("method", "alpha", "mean_fdp", "fdp_se", "mean_rejections",
                "mean_true_rejections", "fdr_exceeds_alpha")


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_report_tsv(summary):
    lines = ["\t".join(_TSV_COLUMNS)]
    for method in summary.methods:
        for alpha in summary.alphas:
            c = summary.cell(method, alpha)
            lines.append("\t".join([
                method, repr(alpha), repr(c.mean_fdp), repr(c.fdp_se),
                repr(c.mean_rejections), repr(c.mean_true_rejections),
                _fmt(c.fdr_exceeds_alpha)]))
    return "\n".join(lines) + "\n"


def parse_report_tsv(text):
    """Rows of a report TSV as dicts of strings (round-trips exactly)."""
    lines = text.strip("\n").split("\n")
    header = lines[0].split("\t")
    if tuple(header) != _TSV_COLUMNS:
        raise ValueError("not a report TSV")
    return [dict(zip(header, line.split("\t"))) for line in lines[1:]]


def render_rows_tsv(rows):
    lines = ["\t".join(_TSV_COLUMNS)]
    for row in rows:
        lines.append("\t".join(row[c] for c in _TSV_COLUMNS))
    return "\n".join(lines) + "\n"


def render_report_markdown(summary, title=None):
    """Two method-by-alpha tables: observed FDR and mean rejections.

    Cells whose observed FDR exceeds alpha carry a ``*`` marker.
    """
    alphas = summary.alphas
    head = "| method | " + " | ".join(repr(a) for a in alphas) + " |"
    rule = "|---" * (len(alphas) + 1) + "|"
    lines = []
    if title:
        lines += [f"## {title}", ""]
    lines += ["Observed FDR (mean FDP); * marks cells above alpha", "",
              head, rule]
    for method in summary.methods:
        cells = []
        for a in alphas:
            c = summary.cell(method, a)
            star = "*" if c.fdr_exceeds_alpha else ""
            cells.append(f"{c.mean_fdp:.4f}{star}")
        lines.append("| " + method + " | " + " | ".join(cells) + " |")
    lines += ["", "Mean rejections", "", head, rule]
    for method in summary.methods:
        cells = []
        for a in alphas:
            c = summary.cell(method, a)
            star = "*" if c.fdr_exceeds_alpha else ""
            cells.append(f"{c.mean_rejections:.1f}{star}")
        lines.append("| " + method + " | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def summary_to_json_dict(summary):
    spec = summary.spec
    return {
        "version": __version__,
        "spec": {
            "model": spec.model.value, "m": spec.m, "n1": spec.n1,
            "n0": spec.n0, "false_fraction": spec.false_fraction,
            "rho": spec.rho, "effect_cycle": list(spec.effect_cycle),
            "reps": spec.reps, "seed": spec.seed,
        },
        "reps": summary.reps,
        "seed": summary.seed,
        "alphas": summary.alphas,
        "methods": summary.methods,
        "cells": [
            {"method": method, "alpha": alpha,
             "mean_fdp": c.mean_fdp, "fdp_se": c.fdp_se,
             "mean_rejections": c.mean_rejections,
             "mean_true_rejections": c.mean_true_rejections,
             "fdr_exceeds_alpha": c.fdr_exceeds_alpha}
            for (method, alpha), c in sorted(
                summary.cells.items(),
                key=lambda kv: (summary.methods.index(kv[0][0]), kv[0][1]))
        ],
        "replicates": {
            method: {repr(alpha): {
                "fdp": summary.detail[method][alpha]["fdp"].tolist(),
                "rejections":
                    summary.detail[method][alpha]["rejections"].tolist(),
                "true_rejections":
                    summary.detail[method][alpha]["true_rejections"].tolist(),
            } for alpha in summary.alphas}
            for method in summary.methods
        },
    }


def render_report_json(summary):
    return json.dumps(summary_to_json_dict(summary), sort_keys=True,
                      indent=2) + "\n"


def emit_report(summary, outdir, formats=("tsv", "json", "markdown"),
                stem="report", title=None):
    """Write report files; returns the written paths."""
    import os

    renderers = {"tsv": (f"{stem}.tsv", lambda: render_report_tsv(summary)),
                 "json": (f"{stem}.json", lambda: render_report_json(summary)),
                 "markdown": (f"{stem}.md",
                              lambda: render_report_markdown(summary, title))}
    os.makedirs(outdir, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt not in renderers:
            raise ValueError(f"unknown report format: {fmt!r}")
        fname, render = renderers[fmt]
        path = os.path.join(outdir, fname)
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(render())
        except OSError as exc:
            raise OSError(f"failed writing report {path}: {exc}") from exc
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# presets mirroring the published study grids

_TD_METHODS = ("td-t-49", "td-t-1", "td-ranksum-49", "td-ranksum-1")
_BASELINE_METHODS = ("storey-t", "storey-ranksum", "storey-pooledperm", "bh-t")


@dataclass(frozen=True)
class Preset:
    name: str
    scenarios: tuple
    methods: tuple
    alphas: tuple
    reps: int


def _big_spec(model, false_fraction, rho=0.0):
    return SimSpec(model=model, m=10000, n1=10, n0=10,
                   false_fraction=false_fraction, rho=rho)


PRESETS = {
    "table1": Preset(
        name="table1",
        scenarios=(
            ("normal-1pct", _big_spec(Model.NORMAL, 0.01)),
            ("normal-10pct", _big_spec(Model.NORMAL, 0.10)),
            ("gamma-1pct", _big_spec(Model.GAMMA_INDEP, 0.01)),
            ("gamma-10pct", _big_spec(Model.GAMMA_INDEP, 0.10)),
        ),
        methods=_TD_METHODS + _BASELINE_METHODS,
        alphas=(0.05, 0.10), reps=100),
    "table3": Preset(
        name="table3",
        scenarios=(
            ("normal-rho04-1pct", _big_spec(Model.NORMAL, 0.01, rho=0.4)),
            ("normal-rho04-10pct", _big_spec(Model.NORMAL, 0.10, rho=0.4)),
            ("normal-rho08-1pct", _big_spec(Model.NORMAL, 0.01, rho=0.8)),
            ("normal-rho08-10pct", _big_spec(Model.NORMAL, 0.10, rho=0.8)),
            ("gamma-dep-1pct", _big_spec(Model.GAMMA_DEP, 0.01)),
            ("gamma-dep-10pct", _big_spec(Model.GAMMA_DEP, 0.10)),
        ),
        methods=_TD_METHODS + _BASELINE_METHODS,
        alphas=(0.05, 0.10), reps=100),
    "table5": Preset(
        name="table5",
        scenarios=(("adaptive-small", adaptive_small_spec()),),
        methods=("td-adaptive-t-49", "td-t-49"),
        alphas=tuple(round(0.01 * k, 2) for k in range(1, 11)), reps=1000),
}
PRESETS["table2"] = replace(PRESETS["table1"], name="table2")
PRESETS["table4"] = replace(PRESETS["table3"], name="table4")


def load_experiment_config(path):
    """Read a plain key=value experiment config.

    Recognized keys: model, m, n1, n0, false_fraction, rho, effect_cycle,
    reps, seed, methods, alphas.  Lines starting with ``#`` are comments.
    Returns (SimSpec, methods, alphas).
    """
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()

    def pop(key, default=None):
        return entries.pop(key, default)

    model = Model(pop("model", "normal"))
    spec = SimSpec(
        model=model,
        m=int(pop("m", "1000")),
        n1=int(pop("n1", "10")),
        n0=int(pop("n0", "10")),
        false_fraction=float(pop("false_fraction", "0.1")),
        rho=float(pop("rho", "0.0")),
        effect_cycle=tuple(float(x) for x in pop("effect_cycle", "").split(",")
                           if x.strip()),
        reps=int(pop("reps", "100")),
        seed=int(pop("seed", "0")),
    )
    methods = tuple(x.strip() for x in
                    pop("methods", "td-t-49").split(",") if x.strip())
    alphas = tuple(float(x) for x in
                   pop("alphas", "0.05,0.10").split(",") if x.strip())
    if entries:
        raise ValueError(f"{path}: unknown config keys: {sorted(entries)}")
    return spec, methods, alphas
