"""Experiment runner: pairing, aggregation, reports, and parallelism."""

import json

import numpy as np
import pytest

from conftest import make_dataset
from tdfdr.harness import (PRESETS, MethodSpec, emit_report, fdp,
                           load_experiment_config, parse_method,
                           parse_report_tsv, render_report_markdown,
                           render_report_tsv, render_rows_tsv, run_experiment,
                           summary_to_json_dict)
from tdfdr.procedure import TdConfig, Variant, run_procedure
from tdfdr.scores import ScoreKind
from tdfdr.simgen import Model, SimSpec


def small_spec(seed=0, m=300):
    return SimSpec(model=Model.NORMAL, m=m, n1=5, n0=5, false_fraction=0.1,
                   effect_cycle=(2.0, 3.0, 4.0, 5.0), seed=seed)


class TestParseMethod:
    def test_td_variants(self):
        ms = parse_method("td-t-49")
        assert ms.family == "td" and ms.variant is Variant.SIMPLIFIED
        assert ms.score == "t" and ms.decoys == 49
        ms = parse_method("td-standard-ranksum-19-r5")
        assert ms.variant is Variant.STANDARD and ms.r == 5.0
        assert ms.score == "ranksum" and ms.decoys == 19
        ms = parse_method("td-adaptive-t-49")
        assert ms.variant is Variant.ADAPTIVE
        ms = parse_method("td-abs-t-9")
        assert ms.score == "abs-t" and ms.decoys == 9

    def test_baselines(self):
        assert parse_method("bh-t").family == "bh"
        assert parse_method("storey-pooledperm").score == "pooledperm"

    @pytest.mark.parametrize("bad", ["td-t", "td-q-49", "bh-zscore",
                                     "td-simplified-t-49-r2", "nope"])
    def test_rejects_malformed(self, bad):
        with pytest.raises(ValueError):
            parse_method(bad)

    def test_passthrough(self):
        ms = MethodSpec(name="x", family="bh", score="t")
        assert parse_method(ms) is ms


class TestFdp:
    def test_conventions(self):
        class Fake:
            rejected_ids = np.array([], dtype=np.int64)

        assert fdp(Fake(), np.zeros(5, dtype=bool)) == 0.0

    def test_counts_true_nulls_among_rejected(self):
        class Fake:
            rejected_ids = np.arange(10)

        truth = np.zeros(20, dtype=bool)
        truth[1:10] = True  # 9 false nulls among the rejected
        assert fdp(Fake(), truth) == pytest.approx(0.1)
        truth[:] = False
        assert fdp(Fake(), truth) == 1.0

    def test_against_run_procedure(self):
        rng = np.random.default_rng(1)
        samples = rng.standard_normal((200, 10))
        samples[:40, :5] += 3.0
        dataset = make_dataset(samples, 5)
        truth = np.zeros(200, dtype=bool)
        truth[:40] = True
        d = run_procedure(dataset, ScoreKind.ABS_T,
                          TdConfig(variant=Variant.SIMPLIFIED, tau=20, seed=2))
        expected = (~truth[d.rejected_ids]).sum() / max(d.rejected_ids.size, 1)
        assert fdp(d, truth) == expected


class TestRunExperiment:
    def test_summary_shape_and_se(self):
        summary = run_experiment(small_spec(), ["td-t-19", "bh-t"], reps=6,
                                 alphas=(0.05, 0.1), seed=3)
        assert summary.reps == 6
        for method in ("td-t-19", "bh-t"):
            for alpha in (0.05, 0.1):
                cell = summary.cell(method, alpha)
                detail = summary.detail[method][alpha]
                assert detail["fdp"].shape == (6,)
                assert cell.mean_fdp == pytest.approx(detail["fdp"].mean())
                assert cell.fdp_se == pytest.approx(
                    detail["fdp"].std(ddof=1) / np.sqrt(6))
                assert cell.mean_rejections == pytest.approx(
                    detail["rejections"].mean())

    def test_alpha_zero_rejects_nothing(self):
        summary = run_experiment(small_spec(), ["td-t-9", "bh-t", "storey-t"],
                                 reps=3, alphas=(0.0,), seed=4)
        for method in summary.methods:
            assert summary.cell(method, 0.0).mean_rejections == 0.0

    def test_same_seed_identical_summaries(self):
        a = run_experiment(small_spec(), ["td-t-9"], reps=4, seed=5)
        b = run_experiment(small_spec(), ["td-t-9"], reps=4, seed=5)
        assert render_report_tsv(a) == render_report_tsv(b)
        assert json.dumps(summary_to_json_dict(a)) == \
            json.dumps(summary_to_json_dict(b))

    def test_parallel_runs_byte_identical(self):
        serial = run_experiment(small_spec(), ["td-t-9", "storey-t"], reps=8,
                                seed=6, jobs=1)
        parallel = run_experiment(small_spec(), ["td-t-9", "storey-t"],
                                  reps=8, seed=6, jobs=4)
        assert render_report_tsv(serial) == render_report_tsv(parallel)
        assert json.dumps(summary_to_json_dict(serial)) == \
            json.dumps(summary_to_json_dict(parallel))

    def test_needs_two_replicates(self):
        with pytest.raises(ValueError):
            run_experiment(small_spec(), ["td-t-9"], reps=1, seed=7)

    def test_true_rejections_bounded_by_rejections(self):
        summary = run_experiment(small_spec(), ["td-t-19"], reps=5, seed=8)
        detail = summary.detail["td-t-19"][0.05]
        assert (detail["true_rejections"] <= detail["rejections"]).all()


class TestReports:
    def test_tsv_round_trip_identity(self, tmp_path):
        summary = run_experiment(small_spec(), ["td-t-9", "bh-t"], reps=3,
                                 seed=9)
        text = render_report_tsv(summary)
        assert render_rows_tsv(parse_report_tsv(text)) == text

    def test_markdown_grid_layout(self):
        summary = run_experiment(small_spec(), ["td-t-9", "bh-t"], reps=3,
                                 seed=10)
        md = render_report_markdown(summary, title="demo")
        lines = md.splitlines()
        assert lines[0] == "## demo"
        header_rows = [ln for ln in lines if ln.startswith("| method")]
        assert len(header_rows) == 2  # one per table
        for method in summary.methods:
            assert sum(ln.startswith(f"| {method} ") for ln in lines) == 2

    def test_json_detail_supports_se_recomputation(self, tmp_path):
        summary = run_experiment(small_spec(), ["td-t-9"], reps=5, seed=11)
        paths = emit_report(summary, tmp_path, stem="exp")
        payload = json.loads((tmp_path / "exp.json").read_text())
        fdps = np.array(payload["replicates"]["td-t-9"]["0.05"]["fdp"])
        cell = next(c for c in payload["cells"]
                    if c["method"] == "td-t-9" and c["alpha"] == 0.05)
        assert cell["fdp_se"] == pytest.approx(
            fdps.std(ddof=1) / np.sqrt(len(fdps)))
        assert {p.split("/")[-1] for p in map(str, paths)} == \
            {"exp.tsv", "exp.json", "exp.md"}

    def test_starring_rule(self):
        summary = run_experiment(small_spec(), ["td-t-9"], reps=3, seed=12)
        for (method, alpha), cell in summary.cells.items():
            assert cell.fdr_exceeds_alpha == (cell.mean_fdp > alpha)

    def test_unknown_format_rejected(self, tmp_path):
        summary = run_experiment(small_spec(), ["td-t-9"], reps=3, seed=13)
        with pytest.raises(ValueError):
            emit_report(summary, tmp_path, formats=("xml",))


class TestPresetsAndConfig:
    def test_preset_registry(self):
        assert set(PRESETS) >= {"table1", "table2", "table3", "table4",
                                "table5"}
        t5 = PRESETS["table5"]
        assert t5.alphas == tuple(round(0.01 * k, 2) for k in range(1, 11))
        assert "td-adaptive-t-49" in t5.methods and "td-t-49" in t5.methods
        t1 = PRESETS["table1"]
        assert len(t1.scenarios) == 4
        for _, spec in t1.scenarios:
            assert spec.m == 10000 and spec.n1 == spec.n0 == 10

    def test_config_file_round_trip(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "# demo experiment\n"
            "model = normal\n"
            "m = 500\n"
            "n1 = 5\n"
            "n0 = 5\n"
            "false_fraction = 0.2\n"
            "rho = 0.4\n"
            "effect_cycle = 2,3\n"
            "reps = 7\n"
            "seed = 99\n"
            "methods = td-t-9, bh-t\n"
            "alphas = 0.05, 0.2\n")
        spec, methods, alphas = load_experiment_config(cfg)
        assert spec.m == 500 and spec.rho == 0.4 and spec.reps == 7
        assert spec.effect_cycle == (2.0, 3.0)
        assert methods == ("td-t-9", "bh-t")
        assert alphas == (0.05, 0.2)

    def test_config_rejects_unknown_keys(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("model = normal\nbogus = 1\n")
        with pytest.raises(ValueError, match="bogus"):
            load_experiment_config(cfg)
