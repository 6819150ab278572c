"""Synthetic data generators: moments, dependence, effects, determinism."""

import numpy as np
import pytest

from tdfdr.simgen import (GAMMA_SHAPE_CYCLE, NORMAL_EFFECT_CYCLE, Model,
                          SimSpec, adaptive_small_spec, effect_values,
                          false_null_flags, gen_adaptive_small, gen_dataset,
                          gen_gamma, gen_normal)


def spec_normal(m=1000, rho=0.0, ff=0.1, seed=0, n1=10, n0=10):
    return SimSpec(model=Model.NORMAL, m=m, n1=n1, n0=n0,
                   false_fraction=ff, rho=rho, seed=seed)


class TestNormalModel:
    def test_independent_null_moments(self):
        sim = gen_normal(spec_normal(m=50_000, ff=0.0), 0)
        x = sim.data.samples.ravel()  # one million standard normals
        n = x.size
        assert abs(x.mean()) < 3.0 / np.sqrt(n)
        assert abs(x.var() - 1.0) < 3.0 * np.sqrt(2.0 / n)

    def test_cross_test_correlation_matches_rho(self):
        spec = spec_normal(m=2, rho=0.8, ff=0.0, seed=3, n1=2, n0=2)
        reps = 20_000
        a = np.empty(reps)
        b = np.empty(reps)
        for rep in range(reps):
            sim = gen_normal(spec, rep)
            a[rep] = sim.data.samples[0, 0]
            b[rep] = sim.data.samples[1, 1]
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr - 0.8) < 0.02

    def test_false_null_case_block_cycles(self):
        spec = spec_normal(m=12, ff=1.0 / 3.0)
        effects = effect_values(spec)
        assert effects[:8].tolist() == [0.0] * 8
        assert effects[8:].tolist() == [1.0, 2.0, 3.0, 4.0]
        # empirical check on the case-sample means
        reps = 400
        means = np.zeros((12, spec.n1))
        for rep in range(reps):
            means += gen_normal(spec, rep).data.samples[:, : spec.n1]
        means /= reps
        se = 1.0 / np.sqrt(reps)
        assert np.abs(means[8:] - effects[8:, None]).max() < 4 * se
        assert np.abs(means[:8]).max() < 4 * se

    def test_controls_never_shifted(self):
        spec = spec_normal(m=100, ff=0.5, seed=9)
        sim = gen_normal(spec, 0)
        controls = sim.data.samples[:, spec.n1:]
        assert abs(controls.mean()) < 0.1


class TestGammaModels:
    def test_independent_null_moments(self):
        spec = SimSpec(model=Model.GAMMA_INDEP, m=50_000, n1=10, n0=10,
                       false_fraction=0.0, seed=1)
        x = gen_gamma(spec, 0).data.samples.ravel()
        assert abs(x.mean() - 1.0) < 0.01
        assert abs(x.var() - 1.0) < 0.02

    def test_dependent_mean_and_correlation(self):
        spec = SimSpec(model=Model.GAMMA_DEP, m=2, n1=2, n0=2,
                       false_fraction=0.0, seed=2)
        reps = 20_000
        a = np.empty(reps)
        b = np.empty(reps)
        for rep in range(reps):
            sim = gen_gamma(spec, rep)
            a[rep] = sim.data.samples[0, 0]
            b[rep] = sim.data.samples[1, 1]
        assert abs(a.mean() - 5.0) < 0.05      # shared Gamma(4) + Gamma(1)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr - 0.8) < 0.02          # 4 / 5

    def test_shape_cycle(self):
        spec = SimSpec(model=Model.GAMMA_INDEP, m=10, n1=4, n0=4,
                       false_fraction=0.4, seed=3)
        effects = effect_values(spec)
        assert effects[6:].tolist() == [2.0, 3.0, 4.0, 5.0]
        reps = 600
        case_mean = np.zeros((10, 4))
        for rep in range(reps):
            case_mean += gen_gamma(spec, rep).data.samples[:, :4]
        case_mean /= reps
        # Gamma(k, 1) has mean k; true nulls have shape 1
        expected = np.where(effects > 0, effects, 1.0)
        assert np.abs(case_mean.mean(axis=1) - expected).max() < 0.25


class TestAdaptiveSmall:
    def test_shape_and_flags(self):
        sim = gen_adaptive_small(0, seed=4)
        assert sim.data.samples.shape == (200, 20)
        assert sim.false_null.sum() == 20
        assert sim.false_null[-20:].all()

    def test_false_case_mean_near_four(self):
        reps = 200
        total = 0.0
        for rep in range(reps):
            sim = gen_adaptive_small(rep, seed=5)
            total += sim.data.samples[-20:, :10].mean()
        assert abs(total / reps - 4.0) < 0.05

    def test_true_null_entries_standard_normal(self):
        sim = gen_adaptive_small(0, seed=6)
        x = sim.data.samples[:180].ravel()
        assert abs(x.mean()) < 4.0 / np.sqrt(x.size)
        assert abs(x.var() - 1.0) < 4.0 * np.sqrt(2.0 / x.size)


class TestDeterminismAndFlags:
    @pytest.mark.parametrize("model", [Model.NORMAL, Model.GAMMA_INDEP,
                                       Model.GAMMA_DEP])
    def test_reproducible_per_replicate(self, model):
        spec = SimSpec(model=model, m=50, n1=5, n0=5, false_fraction=0.2,
                       rho=0.4 if model is Model.NORMAL else 0.0, seed=7)
        a = gen_dataset(spec, 3)
        b = gen_dataset(spec, 3)
        c = gen_dataset(spec, 4)
        assert np.array_equal(a.data.samples, b.data.samples)
        assert np.array_equal(a.false_null, b.false_null)
        assert not np.array_equal(a.data.samples, c.data.samples)

    def test_flag_count_and_placement(self):
        spec = spec_normal(m=1003, ff=0.1)
        flags = false_null_flags(spec)
        assert flags.sum() == round(0.1 * 1003)
        assert flags[-flags.sum():].all()
        assert not flags[: 1003 - flags.sum()].any()

    def test_true_null_rows_exchangeable_in_mean(self):
        spec = spec_normal(m=2000, ff=0.1, seed=8)
        sim = gen_normal(spec, 0)
        nulls = sim.data.samples[~sim.false_null]
        case_mean = nulls[:, :10].mean()
        ctrl_mean = nulls[:, 10:].mean()
        # difference of two means over 18000 entries each: sd ~ 0.0105
        assert abs(case_mean - ctrl_mean) < 0.042

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SimSpec(model=Model.NORMAL, m=10, n1=10, n0=10,
                    false_fraction=1.2)
        with pytest.raises(ValueError):
            SimSpec(model=Model.NORMAL, m=10, n1=10, n0=10,
                    false_fraction=0.1, rho=1.0)

    def test_default_cycles(self):
        assert spec_normal().effect_cycle == NORMAL_EFFECT_CYCLE
        gamma = SimSpec(model=Model.GAMMA_INDEP, m=10, n1=5, n0=5,
                        false_fraction=0.1)
        assert gamma.effect_cycle == GAMMA_SHAPE_CYCLE
