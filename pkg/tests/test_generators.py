import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from eivpcr import BadParam, BadShape, check_subspace_inclusion
from eivpcr.simlab import (
    GeneratorSpec,
    Role,
    Shift,
    child,
    corrupt,
    gen_factor_uv,
    gen_panel_ife,
    gen_prob_pca,
    gen_rowspan_violation,
    substream,
)

# corrupt(zeros(500, 500), sigma=0.3, rho=0.7, seed=99): observed cells
# counted once with np.count_nonzero and frozen (binomial mean 175000)
_CORRUPT_COUNT = 174_943


def _numerical_rank(x):
    s = np.linalg.svd(x, compute_uv=False)
    return int(np.count_nonzero(s > 1e-9 * s[0]))


class TestStreams:
    def test_child_extends_spawn_key(self):
        ss = child(7, 3)
        assert ss.entropy == 7 and ss.spawn_key == (3,)
        ss2 = child(ss, 5)
        assert ss2.entropy == 7 and ss2.spawn_key == (3, 5)

    def test_substream_reproducible(self):
        a = substream(11, Role.NOISE).standard_normal(5)
        b = substream(11, Role.NOISE).standard_normal(5)
        assert_array_equal(a, b)

    def test_roles_are_disjoint_streams(self):
        a = substream(11, Role.NOISE).standard_normal(5)
        b = substream(11, Role.MASK).standard_normal(5)
        assert not np.array_equal(a, b)

    def test_int_seed_equals_empty_child(self):
        assert_array_equal(gen_prob_pca(6, 8, 2, 5), gen_prob_pca(6, 8, 2, child(5)))


class TestGeneratorSpec:
    def test_label_round_trip(self):
        spec = GeneratorSpec(
            kind="factor_uv", n=10, m=20, p=30, r=5,
            noise_sigma=0.5, mask_rho=0.9, seed=1, shift=Shift.U2,
        )
        assert spec.label() == "factor_uv/n10/m20/p30/r5/sig0.5/rho0.9/U2"

    def test_bad_kind(self):
        with pytest.raises(BadParam):
            GeneratorSpec(kind="mystery", n=4, m=4, p=4, r=2,
                          noise_sigma=0.1, mask_rho=1.0, seed=0)

    def test_rank_exceeds_dims(self):
        with pytest.raises(BadShape):
            GeneratorSpec(kind="prob_pca", n=4, m=0, p=4, r=5,
                          noise_sigma=0.1, mask_rho=1.0, seed=0)

    def test_bad_rho(self):
        with pytest.raises(BadParam):
            GeneratorSpec(kind="prob_pca", n=4, m=0, p=4, r=2,
                          noise_sigma=0.1, mask_rho=0.0, seed=0)


class TestProbPca:
    def test_shape_and_rank(self):
        x = gen_prob_pca(40, 27, 3, 0)
        assert x.shape == (40, 27)
        assert _numerical_rank(x) == 3

    def test_stream_rederivation(self):
        # white box: the exact draws behind X = X_r Q
        rng = substream(17, Role.LATENT)
        x_r = rng.standard_normal((12, 4))
        q = rng.choice([-1.0, 1.0], size=(4, 9)) / math.sqrt(4)
        assert np.all(np.isin(np.abs(q * math.sqrt(4)), [1.0]))
        assert_array_equal(gen_prob_pca(12, 9, 4, 17), x_r @ q)

    def test_seeds_differ(self):
        assert not np.array_equal(gen_prob_pca(8, 8, 2, 0), gen_prob_pca(8, 8, 2, 1))

    def test_bad_dims(self):
        with pytest.raises(BadShape):
            gen_prob_pca(4, 3, 5, 0)


class TestFactorUv:
    def test_train_is_shared_across_shifts(self):
        trains = [gen_factor_uv(30, 20, 25, 3, shift=s, r=4)[0] for s in Shift]
        for other in trains[1:]:
            assert_array_equal(trains[0], other)

    def test_test_factors_differ_across_shifts(self):
        tests = [gen_factor_uv(30, 20, 25, 3, shift=s, r=4)[1] for s in Shift]
        for i in range(len(tests)):
            for j in range(i + 1, len(tests)):
                assert not np.array_equal(tests[i], tests[j])

    def test_rowspace_inclusion_for_every_shift(self):
        for s in Shift:
            x_tr, x_te = gen_factor_uv(30, 20, 25, 3, shift=s, r=4)
            assert check_subspace_inclusion(x_tr, x_te, 1e-8).included

    def test_stream_rederivation(self):
        rng = substream(9, Role.LATENT)
        u = rng.standard_normal((15, 3))
        v = rng.standard_normal((10, 3))
        x_tr, x_te = gen_factor_uv(15, 12, 10, 9, shift=Shift.N2, r=3)
        assert_array_equal(x_tr, u @ v.T)
        u_test = math.sqrt(5.0) * substream(
            9, Role.LATENT_TEST, int(Shift.N2)
        ).standard_normal((12, 3))
        assert_array_equal(x_te, u_test @ v.T)

    def test_shift_moments_and_support(self):
        m, r = 2000, 10
        draws = {
            s: gen_factor_uv(11, m, 11, 123, shift=s, r=r)[1] for s in Shift
        }
        # recover the raw factors via the shared right factors
        rng = substream(123, Role.LATENT)
        rng.standard_normal((11, r))
        v = rng.standard_normal((11, r))
        v_pinv = np.linalg.pinv(v.T)
        for s, want_var, bound in (
            (Shift.N1, 1.0, None),
            (Shift.N2, 5.0, None),
            (Shift.U1, 1.0, math.sqrt(3.0)),
            (Shift.U2, 5.0, math.sqrt(15.0)),
        ):
            u_test = draws[s] @ v_pinv
            var = float(np.var(u_test))
            assert var == pytest.approx(want_var, abs=0.25), s
            if bound is not None:
                top = float(np.abs(u_test).max())
                assert top <= bound + 1e-9, s
                assert top >= 0.99 * bound, s


class TestRowspanViolation:
    def test_requires_square_split(self):
        with pytest.raises(BadShape):
            gen_rowspan_violation(10, 12, 8, 0, r=2)

    def test_inclusion_and_violation(self):
        x_tr, x_ok, x_bad = gen_rowspan_violation(100, 100, 100, 5)
        assert check_subspace_inclusion(x_tr, x_ok, 1e-8).included
        chk = check_subspace_inclusion(x_tr, x_bad, 1e-8)
        assert not chk.included
        assert chk.leakage > 0.5

    def test_bad_design_shares_left_factors(self):
        x_tr, _, x_bad = gen_rowspan_violation(60, 60, 50, 2, r=4)
        # same column space (left factors), different row space
        assert check_subspace_inclusion(x_tr.T, x_bad.T, 1e-8).included

    def test_stream_rederivation(self):
        rng = substream(4, Role.LATENT)
        u = rng.standard_normal((20, 5))
        v = rng.standard_normal((15, 5))
        u_ok = math.sqrt(5.0) * substream(4, Role.LATENT_TEST).standard_normal((20, 5))
        v_bad = substream(4, Role.LATENT_TEST_BAD).standard_normal((15, 5))
        x_tr, x_ok, x_bad = gen_rowspan_violation(20, 20, 15, 4, r=5)
        assert_array_equal(x_tr, u @ v.T)
        assert_array_equal(x_ok, u_ok @ v.T)
        assert_array_equal(x_bad, u @ v_bad.T)


class TestPanelIfe:
    def test_noiseless_panel_is_exactly_latent(self):
        trial = gen_panel_ife(n=12, m=6, p=8, r=3, sigma=0.0, seed=2)
        assert_array_equal(trial.panel.donors_pre().values, trial.latent_donors[:12])
        assert_array_equal(trial.panel.donors_post().values, trial.latent_donors[12:])
        assert_array_equal(
            trial.panel.target_pre(), trial.latent_donors[:12] @ trial.weights
        )
        assert_array_equal(trial.truth, trial.latent_donors[12:] @ trial.weights)

    def test_shapes_and_labels(self):
        trial = gen_panel_ife(n=10, m=4, p=6, r=2, sigma=0.3, seed=3)
        assert (trial.panel.n, trial.panel.m, trial.panel.p) == (10, 4, 6)
        assert trial.truth.shape == (4,)
        assert trial.panel.unit_labels[0] == "target"
        assert trial.panel.unit_labels[1] == "donor1"
        assert _numerical_rank(trial.latent_donors) == 2

    def test_noise_perturbs_donors(self):
        trial = gen_panel_ife(n=10, m=4, p=6, r=2, sigma=0.3, seed=3)
        assert not np.array_equal(
            trial.panel.donors_pre().values, trial.latent_donors[:10]
        )

    def test_weights_rederivation(self):
        trial = gen_panel_ife(n=5, m=3, p=7, r=2, sigma=0.1, seed=8)
        expected = substream(8, Role.WEIGHTS).standard_normal(7) / math.sqrt(7)
        assert_array_equal(trial.weights, expected)

    def test_bad_sigma(self):
        with pytest.raises(BadParam):
            gen_panel_ife(n=5, m=3, p=7, r=2, sigma=-0.1, seed=0)


class TestCorrupt:
    def test_identity_when_clean(self):
        x = np.random.default_rng(0).normal(size=(6, 5))
        z = corrupt(x, 0.0, 1.0, 3)
        assert z.mask.all()
        assert_array_equal(z.values, x)

    def test_noise_rederivation(self):
        x = np.zeros((7, 4))
        z = corrupt(x, 0.5, 1.0, 21)
        w = 0.5 * substream(21, Role.NOISE).standard_normal((7, 4))
        assert_array_equal(z.values, w)

    def test_frozen_mask_count(self):
        z = corrupt(np.zeros((500, 500)), 0.3, 0.7, 99)
        assert z.observed_count == _CORRUPT_COUNT

    def test_deterministic(self):
        x = np.random.default_rng(1).normal(size=(8, 8))
        a = corrupt(x, 0.2, 0.8, 5)
        b = corrupt(x, 0.2, 0.8, 5)
        assert_array_equal(a.values, b.values)
        assert_array_equal(a.mask, b.mask)
        c = corrupt(x, 0.2, 0.8, 6)
        assert not np.array_equal(a.mask, c.mask)

    def test_bad_params(self):
        x = np.ones((3, 3))
        with pytest.raises(BadParam):
            corrupt(x, -0.1, 1.0, 0)
        for rho in (0.0, 1.2):
            with pytest.raises(BadParam):
                corrupt(x, 0.1, rho, 0)
        with pytest.raises(BadShape):
            corrupt(np.ones(5), 0.1, 0.5, 0)
