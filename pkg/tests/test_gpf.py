import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mtt.gaussians import GaussianParticle, GaussianState
from mtt.gpf import (
    CombinatorialBlowupError,
    ExistenceCombination,
    GpfConfig,
    GpfParticleSet,
    birth_and_prune,
    combination_log_weight,
    combination_weight,
    conditional_kf_update,
    enumerate_combinations,
    estimate_cardinality,
    gpf_predict,
    gpf_step,
    grid_births,
    grid_existence_update,
    marginalize_existence,
    merge_close_particles,
    normalize_combination_weights,
    select_fov_particles,
)
from mtt.kalman import LinearGaussianModel, kf_predict, kf_update
from mtt.motion import constant_velocity_matrix, position_projection
from mtt.regions import FovRegion, Rectangle
from mtt.sensors import CellReturn, MeanSensorModel, detection_prob, make_grid

WORKSPACE = Rectangle(0.0, 0.0, 12.0, 12.0)


def _particle(w, x, y, var=1.0, dim4=True):
    if dim4:
        mean = np.array([x, 0.0, y, 0.0])
        cov = np.diag([var, 0.1, var, 0.1])
    else:
        mean = np.array([x])
        cov = np.array([[var]])
    return GaussianParticle(w, GaussianState(mean, cov))


def _random_psd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + 0.2 * np.eye(n)


def _mean_sensor(r=0.5):
    return MeanSensorModel(R=np.eye(2) * r, position_projection=position_projection())


def _mean_config(**overrides):
    defaults = dict(
        f_matrix=np.eye(4),
        q_matrix=np.zeros((4, 4)),
        sensor=_mean_sensor(),
        clutter_density=1.0 / WORKSPACE.area,
        epsilon=0.001,
    )
    defaults.update(overrides)
    return GpfConfig(**defaults)


class TestPredict:
    def test_identity_is_noop(self):
        pset = GpfParticleSet([_particle(0.5, 1.0, 2.0)])
        out = gpf_predict(pset, np.eye(4), np.zeros((4, 4)))
        assert_allclose(out.particles[0].state.mean, pset.particles[0].state.mean)
        assert_allclose(out.particles[0].state.cov, pset.particles[0].state.cov)

    def test_weights_never_change(self):
        rng = np.random.default_rng(0)
        pset = GpfParticleSet([_particle(w, 0.0, 0.0) for w in (0.2, 0.7, 1.0)])
        out = gpf_predict(pset, rng.standard_normal((4, 4)), _random_psd(rng, 4))
        assert [p.weight for p in out.particles] == [0.2, 0.7, 1.0]

    def test_1d_formula(self):
        pset = GpfParticleSet([GaussianParticle(1.0, GaussianState(1.0, 1.0))])
        out = gpf_predict(pset, [[2.0]], [[1.0]])
        assert_allclose(out.particles[0].state.mean, [2.0])
        assert_allclose(out.particles[0].state.cov, [[5.0]])

    def test_dimension_mismatch(self):
        pset = GpfParticleSet([_particle(0.5, 1.0, 2.0)])
        with pytest.raises(ValueError):
            gpf_predict(pset, np.eye(3), np.zeros((3, 3)))


class TestSelectFov:
    def test_full_workspace(self):
        pset = GpfParticleSet([_particle(0.5, x, x) for x in (0.0, 5.0, 100.0)])
        in_fov, out_fov = select_fov_particles(pset, FovRegion.full())
        assert in_fov == [0, 1, 2]
        assert out_fov == []

    def test_empty_set(self):
        in_fov, out_fov = select_fov_particles(GpfParticleSet([]), FovRegion.full())
        assert in_fov == [] and out_fov == []

    def test_boundary_mean_is_inside(self):
        fov = FovRegion.box(0.0, 0.0, 1.0, 1.0)
        pset = GpfParticleSet([_particle(0.5, 1.0, 1.0), _particle(0.5, 1.0001, 1.0)])
        in_fov, out_fov = select_fov_particles(pset, fov)
        assert in_fov == [0]
        assert out_fov == [1]


class TestEnumerate:
    def test_two_particle_example(self):
        parts = [_particle(0.9, 0.0, 0.0), _particle(0.8, 5.0, 5.0)]
        combos = enumerate_combinations(parts, 0.05)
        priors = {c.bits: c.prior for c in combos}
        assert priors == pytest.approx(
            {(1, 1): 0.72, (1, 0): 0.18, (0, 1): 0.08}
        )
        assert (0, 0) not in priors

    def test_certain_particle(self):
        combos = enumerate_combinations([_particle(1.0, 0.0, 0.0)], 0.5)
        assert len(combos) == 1
        assert combos[0].bits == (1,)
        assert combos[0].prior == 1.0

    def test_threshold_dominates(self):
        parts = [_particle(0.5, 0.0, 0.0), _particle(0.5, 5.0, 5.0)]
        assert enumerate_combinations(parts, 0.25) == []

    def test_blowup_guard(self):
        parts = [_particle(0.5, 0.0, 0.0)] * 21
        with pytest.raises(CombinatorialBlowupError):
            enumerate_combinations(parts, 0.4)

    def test_epsilon_validated(self):
        with pytest.raises(ValueError):
            enumerate_combinations([_particle(0.5, 0.0, 0.0)], 0.0)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 8))
    @settings(max_examples=60, deadline=None)
    def test_matches_exhaustive_enumeration(self, seed, s):
        rng = np.random.default_rng(seed)
        weights = rng.random(s)
        parts = [_particle(w, 0.0, 0.0) for w in weights]
        eps = float(rng.uniform(0.001, 0.5))
        combos = enumerate_combinations(parts, eps)
        got = {c.bits: c.prior for c in combos}
        expected = {}
        for bits in itertools.product((1, 0), repeat=s):
            prior = 1.0
            for w, e in zip(weights, bits):
                prior = prior * (w if e else 1.0 - w)
            if prior > eps:
                expected[bits] = prior
        assert set(got) == set(expected)
        for bits, prior in expected.items():
            assert got[bits] == pytest.approx(prior, rel=1e-12)
        assert len(got) <= 2**s
        assert all(p > eps for p in got.values())


class TestConditionalUpdate:
    def test_single_target_reduces_to_kalman(self):
        rng = np.random.default_rng(4)
        state = GaussianState(rng.standard_normal(4), _random_psd(rng, 4))
        proj = position_projection()
        r = np.eye(2) * 0.5
        z = rng.standard_normal(2)
        got = conditional_kf_update(0, (1,), [GaussianParticle(1.0, state)], z, r, proj)
        model = LinearGaussianModel(F=np.eye(4), Q=np.zeros((4, 4)), H=proj, R=r)
        want = kf_update(state, model, z)
        assert_allclose(got.posterior.mean, want.posterior.mean, rtol=1e-14, atol=0)
        assert_allclose(got.posterior.cov, want.posterior.cov, rtol=1e-14, atol=0)
        assert_allclose(got.gain, want.gain, rtol=1e-14, atol=0)

    def test_two_particle_hand_example(self):
        parts = [
            GaussianParticle(0.9, GaussianState(0.0, 1.0)),
            GaussianParticle(0.9, GaussianState(2.0, 1.0)),
        ]
        out = conditional_kf_update(0, (1, 1), parts, np.array([1.0]), np.array([[1.0]]))
        assert_allclose(out.residual, [0.0], atol=1e-15)
        assert_allclose(out.innovation_cov, [[1.5]])
        assert_allclose(out.gain, [[1.0 / 3.0]])
        assert_allclose(out.posterior.mean, [0.0], atol=1e-15)
        assert_allclose(out.posterior.cov, [[5.0 / 6.0]])

    def test_uninformative_measurement(self):
        parts = [
            GaussianParticle(0.9, GaussianState(0.0, 1.0)),
            GaussianParticle(0.9, GaussianState(2.0, 1.0)),
        ]
        out = conditional_kf_update(
            0, (1, 1), parts, np.array([1.0]), np.array([[1e12]])
        )
        assert_allclose(out.posterior.mean, [0.0], atol=1e-6)
        assert_allclose(out.posterior.cov, [[1.0]], rtol=1e-6)

    def test_inactive_particle_rejected(self):
        parts = [_particle(0.5, 0.0, 0.0), _particle(0.5, 1.0, 1.0)]
        with pytest.raises(ValueError):
            conditional_kf_update(0, (0, 1), parts, np.zeros(2), np.eye(2),
                                  position_projection())

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_gain_matches_closed_form(self, seed):
        # closed form: K = (1/n) S_j (R + (1/n^2) sum_active S_i)^-1
        rng = np.random.default_rng(seed)
        n = int(rng.choice([1, 2, 4]))
        s = int(rng.choice([1, 2, 3]))
        bits = [0] * s
        active = rng.choice(s, size=rng.integers(1, s + 1), replace=False)
        for i in active:
            bits[i] = 1
        j = int(rng.choice(active))
        parts = [
            GaussianParticle(0.5, GaussianState(rng.standard_normal(n), _random_psd(rng, n)))
            for _ in range(s)
        ]
        r = _random_psd(rng, n)
        z = rng.standard_normal(n)
        ne = sum(bits)
        denom = r + sum(parts[i].state.cov for i in range(s) if bits[i]) / ne**2
        closed = parts[j].state.cov @ np.linalg.inv(denom) / ne
        got = conditional_kf_update(j, tuple(bits), parts, z, r).gain
        assert np.linalg.norm(got - closed) <= 1e-10 * np.linalg.norm(closed)


class TestCombinationWeight:
    def test_perfect_match_peak_density(self):
        z = np.array([0.5])
        combo = ExistenceCombination((1,), prior=1.0)
        part = GaussianParticle(1.0, GaussianState(0.5, 1e-4))
        w = combination_weight(combo, [part], z, np.array([[1e-4]]), 1.0)
        peak = 1.0 / math.sqrt(2 * math.pi * 2e-4)
        assert_allclose(w, peak, rtol=1e-12)

    def test_all_zero_combination_uses_clutter(self):
        combo = ExistenceCombination((0,), prior=0.3)
        part = _particle(0.7, 0.0, 0.0)
        w = combination_weight(combo, [part], np.zeros(2), np.eye(2), 1.0 / 144.0)
        assert_allclose(w, 0.3 / 144.0, rtol=1e-12)

    def test_two_active_hand_example(self):
        # mu_c = 1, Sigma_c = (1+1)/4 + 1 = 1.5, density = 1/sqrt(2 pi 1.5)
        parts = [
            GaussianParticle(0.9, GaussianState(0.0, 1.0)),
            GaussianParticle(0.9, GaussianState(2.0, 1.0)),
        ]
        combo = ExistenceCombination((1, 1), prior=0.81)
        w = combination_weight(combo, parts, np.array([1.0]), np.array([[1.0]]), 1.0)
        expected_density = 1.0 / math.sqrt(2 * math.pi * 1.5)
        assert_allclose(w, 0.81 * expected_density, rtol=1e-12)
        assert_allclose(expected_density, 0.3257, atol=5e-5)


class TestMarginalize:
    def _combo(self, bits, weight, states=None):
        combo = ExistenceCombination(tuple(bits), prior=1.0, posterior_weight=weight)
        if states:
            combo.updated_states = states
        return combo

    def test_single_combination(self):
        updated = GaussianState(np.array([3.0]), np.array([[0.5]]))
        combos = [self._combo((1,), 1.0, {0: updated})]
        out = marginalize_existence(combos, [GaussianParticle(0.9, GaussianState(0.0, 1.0))])
        assert out[0].weight == 1.0
        assert_allclose(out[0].state.mean, [3.0])
        assert_allclose(out[0].state.cov, [[0.5]])

    def test_symmetric_split(self):
        s0 = GaussianState(np.array([0.0]), np.array([[1.0]]))
        s1 = GaussianState(np.array([2.0]), np.array([[1.0]]))
        combos = [
            self._combo((1, 0), 0.5, {0: s0}),
            self._combo((0, 1), 0.5, {1: s1}),
        ]
        parts = [
            GaussianParticle(0.5, s0.copy()),
            GaussianParticle(0.5, s1.copy()),
        ]
        out = marginalize_existence(combos, parts)
        assert [p.weight for p in out] == [0.5, 0.5]

    def test_marginal_sums(self):
        s = GaussianState(np.array([0.0]), np.array([[1.0]]))
        combos = [
            self._combo((1, 1), 0.6, {0: s.copy(), 1: s.copy()}),
            self._combo((1, 0), 0.3, {0: s.copy()}),
            self._combo((0, 1), 0.1, {1: s.copy()}),
        ]
        parts = [GaussianParticle(0.9, s.copy()), GaussianParticle(0.9, s.copy())]
        out = marginalize_existence(combos, parts)
        assert_allclose(out[0].weight, 0.9)
        assert_allclose(out[1].weight, 0.7)

    def test_untouched_particle_passes_through(self):
        s = GaussianState(np.array([0.0]), np.array([[1.0]]))
        combos = [self._combo((1, 0), 1.0, {0: s.copy()})]
        parts = [
            GaussianParticle(0.9, s.copy()),
            GaussianParticle(0.4, GaussianState(np.array([5.0]), np.array([[2.0]]))),
        ]
        out = marginalize_existence(combos, parts)
        assert out[1].weight == 0.4
        assert_allclose(out[1].state.mean, [5.0])

    def test_state_is_moment_matched_mixture(self):
        sa = GaussianState(np.array([0.0]), np.array([[1.0]]))
        sb = GaussianState(np.array([2.0]), np.array([[1.0]]))
        combos = [
            self._combo((1,), 0.5, {0: sa}),
            self._combo((1,), 0.5, {0: sb}),
        ]
        out = marginalize_existence(combos, [GaussianParticle(0.5, sa.copy())])
        assert_allclose(out[0].state.mean, [1.0])
        assert_allclose(out[0].state.cov, [[2.0]])

    def test_empty_combinations_rejected(self):
        with pytest.raises(ValueError):
            marginalize_existence([], [_particle(0.5, 0.0, 0.0)])


class TestMergeClose:
    def test_distant_particles_untouched(self):
        pset = GpfParticleSet([_particle(0.5, 0.0, 0.0), _particle(0.5, 10.0, 10.0)])
        out = merge_close_particles(pset, 1.0)
        assert len(out.particles) == 2

    def test_coincident_pair_merges(self):
        pset = GpfParticleSet([_particle(0.3, 2.0, 2.0), _particle(0.4, 2.0, 2.0)])
        out = merge_close_particles(pset, 1.0)
        assert len(out.particles) == 1
        assert_allclose(out.particles[0].weight, 0.7)
        assert_allclose(out.particles[0].state.mean, [2.0, 0.0, 2.0, 0.0])

    def test_three_coincident_merge_to_one(self):
        pset = GpfParticleSet(
            [_particle(w, 1.0, 3.0) for w in (0.5, 0.6, 0.7)]
        )
        out = merge_close_particles(pset, 1.0)
        assert len(out.particles) == 1
        assert out.particles[0].weight == 1.0
        # order independence of the merged mean
        for perm in itertools.permutations((0.5, 0.6, 0.7)):
            pset_p = GpfParticleSet([_particle(w, 1.0, 3.0) for w in perm])
            out_p = merge_close_particles(pset_p, 1.0)
            assert_allclose(
                out_p.particles[0].state.mean, out.particles[0].state.mean, atol=1e-9
            )

    def test_threshold_is_strict(self):
        # position vars 1.0 each -> metric diag(1/2); distance exactly 1
        pset = GpfParticleSet(
            [_particle(0.5, 0.0, 0.0, var=1.0), _particle(0.5, math.sqrt(2.0), 0.0, var=1.0)]
        )
        out = merge_close_particles(pset, 1.0)
        assert len(out.particles) == 2


class TestCardinalityAndPrune:
    def test_cardinality_values(self):
        assert estimate_cardinality(GpfParticleSet([])) == 0.0
        assert estimate_cardinality(
            GpfParticleSet([_particle(1.0, 0, 0), _particle(1.0, 1, 1), _particle(1.0, 2, 2)])
        ) == 3.0
        assert estimate_cardinality(
            GpfParticleSet([_particle(0.5, 0, 0), _particle(0.5, 1, 1)])
        ) == 1.0

    def test_prune_noop(self):
        pset = GpfParticleSet([_particle(0.5, 0, 0), _particle(0.9, 1, 1)])
        out = birth_and_prune(pset, [], 0.01, 10)
        assert len(out.particles) == 2

    def test_prunes_zero_weight(self):
        pset = GpfParticleSet([_particle(0.0, 0, 0), _particle(0.5, 1, 1)])
        out = birth_and_prune(pset, [], 0.01, 10)
        assert len(out.particles) == 1
        assert out.particles[0].weight == 0.5

    def test_caps_at_n_max(self):
        weights = [0.1, 0.9, 0.3, 0.8, 0.5]
        pset = GpfParticleSet([_particle(w, i, i) for i, w in enumerate(weights)])
        out = birth_and_prune(pset, [], 0.0, 3)
        assert sorted(p.weight for p in out.particles) == [0.5, 0.8, 0.9]

    def test_births_appended(self):
        pset = GpfParticleSet([_particle(0.5, 0, 0)])
        births = [_particle(0.1, 3, 3)]
        out = birth_and_prune(pset, births, 0.05, 10)
        assert len(out.particles) == 2


class TestGridUpdate:
    def test_positive_return_raises_weight(self):
        sensor = make_grid(WORKSPACE, p_d=0.9, snr=3.0)
        pset = GpfParticleSet([_particle(0.4, 0.5, 0.5)])
        out = grid_existence_update(pset, [CellReturn(0, 1)], sensor)
        p_hit, p_false = 0.9, detection_prob(0, 0.9, 3.0)
        expected = 0.4 * p_hit / (0.4 * p_hit + 0.6 * p_false)
        assert_allclose(out.particles[0].weight, expected)
        assert out.particles[0].weight > 0.4

    def test_negative_return_lowers_weight(self):
        sensor = make_grid(WORKSPACE, p_d=0.9, snr=3.0)
        pset = GpfParticleSet([_particle(0.4, 0.5, 0.5)])
        out = grid_existence_update(pset, [CellReturn(0, 0)], sensor)
        p_false = detection_prob(0, 0.9, 3.0)
        expected = 0.4 * 0.1 / (0.4 * 0.1 + 0.6 * (1.0 - p_false))
        assert_allclose(out.particles[0].weight, expected)
        assert out.particles[0].weight < 0.4

    def test_unmeasured_particle_unchanged(self):
        sensor = make_grid(WORKSPACE, p_d=0.9, snr=3.0)
        pset = GpfParticleSet([_particle(0.4, 5.5, 5.5)])
        out = grid_existence_update(pset, [CellReturn(0, 1)], sensor)
        assert out.particles[0].weight == 0.4

    def test_births_from_positive_returns(self):
        sensor = make_grid(WORKSPACE, p_d=0.9, snr=3.0)
        births = grid_births([CellReturn(14, 1), CellReturn(20, 0)], sensor, 0.1)
        assert len(births) == 1
        assert births[0].weight == 0.1
        assert_allclose(births[0].state.mean, [2.5, 0.0, 1.5, 0.0])
        assert_allclose(births[0].state.cov, np.diag([1 / 12, 1.0, 1 / 12, 1.0]))


class TestGpfStep:
    def test_single_particle_reduces_to_kalman(self):
        rng = np.random.default_rng(17)
        tau = 1.0
        f = constant_velocity_matrix(tau)
        q = np.diag([0.5, 0.05, 0.5, 0.05])
        sensor = _mean_sensor(r=0.4)
        config = _mean_config(f_matrix=f, q_matrix=q, sensor=sensor)
        model = LinearGaussianModel(F=f, Q=q, H=sensor.position_projection, R=sensor.R)

        state = GaussianState(np.array([6.0, 0.1, 6.0, -0.1]), np.diag([2.0, 0.5, 2.0, 0.5]))
        belief = GpfParticleSet([GaussianParticle(1.0, state.copy())])
        kf_belief = state.copy()
        for _ in range(20):
            z = kf_predict(kf_belief, model).mean[[0, 2]] + rng.standard_normal(2)
            belief = gpf_step(belief, z, config)
            kf_belief = kf_update(kf_predict(kf_belief, model), model, z).posterior
            assert len(belief.particles) == 1
            assert belief.particles[0].weight == 1.0
            assert_allclose(belief.particles[0].state.mean, kf_belief.mean, rtol=1e-10)
            assert_allclose(belief.particles[0].state.cov, kf_belief.cov, rtol=1e-10)

    def test_empty_set_gets_births_only(self):
        sensor = make_grid(WORKSPACE, p_d=0.9, snr=3.0)
        config = GpfConfig(
            f_matrix=np.eye(4), q_matrix=np.zeros((4, 4)), sensor=sensor, w_birth=0.1
        )
        out = gpf_step(GpfParticleSet([]), [CellReturn(0, 1), CellReturn(5, 1)], config)
        assert len(out.particles) == 2
        assert all(p.weight == 0.1 for p in out.particles)
        assert out.step == 1

    def test_two_separated_particles_brute_force(self):
        # oracle: direct evaluation over the four combinations
        parts = [_particle(0.9, 2.0, 2.0), _particle(0.9, 9.0, 9.0)]
        sensor = _mean_sensor(r=0.5)
        clutter = 1.0 / WORKSPACE.area
        config = _mean_config(sensor=sensor, clutter_density=clutter, epsilon=0.001)
        z = np.array([5.5, 5.5])

        def density(mu, var):
            d = z - mu
            cov = np.eye(2) * (var + 0.5)
            quad = d @ np.linalg.inv(cov) @ d
            return math.exp(-0.5 * quad) / (2 * math.pi * math.sqrt(np.linalg.det(cov)))

        raw = {}
        pos = [np.array([2.0, 2.0]), np.array([9.0, 9.0])]
        for bits in itertools.product((0, 1), repeat=2):
            prior = 1.0
            for w, e in zip((0.9, 0.9), bits):
                prior *= w if e else 1.0 - w
            if prior <= config.epsilon:
                continue
            active = [i for i, e in enumerate(bits) if e]
            if not active:
                raw[bits] = prior * clutter
            else:
                n = len(active)
                mu_c = sum(pos[i] for i in active) / n
                var_c = n * 1.0 / n**2
                raw[bits] = prior * density(mu_c, var_c)
        total = sum(raw.values())
        expected_w1 = (raw[(1, 0)] + raw[(1, 1)]) / total
        expected_w2 = (raw[(0, 1)] + raw[(1, 1)]) / total

        before = estimate_cardinality(GpfParticleSet(parts))
        out = gpf_step(GpfParticleSet([p.copy() for p in parts]), z, config)
        assert_allclose(estimate_cardinality(out), expected_w1 + expected_w2, rtol=1e-9)
        assert estimate_cardinality(out) > before - 1e-12
        assert estimate_cardinality(out) > 1.8

    def test_degenerate_enumeration_skips_update(self):
        parts = [_particle(0.5, 2.0, 2.0), _particle(0.5, 9.0, 9.0)]
        config = _mean_config(epsilon=0.25)
        out = gpf_step(GpfParticleSet([p.copy() for p in parts]), np.array([5.0, 5.0]), config)
        assert out.degenerate_step
        assert [p.weight for p in out.particles] == [0.5, 0.5]
        assert_allclose(out.particles[0].state.mean, parts[0].state.mean)

    def test_out_of_fov_particles_only_predicted(self):
        fov = FovRegion.box(0.0, 0.0, 5.0, 5.0)
        parts = [_particle(0.9, 2.0, 2.0), _particle(0.9, 9.0, 9.0)]
        config = _mean_config(fov=fov)
        out = gpf_step(GpfParticleSet([p.copy() for p in parts]), np.array([2.0, 2.0]), config)
        # the out-of-view particle keeps its predicted (here: unchanged) state
        assert out.particles[1].weight == 0.9
        assert_allclose(out.particles[1].state.mean, parts[1].state.mean)
        assert out.particles[0].weight != 0.9

    def test_deterministic(self):
        parts = [_particle(0.8, 2.0, 2.0), _particle(0.7, 4.0, 4.0)]
        config = _mean_config()
        z = np.array([3.0, 3.0])
        a = gpf_step(GpfParticleSet([p.copy() for p in parts]), z, config)
        b = gpf_step(GpfParticleSet([p.copy() for p in parts]), z, config)
        assert [p.weight for p in a.particles] == [p.weight for p in b.particles]
        for pa, pb in zip(a.particles, b.particles):
            assert np.array_equal(pa.state.mean, pb.state.mean)
            assert np.array_equal(pa.state.cov, pb.state.cov)

    def test_invariants_over_random_run(self):
        rng = np.random.default_rng(33)
        config = _mean_config(
            f_matrix=constant_velocity_matrix(0.1),
            q_matrix=np.diag([0.05, 0.01, 0.05, 0.01]),
        )
        parts = [
            _particle(float(rng.uniform(0.3, 1.0)), float(rng.uniform(2, 10)), float(rng.uniform(2, 10)))
            for _ in range(4)
        ]
        belief = GpfParticleSet(parts)
        for _ in range(30):
            z = rng.uniform(0.0, 12.0, size=2)
            belief = gpf_step(belief, z, config)
            card = estimate_cardinality(belief)
            assert 0.0 <= card <= len(belief.particles)
            for p in belief.particles:
                assert 0.0 <= p.weight <= 1.0
                assert_allclose(p.state.cov, p.state.cov.T, atol=1e-9)
                assert np.linalg.eigvalsh(p.state.cov).min() >= -1e-9

    def test_grid_run_invariants(self):
        rng = np.random.default_rng(44)
        sensor = make_grid(WORKSPACE, p_d=0.9, snr=10.0, m_cells=36)
        config = GpfConfig(
            f_matrix=constant_velocity_matrix(0.1),
            q_matrix=np.diag([0.02, 0.002, 0.02, 0.002]),
            sensor=sensor,
            w_prune=0.05,
            d_thresh=4.0,
            n_max=50,
        )
        belief = GpfParticleSet([])
        truth = [np.array([3.0, 0.0, 3.0, 0.0]), np.array([9.0, 0.0, 9.0, 0.0])]
        from mtt.sensors import grid_measure, select_cells

        for k in range(40):
            cells = select_cells("random", sensor, rng, step=k)
            returns = grid_measure(truth, cells, sensor, rng)
            belief = gpf_step(belief, returns, config)
            assert len(belief.particles) <= 50
            for p in belief.particles:
                assert 0.0 <= p.weight <= 1.0
                assert np.linalg.eigvalsh(p.state.cov).min() >= -1e-9
        assert estimate_cardinality(belief) > 0.5

    def test_normalized_combination_family(self):
        parts = [_particle(0.9, 2.0, 2.0), _particle(0.8, 4.0, 4.0)]
        sensor = _mean_sensor()
        combos = enumerate_combinations(parts, 0.001)
        logs = [
            combination_log_weight(c, parts, np.array([3.0, 3.0]), sensor.R, 1.0 / 144,
                                   sensor.position_projection)
            for c in combos
        ]
        normalize_combination_weights(combos, logs)
        assert abs(sum(c.posterior_weight for c in combos) - 1.0) <= 1e-9
