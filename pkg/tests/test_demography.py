"""Leslie projection, the regime-switching model, and its inference."""
import itertools
import math

import numpy as np
import pytest

from chronoflow import (
    NonIdentifiableWarning,
    NotPrimitiveError,
    NumericalError,
    ParseError,
    SchemaError,
)
from chronoflow.demography import (
    AscentConfig,
    DemographicHmm,
    HiddenPath,
    LeslieModel,
    Observation,
    forward_log_likelihood,
    hmm_from_dict,
    hmm_to_dict,
    infer_transitions,
    leslie_matrix,
    parse_observations,
    project_population,
    sample_radiocarbon,
    simulate_hmm,
    stable_structure,
    write_observations,
)

GOLDEN = LeslieModel([1.0, 1.0], [0.5])
GOLDEN_GROWTH = (1.0 + math.sqrt(3.0)) / 2.0


def two_regime_model(w, T, dynamics=None, z0="stable", p0=(0.5, 0.5)):
    dynamics = dynamics or (LeslieModel([0.9, 0.9], [0.8]),
                            LeslieModel([0.25, 0.25], [0.45]))
    return DemographicHmm(
        reference_dynamics=tuple(dynamics),
        climate_states=1,
        transition_matrices=np.asarray(w, dtype=float),
        climate_path=np.zeros(T, dtype=np.int64),
        initial_state_distribution=np.asarray(p0, dtype=float),
        z0_policy=z0,
    )


def brute_force_loglik(model, observations):
    """Reference likelihood: explicit sum over every hidden path."""
    n = model.n_regimes
    horizon = model.horizon
    mats = [leslie_matrix(m) for m in model.reference_dynamics]
    if isinstance(model.z0_policy, str):
        z0s = [stable_structure(m).age_structure
               for m in model.reference_dynamics]
    else:
        z0s = [np.asarray(model.z0_policy, dtype=float)] * n
    c14 = {}
    skeletal = []
    for obs in observations:
        if obs.kind == "c14":
            c14[obs.period] = c14.get(obs.period, 0) + obs.payload["count"]
        else:
            skeletal.append((obs.payload["age_class"],
                             *obs.payload["window"]))
    m_total = sum(c14.values())

    def log_or_neg_inf(value):
        return math.log(value) if value > 0 else -math.inf

    total_ll = -math.inf
    for path in itertools.product(range(n), repeat=horizon):
        lp = log_or_neg_inf(model.initial_state_distribution[path[0]])
        for t in range(horizon - 1):
            lp += log_or_neg_inf(
                model.transition_matrices[model.climate_path[t],
                                          path[t + 1], path[t]])
        zs = [np.array(z0s[path[0]], dtype=float)]
        for t in range(horizon - 1):
            zs.append(mats[path[t]] @ zs[-1])
        totals = np.array([z.sum() for z in zs])
        for t, m in c14.items():
            lp += m * log_or_neg_inf(totals[t])
        if m_total:
            lp -= m_total * log_or_neg_inf(totals.sum())
        for j, t0, t1 in skeletal:
            num = sum(zs[t][j] for t in range(t0, t1 + 1))
            den = sum(totals[t] for t in range(t0, t1 + 1))
            lp += log_or_neg_inf(num) - log_or_neg_inf(den) \
                if den > 0 else -math.inf
        total_ll = np.logaddexp(total_ll, lp)
    return float(total_ll)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def test_leslie_matrix_layout():
    model = LeslieModel([0.1, 0.7, 0.4], [0.9, 0.6])
    np.testing.assert_allclose(leslie_matrix(model),
                               [[0.1, 0.7, 0.4],
                                [0.9, 0.0, 0.0],
                                [0.0, 0.6, 0.0]])
    np.testing.assert_allclose(leslie_matrix(LeslieModel([1.3], [])), [[1.3]])


def test_leslie_model_validation():
    with pytest.raises(SchemaError):
        LeslieModel([1.0, 1.0], [0.5, 0.5])
    with pytest.raises(SchemaError):
        LeslieModel([-0.1, 1.0], [0.5])
    with pytest.raises(SchemaError):
        LeslieModel([1.0, 1.0], [1.5])
    with pytest.raises(SchemaError):
        LeslieModel([1.0], [], age_spacing=0.0)


def test_project_scales_eigenvector():
    stable = stable_structure(GOLDEN)
    out = project_population([GOLDEN] * 5, stable.age_structure)
    for t in range(6):
        np.testing.assert_allclose(
            out[t], GOLDEN_GROWTH ** t * stable.age_structure, rtol=1e-9)


def test_project_zero_population_stays_zero():
    out = project_population([GOLDEN] * 3, [0.0, 0.0])
    np.testing.assert_array_equal(out, np.zeros((4, 2)))


def test_project_errors():
    with pytest.raises(SchemaError):
        project_population([GOLDEN], [1.0, -1.0])
    with pytest.raises(SchemaError):
        project_population([LeslieModel([1.0], [])], [1.0, 1.0])


def test_stable_structure_golden():
    stable = stable_structure(GOLDEN)
    assert abs(stable.growth_factor - GOLDEN_GROWTH) <= 1e-9
    a = leslie_matrix(GOLDEN)
    lam, u, v = stable.growth_factor, stable.age_structure, \
        stable.reproductive_value
    assert abs(u.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(a @ u, lam * u, atol=1e-9)
    np.testing.assert_allclose(v @ a, lam * v, atol=1e-9)
    assert abs(v @ u - 1.0) <= 1e-9


def test_stable_structure_single_class():
    stable = stable_structure(LeslieModel([1.2], []))
    assert abs(stable.growth_factor - 1.2) <= 1e-12
    np.testing.assert_allclose(stable.age_structure, [1.0])


def test_stable_structure_rejects_periodic():
    with pytest.raises(NotPrimitiveError):
        stable_structure(LeslieModel([0.0, 1.0], [1.0]))


def test_projection_converges_to_stable():
    stable = stable_structure(GOLDEN)
    out = project_population([GOLDEN] * 200, [1.0, 0.0])
    shares = out[-1] / out[-1].sum()
    np.testing.assert_allclose(shares, stable.age_structure, atol=1e-6)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def test_simulate_single_regime_is_deterministic_projection():
    model = two_regime_model([[[1.0]]], T=6,
                             dynamics=(GOLDEN,), p0=(1.0,))
    path, z, totals = simulate_hmm(model, 6, seed=0)
    np.testing.assert_array_equal(path.q, np.zeros(6, dtype=np.int64))
    stable = stable_structure(GOLDEN)
    expected = project_population([GOLDEN] * 5, stable.age_structure)
    np.testing.assert_allclose(z, expected, rtol=1e-12)
    np.testing.assert_allclose(totals, expected.sum(axis=1), rtol=1e-12)


def test_simulate_identity_matrix_absorbs():
    eye = np.eye(2)[None, :, :]
    for start, regime in ((np.array([1.0, 0.0]), 0),
                          (np.array([0.0, 1.0]), 1)):
        model = two_regime_model(eye, T=12, p0=start)
        path, _, _ = simulate_hmm(model, 12, seed=3)
        np.testing.assert_array_equal(path.q, np.full(12, regime))


def test_simulate_uniform_matrix_visits_evenly():
    balanced = LeslieModel([0.5, 1.0], [0.5])  # growth factor exactly 1
    model = two_regime_model(np.full((1, 2, 2), 0.5), T=100_000,
                             dynamics=(balanced, balanced))
    path, _, totals = simulate_hmm(model, 100_000, seed=7)
    frequency = path.q.mean()
    assert abs(frequency - 0.5) < 0.01
    assert np.isfinite(totals).all()


def test_simulate_reproducible_and_validated():
    model = two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=10)
    a, _, _ = simulate_hmm(model, 10, seed=5)
    b, _, _ = simulate_hmm(model, 10, seed=5)
    np.testing.assert_array_equal(a.q, b.q)
    with pytest.raises(SchemaError):
        simulate_hmm(model, 0, seed=0)
    with pytest.raises(SchemaError):
        simulate_hmm(model, 11, seed=0)  # longer than the climate path
    blank = DemographicHmm((GOLDEN, GOLDEN), 1, None,
                           np.zeros(4, dtype=np.int64), [0.5, 0.5])
    with pytest.raises(SchemaError):
        simulate_hmm(blank, 4, seed=0)


def test_model_validation():
    with pytest.raises(SchemaError):
        two_regime_model([[[0.8, 0.3], [0.1, 0.7]]], T=4)  # columns != 1
    with pytest.raises(SchemaError):
        DemographicHmm((GOLDEN,), 1, [[[1.0]]],
                       np.array([0, 1]), [1.0])  # climate index out of range
    with pytest.raises(SchemaError):
        two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=4, p0=(0.9, 0.9))
    with pytest.raises(SchemaError):
        two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=4, z0=[1.0])


def test_sample_radiocarbon_counts_and_support():
    totals = np.array([1.0, 0.0, 3.0])
    obs = sample_radiocarbon(totals, 400, seed=2)
    drawn = {o.period: o.payload["count"] for o in obs}
    assert sum(drawn.values()) == 400
    assert 1 not in drawn
    assert abs(drawn[2] / 400 - 0.75) < 0.05
    again = sample_radiocarbon(totals, 400, seed=2)
    assert [(o.period, o.payload["count"]) for o in again] == \
        sorted(drawn.items())


def test_sample_radiocarbon_errors():
    with pytest.raises(SchemaError):
        sample_radiocarbon([1.0, -1.0], 5, seed=0)
    with pytest.raises(SchemaError):
        sample_radiocarbon([0.0, 0.0], 5, seed=0)
    with pytest.raises(SchemaError):
        sample_radiocarbon([1.0], -1, seed=0)


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------

def test_loglik_empty_observations():
    model = two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=4)
    assert forward_log_likelihood(model, []) == 0.0


def test_loglik_matches_brute_force():
    rng = np.random.default_rng(13)
    for n, horizon in itertools.product((1, 2), (1, 3, 6)):
        w = rng.dirichlet(np.ones(n), size=(1, n)).transpose(0, 2, 1)
        dynamics = tuple(
            LeslieModel(rng.uniform(0.2, 1.2, 2), rng.uniform(0.3, 0.9, 1))
            for _ in range(n))
        model = DemographicHmm(dynamics, 1, w,
                               np.zeros(horizon, dtype=np.int64),
                               rng.dirichlet(np.ones(n)),
                               z0_policy=rng.uniform(0.5, 2.0, 2))
        obs = [Observation(int(rng.integers(horizon)), "c14", {"count": 3}),
               Observation(0, "c14", {"count": 1})]
        if horizon >= 3:
            obs.append(Observation(0, "skeletal",
                                   {"age_class": 1, "window": [0, 2]}))
        got = forward_log_likelihood(model, obs)
        want = brute_force_loglik(model, obs)
        assert abs(got - want) < 1e-11, (n, horizon)


def test_loglik_stable_start_matches_brute_force():
    model = two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=6)
    obs = [Observation(2, "c14", {"count": 4}),
           Observation(5, "c14", {"count": 2}),
           Observation(1, "skeletal", {"age_class": 0, "window": [1, 4]})]
    got = forward_log_likelihood(model, obs)
    want = brute_force_loglik(model, obs)
    assert abs(got - want) < 1e-12


def test_loglik_order_independent():
    model = two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=6)
    obs = [Observation(2, "c14", {"count": 1}),
           Observation(2, "c14", {"count": 3}),
           Observation(0, "skeletal", {"age_class": 1, "window": [0, 3]})]
    assert forward_log_likelihood(model, obs) == \
        forward_log_likelihood(model, list(reversed(obs)))


def test_loglik_impossible_data_is_neg_inf(caplog):
    dead = LeslieModel([0.0, 0.0], [0.0])
    model = two_regime_model([[[1.0]]], T=3, dynamics=(dead,),
                             z0=[1.0, 0.0], p0=(1.0,))
    obs = [Observation(2, "c14", {"count": 1})]
    with caplog.at_level("WARNING", logger="chronoflow.demography"):
        assert forward_log_likelihood(model, obs) == -np.inf
    assert any("probability 0" in r.message for r in caplog.records)


def test_loglik_path_cap():
    model = two_regime_model(
        np.full((1, 3, 3), 1.0 / 3.0), T=14,
        dynamics=(GOLDEN, GOLDEN, GOLDEN), p0=(0.4, 0.3, 0.3))
    with pytest.raises(NumericalError):
        forward_log_likelihood(model,
                               [Observation(0, "c14", {"count": 1})])


def test_loglik_validates_observations():
    model = two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=4)
    with pytest.raises(SchemaError):
        forward_log_likelihood(model, [Observation(9, "c14", {"count": 1})])
    with pytest.raises(SchemaError):
        forward_log_likelihood(
            model, [Observation(0, "skeletal",
                                {"age_class": 7, "window": [0, 1]})])
    with pytest.raises(SchemaError):
        forward_log_likelihood(
            model, [Observation(0, "skeletal",
                                {"age_class": 0, "window": [0, 9]})])
    blank = DemographicHmm((GOLDEN, GOLDEN), 1, None,
                           np.zeros(4, dtype=np.int64), [0.5, 0.5])
    with pytest.raises(SchemaError):
        forward_log_likelihood(blank, [Observation(0, "c14", {"count": 1})])


def test_loglik_accepts_tuple_observations():
    model = two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=4)
    a = forward_log_likelihood(model, [(1, "c14", {"count": 2})])
    b = forward_log_likelihood(model, [Observation(1, "c14", {"count": 2})])
    assert a == b


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

def test_infer_single_regime_trivial():
    model = two_regime_model([[[1.0]]], T=6, dynamics=(GOLDEN,), p0=(1.0,))
    obs = [Observation(3, "c14", {"count": 5})]
    result = infer_transitions(model, obs, seed=0)
    assert result.converged
    np.testing.assert_allclose(result.model.transition_matrices, [[[1.0]]])
    assert result.log_likelihood == forward_log_likelihood(model, obs)
    np.testing.assert_allclose(result.intervals, 1.0)


def test_infer_flags_unidentifiable_transitions():
    same = LeslieModel([0.9, 0.9], [0.8])
    truth = two_regime_model([[[0.6, 0.4], [0.4, 0.6]]], T=8,
                             dynamics=(same, same))
    _, _, totals = simulate_hmm(truth, 8, seed=3)
    obs = sample_radiocarbon(totals, 100, seed=4)
    skeleton = two_regime_model([[[0.6, 0.4], [0.4, 0.6]]], T=8,
                                dynamics=(same, same))
    with pytest.warns(NonIdentifiableWarning):
        result = infer_transitions(skeleton, obs, seed=0)
    np.testing.assert_allclose(result.intervals[..., 0], 0.0)
    np.testing.assert_allclose(result.intervals[..., 1], 1.0)
    cols = result.model.transition_matrices.sum(axis=1)
    np.testing.assert_allclose(cols, 1.0, atol=1e-9)


def test_infer_errors():
    model = two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=4)
    with pytest.raises(SchemaError):
        infer_transitions(model, [], seed=0)
    big = DemographicHmm(
        (GOLDEN,) * 5, 1, np.full((1, 5, 5), 0.2),
        np.zeros(3, dtype=np.int64), np.full(5, 0.2))
    with pytest.raises(SchemaError):
        infer_transitions(big, [Observation(0, "c14", {"count": 1})])


def test_ascent_config_validation():
    with pytest.raises(SchemaError):
        AscentConfig(n_starts=0)
    with pytest.raises(SchemaError):
        AscentConfig(initial_step=0.1, min_step=0.2)
    with pytest.raises(SchemaError):
        AscentConfig(profile_points=2)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_observation_validation():
    with pytest.raises(SchemaError):
        Observation(0, "pottery", {})
    with pytest.raises(SchemaError):
        Observation(-1, "c14", {"count": 1})
    with pytest.raises(SchemaError):
        Observation(0, "c14", {"count": -2})
    with pytest.raises(SchemaError):
        Observation(0, "skeletal", {"age_class": 0, "window": [3, 1]})


def test_observations_file_roundtrip(tmp_path):
    path = tmp_path / "obs.csv"
    original = [Observation(2, "c14", {"count": 7}),
                Observation(0, "skeletal",
                            {"age_class": 1, "window": [0, 3]})]
    write_observations(path, original)
    assert parse_observations(path) == original


def test_parse_observations_errors(tmp_path):
    path = tmp_path / "obs.csv"
    path.write_text("period,kind\n", encoding="utf-8")
    with pytest.raises(ParseError):
        parse_observations(path)
    path.write_text("period,kind,payload\nx,c14,\"{}\"\n", encoding="utf-8")
    with pytest.raises(ParseError):
        parse_observations(path)
    path.write_text('period,kind,payload\n0,c14,"{""count"": -1}"\n',
                    encoding="utf-8")
    with pytest.raises(ParseError):
        parse_observations(path)
    with pytest.raises(ParseError):
        parse_observations(tmp_path / "missing.csv")


def test_hmm_dict_roundtrip():
    model = two_regime_model([[[0.8, 0.3], [0.2, 0.7]]], T=5,
                             z0=[0.6, 0.4])
    back = hmm_from_dict(hmm_to_dict(model))
    np.testing.assert_allclose(back.transition_matrices,
                               model.transition_matrices)
    np.testing.assert_array_equal(back.climate_path, model.climate_path)
    np.testing.assert_allclose(back.z0_policy, model.z0_policy)
    blank = DemographicHmm((GOLDEN, GOLDEN), 1, None,
                           np.zeros(4, dtype=np.int64), [0.5, 0.5])
    assert hmm_from_dict(hmm_to_dict(blank)).transition_matrices is None
    with pytest.raises(SchemaError):
        hmm_from_dict({"climate_states": 1})
