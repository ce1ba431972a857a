import numpy as np
import pytest
from pydantic import ValidationError

from com.mhire.dlm.common.errors import BudgetViolationError, InstanceError
from com.mhire.dlm.common.seeding import make_rng
from com.mhire.dlm.services.bandit_services.bandit_utils.dictionary_utils.feature_dictionary import CATEGORY_BLOCKS
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core import (
    RmabSimulator, generate_instance, instance_from_json, instance_to_json, step
)
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core_schema import PopulationConfig

from conftest import feature_vector, make_arm, make_instance


def test_generate_instance_default_shape_and_invariants(instance_48):
    assert instance_48.n_arms == 48
    assert instance_48.budget == 5
    assert instance_48.discount == 0.9

    features = instance_48.feature_matrix()
    assert features.shape == (48, 43)
    assert not features[:, :7].any()
    for indices in CATEGORY_BLOCKS.values():
        assert (features[:, list(indices)].sum(axis=1) == 1).all()

    p = instance_48.to_arrays().p
    assert ((p >= 0) & (p <= 1)).all()
    assert (p[:, :, 1] >= p[:, :, 0]).all()


def test_generate_instance_is_deterministic(instance_48):
    assert instance_to_json(generate_instance(7, 48, 5)) == instance_to_json(instance_48)


def test_different_seeds_give_different_features():
    a = generate_instance(7, 48, 5).feature_matrix()
    b = generate_instance(8, 48, 5).feature_matrix()
    assert not np.array_equal(a, b)


def test_mean_action_lift_matches_config():
    config = PopulationConfig()
    p = generate_instance(11, 10000, 5, config).to_arrays().p
    lift = p[:, 0, 1] - p[:, 0, 0]
    assert abs(lift.mean() - config.expected_action_lift) < 0.02


@pytest.mark.parametrize("n_arms,budget", [(0, 1), (4, 5), (4, 0)])
def test_generate_instance_rejects_bad_sizes(n_arms, budget):
    with pytest.raises(InstanceError):
        generate_instance(1, n_arms, budget)


def test_population_config_rejects_probability_out_of_range():
    with pytest.raises(ValidationError):
        PopulationConfig(stickiness=1.5)
    with pytest.raises(ValidationError):
        PopulationConfig(category_weights={"Ages": [1.0, 1.0]})


def test_arm_validation():
    with pytest.raises(ValidationError):
        make_arm(0, [[0.2, 1.2], [0.3, 0.4]])
    with pytest.raises(ValidationError):
        make_arm(0, [[0.5, 0.2], [0.3, 0.4]])
    bad_features = feature_vector()
    bad_features[8] = 1  # two bits in the age block
    with pytest.raises(ValidationError):
        make_arm(0, [[0.2, 0.4], [0.3, 0.4]], features=bad_features)


def test_budget_above_arm_count_rejected():
    with pytest.raises(ValidationError):
        make_instance([make_arm(0, [[0.1, 0.2], [0.3, 0.4]])], budget=2)


def test_step_degenerate_probabilities():
    instance = make_instance([
        make_arm(0, [[0.0, 1.0], [0.0, 1.0]], state=0),
        make_arm(1, [[0.0, 0.5], [0.0, 0.5]], state=1),
    ], budget=1)
    next_states, prev_states = step(instance, np.array([1, 0]), make_rng(0))
    assert next_states.tolist() == [1, 0]
    assert prev_states.tolist() == [0, 1]


def test_step_rejects_wrong_length(small_instance):
    with pytest.raises(InstanceError):
        step(small_instance, np.zeros(3, dtype=np.int8), make_rng(0))


def test_empirical_transition_frequency():
    instance = make_instance([make_arm(0, [[0.1, 0.6], [0.1, 0.6]])])
    simulator = RmabSimulator(instance, make_rng(5))
    simulator.reset(n_trials=10000)
    next_states, _ = simulator.step(np.ones((10000, 1), dtype=np.int8))
    assert abs(next_states.mean() - 0.6) < 0.015


def test_replay_is_bit_exact(small_instance):
    actions = make_rng(9).integers(0, 2, size=(20, small_instance.n_arms))

    def trajectory():
        simulator = RmabSimulator(small_instance, make_rng(42))
        return [simulator.step(a)[0].copy() for a in actions]

    first, second = trajectory(), trajectory()
    assert all(np.array_equal(a, b) for a, b in zip(first, second))
    assert all(set(np.unique(s)) <= {0, 1} for s in first)


def test_budget_enforced_only_when_asked(small_instance):
    simulator = RmabSimulator(small_instance, make_rng(0))
    too_many = np.ones(small_instance.n_arms, dtype=np.int8)
    simulator.step(too_many)
    with pytest.raises(BudgetViolationError):
        simulator.step(too_many, enforce_budget=True)


def test_rollout_counts_post_transition_states():
    instance = make_instance([
        make_arm(0, [[1.0, 1.0], [1.0, 1.0]], state=0),
        make_arm(1, [[0.0, 0.0], [0.0, 0.0]], state=1),
    ])
    visited = RmabSimulator(instance, make_rng(0)).rollout(
        lambda states: np.zeros_like(states), n_trials=3, n_steps=4
    )
    assert visited.shape == (3, 4, 2)
    assert (visited[:, :, 0] == 1).all()
    assert (visited[:, :, 1] == 0).all()


def test_instance_json_round_trip(small_instance):
    text = instance_to_json(small_instance)
    assert '"seed": 3' in text
    assert '"p"' in text
    restored = instance_from_json(text)
    assert instance_to_json(restored) == text
