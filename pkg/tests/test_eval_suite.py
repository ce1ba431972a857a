import numpy as np
import pytest

from com.mhire.dlm.common.errors import ConfigError, EvaluationError
from com.mhire.dlm.common.seeding import make_rng
from com.mhire.dlm.config.config import RunSettings
from com.mhire.dlm.services.bandit_services.policy_train.policy_train_schema import TrainConfig
from com.mhire.dlm.services.dlm_services.dlm_loop.dlm_loop_schema import LoopConfig
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite import (
    BASE, BASELINE_METHODS, NO_ACTION, RANDOM, NoAction, RandomAllocation, aggregate_precision_recall, baselines,
    evaluate_policy, feature_precision_recall, get_task, iqm_and_se, load_task_catalog, logic_match, logic_recall,
    mnr, one_tailed_t, run_sweep
)
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite_schema import EvalProtocol, TaskSpec
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import parse

from conftest import feature_vector, make_arm, make_instance

SMALL = RunSettings(
    n_arms=8,
    budget=2,
    loop=LoopConfig(train=TrainConfig(epochs=2, steps_per_epoch=50)),
    protocol=EvalProtocol(n_seeds=3, trials_per_seed=4, steps_per_trial=5),
)


def test_catalog_has_sixteen_indexed_tasks():
    tasks = load_task_catalog()
    assert [t.index for t in tasks] == list(range(16))
    assert tasks[0].base_features == [11]
    assert sorted(get_task(8).base_features) == [9, 10, 13]


def test_unknown_task_is_config_error():
    with pytest.raises(ConfigError):
        get_task(16)


def test_iqm_of_central_half():
    iqm, se = iqm_and_se([2, 4, 6, 8])
    assert iqm == pytest.approx(5.0)
    assert se == pytest.approx(np.std([4, 6], ddof=1) / np.sqrt(2))


def test_iqm_ignores_outer_quartiles():
    assert iqm_and_se([-100, 1, 1, 1, 1, 1, 1, 500])[0] == pytest.approx(1.0)


def test_iqm_of_nothing_raises():
    with pytest.raises(EvaluationError):
        iqm_and_se([])


def test_mnr_identities():
    random_scores = [1.0, 2.0, 3.0, 4.0]
    base_scores = [5.0, 6.0, 9.0, 10.0]
    assert mnr(base_scores, random_scores, base_scores).iqm == 1.0
    assert mnr(random_scores, random_scores, base_scores).iqm == 0.0
    halfway = mnr([3.0, 4.0, 6.0, 7.0], random_scores, base_scores)
    assert halfway.normalized == [0.5, 0.5, 0.5, 0.5]


def test_mnr_is_invariant_to_affine_rescaling():
    rng = make_rng(0)
    method, rand, base = rng.random(6), rng.random(6), rng.random(6) + 2.0
    plain = mnr(method, rand, base)
    scaled = mnr(method * 10 + 3, rand * 10 + 3, base * 10 + 3)
    assert scaled.iqm == pytest.approx(plain.iqm)


def test_mnr_excludes_degenerate_seeds():
    result = mnr([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], [1.0, 3.0, 5.0], seeds=[10, 11, 12])
    assert result.excluded_seeds == [10]
    assert result.normalized[0] is None
    assert result.used == [0.5, 0.5]


def test_mnr_all_seeds_excluded_has_no_aggregate():
    result = mnr([1.0], [1.0], [1.0])
    assert result.iqm is None
    assert result.used == []


def test_mnr_rejects_mismatched_lengths():
    with pytest.raises(EvaluationError):
        mnr([1.0, 2.0], [0.0], [3.0, 4.0])


def test_t_test_conventions():
    assert one_tailed_t([1.0, 1.0], [1.0, 1.0]) == 0.5
    assert one_tailed_t([2.0, 2.0], [1.0, 1.0]) == 0.0
    assert one_tailed_t([1.0, 1.0], [2.0, 2.0]) == 1.0


def test_t_test_detects_clear_separation():
    jitter = [0.0, 0.01, -0.01, 0.005]
    a = [1.0 + j for j in jitter]
    b = [0.0 + j for j in reversed(jitter)]
    assert one_tailed_t(a, b) < 0.001


def test_t_test_swap_complements():
    a, b = [0.3, 0.5, 0.4, 0.9], [0.2, 0.6, 0.1, 0.3]
    assert one_tailed_t(a, b) + one_tailed_t(b, a) == pytest.approx(1.0)


def test_t_test_needs_two_scores():
    with pytest.raises(EvaluationError):
        one_tailed_t([1.0], [1.0, 2.0])


def test_random_allocation_spends_exact_budget():
    actor = RandomAllocation(3, make_rng(1))
    actions = actor(np.zeros((5, 10), dtype=np.int8))
    assert actions.shape == (5, 10)
    assert (actions.sum(axis=-1) == 3).all()
    assert not NoAction()(np.ones(4)).any()


def test_evaluate_policy_on_pinned_arms(task0):
    arms = [make_arm(i, [[1.0, 1.0], [1.0, 1.0]], state=1, features=feature_vector(11)) for i in range(2)]
    instance = make_instance(arms)
    protocol = EvalProtocol(n_seeds=1, trials_per_seed=3, steps_per_trial=10)
    score = evaluate_policy(NoAction(), instance, task0, protocol, make_rng(0))
    assert score == pytest.approx(2.1 * 2 * 10)


def test_evaluate_policy_zero_base_reward():
    arms = [make_arm(0, [[1.0, 1.0], [1.0, 1.0]], state=1, features=feature_vector(7))]
    zero_task = TaskSpec(index=0, label="zero", prompt="", base_reward="0", base_features=[])
    assert evaluate_policy(NoAction(), make_instance(arms), zero_task, EvalProtocol(), make_rng(0)) == 0.0


def test_evaluate_policy_replays_under_fixed_rng(task0, small_instance):
    protocol = EvalProtocol(trials_per_seed=5, steps_per_trial=10)
    scores = [evaluate_policy(RandomAllocation(2, make_rng(3)), small_instance, task0, protocol, make_rng(9))
              for _ in range(2)]
    assert scores[0] == scores[1]


def test_feature_precision_recall_sample(task0):
    candidate = parse("3*(state) + 4*((state)*(agent_feats[9] or agent_feats[10] or agent_feats[11]))")
    result = feature_precision_recall(candidate, task0)
    assert result.precision == pytest.approx(1 / 3)
    assert result.recall == 1.0


@pytest.mark.parametrize("source,expected", [
    ("state * 0.1 + if_(state) * 2.0 * agent_feats[11]", (1.0, 1.0)),
    ("state", (0.0, 0.0)),
    ("state * agent_feats[20]", (0.0, 0.0)),
])
def test_feature_precision_recall_edges(task0, source, expected):
    result = feature_precision_recall(parse(source), task0)
    assert (result.precision, result.recall) == expected


def test_aggregate_precision_recall(task0):
    assert aggregate_precision_recall([], task0) is None
    summary = aggregate_precision_recall([parse("state * agent_feats[11]"), parse("state")], task0)
    assert summary.n_candidates == 2
    assert summary.precision_mean == pytest.approx(0.5)
    assert summary.recall_mean == pytest.approx(0.5)
    assert summary.precision_se == pytest.approx(0.5)


def test_logic_match_task8():
    task = get_task(8)
    assert logic_match(task.base_reward, task)
    assert not logic_match(parse("state * (agent_feats[13] and agent_feats[9])"), task)
    # a different expression with the same rewarded combinations
    assert logic_match(parse("state * (agent_feats[13] and agent_feats[9] or agent_feats[13] and agent_feats[10])"),
                       task)


def test_logic_recall_over_qualifying_candidates():
    task = get_task(8)
    candidates = [
        task.base_reward,
        parse("state * (agent_feats[13] and agent_feats[9] and agent_feats[10])"),
        parse("state * agent_feats[13]"),
    ]
    # the third candidate lacks features 9 and 10 and does not count
    assert logic_recall(candidates, task) == pytest.approx(0.5)
    assert logic_recall([parse("state")], task) is None


def test_logic_recall_counts_unevaluable_candidate_as_mismatch():
    task = get_task(4)
    # divides by zero only where every age bucket is off
    fragile = parse("state * 0.1 + state / (agent_feats[7] + agent_feats[8] + agent_feats[9] + agent_feats[10] "
                    "+ agent_feats[11])")
    assert logic_recall([fragile], task) == 0.0
    assert logic_recall([fragile, task.base_reward], task) == pytest.approx(0.5)


def test_logic_recall_needs_multi_feature_task(task0):
    with pytest.raises(EvaluationError):
        logic_recall([parse("state")], task0)


def test_sweep_baselines_by_construction(task0):
    base_copy = {"Copy": parse(task0.base_reward_source)}
    sweep = run_sweep(task0, base_copy, settings=SMALL)
    assert sweep.seeds == [0, 1, 2]
    assert set(sweep.mnr) == set(BASELINE_METHODS) | {"Copy"}
    for name in (BASE, "Copy"):
        assert all(v == 1.0 for v in sweep.mnr[name].used)
    assert all(v == 0.0 for v in sweep.mnr[RANDOM].used)
    assert sweep.raw_scores["Copy"] == sweep.raw_scores[BASE]
    assert sweep.budget_violations == 0
    assert sweep.steps_checked > 0
    assert f"{BASE}>{RANDOM}" in sweep.t_tests or not sweep.mnr[BASE].used


def test_sweep_is_deterministic(task0):
    first = run_sweep(task0, settings=SMALL)
    second = run_sweep(task0, settings=SMALL)
    assert first.raw_scores == second.raw_scores
    assert first.raw_scores[NO_ACTION] == second.raw_scores[NO_ACTION]


def test_sweep_protocol_override(task0):
    sweep = run_sweep(task0, protocol=EvalProtocol(n_seeds=2, first_seed=5, trials_per_seed=2, steps_per_trial=3),
                      settings=SMALL)
    assert sweep.seeds == [5, 6]


def test_reserved_method_names_rejected(task0):
    with pytest.raises(ConfigError):
        run_sweep(task0, {RANDOM: parse("state")}, settings=SMALL)


def test_baselines_score_every_reference_policy(task0, small_instance):
    protocol = EvalProtocol(trials_per_seed=4, steps_per_trial=5)
    scores = baselines(small_instance, task0, protocol, seed=1, train_config=TrainConfig(epochs=2, steps_per_epoch=50))
    assert set(scores) == set(BASELINE_METHODS)
    assert all(score >= 0.0 for score in scores.values())
    again = baselines(small_instance, task0, protocol, seed=1, train_config=TrainConfig(epochs=2, steps_per_epoch=50))
    assert again == scores
