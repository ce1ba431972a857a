import json
from pathlib import Path

import pytest

from com.mhire.dlm.config.config import Config
from com.mhire.dlm.services.bandit_services.bandit_utils.dictionary_utils.feature_dictionary import CATEGORY_BLOCKS
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core import generate_instance
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core_schema import Arm, RmabInstance
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite import get_task

FIXTURES = Path(__file__).parent / "fixtures"

# one option per category block: age 10-20, Hindi, illiterate, owner 0, 8:30am, NGO, no income
BASE_FEATURE_BITS = (7, 12, 16, 23, 26, 32, 35)


def feature_vector(*overrides):
    """Valid one-hot feature vector; each override replaces the default bit of its block"""
    bits = set(BASE_FEATURE_BITS)
    for index in overrides:
        for block in CATEGORY_BLOCKS.values():
            if index in block:
                bits -= set(block)
                bits.add(index)
    return [1 if i in bits else 0 for i in range(43)]


def make_arm(arm_id, p, state=0, features=None):
    return Arm(id=arm_id, features=features or feature_vector(), transitions=p, state=state)


def make_instance(arms, budget=1, discount=0.9, seed=0):
    return RmabInstance(rng_seed=seed, budget=budget, discount=discount, arms=arms)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def instance_48():
    return generate_instance(7, 48, 5)


@pytest.fixture
def small_instance():
    return generate_instance(3, 12, 2)


@pytest.fixture
def task0():
    return get_task(0)


@pytest.fixture
def task0_transcript(tmp_path):
    """Scripted transcript for the default loop on task 0: two generations, one reflection, twice"""
    base = get_task(0).base_reward_source
    responses = [
        f"$$$ {base} $$$",
        "$$$ state $$$",
        "The best reward function is at index: 0",
        f"$$$ {base} $$$",
        "$$$ state * 0.1 + if_(state) * 2.0 * agent_feats[10] $$$",
        "The best reward function is at index: 0",
    ]
    path = tmp_path / "task0_transcript.json"
    path.write_text(json.dumps(responses))
    return path


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch):
    monkeypatch.delenv("DLM_WORKERS", raising=False)
    Config.reset()
    yield
    Config.reset()
