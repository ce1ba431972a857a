import logging
from enum import Enum

logger = logging.getLogger(__name__)


class PromptPurpose(str, Enum):
    GENERATION = "generation"
    REFLECTION = "reflection"


GENERATION_OBJECTIVE = (
    "Create a Python reward function for RL in phone call resource allocation to mothers in India, "
    "with the objective of prioritizing higher states and: {task}. The function should use 'state' "
    "(value is either 0,1) and features 'agent_feats' (length 43 array) to direct the RL agent. "
    "Here is a description of the features you may use:"
)

CATALOG_HEADER = "Index Name DataType"

SYNTAX_RULES = """Your task:
1. Write a simple, single-line Python reward function. Exclude the word 'return' and exclude non-standard libraries. Format your code with triple $ signs: $$$[YOUR FUNCTION]$$$.
2. Provide an explanation on how this function prioritizes the specified group.
Note that HIGHER states are always preferred, so ensure reward increases as state increases. Make sure reward is always positive and increasing with state. Avoid using bitwise operators &, |. Using and, or instead."""

EXEMPLAR = """Example Prompt: While prioritizing all, emphasize agents that are both older and richer
Let's think about this step by step. We want to give reward only for agents that are older, which corresponds to feature 11, and rich which corresponds to feature 42. This corresponds to a condition of (agent_feats[11] and agent_feats[42]). In addition, we always only want to give reward when the state is 1, since the agent gets reward only when it is in a listening state. Therefore, our reward function should be: state * (agent_feats[11] and agent_feats[42]).
Example Response:
Python Code: '$$$ state * 0.1 + 2 * state * (agent_feats[11] and agent_feats[42]) $$$'
Explanation: engaged agents always earn a small reward, and engaged agents who are both older and richer earn a larger bonus."""

GENERATION_CLOSING = "Come up with a unique new reward for the specified goal: {task}."
PRIORS_HEADER = "Here are your best previous attempts:"

REFLECTION_PREAMBLE = (
    "My goal was to create a Python reward function for RL in resource allocation, with the objective of: "
    "{task}. I tried several reward functions for this task. Below, I have the given reward function, and the "
    "corresponding distribution of reward achieved across the agent features. "
    "A description of the features is as follows:"
)

REFLECTION_BODY_HEADER = "Below are the reward functions I used and their corresponding reward distributions:"

REFLECTION_CANDIDATE = "Index {index}:\nReward Function: {reward}\nReflection:\n'\n{distribution}\n'"

ANSWER_PHRASE = "The best reward function is at index:"

REFLECTION_CLOSING = (
    "Based on the above reward distributions and the given goal: {task}, please identify the index of the "
    "most effective reward function. Provide your answer EXACTLY IN the following format: "
    "'" + ANSWER_PHRASE + " [INDEX]'."
)

# Sampling temperature per prompt purpose
TEMPERATURES = {
    PromptPurpose.GENERATION: 0.7,
    PromptPurpose.REFLECTION: 0.0,
}


def task_sentence(task_text: str) -> str:
    """Task prompt without its trailing period so templates can punctuate it"""
    return task_text.strip().rstrip(".")


def get_temperature(purpose: PromptPurpose) -> float:
    logger.debug(f"Getting temperature for prompt purpose: {purpose}")
    return TEMPERATURES[purpose]
