import logging
from typing import Dict, List, Tuple

logger = logging.getLogger(__name__)

N_FEATURES = 43
SENSITIVE_INDICES = tuple(range(0, 7))
SENSITIVE_PLACEHOLDER = "[sensitive feature hidden]"

# Catalog names as shown to the language model, index -> name
FEATURE_NAMES: Dict[int, str] = {
    7: "Ages 10-20",
    8: "Ages 21-30",
    9: "Ages 31-40",
    10: "Ages 41-50",
    11: "Ages 51-60",
    12: "Speaks Hindi",
    13: "Speaks Marathi",
    14: "Speaks Gujurati",
    15: "Speaks Kannada",
    16: "Education level 1/7 -- illiterate",
    17: "Education level 2/7 -- 1-5th Grade Completed",
    18: "Education level 3/7 -- 6-9th Grade Completed",
    19: "Education level 4/7 -- 10th Grade Passed",
    20: "Education level 5/7 -- 12th Grade Passed",
    21: "Education level 6/7 -- Graduate",
    22: "Education level 7/7 -- Post graduate",
    23: "Phone owner 0 (e.g., woman)",
    24: "Phone owner 1 (e.g., husband)",
    25: "Phone owner 2 (e.g., family)",
    26: "To be called from 8:30am-10:30am",
    27: "To be called from 10:30am-12:30pm",
    28: "To be called from 12:30pm-3:30pm",
    29: "To be called from 3:30pm-5:30pm",
    30: "To be called from 5:30pm-7:30pm",
    31: "To be called from 7:30pm-9:30pm",
    32: "NGO",
    33: "ARMMAN",
    34: "PHC",
    35: "Income bracket -1 (no income)",
    36: "Income bracket 1 (e.g., 0-5000)",
    37: "Income bracket 2 (e.g., 5001-10000)",
    38: "Income bracket 3 (e.g., 10001-15000)",
    39: "Income bracket 4 (e.g., 15001-20000)",
    40: "Income bracket 5 (e.g., 20001-25000)",
    41: "Income bracket 6 (e.g., 25001-30000)",
    42: "Income bracket 7 (e.g., 30000-999999)",
}

# One-hot blocks, in index order
CATEGORY_BLOCKS: Dict[str, Tuple[int, ...]] = {
    "Ages": tuple(range(7, 12)),
    "Languages": tuple(range(12, 16)),
    "Education": tuple(range(16, 23)),
    "PhoneOwner": tuple(range(23, 26)),
    "CallTime": tuple(range(26, 32)),
    "Organization": tuple(range(32, 35)),
    "Income": tuple(range(35, 43)),
}

# Reflection report: (section title, block, per-index group labels), in render order
REPORT_SECTIONS: List[Tuple[str, str, Dict[int, str]]] = [
    ("Ages", "Ages", {i: FEATURE_NAMES[i] for i in CATEGORY_BLOCKS["Ages"]}),
    ("Income", "Income", {i: FEATURE_NAMES[i] for i in CATEGORY_BLOCKS["Income"]}),
    ("Calling Times", "CallTime", {
        26: "8:30am-10:30am",
        27: "10:30am-12:30pm",
        28: "12:30pm-3:30pm",
        29: "3:30pm-5:30pm",
        30: "5:30pm-7:30pm",
        31: "7:30pm-9:30pm",
    }),
    ("Education Levels", "Education", {
        16: "Illiterate",
        17: "1-5th Grade Completed",
        18: "6-9th Grade Completed",
        19: "10th Grade Passed",
        20: "12th Grade Passed",
        21: "Graduate",
        22: "Post graduate",
    }),
    ("Languages Spoken", "Languages", {i: FEATURE_NAMES[i] for i in CATEGORY_BLOCKS["Languages"]}),
    ("Phone Owners", "PhoneOwner", {
        23: "Phone owner - Woman",
        24: "Phone owner - Husband",
        25: "Phone owner - Family",
    }),
    ("Organizations", "Organization", {i: FEATURE_NAMES[i] for i in CATEGORY_BLOCKS["Organization"]}),
]


# feature index -> (report section, group label)
REPORT_LABELS: Dict[int, Tuple[str, str]] = {
    index: (title, label) for title, _, labels in REPORT_SECTIONS for index, label in labels.items()
}


def block_of(index: int) -> str:
    """Category block containing a feature index"""
    for name, indices in CATEGORY_BLOCKS.items():
        if index in indices:
            return name
    raise KeyError(f"Feature index {index} belongs to no category block")


def get_feature_catalog_lines() -> List[str]:
    """Catalog lines for prompts: a hidden-feature marker then one line per index 7-42"""
    lines = [SENSITIVE_PLACEHOLDER]
    lines.extend(f"{index}. {name} - Binary" for index, name in sorted(FEATURE_NAMES.items()))
    logger.debug(f"Built feature catalog with {len(lines) - 1} visible features")
    return lines
