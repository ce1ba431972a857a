import logging
import time

from fastapi import APIRouter, Request

from com.mhire.dlm.common.errors import RewardParseError
from com.mhire.dlm.common.network_responses import HTTPCode, NetworkResponse
from com.mhire.dlm.services.bandit_services.bandit_utils.dictionary_utils.feature_dictionary import SENSITIVE_INDICES
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import parse, render, used_features
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl_schema import (
    RewardParseRequest, RewardParseResponse
)

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1", tags=["Rewards"])
network_response = NetworkResponse()


@router.post("/rewards/parse", response_model=dict)
async def parse_reward(http_request: Request, request: RewardParseRequest):
    """Parse a reward expression and report its canonical form and the features it reads"""
    start_time = time.time()
    logger.debug(f"Parsing reward '{request.source[:100]}'")
    try:
        expr = parse(request.source)
    except RewardParseError as e:
        logger.info(f"Reward rejected: {e}")
        return network_response.error_response(e, http_request.url.path, start_time)

    used = sorted(used_features(expr))
    response = RewardParseResponse(
        canonical=render(expr),
        used_features=used,
        sensitive_features=[i for i in used if i in SENSITIVE_INDICES],
    )
    return network_response.success_response(
        http_code=HTTPCode.SUCCESS,
        message="Reward parsed successfully",
        data=response.model_dump(),
        resource=http_request.url.path,
        start_time=start_time
    )
