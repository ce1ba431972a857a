import json
import logging
import time

from fastapi import APIRouter, Request

from com.mhire.dlm.common.errors import DlmError
from com.mhire.dlm.common.network_responses import HTTPCode, NetworkResponse
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core import generate_instance, instance_to_json
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core_schema import InstanceRequest

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1", tags=["Instances"])
network_response = NetworkResponse()


@router.post("/instances", response_model=dict)
async def create_instance(http_request: Request, request: InstanceRequest):
    """
    Generate a synthetic arm population

    Request body:
    - seed, n_arms, budget, discount (optional)
    - population: PopulationConfig overrides (optional)
    """
    start_time = time.time()
    logger.info(f"Instance request: seed={request.seed} n_arms={request.n_arms} budget={request.budget}")
    try:
        instance = generate_instance(
            request.seed, request.n_arms, request.budget, request.population, request.discount
        )
        return network_response.success_response(
            http_code=HTTPCode.CREATED,
            message="Instance generated successfully",
            data=json.loads(instance_to_json(instance)),
            resource=http_request.url.path,
            start_time=start_time
        )
    except DlmError as e:
        logger.warning(f"Instance generation rejected: {e}")
        return network_response.error_response(e, http_request.url.path, start_time)
