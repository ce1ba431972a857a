import logging
import time

from fastapi import APIRouter, Request

from com.mhire.dlm.common.errors import DlmError
from com.mhire.dlm.common.network_responses import HTTPCode, NetworkResponse
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core import generate_instance
from com.mhire.dlm.services.dlm_services.dlm_loop.dlm_loop import DlmLoop
from com.mhire.dlm.services.dlm_services.dlm_loop.dlm_loop_schema import RunRequest
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite import get_task
from com.mhire.dlm.services.llm_services.llm_gateway.llm_gateway import LlmGateway
from com.mhire.dlm.services.llm_services.llm_gateway.llm_gateway_schema import BackendKind, LlmBackend

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1", tags=["DLM Runs"])
network_response = NetworkResponse()


@router.post("/runs", response_model=dict)
def create_run(http_request: Request, request: RunRequest):
    """
    Run the reward-design loop for one task against an inline scripted transcript

    Request body:
    - task_index: int (required)
    - transcript: list of LLM responses, consumed in request order (required)
    - instance_seed, n_arms, budget, loop, reflection (optional)
    """
    start_time = time.time()
    logger.info(f"=== RUN REQUEST START === task={request.task_index} transcript={len(request.transcript)}")
    try:
        task = get_task(request.task_index)
        instance = generate_instance(request.instance_seed, request.n_arms, request.budget)
        gateway = LlmGateway(LlmBackend(kind=BackendKind.SCRIPTED, transcript=request.transcript))
        loop_config = request.loop
        if not request.reflection:
            loop_config = loop_config.model_copy(update={"iterations": 1, "candidates_per_iter": 1})
        _, trace = DlmLoop(task, instance, gateway, loop_config, reflection=request.reflection).run()
        data = trace.model_dump(mode="json")
        logger.info(f"=== RUN REQUEST END === selected '{trace.final_reward}'")
        return network_response.success_response(
            http_code=HTTPCode.SUCCESS,
            message="Run completed successfully",
            data=data,
            resource=http_request.url.path,
            start_time=start_time
        )
    except DlmError as e:
        logger.warning(f"=== RUN REQUEST END (ERROR) === {type(e).__name__}: {e}")
        return network_response.error_response(e, http_request.url.path, start_time)
