import logging
import time

from fastapi import APIRouter, Request

from com.mhire.dlm.common.errors import DlmError
from com.mhire.dlm.common.network_responses import HTTPCode, NetworkResponse
from com.mhire.dlm.services.oracle_services.oracle_search.oracle_search import verify_suite
from com.mhire.dlm.services.oracle_services.oracle_search.oracle_search_schema import VerifyRequest

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1", tags=["Oracle Search"])
network_response = NetworkResponse()


@router.post("/oracle/verify", response_model=dict)
def verify_oracle(http_request: Request, request: VerifyRequest):
    start_time = time.time()
    try:
        report = verify_suite(request.cases, request.support_max, request.k_max, request.seed, request.stress)
    except DlmError as e:
        return network_response.error_response(e, http_request.url.path, start_time)
    return network_response.success_response(
        http_code=HTTPCode.SUCCESS,
        message=f"{report.cases_run} cases verified, {report.mismatches} mismatches",
        data=report.model_dump(exclude={"cases"}),
        resource=http_request.url.path,
        start_time=start_time
    )
