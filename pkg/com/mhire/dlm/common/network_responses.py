import time
from typing import Dict, Any

from fastapi.responses import JSONResponse


class NetworkResponse:

    def __init__(self, version=0.2):
        self.version = version

    def success_response(
        self, http_code: int, message: str, data: Dict[str, Any], resource: str, start_time: float
    ) -> JSONResponse:
        duration = round(time.time() - start_time, 2)
        return JSONResponse(
            status_code=http_code,
            content={
                "success": True,
                "message": message,
                "data": data,
                "resource": resource,
                "duration": f"{duration}s"
            }
        )

    def json_response(
        self, http_code: int, error_message: str, resource: str, start_time: float,
        error_type: str = None
    ) -> JSONResponse:
        duration = round(time.time() - start_time, 2)
        content = {
            "code": http_code,
            "success": False,
            "message": error_message,
            "resource": resource,
            "duration": f"{duration}s"
        }
        if error_type:
            content["error_type"] = error_type
        return JSONResponse(status_code=http_code, content=content)

    def error_response(self, error: Exception, resource: str, start_time: float) -> JSONResponse:
        """Answer for a pipeline exception, status picked from the error type"""
        # local import: errors.py imports HTTPCode from this module
        from com.mhire.dlm.common.errors import http_code_for

        return self.json_response(
            http_code=http_code_for(error),
            error_message=str(error),
            resource=resource,
            start_time=start_time,
            error_type=type(error).__name__
        )


class HTTPCode:
    SUCCESS = 200
    CREATED = 201

    BAD_REQUEST = 400
    NOT_FOUND = 404
    PAYLOAD_TOO_LARGE = 413
    UNPROCESSABLE_ENTITY = 422

    INTERNAL_SERVER_ERROR = 500
    SERVICE_UNAVAILABLE = 503
