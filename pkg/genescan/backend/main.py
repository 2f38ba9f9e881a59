#!/usr/bin/env python3
"""
FastAPI server for genescan
Provides REST API endpoints for scanning models against the signature database
"""

from typing import Any, Dict, Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from genescan.backend.config import get_config, validate_environment
from genescan.backend.engine.exceptions import GenescanError
from genescan.backend.engine.ingest import ModelSource
from genescan.backend.engine.signature_db import serialize_signatures
from genescan.backend.models import LintReport, ScanMode, ScanReport, ScanStatus
from genescan.backend.services import get_scan_service
from genescan.backend.utils import log_error, log_info, log_warning


# ==================== INITIALIZATION ====================

config = get_config()

problems = validate_environment()
if problems:
    log_warning(
        "Configuration problems",
        f"{'; '.join(problems)}. Some endpoints may fail."
    )

log_info("genescan API server starting", f"Version: {config.version}")


# ==================== FASTAPI APP ====================

app = FastAPI(
    title="genescan API",
    description="REST API for identifying model families from their computational graphs",
    version=config.version
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=config.api.cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(GenescanError)
async def genescan_error_handler(request: Request, exc: GenescanError):
    log_error(
        error_type=exc.error_type,
        error_message=f"Request to {request.url.path} rejected",
        exception=exc
    )
    return JSONResponse(status_code=400, content={"detail": str(exc), "error_type": exc.error_type})


@app.exception_handler(Exception)
async def unexpected_error_handler(request: Request, exc: Exception):
    log_error(
        error_type="UNEXPECTED_ERROR",
        error_message=f"Request to {request.url.path} failed",
        exception=exc
    )
    return JSONResponse(status_code=500, content={"detail": f"Internal error: {type(exc).__name__}"})


async def _read_model(request: Request, origin: str) -> ModelSource:
    payload = await request.body()
    if len(payload) > config.api.max_upload_bytes:
        raise HTTPException(status_code=413, detail="Model exceeds the upload limit")
    return ModelSource.from_bytes(payload, origin=origin)


# ==================== API ENDPOINTS ====================

@app.get("/")
async def root():
    """Root endpoint"""
    return {
        "message": "genescan API",
        "version": config.version,
        "endpoints": {
            "health": "/health",
            "status": "/api/status",
            "signatures": "/api/signatures",
            "signature": "/api/signatures/{family}",
            "lint": "/api/signatures/lint",
            "scan": "/api/scan",
            "blocks": "/api/blocks"
        }
    }


@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "version": config.version,
        "environment": {
            "problems": validate_environment(),
            "signature_path": config.paths.signature_path,
            "jobs": config.scan.jobs
        }
    }


@app.get("/api/status", response_model=ScanStatus)
async def get_status():
    """Status of the last scan batch"""
    return get_scan_service().get_status()


@app.get("/api/signatures")
async def list_signatures():
    """Families in the loaded database"""
    summaries = get_scan_service().list_signatures()
    return {"signatures": [summary.model_dump() for summary in summaries], "total": len(summaries)}


@app.get("/api/signatures/lint", response_model=LintReport)
async def lint_signatures():
    return get_scan_service().lint()


@app.get("/api/signatures/{family}")
async def get_signature(family: str) -> Dict[str, Any]:
    """Canonical JSON form of one family"""
    try:
        signature = get_scan_service().get_signature(family)
    except KeyError:
        raise HTTPException(status_code=404, detail=f"Unknown family '{family}'")
    return serialize_signatures([signature])[signature.name]


@app.post("/api/scan")
async def scan_model(
    request: Request,
    origin: str = Query("upload", description="Name reported for the model; its extension guides format detection"),
    mode: ScanMode = Query(ScanMode.ALL_MATCHES, description="all or best"),
    canonicalize: Optional[bool] = Query(None, description="Run the fusion pass"),
):
    """Scan raw model bytes sent as the request body"""
    source = await _read_model(request, origin)
    validated = config.validate_scan_params(canonicalize=canonicalize)
    # scanning is CPU bound; keep it off the event loop
    report: ScanReport = await run_in_threadpool(
        get_scan_service().scan_source,
        source, mode=mode, canonicalize=validated['canonicalize']
    )
    log_info(
        "Scan request completed",
        f"Origin: {origin}, Families: {', '.join(report.families) or 'none'}"
    )
    return report.to_json_dict()


@app.post("/api/blocks")
async def dump_blocks(
    request: Request,
    origin: str = Query("upload", description="Name reported for the model"),
    canonicalize: Optional[bool] = Query(None, description="Run the fusion pass"),
    dot: bool = Query(False, description="Return DOT source instead of JSON"),
):
    """Block decomposition of raw model bytes"""
    source = await _read_model(request, origin)
    validated = config.validate_scan_params(canonicalize=canonicalize)
    result = await run_in_threadpool(
        get_scan_service().block_dump,
        source, canonicalize=validated['canonicalize'], dot=dot, highlight=dot
    )
    if dot:
        return PlainTextResponse(result, media_type="text/vnd.graphviz")
    return result


def run(host: Optional[str] = None, port: Optional[int] = None) -> None:
    import uvicorn

    uvicorn.run(app, host=host or config.api.host, port=port or config.api.port)


if __name__ == "__main__":
    run()
