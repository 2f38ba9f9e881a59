"""
Data models for the genescan backend.
Pydantic models for the command line, the scan service and the HTTP API.
Engine results (ScanReport, Detection, LintFinding) live with the engine and are re-exported here.
"""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from .engine.matcher import Detection, ScanMode, ScanReport, ScanStats
from .engine.signature_db import LintFinding


class Command(str, Enum):
    """CLI subcommands"""
    SCAN = "scan"
    LINT = "lint"
    BLOCKS = "blocks"
    EXPORT = "export"
    SERVE = "serve"


class OutputFormat(str, Enum):
    TEXT = "text"
    JSON = "json"


class CliConfig(BaseModel):
    """Parsed command line"""
    command: Command = Field(..., description="Subcommand to run")
    model_paths: List[str] = Field(default=[], description="Model files or directories")
    signature_path: Optional[str] = Field(None, description="Signature file or directory")
    rules_path: Optional[str] = Field(None, description="Rewrite rules file or directory")
    mode: ScanMode = Field(ScanMode.ALL_MATCHES, description="Report every family or only the best")
    output: OutputFormat = Field(OutputFormat.TEXT, description="Report format")
    canonicalize: bool = Field(True, description="Run the fusion pass")
    jobs: int = Field(1, ge=1, description="Models scanned in parallel")
    strict: bool = Field(False, description="Reject dangling tensor names")
    dot: bool = Field(False, description="Emit DOT instead of JSON for blocks")
    host: Optional[str] = Field(None, description="API host for serve")
    port: Optional[int] = Field(None, description="API port for serve")

    @model_validator(mode="after")
    def check_command_arguments(self) -> "CliConfig":
        if self.command == Command.SCAN:
            if not self.model_paths:
                raise ValueError("scan needs at least one model path")
            if not self.signature_path:
                raise ValueError("scan needs a signature path (--sigs or GENESCAN_SIGS)")
        elif self.command == Command.LINT:
            if not self.signature_path:
                raise ValueError("lint needs a signature path")
        elif self.command in (Command.BLOCKS, Command.EXPORT):
            if len(self.model_paths) != 1:
                raise ValueError(f"{self.command.value} takes exactly one model path")
        return self


class ScanOutcome(BaseModel):
    """Report for one model, or the reason it could not be scanned"""
    origin: str = Field(..., description="Model path")
    report: Optional[ScanReport] = Field(None, description="Scan report when the model was readable")
    error: Optional[str] = Field(None, description="Error message if the model failed")
    error_type: Optional[str] = Field(None, description="Error code of the failure")

    @property
    def ok(self) -> bool:
        return self.report is not None


class ScanStatus(BaseModel):
    """Status of the last scan batch"""
    status: str = Field(..., description="Current status (idle, running, completed, failed)")
    message: str = Field(..., description="Status message")
    total: int = Field(0, description="Models in the batch")
    completed: int = Field(0, description="Models scanned")
    failed: int = Field(0, description="Models that could not be read")
    progress: Optional[float] = Field(None, description="Progress percentage (0-100)")
    start_time: Optional[str] = Field(None, description="Start time of the batch")
    end_time: Optional[str] = Field(None, description="End time of the batch")
    error: Optional[str] = Field(None, description="Error message if failed")


class SignatureSummary(BaseModel):
    """Family listing entry"""
    name: str = Field(..., description="Family name")
    components: int = Field(..., description="Number of components")
    specificity: int = Field(..., description="Ranking score")
    metadata: Optional[Dict[str, Any]] = Field(None, description="Family metadata")


class LintReport(BaseModel):
    findings: List[LintFinding] = Field(default=[], description="All findings")
    errors: int = Field(0, description="Findings with error severity")
    warnings: int = Field(0, description="Findings with warning severity")


# Export all models
__all__ = [
    'Command',
    'OutputFormat',
    'CliConfig',
    'ScanOutcome',
    'ScanStatus',
    'SignatureSummary',
    'LintReport',
    'Detection',
    'ScanMode',
    'ScanReport',
    'ScanStats',
    'LintFinding',
]
