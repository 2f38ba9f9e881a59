"""
Configuration management for the genescan backend.
Centralized settings, defaults and environment validation.
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

from genescan import __version__


load_dotenv()

PACKAGE_DIR = Path(__file__).resolve().parent
DEFAULT_SIGNATURE_DIR = PACKAGE_DIR / "data" / "signatures"
DEFAULT_RULES_DIR = PACKAGE_DIR / "data" / "rules"

LOG_LEVELS = ("debug", "info", "warning", "error", "quiet")


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return int(value)
    except ValueError:
        return default


class ScanSettings(BaseModel):
    """Defaults for scanning"""
    default_mode: str = Field("all", description="Reporting mode: all or best")
    jobs: int = Field(default_factory=lambda: _env_int("GENESCAN_JOBS", 4), description="Default worker count")
    min_jobs: int = Field(1, description="Minimum worker count")
    max_jobs: int = Field(64, description="Maximum worker count")
    canonicalize: bool = Field(True, description="Run the fusion pass before blocking")
    strict: bool = Field(False, description="Reject dangling tensor names")
    constant_ops: List[str] = Field(["Constant", "Initializer"], description="Operation types ignored by blocking")
    brute_force_limit: int = Field(20, description="Largest block graph the exhaustive matcher accepts")


class PathSettings(BaseModel):
    """Signature and rules locations"""
    signature_path: str = Field(
        default_factory=lambda: os.getenv("GENESCAN_SIGS") or str(DEFAULT_SIGNATURE_DIR),
        description="Signature file or directory",
    )
    rules_path: str = Field(
        default_factory=lambda: os.getenv("GENESCAN_RULES") or str(DEFAULT_RULES_DIR),
        description="Rewrite rules file or directory",
    )


class ApiSettings(BaseModel):
    """HTTP API settings"""
    host: str = Field("localhost", description="API host")
    port: int = Field(8000, description="API port")
    cors_origins: List[str] = Field(["http://localhost:3000"], description="CORS origins")
    max_upload_bytes: int = Field(256 * 1024 * 1024, description="Largest accepted model upload")


class AppConfig(BaseModel):
    """Main application configuration"""
    scan: ScanSettings = Field(default_factory=ScanSettings)
    paths: PathSettings = Field(default_factory=PathSettings)
    api: ApiSettings = Field(default_factory=ApiSettings)

    version: str = Field(__version__, description="Package version")
    log_level: str = Field(
        default_factory=lambda: (os.getenv("GENESCAN_LOG_LEVEL") or "info").lower(),
        description="debug, info, warning, error or quiet",
    )

    def validate_scan_params(self, **kwargs) -> Dict[str, Any]:
        """Validate and clamp scan parameters"""
        validated = {}

        jobs = kwargs.get('jobs') or self.scan.jobs
        validated['jobs'] = max(self.scan.min_jobs, min(self.scan.max_jobs, int(jobs)))

        mode = kwargs.get('mode') or self.scan.default_mode
        validated['mode'] = mode if mode in ("all", "best") else self.scan.default_mode

        canonicalize = kwargs.get('canonicalize')
        validated['canonicalize'] = self.scan.canonicalize if canonicalize is None else bool(canonicalize)

        strict = kwargs.get('strict')
        validated['strict'] = self.scan.strict if strict is None else bool(strict)

        validated['signature_path'] = kwargs.get('signature_path') or self.paths.signature_path
        validated['rules_path'] = kwargs.get('rules_path') or self.paths.rules_path

        return validated


# Global configuration instance
config: Optional[AppConfig] = None


def get_config() -> AppConfig:
    """Get the global configuration instance"""
    global config
    if config is None:
        config = AppConfig()
    return config


def reset_config() -> AppConfig:
    """Re-read the environment; used after changing GENESCAN_* variables"""
    global config
    config = AppConfig()
    return config


def validate_environment() -> List[str]:
    """Report unusable configured paths"""
    problems = []
    current = get_config()

    signature_path = Path(current.paths.signature_path)
    if not signature_path.exists():
        problems.append(f"GENESCAN_SIGS: {signature_path} does not exist")

    rules_path = Path(current.paths.rules_path)
    if not rules_path.exists():
        problems.append(f"GENESCAN_RULES: {rules_path} does not exist")

    if current.log_level not in LOG_LEVELS:
        problems.append(f"GENESCAN_LOG_LEVEL: unknown level '{current.log_level}'")

    return problems


# Export commonly used items
__all__ = [
    'config',
    'get_config',
    'reset_config',
    'validate_environment',
    'ScanSettings',
    'PathSettings',
    'ApiSettings',
    'AppConfig',
    'DEFAULT_SIGNATURE_DIR',
    'DEFAULT_RULES_DIR',
    'LOG_LEVELS',
]
