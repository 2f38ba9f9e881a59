"""
Service layer for the genescan backend.
Loads the signature database once and runs scans, block dumps and exports for the CLI and the API.
"""

import asyncio
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from tqdm import tqdm

from .config import get_config
from .engine.agnostic_graph import AgnosticGraph
from .engine.blocking import extract_blocks
from .engine.canonicalize import RewriteRule, canonicalize_graph, load_default_rules, load_rules_path
from .engine.export import block_graph_to_dict, block_graph_to_dot, graph_to_interchange, matched_blocks
from .engine.ingest import ModelSource, load_model
from .engine.matcher import ScanMode, ScanReport, scan
from .engine.signature_db import FamilySignature, lint_signatures, load_signature_path, specificity
from .models import LintReport, ScanOutcome, ScanStatus, SignatureSummary
from .utils import format_duration, log_debug, log_error, log_info, log_success, log_warning


class ScanService:
    """Service class holding the loaded database and running scans"""

    def __init__(self):
        self.config = get_config()
        self.signatures: List[FamilySignature] = []
        self.rules: Optional[Tuple[RewriteRule, ...]] = None
        self.signature_path: Optional[str] = None
        self.rules_path: Optional[str] = None
        self.status = ScanStatus(status="idle", message="Ready to scan")

    def get_status(self) -> ScanStatus:
        """Get status of the last batch"""
        return self.status

    def update_status(self, status: str, message: str, total: Optional[int] = None,
                      completed: Optional[int] = None, failed: Optional[int] = None,
                      error: Optional[str] = None):
        """Update batch status"""
        self.status.status = status
        self.status.message = message
        if total is not None:
            self.status.total = total
        if completed is not None:
            self.status.completed = completed
        if failed is not None:
            self.status.failed = failed
        if self.status.total:
            self.status.progress = 100.0 * (self.status.completed + self.status.failed) / self.status.total
        self.status.error = error

        if status == "running":
            self.status.start_time = datetime.now().isoformat()
            self.status.end_time = None
        elif status in ["completed", "failed"]:
            self.status.end_time = datetime.now().isoformat()

    # ==================== DATABASE ====================

    def load_database(self, signature_path: Optional[str] = None,
                      rules_path: Optional[str] = None) -> List[FamilySignature]:
        """Load signatures and rewrite rules; errors propagate to the caller"""
        signature_path = signature_path or self.config.paths.signature_path
        self.signatures = load_signature_path(signature_path)
        self.signature_path = str(signature_path)

        if rules_path:
            self.rules = tuple(load_rules_path(rules_path))
            self.rules_path = str(rules_path)
        elif Path(self.config.paths.rules_path).exists():
            self.rules = tuple(load_rules_path(self.config.paths.rules_path))
            self.rules_path = self.config.paths.rules_path
        else:
            self.rules = load_default_rules()
            self.rules_path = None

        log_success(
            "Signature database loaded",
            f"Families: {len(self.signatures)}, Rules: {len(self.rules)}\nSignatures: {self.signature_path}"
        )
        return self.signatures

    def ensure_loaded(self) -> None:
        if self.signature_path is None:
            self.load_database()

    def list_signatures(self) -> List[SignatureSummary]:
        self.ensure_loaded()
        return [
            SignatureSummary(
                name=family.name,
                components=len(family.components),
                specificity=specificity(family),
                metadata=family.metadata,
            )
            for family in self.signatures
        ]

    def get_signature(self, name: str) -> FamilySignature:
        """Family by name; KeyError when unknown"""
        self.ensure_loaded()
        for family in self.signatures:
            if family.name == name:
                return family
        raise KeyError(name)

    def lint(self) -> LintReport:
        self.ensure_loaded()
        findings = lint_signatures(self.signatures)
        return LintReport(
            findings=findings,
            errors=sum(1 for finding in findings if finding.severity == "error"),
            warnings=sum(1 for finding in findings if finding.severity == "warning"),
        )

    # ==================== SINGLE MODEL ====================

    def load_graph(self, source: ModelSource, canonicalize: bool = False,
                   strict: Optional[bool] = None) -> AgnosticGraph:
        strict = self.config.scan.strict if strict is None else strict
        graph = load_model(source, strict=strict)
        if canonicalize:
            rules = load_default_rules() if self.rules is None else self.rules
            graph, _ = canonicalize_graph(graph, rules, constant_ops=self.config.scan.constant_ops)
        return graph

    def scan_source(self, source: ModelSource, mode: ScanMode = ScanMode.ALL_MATCHES,
                    canonicalize: bool = True, strict: Optional[bool] = None) -> ScanReport:
        """Ingest, canonicalize, block and match one model"""
        self.ensure_loaded()
        graph = self.load_graph(source, canonicalize=False, strict=strict)
        report = scan(
            graph,
            self.signatures,
            mode=mode,
            rules=self.rules,
            canonicalize=canonicalize,
            constant_ops=self.config.scan.constant_ops,
            origin=source.origin,
        )
        log_debug(
            f"Scanned {source.origin}",
            f"Nodes: {report.stats.nodes}, Blocks: {report.stats.blocks}, "
            f"Families: {', '.join(report.families) or 'none'}"
        )
        return report

    def scan_path(self, path: Union[str, Path], mode: ScanMode = ScanMode.ALL_MATCHES,
                  canonicalize: bool = True, strict: Optional[bool] = None) -> ScanReport:
        return self.scan_source(ModelSource.from_path(path), mode, canonicalize, strict)

    def block_dump(self, source: ModelSource, canonicalize: bool = True, dot: bool = False,
                   highlight: bool = False, strict: Optional[bool] = None) -> Union[Dict[str, Any], str]:
        """Block decomposition as a dict, or DOT source when ``dot`` is set"""
        graph = self.load_graph(source, canonicalize=canonicalize, strict=strict)
        block_graph = extract_blocks(graph, self.config.scan.constant_ops)
        if not dot:
            return block_graph_to_dict(block_graph, graph)
        owners = None
        if highlight:
            self.ensure_loaded()
            owners = matched_blocks(block_graph, self.signatures)
        return block_graph_to_dot(block_graph, graph, owners)

    def export_source(self, source: ModelSource, strict: Optional[bool] = None) -> Dict[str, Any]:
        return graph_to_interchange(self.load_graph(source, canonicalize=False, strict=strict))

    # ==================== BATCH ====================

    async def scan_paths_async(self, paths: Sequence[Union[str, Path]],
                               mode: ScanMode = ScanMode.ALL_MATCHES, canonicalize: bool = True,
                               jobs: int = 1, strict: Optional[bool] = None,
                               progress: bool = False) -> List[ScanOutcome]:
        """Scan many models with a bounded worker pool.

        Outcomes come back in input order; an unreadable model yields an
        outcome carrying its error instead of a report.
        """
        self.ensure_loaded()
        jobs = get_config().validate_scan_params(jobs=jobs)['jobs']
        started = datetime.now()
        self.update_status("running", f"Scanning {len(paths)} models", total=len(paths), completed=0, failed=0)

        semaphore = asyncio.Semaphore(jobs)
        loop = asyncio.get_running_loop()

        with ThreadPoolExecutor(max_workers=jobs) as executor, \
                tqdm(total=len(paths), desc="Scanning", unit="model", file=sys.stderr,
                     disable=not progress) as pbar:

            async def scan_one(path: Union[str, Path]) -> ScanReport:
                async with semaphore:
                    try:
                        return await loop.run_in_executor(
                            executor, self.scan_path, path, mode, canonicalize, strict
                        )
                    finally:
                        pbar.update(1)

            results = await asyncio.gather(*(scan_one(path) for path in paths), return_exceptions=True)

        outcomes = []
        for path, result in zip(paths, results):
            if isinstance(result, BaseException):
                error_type = getattr(result, "error_type", type(result).__name__)
                log_error(
                    error_type=error_type,
                    error_message=f"Could not scan {path}",
                    exception=result
                )
                outcomes.append(ScanOutcome(origin=str(path), error=str(result), error_type=error_type))
            else:
                outcomes.append(ScanOutcome(origin=str(path), report=result))

        failed = sum(1 for outcome in outcomes if not outcome.ok)
        completed = len(outcomes) - failed
        if failed:
            self.update_status("failed", f"{failed} of {len(outcomes)} models could not be scanned",
                               completed=completed, failed=failed,
                               error=next(o.error for o in outcomes if not o.ok))
            log_warning("Scan batch finished with failures",
                        f"Failed: {failed}, Scanned: {completed}, Duration: {format_duration(started, datetime.now())}")
        else:
            self.update_status("completed", f"Scanned {completed} models", completed=completed, failed=0)
            log_info("Scan batch finished",
                     f"Scanned: {completed}, Duration: {format_duration(started, datetime.now())}")
        return outcomes

    def scan_paths(self, paths: Sequence[Union[str, Path]], **kwargs) -> List[ScanOutcome]:
        """Synchronous wrapper around scan_paths_async"""
        return asyncio.run(self.scan_paths_async(paths, **kwargs))


# Global service instance
_scan_service: Optional[ScanService] = None


def get_scan_service() -> ScanService:
    """Get the global scan service instance"""
    global _scan_service
    if _scan_service is None:
        _scan_service = ScanService()
    return _scan_service


def reset_scan_service() -> ScanService:
    global _scan_service
    _scan_service = ScanService()
    return _scan_service


__all__ = [
    'ScanService',
    'get_scan_service',
    'reset_scan_service',
]
