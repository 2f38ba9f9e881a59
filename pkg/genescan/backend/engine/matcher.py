"""
Signature matching over block graphs.

A block satisfies a pattern when its op sequence matches the pattern and, for
every edge pattern leaving it, enough outgoing block edges (counted with
multiplicity) lead to blocks that satisfy the edge's destination pattern. The
sink pattern is satisfied by any block that matches it. A component matches
when at least min_repeats start blocks satisfy the start pattern; a family
matches when all of its components do.
"""

import time
from itertools import combinations
from enum import Enum
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .agnostic_graph import AgnosticGraph
from .blocking import Block, BlockGraph, extract_blocks
from .exceptions import BruteForceLimitError, MatchError
from .signature_db import BlockPattern, ComponentSignature, FamilySignature, specificity


BRUTE_FORCE_BLOCK_LIMIT = 20


class ScanMode(str, Enum):
    """How many families a scan reports"""
    ALL_MATCHES = "all"
    BEST_MATCH = "best"


# ==================== REPORT MODELS ====================

class Detection(BaseModel):
    """A family whose components all matched"""
    model_config = ConfigDict(frozen=True)

    family: str = Field(..., description="Family name")
    matched_components: int = Field(..., description="Components that matched")
    total_components: int = Field(..., description="Components in the family")
    start_block_ids: Tuple[int, ...] = Field(default=(), description="Start block of every counted occurrence")
    specificity: int = Field(..., description="Ranking score of the family")


class ScanStats(BaseModel):
    nodes: int = Field(0, description="Nodes in the scanned graph")
    blocks: int = Field(0, description="Blocks extracted")
    ms: float = Field(0.0, description="Wall-clock time in milliseconds")
    canonicalized: int = Field(0, description="Fused idiom occurrences")


class ScanReport(BaseModel):
    """Result of scanning one model"""
    origin: str = Field(..., description="Path or URI of the model")
    mode: ScanMode = Field(ScanMode.ALL_MATCHES, description="Reporting mode")
    detections: List[Detection] = Field(default_factory=list, description="Sorted by specificity, then name")
    warnings: List[str] = Field(default_factory=list, description="Diagnostics")
    stats: ScanStats = Field(default_factory=ScanStats)

    @property
    def families(self) -> List[str]:
        return [detection.family for detection in self.detections]

    def to_json_dict(self) -> Dict[str, Any]:
        """External report schema"""
        return {
            "origin": self.origin,
            "mode": self.mode.value,
            "detections": [
                {
                    "family": detection.family,
                    "specificity": detection.specificity,
                    "components": detection.total_components,
                    "occurrences": list(detection.start_block_ids),
                }
                for detection in self.detections
            ],
            "warnings": list(self.warnings),
            "stats": {
                "nodes": self.stats.nodes,
                "blocks": self.stats.blocks,
                "ms": round(self.stats.ms, 3),
                "canonicalized": self.stats.canonicalized,
            },
        }


class SignatureCheck(NamedTuple):
    matched: bool
    occurrences: int
    starts: Tuple[int, ...]


# ==================== BLOCK LEVEL ====================

def match_block_pattern(pattern: BlockPattern, block: Block) -> bool:
    """Whole-sequence match of a block against a pattern"""
    return pattern.matches(block.op_types)


def _matching_blocks(pattern: BlockPattern, blocks: BlockGraph) -> List[int]:
    matched: List[int] = []
    for op_types, block_ids in blocks.op_sequences.items():
        if pattern.matches(op_types):
            matched.extend(block_ids)
    return sorted(matched)


def check_all_blocks(component: ComponentSignature, blocks: BlockGraph) -> bool:
    """Prefilter: every block pattern matches at least one block"""
    return all(
        any(pattern.matches(op_types) for op_types in blocks.op_sequences)
        for pattern in component.blocks
    )


def get_start_nodes(component: ComponentSignature, blocks: BlockGraph) -> List[Block]:
    """Blocks matching the component's start pattern, ascending id"""
    start = component.pattern(component.start_id)
    return [blocks.block(block_id) for block_id in _matching_blocks(start, blocks)]


# ==================== TRAVERSAL ====================

def traverse_from_start(component: ComponentSignature, current: Block, pattern_id: int,
                        visited_edge_counts: Dict[Tuple[int, int, int], int], blocks: BlockGraph,
                        memo: Optional[Dict[Tuple[int, int], bool]] = None, _depth: int = 0) -> bool:
    """Check that ``current`` (already matching ``pattern_id``) satisfies it.

    visited_edge_counts receives, per (block, edge source, edge destination),
    the number of successful destinations found; memo caches results per
    (block, pattern) and must only be shared within one start attempt.
    """
    if _depth > len(blocks):
        raise MatchError(f"traversal deeper than the {len(blocks)} blocks of the graph")
    if pattern_id == component.end_id:
        return True
    if memo is None:
        memo = {}
    key = (current.id, pattern_id)
    if key in memo:
        return memo[key]

    satisfied = True
    for edge in component.outgoing(pattern_id):
        target = component.pattern(edge.dst)
        count = 0
        for block_edge in blocks.outgoing(current.id):
            destination = blocks.block(block_edge.dst)
            if not match_block_pattern(target, destination):
                continue
            if traverse_from_start(component, destination, edge.dst, visited_edge_counts, blocks,
                                   memo, _depth + 1):
                count += block_edge.multiplicity
        visited_edge_counts[(current.id, edge.src, edge.dst)] = count
        if count < edge.min_repeats:
            satisfied = False
            break

    memo[key] = satisfied
    return satisfied


def check_signature(component: ComponentSignature, blocks: BlockGraph) -> SignatureCheck:
    """Count the start blocks from which the whole component is satisfied"""
    if not check_all_blocks(component, blocks):
        return SignatureCheck(False, 0, ())
    starts = []
    for block in get_start_nodes(component, blocks):
        # counts and memo are reset for every start attempt
        if traverse_from_start(component, block, component.start_id, {}, blocks, {}):
            starts.append(block.id)
    return SignatureCheck(len(starts) >= component.min_repeats, len(starts), tuple(starts))


def find_occurrence(component: ComponentSignature, blocks: BlockGraph, start: Block) -> Optional[List[int]]:
    """Blocks used by one successful traversal from ``start``, or None.

    For each edge pattern the first min_repeats successful destinations are
    taken, in block-edge order.
    """
    if not match_block_pattern(component.pattern(component.start_id), start):
        return None
    memo: Dict[Tuple[int, int], bool] = {}
    if not traverse_from_start(component, start, component.start_id, {}, blocks, memo):
        return None

    used: Set[int] = set()

    def collect(block: Block, pattern_id: int) -> None:
        used.add(block.id)
        if pattern_id == component.end_id:
            return
        for edge in component.outgoing(pattern_id):
            target = component.pattern(edge.dst)
            found = 0
            for block_edge in blocks.outgoing(block.id):
                if found >= edge.min_repeats:
                    break
                destination = blocks.block(block_edge.dst)
                if match_block_pattern(target, destination) and traverse_from_start(
                        component, destination, edge.dst, {}, blocks, memo):
                    collect(destination, edge.dst)
                    found += block_edge.multiplicity

    collect(start, component.start_id)
    return sorted(used)


def brute_force_match(component: ComponentSignature, blocks: BlockGraph,
                      limit: int = BRUTE_FORCE_BLOCK_LIMIT) -> bool:
    """Exhaustive reference matcher for small block graphs.

    Enumerates mappings directly: outgoing block edges are expanded into one
    slot per unit of multiplicity, and for every edge pattern each choice of
    min_repeats slots is tried until all chosen destinations embed the rest of
    the pattern. No prefilter, memo or edge counting.
    """
    if len(blocks) > limit:
        raise BruteForceLimitError(f"{len(blocks)} blocks exceed the limit of {limit}")

    def embeds(pattern_id: int, block_id: int) -> bool:
        if not component.pattern(pattern_id).matches(blocks.block(block_id).op_types):
            return False
        for edge in component.edges:
            if edge.src != pattern_id:
                continue
            slots = [
                block_edge.dst
                for block_edge in blocks.edges if block_edge.src == block_id
                for _ in range(block_edge.multiplicity)
            ]
            if not any(all(embeds(edge.dst, dst) for dst in choice)
                       for choice in combinations(slots, edge.min_repeats)):
                return False
        return True

    starts = [block.id for block in blocks.blocks if embeds(component.start_id, block.id)]
    return len(starts) >= component.min_repeats


# ==================== FAMILIES & SCAN ====================

def evaluate_family(family: FamilySignature, blocks: BlockGraph) -> Optional[Detection]:
    """Detection when every component of the family matches"""
    starts: List[int] = []
    for component in family.components:
        check = check_signature(component, blocks)
        if not check.matched:
            return None
        starts.extend(check.starts)
    total = len(family.components)
    return Detection(
        family=family.name,
        matched_components=total,
        total_components=total,
        start_block_ids=tuple(starts),
        specificity=specificity(family),
    )


def rank_detections(detections: Iterable[Detection]) -> List[Detection]:
    return sorted(detections, key=lambda detection: (-detection.specificity, detection.family))


def scan(graph: AgnosticGraph, db: Sequence[FamilySignature], mode: ScanMode = ScanMode.ALL_MATCHES,
         rules: Optional[Sequence[Any]] = None, canonicalize: bool = True,
         constant_ops: Optional[Iterable[str]] = None, origin: str = "<memory>") -> ScanReport:
    """Canonicalize, extract blocks and evaluate every family.

    ``rules`` defaults to the shipped rewrite rules. A family that fails to
    evaluate becomes a warning.
    """
    from .canonicalize import canonicalize_graph, load_default_rules

    started = time.perf_counter()
    fused = 0
    if canonicalize:
        graph, fused = canonicalize_graph(graph, load_default_rules() if rules is None else rules,
                                          constant_ops=constant_ops)

    block_graph = extract_blocks(graph, constant_ops)
    warnings = list(graph.warnings)
    if block_graph.isolated:
        names = ", ".join(graph.node(node_id).name for node_id in block_graph.isolated)
        warnings.append(f"isolated nodes ignored: {names}")

    detections = []
    for family in db:
        try:
            detection = evaluate_family(family, block_graph)
        except Exception as e:
            warnings.append(f"{family.name}: evaluation failed ({type(e).__name__}: {e})")
            continue
        if detection is not None:
            detections.append(detection)

    detections = rank_detections(detections)
    if mode == ScanMode.BEST_MATCH:
        detections = detections[:1]

    return ScanReport(
        origin=origin,
        mode=mode,
        detections=detections,
        warnings=warnings,
        stats=ScanStats(
            nodes=len(graph),
            blocks=len(block_graph),
            ms=(time.perf_counter() - started) * 1000.0,
            canonicalized=fused,
        ),
    )


__all__ = [
    'ScanMode',
    'Detection',
    'ScanStats',
    'ScanReport',
    'SignatureCheck',
    'match_block_pattern',
    'check_all_blocks',
    'get_start_nodes',
    'traverse_from_start',
    'check_signature',
    'find_occurrence',
    'brute_force_match',
    'evaluate_family',
    'rank_detections',
    'scan',
]
