"""
Operator fusion pass.

Rewrite rules describe a decomposed operator idiom with the signature
component schema. Every non-overlapping occurrence is contracted into one
synthetic node so signatures written against the fused operator also match
the decomposed dialect.
"""

import json
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field

from .agnostic_graph import INPUT_OP, OUTPUT_OP, AgnosticGraph, NodeId, assemble_graph, is_constant
from .blocking import BlockGraph, extract_blocks, split_blocks
from .exceptions import GraphConstructionError, RewriteError, SignatureError
from .matcher import check_all_blocks, find_occurrence, get_start_nodes
from .signature_db import ComponentSignature, parse_component


DEFAULT_RULES_PATH = Path(__file__).resolve().parent.parent / "data" / "rules"


class AnchorPolicy(str, Enum):
    """Which edges the fused node takes over"""
    BOUNDARY = "boundary"
    START_END = "start_end"


class RewriteRule(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Rule name")
    pattern: ComponentSignature = Field(..., description="Blocks of the idiom")
    replacement_op: str = Field(..., min_length=1, description="Operation type of the fused node")
    anchor: AnchorPolicy = Field(AnchorPolicy.BOUNDARY, description="Edge inheritance policy")


# ==================== LOADING ====================

def load_rules(source: Union[bytes, str, Path]) -> List[RewriteRule]:
    """Parse a rules document, or read it from a Path (file or directory of *.json)"""
    if isinstance(source, Path):
        return load_rules_path(source)
    try:
        document = json.loads(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise RewriteError(f"invalid rules JSON: {e}") from None
    if not isinstance(document, dict):
        raise RewriteError("a rules file must be a JSON object keyed by rule name")

    rules = []
    for name, entry in document.items():
        if not isinstance(entry, dict):
            raise RewriteError(f"{name}: a rule must be a JSON object")
        entry = dict(entry)
        replacement_op = entry.pop("replacement_op", None)
        anchor = entry.pop("anchor", AnchorPolicy.BOUNDARY.value)
        if not isinstance(replacement_op, str) or not replacement_op:
            raise RewriteError(f"{name}.replacement_op: a non-empty string is required")
        try:
            policy = AnchorPolicy(anchor)
        except ValueError:
            raise RewriteError(f"{name}.anchor: unknown anchor policy {anchor!r}") from None
        try:
            pattern = parse_component(entry, name)
        except SignatureError as e:
            raise RewriteError(str(e)) from None
        rules.append(RewriteRule(name=name, pattern=pattern, replacement_op=replacement_op, anchor=policy))
    return rules


def load_rules_path(path: Union[str, Path]) -> List[RewriteRule]:
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    rules: List[RewriteRule] = []
    for file in files:
        try:
            rules.extend(load_rules(file.read_bytes()))
        except RewriteError as e:
            raise RewriteError(f"{file.name}: {e}") from None
    return rules


@lru_cache(maxsize=1)
def load_default_rules() -> Tuple[RewriteRule, ...]:
    """Rules shipped with the package"""
    return tuple(load_rules_path(DEFAULT_RULES_PATH))


# ==================== REWRITING ====================

def _idiom_cuts(rule: RewriteRule, blocks: BlockGraph) -> Dict[int, Set[int]]:
    """Positions where an idiom's start or end sits inside a longer block.

    A fused-away idiom can share a block with its neighbours: its end merges
    into a single consumer, its start into a single-output producer. The
    shortest block suffix matching the start pattern and the shortest prefix
    matching the end pattern are cut off, unless the whole block already
    matches.
    """
    start = rule.pattern.pattern(rule.pattern.start_id)
    end = rule.pattern.pattern(rule.pattern.end_id)
    cuts: Dict[int, Set[int]] = {}
    for ops, block_ids in blocks.op_sequences.items():
        positions: Set[int] = set()
        if not start.matches(ops):
            for position in range(len(ops) - 1, 0, -1):
                if start.matches(ops[position:]):
                    positions.add(position)
                    break
        if not end.matches(ops):
            for position in range(1, len(ops)):
                if end.matches(ops[:position]):
                    positions.add(position)
                    break
        if positions:
            for block_id in block_ids:
                cuts[block_id] = positions
    return cuts


def _rule_blocks(graph: AgnosticGraph, rule: RewriteRule,
                 constant_ops: Optional[Iterable[str]]) -> BlockGraph:
    blocks = extract_blocks(graph, constant_ops)
    cuts = _idiom_cuts(rule, blocks)
    return split_blocks(graph, blocks, cuts) if cuts else blocks


def _find_occurrences(rule: RewriteRule, blocks: BlockGraph) -> List[Tuple[int, List[int]]]:
    """Non-overlapping (start block, blocks) occurrences in block order, first match wins"""
    if not check_all_blocks(rule.pattern, blocks):
        return []
    taken: Set[int] = set()
    occurrences = []
    for start in get_start_nodes(rule.pattern, blocks):
        if start.id in taken:
            continue
        witness = find_occurrence(rule.pattern, blocks, start)
        if witness is None or taken.intersection(witness):
            continue
        taken.update(witness)
        occurrences.append((start.id, witness))
    return occurrences


def _rejection(graph: AgnosticGraph, digraph: nx.DiGraph, rule: RewriteRule, blocks: BlockGraph,
               start: int, witness: List[int], constant_ops: Optional[Iterable[str]]) -> Optional[str]:
    """Reason an occurrence cannot be fused, or None"""
    members = {node_id for block_id in witness for node_id in blocks.block(block_id).node_ids}
    if any(graph.node(node_id).operation_type in (INPUT_OP, OUTPUT_OP) for node_id in members):
        return "it contains a graph input or output"

    leaving = {succ for node_id in members for succ in graph.node(node_id).outputs if succ not in members}
    for succ in leaving:
        if members & nx.descendants(digraph, succ):
            return "fusion would create a cycle"

    if rule.anchor == AnchorPolicy.START_END:
        inner = set(witness)
        start_nodes = set(blocks.block(start).node_ids)
        end_nodes = {
            node_id
            for block_id in witness
            if not any(edge.dst in inner for edge in blocks.outgoing(block_id))
            for node_id in blocks.block(block_id).node_ids
        }
        for node_id in members:
            node = graph.node(node_id)
            for pred in node.inputs:
                if pred in members or node_id in start_nodes:
                    continue
                if not is_constant(graph.node(pred), constant_ops):
                    return f"node '{node.name}' has an input from outside the start block"
            for succ in node.outputs:
                if succ not in members and node_id not in end_nodes:
                    return f"node '{node.name}' has an output outside the end block"
    return None


def _apply_rule(graph: AgnosticGraph, rule: RewriteRule,
                constant_ops: Optional[Iterable[str]]) -> Tuple[AgnosticGraph, int]:
    blocks = _rule_blocks(graph, rule, constant_ops)
    occurrences = _find_occurrences(rule, blocks)
    if not occurrences:
        return graph, 0

    digraph = nx.DiGraph()
    digraph.add_nodes_from(graph.nodes)
    digraph.add_edges_from((edge.source, edge.destination) for edge in graph.edges)

    warnings = list(graph.warnings)
    member_of: Dict[NodeId, int] = {}
    accepted = 0
    for start, witness in occurrences:
        reason = _rejection(graph, digraph, rule, blocks, start, witness, constant_ops)
        if reason is not None:
            message = f"rule '{rule.name}': occurrence at block {start} skipped, {reason}"
            if message not in warnings:
                warnings.append(message)
            continue
        for block_id in witness:
            for node_id in blocks.block(block_id).node_ids:
                member_of[node_id] = accepted
        accepted += 1

    if not accepted:
        if tuple(warnings) == graph.warnings:
            return graph, 0
        return graph.model_copy(update={"warnings": tuple(warnings)}), 0

    existing = {node.name for node in graph.nodes.values()}
    names: List[str] = []
    op_types: List[str] = []
    mapping: Dict[NodeId, NodeId] = {}
    fused_ids: Dict[int, NodeId] = {}
    counter = 0
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        occurrence = member_of.get(node_id)
        if occurrence is None:
            mapping[node_id] = len(names)
            names.append(node.name)
            op_types.append(node.operation_type)
            continue
        if occurrence not in fused_ids:
            counter += 1
            while f"{rule.replacement_op}#fused{counter}" in existing:
                counter += 1
            fused_ids[occurrence] = len(names)
            names.append(f"{rule.replacement_op}#fused{counter}")
            op_types.append(rule.replacement_op)
        mapping[node_id] = fused_ids[occurrence]

    pairs = [
        (mapping[edge.source], mapping[edge.destination])
        for edge in graph.edges
        if mapping[edge.source] != mapping[edge.destination]
    ]
    try:
        rewritten = assemble_graph(
            names,
            op_types,
            pairs,
            graph_inputs=[mapping[node_id] for node_id in graph.graph_inputs],
            graph_outputs=[mapping[node_id] for node_id in graph.graph_outputs],
            warnings=warnings,
        )
    except GraphConstructionError as e:
        message = f"rule '{rule.name}' skipped: {e}"
        if message not in warnings:
            warnings.append(message)
        return graph.model_copy(update={"warnings": tuple(warnings)}), 0
    return rewritten, accepted


def canonicalize_graph(graph: AgnosticGraph, rules: Sequence[RewriteRule],
                       constant_ops: Optional[Iterable[str]] = None) -> Tuple[AgnosticGraph, int]:
    """Apply every rule in order; returns the graph and the number of fused occurrences"""
    total = 0
    for rule in rules:
        graph, fused = _apply_rule(graph, rule, constant_ops)
        total += fused
    return graph, total


def apply_rules(graph: AgnosticGraph, rules: Sequence[RewriteRule],
                constant_ops: Optional[Iterable[str]] = None) -> AgnosticGraph:
    """Fuse all rule occurrences; a graph without occurrences comes back unchanged"""
    return canonicalize_graph(graph, rules, constant_ops)[0]


__all__ = [
    'DEFAULT_RULES_PATH',
    'AnchorPolicy',
    'RewriteRule',
    'load_rules',
    'load_rules_path',
    'load_default_rules',
    'canonicalize_graph',
    'apply_rules',
]
