"""
Signature database.

A signature describes a repeated subgraph as block patterns (op sequences with
wildcards and depth-wise repeats) connected by edge patterns (width-wise
minimum counts). A family holds one component, or several for Combo
signatures, all of which must match.

Block patterns run as a set of pattern positions stepped through the block's
op sequence; results are cached per (pattern, op sequence).
"""

import json
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, StrictInt, StrictStr, ValidationError

from .exceptions import SignatureError, format_json_path


ANY_ONE = "?"
ANY_MANY = "*"
ALTERNATION_SEPARATOR = "||"
MAX_REPEATS = 10000


# ==================== PATTERN MODELS ====================

class OpKind(str, Enum):
    LITERAL = "literal"
    ANY_ONE = "any_one"
    ANY_MANY = "any_many"
    ALTERNATION = "alternation"


class OpPattern(BaseModel):
    """One entry of a block's ops list"""
    model_config = ConfigDict(frozen=True)

    kind: OpKind
    op: Optional[str] = Field(None, description="Operation type for literals")
    options: Tuple[str, ...] = Field(default=(), description="Alternatives for alternations")

    @classmethod
    def parse(cls, text: str) -> "OpPattern":
        if text == ANY_ONE:
            return cls(kind=OpKind.ANY_ONE)
        if text == ANY_MANY:
            return cls(kind=OpKind.ANY_MANY)
        if ALTERNATION_SEPARATOR in text:
            options = tuple(part.strip() for part in text.split(ALTERNATION_SEPARATOR))
            if any(not option for option in options):
                raise ValueError(f"empty alternative in '{text}'")
            if any(option in (ANY_ONE, ANY_MANY) for option in options):
                raise ValueError(f"wildcards are not allowed inside an alternation: '{text}'")
            if len(set(options)) < 2:
                raise ValueError(f"alternation needs two distinct options: '{text}'")
            return cls(kind=OpKind.ALTERNATION, options=options)
        if not text.strip():
            raise ValueError("empty operation name")
        return cls(kind=OpKind.LITERAL, op=text)

    @property
    def is_concrete(self) -> bool:
        """Literals and alternations name real operations"""
        return self.kind in (OpKind.LITERAL, OpKind.ALTERNATION)

    def to_text(self) -> str:
        if self.kind == OpKind.ANY_ONE:
            return ANY_ONE
        if self.kind == OpKind.ANY_MANY:
            return ANY_MANY
        if self.kind == OpKind.ALTERNATION:
            return ALTERNATION_SEPARATOR.join(self.options)
        return self.op

    def accepts(self, op_type: str) -> bool:
        """Whether one op can be consumed by this entry"""
        if self.kind == OpKind.LITERAL:
            return op_type == self.op
        if self.kind == OpKind.ALTERNATION:
            return op_type in self.options
        return True


# (completed repetitions, index into the ops of the current repetition)
MatchState = Tuple[int, int]


class BlockPattern(BaseModel):
    """Expected op sequence of one block"""
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0, description="Pattern id, 0..n-1 within a component")
    ops: Tuple[OpPattern, ...] = Field(..., min_length=1, description="Op patterns in execution order")
    ignored_ops: FrozenSet[str] = Field(default=frozenset(), description="Op types removed before matching")
    repeats: Tuple[int, int] = Field((1, 1), description="Depth-wise repeat bounds (min, max)")

    _hash: int = PrivateAttr(default=0)

    def model_post_init(self, __context) -> None:
        # matches() hashes the pattern on every block test
        self._hash = hash((self.id, self.ops, self.ignored_ops, self.repeats))

    def __hash__(self) -> int:
        return self._hash

    @property
    def is_overly_broad(self) -> bool:
        return all(op.kind == OpKind.ANY_MANY for op in self.ops)

    @property
    def concrete_count(self) -> int:
        return sum(1 for op in self.ops if op.is_concrete)

    def matches(self, op_types: Sequence[str]) -> bool:
        """Anchored match of an op sequence, ignored ops removed first"""
        return _cached_match(self, tuple(op_types))

    def _closure(self, states: Set[MatchState]) -> Set[MatchState]:
        """Add the states reachable without consuming an op"""
        high = self.repeats[1]
        reached = set(states)
        frontier = list(states)
        while frontier:
            done, index = frontier.pop()
            if index == len(self.ops):
                following = (done + 1, 0)
            elif done < high and self.ops[index].kind == OpKind.ANY_MANY:
                following = (done, index + 1)
            else:
                continue
            if following[0] <= high and following not in reached:
                reached.add(following)
                frontier.append(following)
        return reached

    def simulate(self, op_types: Sequence[str]) -> bool:
        """Step the op sequence through the repeated pattern as a set of positions.

        Every op costs one pass over the live states, so there is no
        backtracking: the work is bounded by len(op_types) * len(ops) * max repeats.
        """
        if self.ignored_ops:
            op_types = [op for op in op_types if op not in self.ignored_ops]
        low, high = self.repeats
        states = self._closure({(0, 0)})
        for op_type in op_types:
            moved: Set[MatchState] = set()
            for done, index in states:
                if done >= high or index == len(self.ops):
                    continue
                entry = self.ops[index]
                if entry.kind == OpKind.ANY_MANY:
                    moved.add((done, index))
                elif entry.accepts(op_type):
                    moved.add((done, index + 1))
            if not moved:
                return False
            states = self._closure(moved)
        return any(index == 0 and low <= done <= high for done, index in states)


@lru_cache(maxsize=65536)
def _cached_match(pattern: BlockPattern, op_types: Tuple[str, ...]) -> bool:
    return pattern.simulate(op_types)


class EdgePattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    src: int = Field(..., description="Source pattern id")
    dst: int = Field(..., description="Destination pattern id")
    min_repeats: int = Field(1, ge=1, description="Width-wise minimum edge count")


class ComponentSignature(BaseModel):
    """Connected single-source, single-sink pattern graph"""
    model_config = ConfigDict(frozen=True)

    blocks: Tuple[BlockPattern, ...] = Field(..., description="Block patterns indexed by id")
    edges: Tuple[EdgePattern, ...] = Field(default=(), description="Edge patterns")
    min_repeats: int = Field(1, ge=1, description="Occurrences required for a match")
    start_id: int = Field(0, description="Unique source pattern")
    end_id: int = Field(0, description="Unique sink pattern")

    _outgoing: Dict[int, Tuple[EdgePattern, ...]] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        outgoing: Dict[int, List[EdgePattern]] = {}
        for edge in self.edges:
            outgoing.setdefault(edge.src, []).append(edge)
        self._outgoing = {key: tuple(value) for key, value in outgoing.items()}

    def pattern(self, pattern_id: int) -> BlockPattern:
        return self.blocks[pattern_id]

    def outgoing(self, pattern_id: int) -> Tuple[EdgePattern, ...]:
        return self._outgoing.get(pattern_id, ())

    def topological_order(self) -> List[int]:
        digraph = nx.DiGraph()
        digraph.add_nodes_from(block.id for block in self.blocks)
        digraph.add_edges_from((edge.src, edge.dst) for edge in self.edges)
        return list(nx.lexicographical_topological_sort(digraph))

    @property
    def specificity(self) -> int:
        return sum(block.concrete_count for block in self.blocks) + len(self.edges)


class FamilySignature(BaseModel):
    """Named detection: every component has to match"""
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Detection name")
    components: Tuple[ComponentSignature, ...] = Field(..., min_length=1)
    metadata: Optional[Dict[str, Any]] = Field(None, description="Free-form notes such as architecture or modality")

    @property
    def is_combo(self) -> bool:
        return len(self.components) > 1


class LintFinding(BaseModel):
    model_config = ConfigDict(frozen=True)

    severity: str = Field(..., description="error or warning")
    code: str = Field(..., description="Finding code")
    families: Tuple[str, ...] = Field(..., description="Families involved")
    message: str = Field(..., description="Human-readable explanation")


# ==================== JSON SCHEMA ====================

class _RawBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: StrictInt
    ops: List[StrictStr]
    ignored_ops: Optional[List[Optional[StrictStr]]] = None
    repeats: List[StrictInt] = Field(default_factory=lambda: [1, 1], min_length=2, max_length=2)


class _RawEdge(BaseModel):
    model_config = ConfigDict(extra="forbid")

    src: StrictInt
    dst: StrictInt
    min_repeats: StrictInt = 1


class _RawComponent(BaseModel):
    model_config = ConfigDict(extra="forbid")

    blocks: List[_RawBlock]
    edges: List[_RawEdge]
    min_repeats: StrictInt


class _RawSingle(_RawComponent):
    metadata: Optional[Dict[str, Any]] = None


class _RawCombo(BaseModel):
    model_config = ConfigDict(extra="forbid")

    components: List[_RawComponent]
    metadata: Optional[Dict[str, Any]] = None


def _validation_error(e: ValidationError, prefix: str) -> SignatureError:
    first = e.errors()[0]
    path = format_json_path(first["loc"])
    if path == "$":
        path = prefix
    elif path.startswith("["):
        path = prefix + path
    else:
        path = f"{prefix}.{path}"
    return SignatureError(first["msg"], path)


def _build_component(raw: _RawComponent, path: str) -> ComponentSignature:
    """Validate one component and resolve its start and end patterns"""
    if not raw.blocks:
        raise SignatureError("a component needs at least one block", f"{path}.blocks")
    if raw.min_repeats < 1:
        raise SignatureError("min_repeats must be at least 1", f"{path}.min_repeats")

    count = len(raw.blocks)
    declared: Dict[int, int] = {}
    for index, block in enumerate(raw.blocks):
        if block.id in declared:
            raise SignatureError(f"duplicate block id {block.id}", f"{path}.blocks[{index}].id")
        if not 0 <= block.id < count:
            raise SignatureError(f"block ids must be 0..{count - 1}", f"{path}.blocks[{index}].id")
        declared[block.id] = index

    patterns: Dict[int, BlockPattern] = {}
    for index, block in enumerate(raw.blocks):
        where = f"{path}.blocks[{index}]"
        if not block.ops:
            raise SignatureError("ops must not be empty", f"{where}.ops")
        ops = []
        for position, text in enumerate(block.ops):
            try:
                ops.append(OpPattern.parse(text))
            except ValueError as e:
                raise SignatureError(str(e), f"{where}.ops[{position}]") from None
        low, high = block.repeats
        if low < 1 or high < low or high > MAX_REPEATS:
            raise SignatureError(
                f"repeats must satisfy 1 <= min <= max <= {MAX_REPEATS}, got [{low}, {high}]", f"{where}.repeats"
            )
        ignored = frozenset(op for op in (block.ignored_ops or []) if op)
        patterns[block.id] = BlockPattern(id=block.id, ops=tuple(ops), ignored_ops=ignored, repeats=(low, high))

    edges = []
    pairs = set()
    for index, edge in enumerate(raw.edges):
        where = f"{path}.edges[{index}]"
        for field in ("src", "dst"):
            value = getattr(edge, field)
            if value not in patterns:
                raise SignatureError(f"unknown block id {value}", f"{where}.{field}")
        if edge.src == edge.dst:
            raise SignatureError("an edge cannot connect a block to itself", where)
        if edge.min_repeats < 1:
            raise SignatureError("min_repeats must be at least 1", f"{where}.min_repeats")
        if (edge.src, edge.dst) in pairs:
            raise SignatureError(f"duplicate edge {edge.src}->{edge.dst}", where)
        pairs.add((edge.src, edge.dst))
        edges.append(EdgePattern(src=edge.src, dst=edge.dst, min_repeats=edge.min_repeats))

    digraph = nx.DiGraph()
    digraph.add_nodes_from(patterns)
    digraph.add_edges_from(pairs)
    if not nx.is_weakly_connected(digraph):
        raise SignatureError("block patterns are not connected", f"{path}.edges")
    if not nx.is_directed_acyclic_graph(digraph):
        raise SignatureError("edges form a cycle", f"{path}.edges")
    sources = sorted(node for node, degree in digraph.in_degree() if degree == 0)
    sinks = sorted(node for node, degree in digraph.out_degree() if degree == 0)
    if len(sources) != 1:
        raise SignatureError(f"expected exactly one start block, found {sources}", f"{path}.edges")
    if len(sinks) != 1:
        raise SignatureError(f"expected exactly one end block, found {sinks}", f"{path}.edges")

    return ComponentSignature(
        blocks=tuple(patterns[block_id] for block_id in range(count)),
        edges=tuple(edges),
        min_repeats=raw.min_repeats,
        start_id=sources[0],
        end_id=sinks[0],
    )


def parse_component(entry: Any, path: str = "$") -> ComponentSignature:
    """Parse one Listing-style component object"""
    try:
        raw = _RawComponent.model_validate(entry)
    except ValidationError as e:
        raise _validation_error(e, path) from None
    return _build_component(raw, path)


def _parse_family(name: str, entry: Any) -> FamilySignature:
    if not isinstance(entry, dict):
        raise SignatureError("a signature must be a JSON object", name)
    try:
        if "components" in entry:
            raw = _RawCombo.model_validate(entry)
            if not raw.components:
                raise SignatureError("a combo needs at least one component", f"{name}.components")
            components = tuple(
                _build_component(component, f"{name}.components[{index}]")
                for index, component in enumerate(raw.components)
            )
        else:
            raw = _RawSingle.model_validate(entry)
            components = (_build_component(raw, name),)
    except ValidationError as e:
        raise _validation_error(e, name) from None
    return FamilySignature(name=name, components=components, metadata=raw.metadata)


def _reject_duplicate_keys(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
    result: Dict[str, Any] = {}
    for key, value in pairs:
        if key in result:
            raise SignatureError(f"key '{key}' defined twice", key)
        result[key] = value
    return result


def parse_signatures(payload: Union[bytes, str]) -> List[FamilySignature]:
    """Parse a signature database document into families, in document order"""
    if isinstance(payload, bytes):
        try:
            payload = payload.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SignatureError(f"not valid UTF-8 (byte {e.start})") from None
    try:
        document = json.loads(payload, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as e:
        raise SignatureError(f"invalid JSON: {e.msg} at line {e.lineno} column {e.colno}") from None
    except ValueError as e:
        # integers past the interpreter's digit limit
        raise SignatureError(f"invalid JSON: {e}") from None
    except RecursionError:
        raise SignatureError("document nests too deeply") from None
    if not isinstance(document, dict):
        raise SignatureError("the database must be a JSON object keyed by detection name")
    return [_parse_family(name, entry) for name, entry in document.items()]


def load_signature_path(path: Union[str, Path]) -> List[FamilySignature]:
    """Load a signature file, or merge every *.json file of a directory"""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    families: List[FamilySignature] = []
    defined: Dict[str, str] = {}
    for file in files:
        try:
            parsed = parse_signatures(file.read_bytes())
        except SignatureError as e:
            raise SignatureError(e.message, f"{file.name}:{e.path}") from None
        for family in parsed:
            if family.name in defined:
                raise SignatureError(
                    f"family already defined in {defined[family.name]}", f"{file.name}:{family.name}"
                )
            defined[family.name] = file.name
            families.append(family)
    return families


# ==================== SERIALIZATION ====================

def _component_to_dict(component: ComponentSignature) -> Dict[str, Any]:
    return {
        "blocks": [
            {
                "id": block.id,
                "ops": [op.to_text() for op in block.ops],
                "ignored_ops": sorted(block.ignored_ops),
                "repeats": list(block.repeats),
            }
            for block in component.blocks
        ],
        "edges": [
            {"src": edge.src, "dst": edge.dst, "min_repeats": edge.min_repeats}
            for edge in component.edges
        ],
        "min_repeats": component.min_repeats,
    }


def serialize_signatures(db: Sequence[FamilySignature]) -> Dict[str, Any]:
    """Canonical JSON form of a database"""
    document: Dict[str, Any] = {}
    for family in db:
        if family.is_combo:
            entry: Dict[str, Any] = {"components": [_component_to_dict(c) for c in family.components]}
        else:
            entry = _component_to_dict(family.components[0])
        if family.metadata is not None:
            entry["metadata"] = family.metadata
        document[family.name] = entry
    return document


# ==================== LINT & SCORING ====================

def specificity(sig: FamilySignature) -> int:
    """Concrete op patterns plus edges, summed over components"""
    return sum(component.specificity for component in sig.components)


def _unreachable_blocks(component: ComponentSignature) -> List[int]:
    reached = {component.start_id}
    frontier = [component.start_id]
    while frontier:
        current = frontier.pop()
        for edge in component.outgoing(current):
            if edge.dst not in reached:
                reached.add(edge.dst)
                frontier.append(edge.dst)
    return sorted(block.id for block in component.blocks if block.id not in reached)


def lint_signatures(db: Sequence[FamilySignature]) -> List[LintFinding]:
    """Report database problems; never raises"""
    findings: List[LintFinding] = []

    names: Dict[str, int] = {}
    for family in db:
        names[family.name] = names.get(family.name, 0) + 1
    for name, count in names.items():
        if count > 1:
            findings.append(LintFinding(
                severity="error", code="duplicate-name", families=(name,),
                message=f"family '{name}' is defined {count} times",
            ))

    owners: Dict[ComponentSignature, List[str]] = {}
    for family in db:
        for component in family.components:
            holders = owners.setdefault(component, [])
            if family.name not in holders:
                holders.append(family.name)
    for holders in owners.values():
        if len(holders) > 1:
            findings.append(LintFinding(
                severity="warning", code="shared-component", families=tuple(holders),
                message="identical component in " + ", ".join(holders)
                        + "; the detection cannot tell these families apart on this component alone",
            ))

    for family in db:
        for index, component in enumerate(family.components):
            where = family.name if not family.is_combo else f"{family.name}.components[{index}]"
            for block in component.blocks:
                if block.is_overly_broad:
                    findings.append(LintFinding(
                        severity="error", code="overly-broad-block", families=(family.name,),
                        message=f"{where}: block {block.id} matches every block",
                    ))
            for block_id in _unreachable_blocks(component):
                findings.append(LintFinding(
                    severity="error", code="unreachable-block", families=(family.name,),
                    message=f"{where}: block {block_id} is not reachable from block {component.start_id}",
                ))
    return findings


__all__ = [
    'OpKind',
    'OpPattern',
    'BlockPattern',
    'EdgePattern',
    'ComponentSignature',
    'FamilySignature',
    'LintFinding',
    'parse_component',
    'parse_signatures',
    'load_signature_path',
    'serialize_signatures',
    'specificity',
    'lint_signatures',
]
