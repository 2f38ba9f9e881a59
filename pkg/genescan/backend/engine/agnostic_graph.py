"""
Format-independent computational graph.

Readers produce RawOperation sequences; construct_agnostic_graph turns them into an
immutable AgnosticGraph of integer-addressed nodes with bidirectional adjacency.
Only names, operation types and topology are modelled.
"""

from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from .exceptions import GraphConstructionError, NodeLookupError


NodeId = int

INPUT_OP = "Input"
OUTPUT_OP = "Output"
INITIALIZER_OP = "Initializer"
DEFAULT_CONSTANT_OPS: FrozenSet[str] = frozenset({"Constant", INITIALIZER_OP})


# ==================== DATA MODELS ====================

class Node(BaseModel):
    """A single operation in the agnostic graph"""
    model_config = ConfigDict(frozen=True)

    id: NodeId = Field(..., ge=0, description="Dense id, 0..N-1 in presentation order")
    name: str = Field(..., description="Unique node name")
    operation_type: str = Field(..., description="Operator type, e.g. Conv or Mul")
    inputs: Tuple[NodeId, ...] = Field(default=(), description="Producer node ids in stored order")
    outputs: Tuple[NodeId, ...] = Field(default=(), description="Consumer node ids in stored order")


class Edge(BaseModel):
    """Dataflow from producer to consumer"""
    model_config = ConfigDict(frozen=True)

    source: NodeId = Field(..., description="Producer node id")
    destination: NodeId = Field(..., description="Consumer node id")


class RawOperation(BaseModel):
    """An operation as exposed by a model reader"""
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Operation name")
    operation_type: str = Field(..., description="Operator type")
    input_names: Tuple[str, ...] = Field(default=(), description="Tensor names consumed")
    output_names: Tuple[str, ...] = Field(default=(), description="Tensor names produced")


class AgnosticGraph(BaseModel):
    """Immutable computational graph shared by blocking, canonicalization and matching"""
    model_config = ConfigDict(frozen=True)

    nodes: Dict[NodeId, Node] = Field(default_factory=dict, description="Nodes keyed by id")
    edges: Tuple[Edge, ...] = Field(default=(), description="Deduplicated edges")
    graph_inputs: Tuple[NodeId, ...] = Field(default=(), description="Synthetic Input node ids")
    graph_outputs: Tuple[NodeId, ...] = Field(default=(), description="Synthetic Output node ids")
    warnings: Tuple[str, ...] = Field(default=(), description="Diagnostics collected while building the graph")

    def node(self, node_id: NodeId) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NodeLookupError(f"Unknown node id {node_id}") from None

    _name_index: Dict[str, NodeId] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        self._name_index = {node.name: node.id for node in self.nodes.values()}

    def node_by_name(self, name: str) -> Node:
        """Look a node up by its unique name"""
        if name not in self._name_index:
            raise NodeLookupError(f"Unknown node name '{name}'")
        return self.nodes[self._name_index[name]]

    def __len__(self) -> int:
        return len(self.nodes)


# ==================== CONSTRUCTION ====================

def assemble_graph(names: Sequence[str], op_types: Sequence[str],
                   edge_pairs: Iterable[Tuple[NodeId, NodeId]],
                   graph_inputs: Sequence[NodeId] = (), graph_outputs: Sequence[NodeId] = (),
                   warnings: Sequence[str] = ()) -> AgnosticGraph:
    """Build an AgnosticGraph from node names/types and producer->consumer pairs.

    Ids are the positions in ``names``. Duplicate pairs collapse into one edge,
    self-loops and cycles are rejected.
    """
    seen_names: Dict[str, NodeId] = {}
    for node_id, name in enumerate(names):
        if name in seen_names:
            raise GraphConstructionError(
                f"Duplicate node name '{name}' (ids {seen_names[name]} and {node_id})"
            )
        seen_names[name] = node_id

    count = len(names)
    inputs: List[List[NodeId]] = [[] for _ in range(count)]
    outputs: List[List[NodeId]] = [[] for _ in range(count)]
    edges: List[Edge] = []
    seen_pairs = set()

    for source, destination in edge_pairs:
        if not (0 <= source < count and 0 <= destination < count):
            raise GraphConstructionError(f"Edge {source}->{destination} references a missing node")
        if source == destination:
            raise GraphConstructionError(f"Self-loop on node '{names[source]}'")
        if (source, destination) in seen_pairs:
            continue
        seen_pairs.add((source, destination))
        edges.append(Edge(source=source, destination=destination))
        outputs[source].append(destination)
        inputs[destination].append(source)

    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(count))
    digraph.add_edges_from(seen_pairs)
    if not nx.is_directed_acyclic_graph(digraph):
        cycle = nx.find_cycle(digraph)
        path = " -> ".join(names[u] for u, _ in cycle) + f" -> {names[cycle[0][0]]}"
        raise GraphConstructionError(f"Cycle detected: {path}")

    nodes = {
        node_id: Node(
            id=node_id,
            name=names[node_id],
            operation_type=op_types[node_id],
            inputs=tuple(inputs[node_id]),
            outputs=tuple(outputs[node_id]),
        )
        for node_id in range(count)
    }
    return AgnosticGraph(
        nodes=nodes,
        edges=tuple(edges),
        graph_inputs=tuple(graph_inputs),
        graph_outputs=tuple(graph_outputs),
        warnings=tuple(warnings),
    )


def construct_agnostic_graph(operations: Sequence[RawOperation],
                             graph_inputs: Sequence[str] = (),
                             graph_outputs: Sequence[str] = (),
                             initializers: Iterable[str] = (),
                             strict: bool = False,
                             warnings: Sequence[str] = ()) -> AgnosticGraph:
    """Create the agnostic graph from raw operations.

    First pass maps every produced tensor name to its producer node, second pass
    resolves each consumed name through that map. Unresolved names become
    Initializer nodes unless ``strict`` is set.
    """
    names: List[str] = []
    op_types: List[str] = []
    producers: Dict[str, NodeId] = {}

    def add_node(name: str, op_type: str) -> NodeId:
        names.append(name)
        op_types.append(op_type)
        return len(names) - 1

    def claim(tensor: str, node_id: NodeId) -> None:
        if tensor in producers:
            raise GraphConstructionError(
                f"Tensor '{tensor}' is produced twice ('{names[producers[tensor]]}' and '{names[node_id]}')"
            )
        producers[tensor] = node_id

    input_ids = []
    for tensor in graph_inputs:
        node_id = add_node(f"input:{tensor}", INPUT_OP)
        claim(tensor, node_id)
        input_ids.append(node_id)

    op_names = set()
    op_ids = []
    for operation in operations:
        if operation.name in op_names:
            raise GraphConstructionError(f"Duplicate operation name '{operation.name}'")
        op_names.add(operation.name)
        node_id = add_node(operation.name, operation.operation_type)
        op_ids.append(node_id)
        for tensor in operation.output_names:
            if tensor:
                claim(tensor, node_id)

    output_ids = [add_node(f"output:{tensor}", OUTPUT_OP) for tensor in graph_outputs]

    for tensor in initializers:
        if tensor not in producers:
            producers[tensor] = add_node(f"initializer:{tensor}", INITIALIZER_OP)

    # (consumer id, consumed tensor names)
    consumers: List[Tuple[NodeId, Sequence[str]]] = [
        (node_id, operation.input_names) for node_id, operation in zip(op_ids, operations)
    ]
    consumers.extend((node_id, (tensor,)) for node_id, tensor in zip(output_ids, graph_outputs))

    edge_pairs = []
    for consumer, tensors in consumers:
        for tensor in tensors:
            if not tensor:
                # empty name marks an omitted optional input
                continue
            if tensor not in producers:
                if strict:
                    raise GraphConstructionError(
                        f"Input '{tensor}' of '{names[consumer]}' has no producer"
                    )
                producers[tensor] = add_node(f"initializer:{tensor}", INITIALIZER_OP)
            edge_pairs.append((producers[tensor], consumer))

    # Edges derived from operation outputs are the same pairs seen from the producer side;
    # the consumer pass above already yields all of them.
    return assemble_graph(names, op_types, edge_pairs, input_ids, output_ids, warnings)


# ==================== QUERIES ====================

def predecessors(graph: AgnosticGraph, node_id: NodeId) -> Tuple[NodeId, ...]:
    """Input node ids in stored order"""
    return graph.node(node_id).inputs


def successors(graph: AgnosticGraph, node_id: NodeId) -> Tuple[NodeId, ...]:
    """Output node ids in stored order"""
    return graph.node(node_id).outputs


def is_constant(node: Node, constant_ops: Optional[Iterable[str]] = None) -> bool:
    """True when the node is a constant source that blocking ignores"""
    ops = DEFAULT_CONSTANT_OPS if constant_ops is None else constant_ops
    return node.operation_type in ops


__all__ = [
    'NodeId',
    'INPUT_OP',
    'OUTPUT_OP',
    'INITIALIZER_OP',
    'DEFAULT_CONSTANT_OPS',
    'Node',
    'Edge',
    'RawOperation',
    'AgnosticGraph',
    'assemble_graph',
    'construct_agnostic_graph',
    'predecessors',
    'successors',
    'is_constant',
]
