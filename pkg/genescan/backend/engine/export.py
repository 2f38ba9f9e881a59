"""
Writers for the JSON interchange format, block dumps and Graphviz DOT.
"""

from typing import Any, Dict, List, Optional, Sequence

import graphviz

from .agnostic_graph import INITIALIZER_OP, INPUT_OP, OUTPUT_OP, AgnosticGraph, Node
from .blocking import BlockGraph
from .matcher import evaluate_family, find_occurrence, get_start_nodes
from .signature_db import FamilySignature


# fill colours for highlighted families, cycled
PALETTE = (
    "#f4cccc", "#cfe2f3", "#d9ead3", "#fff2cc", "#d9d2e9", "#fce5cd", "#d0e0e3", "#ead1dc",
)

_SYNTHETIC_PREFIXES = {INPUT_OP: "input:", OUTPUT_OP: "output:", INITIALIZER_OP: "initializer:"}


def _tensor_of(node: Node) -> str:
    prefix = _SYNTHETIC_PREFIXES.get(node.operation_type)
    if prefix and node.name.startswith(prefix):
        return node.name[len(prefix):]
    return node.name


# ==================== JSON ====================

def graph_to_interchange(graph: AgnosticGraph) -> Dict[str, Any]:
    """Export a graph in the JSON interchange format.

    Every operation produces one tensor named after itself, plus the names of
    the graph outputs it feeds. Re-ingesting the document gives back the same
    names, op types and adjacency.
    """
    inputs: List[str] = []
    outputs: List[str] = []
    initializers: List[str] = []
    tensors: Dict[int, str] = {}

    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        if node.operation_type == INPUT_OP:
            tensors[node_id] = _tensor_of(node)
            inputs.append(tensors[node_id])
        elif node.operation_type == OUTPUT_OP:
            outputs.append(_tensor_of(node))
        elif node.operation_type == INITIALIZER_OP:
            tensors[node_id] = _tensor_of(node)
            initializers.append(tensors[node_id])

    taken = set(inputs) | set(outputs) | set(initializers)
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        if node.operation_type in _SYNTHETIC_PREFIXES:
            continue
        tensor = node.name
        suffix = 0
        while tensor in taken:
            suffix += 1
            tensor = f"{node.name}:{suffix}"
        taken.add(tensor)
        tensors[node_id] = tensor

    nodes = []
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        if node.operation_type in _SYNTHETIC_PREFIXES:
            continue
        produced = [tensors[node_id]]
        for succ in node.outputs:
            if graph.nodes[succ].operation_type == OUTPUT_OP:
                produced.append(_tensor_of(graph.nodes[succ]))
        nodes.append({
            "name": node.name,
            "op": node.operation_type,
            "inputs": [tensors[pred] for pred in node.inputs],
            "outputs": list(dict.fromkeys(produced)),
        })

    return {"nodes": nodes, "inputs": inputs, "outputs": outputs, "initializers": initializers}


def block_graph_to_dict(block_graph: BlockGraph, graph: AgnosticGraph) -> Dict[str, Any]:
    """Block dump used for signature authoring"""
    return {
        "blocks": [
            {
                "id": block.id,
                "nodes": [graph.node(node_id).name for node_id in block.node_ids],
                "ops": list(block.op_types),
            }
            for block in block_graph.blocks
        ],
        "edges": [
            {"src": edge.src, "dst": edge.dst, "multiplicity": edge.multiplicity}
            for edge in block_graph.edges
        ],
        "isolated": [graph.node(node_id).name for node_id in block_graph.isolated],
    }


# ==================== DOT ====================

def matched_blocks(block_graph: BlockGraph, db: Sequence[FamilySignature]) -> Dict[int, str]:
    """Block id -> family name for every block used by a matching family"""
    owners: Dict[int, str] = {}
    for family in sorted(db, key=lambda family: family.name):
        if evaluate_family(family, block_graph) is None:
            continue
        for component in family.components:
            for start in get_start_nodes(component, block_graph):
                for block_id in find_occurrence(component, block_graph, start) or ():
                    owners.setdefault(block_id, family.name)
    return owners


def _escape_record(text: str) -> str:
    for char in ("\\", "{", "}", "|", "<", ">", '"'):
        text = text.replace(char, "\\" + char)
    return text


def block_graph_to_dot(block_graph: BlockGraph, graph: AgnosticGraph,
                       highlight: Optional[Dict[int, str]] = None) -> str:
    """DOT source with one record node per block.

    Edges carry their multiplicity when it is above one. Blocks listed in
    ``highlight`` are filled with one colour per family.
    """
    highlight = highlight or {}
    colours = {family: PALETTE[index % len(PALETTE)]
               for index, family in enumerate(sorted(set(highlight.values())))}

    dot = graphviz.Digraph("blocks", node_attr={"shape": "record", "fontname": "Helvetica"})
    dot.attr(rankdir="TB")

    for block in block_graph.blocks:
        ops = "\\l".join(_escape_record(op) for op in block.op_types) + "\\l"
        label = f"{{block {block.id}|{ops}}}"
        family = highlight.get(block.id)
        if family is None:
            dot.node(f"b{block.id}", label=label)
        else:
            dot.node(f"b{block.id}", label=label, style="filled", fillcolor=colours[family],
                     tooltip=family)

    for edge in block_graph.edges:
        if edge.multiplicity > 1:
            dot.edge(f"b{edge.src}", f"b{edge.dst}", label=str(edge.multiplicity))
        else:
            dot.edge(f"b{edge.src}", f"b{edge.dst}")

    return dot.source


__all__ = [
    'PALETTE',
    'graph_to_interchange',
    'block_graph_to_dict',
    'matched_blocks',
    'block_graph_to_dot',
]
