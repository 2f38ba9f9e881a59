"""
Block extraction.

A block is a maximal run of nodes with linear execution flow: no node inside
a block other than the first has more than one non-constant input, and no node
other than the last has more than one output. Blocks and the edges between
their boundary nodes form the BlockGraph the matcher works on.
"""

from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from .agnostic_graph import INPUT_OP, AgnosticGraph, Node, NodeId, is_constant


# ==================== DATA MODELS ====================

class Block(BaseModel):
    """Sequence of nodes in execution order"""
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0, description="Block id, ordered by first node id")
    node_ids: Tuple[NodeId, ...] = Field(..., min_length=1, description="Member nodes in execution order")
    op_types: Tuple[str, ...] = Field(..., description="Operation types of the member nodes")

    @property
    def first(self) -> NodeId:
        return self.node_ids[0]

    @property
    def last(self) -> NodeId:
        return self.node_ids[-1]

    def __len__(self) -> int:
        return len(self.node_ids)


class BlockEdge(BaseModel):
    """Connection from the last node of src to the first node of dst"""
    model_config = ConfigDict(frozen=True)

    src: int = Field(..., description="Source block id")
    dst: int = Field(..., description="Destination block id")
    multiplicity: int = Field(1, ge=1, description="Number of graph edges behind this block edge")


class BlockGraph(BaseModel):
    """Blocks of one graph and the edges between them"""
    model_config = ConfigDict(frozen=True)

    blocks: Tuple[Block, ...] = Field(default=(), description="Blocks indexed by id")
    edges: Tuple[BlockEdge, ...] = Field(default=(), description="One entry per connected block pair")
    node_to_block: Dict[NodeId, int] = Field(default_factory=dict, description="Owning block per member node")
    isolated: Tuple[NodeId, ...] = Field(default=(), description="Non-constant nodes with no edges at all")

    _outgoing: Dict[int, Tuple[BlockEdge, ...]] = PrivateAttr(default_factory=dict)
    _incoming: Dict[int, Tuple[BlockEdge, ...]] = PrivateAttr(default_factory=dict)
    _by_ops: Dict[Tuple[str, ...], Tuple[int, ...]] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        outgoing: Dict[int, List[BlockEdge]] = {}
        incoming: Dict[int, List[BlockEdge]] = {}
        for edge in self.edges:
            outgoing.setdefault(edge.src, []).append(edge)
            incoming.setdefault(edge.dst, []).append(edge)
        self._outgoing = {key: tuple(value) for key, value in outgoing.items()}
        self._incoming = {key: tuple(value) for key, value in incoming.items()}

        by_ops: Dict[Tuple[str, ...], List[int]] = {}
        for block in self.blocks:
            by_ops.setdefault(block.op_types, []).append(block.id)
        self._by_ops = {key: tuple(value) for key, value in by_ops.items()}

    def block(self, block_id: int) -> Block:
        return self.blocks[block_id]

    def outgoing(self, block_id: int) -> Tuple[BlockEdge, ...]:
        """Edges leaving a block, ordered by destination id"""
        return self._outgoing.get(block_id, ())

    def incoming(self, block_id: int) -> Tuple[BlockEdge, ...]:
        return self._incoming.get(block_id, ())

    @property
    def op_sequences(self) -> Dict[Tuple[str, ...], Tuple[int, ...]]:
        """Distinct op sequences mapped to the ids of the blocks carrying them"""
        return self._by_ops

    def __len__(self) -> int:
        return len(self.blocks)


# ==================== EXTRACTION ====================

def number_of_inputs(node: Node, graph: AgnosticGraph,
                     constant_ops: Optional[Iterable[str]] = None) -> int:
    """Count the node's inputs that are not constant sources"""
    return sum(1 for pred in node.inputs if not is_constant(graph.node(pred), constant_ops))


def contains_block(seen: Set[Tuple[NodeId, ...]], block: Union[Block, Sequence[NodeId]]) -> bool:
    """Deduplicate emitted blocks by their exact node-id sequence.

    Empty blocks count as already seen. Unseen sequences are recorded.
    """
    node_ids = tuple(block.node_ids if isinstance(block, Block) else block)
    if not node_ids:
        return True
    if node_ids in seen:
        return True
    seen.add(node_ids)
    return False


def extract_blocks(graph: AgnosticGraph, constant_ops: Optional[Iterable[str]] = None) -> BlockGraph:
    """Partition the graph into blocks and connect them.

    Depth-first search starts at every input node (op type Input, or no
    non-constant input) in ascending id order, then at every node the first
    pass did not reach. A node continues the current block when it is the only
    output of the block's last node and has exactly one non-constant input.
    """
    ops = None if constant_ops is None else frozenset(constant_ops)
    constant = {node_id: is_constant(node, ops) for node_id, node in graph.nodes.items()}
    inputs_count = {
        node_id: sum(1 for pred in node.inputs if not constant[pred])
        for node_id, node in graph.nodes.items()
    }

    visited: Set[NodeId] = set()
    seen: Set[Tuple[NodeId, ...]] = set()
    chains: List[Tuple[NodeId, ...]] = []
    isolated: List[NodeId] = []

    def dfs(start: NodeId) -> None:
        stack = [start]
        while stack:
            node_id = stack.pop()
            if node_id in visited or constant[node_id]:
                continue
            node = graph.nodes[node_id]
            visited.add(node_id)
            if not node.inputs and not node.outputs:
                isolated.append(node_id)
                continue

            chain = [node_id]
            current = node
            while len(current.outputs) == 1:
                nxt = current.outputs[0]
                if constant[nxt] or nxt in visited or inputs_count[nxt] != 1:
                    break
                visited.add(nxt)
                chain.append(nxt)
                current = graph.nodes[nxt]

            if not contains_block(seen, chain):
                chains.append(tuple(chain))
            # reversed so the first stored output is explored first
            stack.extend(reversed(current.outputs))

    ordered = sorted(graph.nodes)
    for node_id in ordered:
        node = graph.nodes[node_id]
        if constant[node_id]:
            continue
        if node.operation_type == INPUT_OP or inputs_count[node_id] == 0:
            dfs(node_id)
    for node_id in ordered:
        if node_id not in visited and not constant[node_id]:
            dfs(node_id)

    return _connect_blocks(graph, chains, isolated)


def _connect_blocks(graph: AgnosticGraph, chains: Iterable[Sequence[NodeId]],
                    isolated: Iterable[NodeId]) -> BlockGraph:
    """Number the chains by first node and add the block edges between them"""
    ordered = sorted((tuple(chain) for chain in chains), key=lambda chain: chain[0])
    blocks = tuple(
        Block(
            id=index,
            node_ids=chain,
            op_types=tuple(graph.nodes[node_id].operation_type for node_id in chain),
        )
        for index, chain in enumerate(ordered)
    )
    node_to_block = {node_id: block.id for block in blocks for node_id in block.node_ids}

    multiplicity: Counter = Counter()
    for block in blocks:
        for pred in graph.nodes[block.first].inputs:
            owner = node_to_block.get(pred)
            if owner is not None and blocks[owner].last == pred:
                multiplicity[(owner, block.id)] += 1

    edges = tuple(
        BlockEdge(src=src, dst=dst, multiplicity=count)
        for (src, dst), count in sorted(multiplicity.items())
    )
    return BlockGraph(
        blocks=blocks,
        edges=edges,
        node_to_block=node_to_block,
        isolated=tuple(sorted(isolated)),
    )


def split_blocks(graph: AgnosticGraph, block_graph: BlockGraph,
                 cuts: Dict[int, Iterable[int]]) -> BlockGraph:
    """Cut blocks at member positions and reconnect the pieces.

    ``cuts`` maps a block id to positions inside it: position k starts a new
    block at the block's k-th node. Positions outside 1..len-1 are ignored.
    Block ids are renumbered by first node.
    """
    chains: List[Tuple[NodeId, ...]] = []
    for block in block_graph.blocks:
        positions = sorted({p for p in cuts.get(block.id, ()) if 0 < p < len(block)})
        bounds = [0, *positions, len(block)]
        chains.extend(block.node_ids[low:high] for low, high in zip(bounds, bounds[1:]))
    return _connect_blocks(graph, chains, block_graph.isolated)


__all__ = [
    'Block',
    'BlockEdge',
    'BlockGraph',
    'number_of_inputs',
    'contains_block',
    'extract_blocks',
    'split_blocks',
]
