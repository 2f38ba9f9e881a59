"""Tests for block extraction, including randomized invariant checks."""

from collections import Counter

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from genescan.backend.engine.agnostic_graph import DEFAULT_CONSTANT_OPS, assemble_graph
from genescan.backend.engine.blocking import contains_block, extract_blocks, number_of_inputs, split_blocks

PROPERTY_SETTINGS = settings(
    max_examples=1000,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)

_OPS = ("Add", "Mul", "Relu", "Conv", "MatMul", "Constant")


def _block_names(block_graph, graph):
    return [[graph.node(node_id).name for node_id in block.node_ids] for block in block_graph.blocks]


@st.composite
def random_dags(draw: st.DrawFn):
    size = draw(st.integers(min_value=0, max_value=30))
    op_types = draw(st.lists(st.sampled_from(_OPS), min_size=size, max_size=size))
    possible = [(src, dst) for dst in range(size) for src in range(dst)]
    pairs = draw(st.lists(st.sampled_from(possible), unique=True, max_size=60)) if possible else []
    return assemble_graph([f"n{index}" for index in range(size)], op_types, pairs)


class TestGoldenDecompositions:
    def test_diamond(self, load_graph):
        graph = load_graph("figure1")

        block_graph = extract_blocks(graph)

        assert _block_names(block_graph, graph) == [["1", "2", "3"], ["4", "6"], ["5", "7"], ["8", "9"]]
        assert {(edge.src, edge.dst) for edge in block_graph.edges} == {(0, 1), (0, 2), (1, 3), (2, 3)}
        assert all(edge.multiplicity == 1 for edge in block_graph.edges)

    def test_constant_elision(self, load_graph):
        graph = load_graph("figure4")

        block_graph = extract_blocks(graph)

        assert _block_names(block_graph, graph) == [["mul"]]
        assert block_graph.edges == ()

    def test_empty_graph(self):
        block_graph = extract_blocks(assemble_graph([], [], []))

        assert len(block_graph) == 0
        assert block_graph.edges == ()

    def test_isolated_node_is_not_a_block(self):
        graph = assemble_graph(["lonely", "a", "b"], ["Relu", "Add", "Mul"], [(1, 2)])

        block_graph = extract_blocks(graph)

        assert block_graph.isolated == (0,)
        assert _block_names(block_graph, graph) == [["a", "b"]]

    def test_multiplicity_counts_parallel_paths(self):
        # split feeds two single-node branches that rejoin
        graph = assemble_graph(
            ["split", "left", "right", "join"],
            ["Split", "Relu", "Relu", "Concat"],
            [(0, 1), (0, 2), (1, 3), (2, 3)],
        )

        block_graph = extract_blocks(graph)

        assert _block_names(block_graph, graph) == [["split"], ["left"], ["right"], ["join"]]
        assert len(block_graph.outgoing(0)) == 2
        assert [edge.src for edge in block_graph.incoming(3)] == [1, 2]

    def test_custom_constant_ops(self, load_graph):
        graph = load_graph("deberta")

        default = extract_blocks(graph)
        widened = extract_blocks(graph, DEFAULT_CONSTANT_OPS | {"ConstantOfShape"})

        assert ("ConstantOfShape",) in default.op_sequences
        assert ("ConstantOfShape",) not in widened.op_sequences

    def test_op_sequences_index(self, load_graph):
        block_graph = extract_blocks(load_graph("deberta"))

        assert len(block_graph.op_sequences[("MatMul",)]) == 5


class TestSplitBlocks:
    def test_pieces_are_renumbered_and_chained(self, load_graph):
        graph = load_graph("figure1")

        split = split_blocks(graph, extract_blocks(graph), {0: [1], 3: [1, 5, 0]})

        assert _block_names(split, graph) == [["1"], ["2", "3"], ["4", "6"], ["5", "7"], ["8"], ["9"]]
        assert {(edge.src, edge.dst) for edge in split.edges} == {(0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5)}
        assert split.node_to_block[graph.node_by_name("9").id] == 5

    def test_no_cuts(self, load_graph):
        graph = load_graph("figure1")
        block_graph = extract_blocks(graph)

        split = split_blocks(graph, block_graph, {})

        assert split.blocks == block_graph.blocks
        assert split.edges == block_graph.edges

    @PROPERTY_SETTINGS
    @given(graph=random_dags(), data=st.data())
    def test_split_keeps_the_partition(self, graph, data):
        block_graph = extract_blocks(graph)
        cuts = {
            block.id: data.draw(st.lists(st.integers(min_value=0, max_value=len(block)), max_size=3))
            for block in block_graph.blocks
        }

        split = split_blocks(graph, block_graph, cuts)

        assert sorted(n for block in split.blocks for n in block.node_ids) == \
            sorted(n for block in block_graph.blocks for n in block.node_ids)
        assert [block.first for block in split.blocks] == sorted(block.first for block in split.blocks)
        assert len(split) >= len(block_graph)


class TestNumberOfInputs:
    def test_constant_feeders(self, load_graph):
        graph = load_graph("figure4")

        assert number_of_inputs(graph.node_by_name("mul"), graph) == 0

    def test_convergence(self, load_graph):
        graph = load_graph("figure1")

        assert number_of_inputs(graph.node_by_name("8"), graph) == 2

    def test_source(self, load_graph):
        graph = load_graph("figure1")

        assert number_of_inputs(graph.node_by_name("1"), graph) == 0


class TestContainsBlock:
    def test_empty_block_is_discarded(self):
        assert contains_block(set(), ())

    def test_second_sight(self):
        seen = set()

        assert not contains_block(seen, (3, 5))
        assert contains_block(seen, (3, 5))

    def test_order_sensitive(self):
        seen = set()

        assert not contains_block(seen, (3, 5))
        assert not contains_block(seen, (5, 3))


class TestBlockingProperties:
    @PROPERTY_SETTINGS
    @given(graph=random_dags())
    def test_partition(self, graph):
        block_graph = extract_blocks(graph)

        members = Counter(node_id for block in block_graph.blocks for node_id in block.node_ids)
        expected = {
            node_id for node_id, node in graph.nodes.items()
            if node.operation_type not in DEFAULT_CONSTANT_OPS and node_id not in block_graph.isolated
        }
        assert set(members) == expected
        assert all(count == 1 for count in members.values())
        for node_id in block_graph.isolated:
            assert not graph.node(node_id).inputs and not graph.node(node_id).outputs

    @PROPERTY_SETTINGS
    @given(graph=random_dags())
    def test_linearity(self, graph):
        block_graph = extract_blocks(graph)

        for block in block_graph.blocks:
            for previous, current in zip(block.node_ids, block.node_ids[1:]):
                assert graph.node(previous).outputs == (current,)
                assert number_of_inputs(graph.node(current), graph) == 1

    @PROPERTY_SETTINGS
    @given(graph=random_dags())
    def test_boundaries(self, graph):
        block_graph = extract_blocks(graph)
        owner = block_graph.node_to_block

        crossing = Counter()
        for edge in graph.edges:
            if edge.source not in owner or edge.destination not in owner:
                continue
            src, dst = owner[edge.source], owner[edge.destination]
            if src == dst:
                continue
            assert block_graph.block(src).last == edge.source
            assert block_graph.block(dst).first == edge.destination
            crossing[(src, dst)] += 1

        assert {(edge.src, edge.dst): edge.multiplicity for edge in block_graph.edges} == dict(crossing)

    @PROPERTY_SETTINGS
    @given(graph=random_dags())
    def test_maximality(self, graph):
        block_graph = extract_blocks(graph)

        def constant(node_id):
            return graph.node(node_id).operation_type in DEFAULT_CONSTANT_OPS

        for block in block_graph.blocks:
            last = graph.node(block.last)
            if len(last.outputs) == 1:
                nxt = graph.node(last.outputs[0])
                assert constant(nxt.id) or number_of_inputs(nxt, graph) != 1

            first = graph.node(block.first)
            feeders = [pred for pred in first.inputs if not constant(pred)]
            if len(feeders) == 1:
                assert len(graph.node(feeders[0]).outputs) != 1

    @PROPERTY_SETTINGS
    @given(graph=random_dags())
    def test_ids_follow_first_node(self, graph):
        block_graph = extract_blocks(graph)

        firsts = [block.first for block in block_graph.blocks]
        assert firsts == sorted(firsts)
        assert [block.id for block in block_graph.blocks] == list(range(len(block_graph)))


@pytest.mark.parametrize("name", ["deberta", "bert_opset17", "ocr", "vit", "se_block", "roberta"])
def test_fixtures_are_partitioned(load_graph, name):
    graph = load_graph(name)

    block_graph = extract_blocks(graph)

    covered = sorted(node_id for block in block_graph.blocks for node_id in block.node_ids)
    expected = sorted(
        node_id for node_id, node in graph.nodes.items() if node.operation_type not in DEFAULT_CONSTANT_OPS
    )
    assert covered == expected
