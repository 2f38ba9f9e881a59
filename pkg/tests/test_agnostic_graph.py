"""Tests for the format-independent graph."""

import networkx as nx
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from genescan.backend.engine.agnostic_graph import (
    INITIALIZER_OP,
    INPUT_OP,
    OUTPUT_OP,
    Node,
    RawOperation,
    assemble_graph,
    construct_agnostic_graph,
    is_constant,
    predecessors,
    successors,
)
from genescan.backend.engine.exceptions import GraphConstructionError, NodeLookupError

PROPERTY_SETTINGS = settings(
    max_examples=300,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)


def _op(name, op_type, inputs=(), outputs=()):
    return RawOperation(name=name, operation_type=op_type, input_names=tuple(inputs), output_names=tuple(outputs))


class TestConstruction:
    def test_linear_chain(self):
        graph = construct_agnostic_graph([
            _op("A", "Relu", [], ["a"]),
            _op("B", "Relu", ["a"], ["b"]),
            _op("C", "Relu", ["b"], ["c"]),
        ])

        assert len(graph) == 3
        assert len(graph.edges) == 2
        sources = [node.name for node in graph.nodes.values() if not node.inputs]
        sinks = [node.name for node in graph.nodes.values() if not node.outputs]
        assert sources == ["A"]
        assert sinks == ["C"]

    def test_diamond_topology(self, load_graph):
        graph = load_graph("figure1")

        assert len(graph) == 9
        assert len(graph.edges) == 9
        assert len(graph.node_by_name("3").outputs) == 2
        assert len(graph.node_by_name("8").inputs) == 2

    def test_duplicate_operation_name(self):
        with pytest.raises(GraphConstructionError, match="conv"):
            construct_agnostic_graph([
                _op("conv", "Conv", [], ["a"]),
                _op("conv", "Conv", ["a"], ["b"]),
            ])

    def test_tensor_produced_twice(self):
        with pytest.raises(GraphConstructionError, match="produced twice"):
            construct_agnostic_graph([_op("a", "Relu", [], ["t"]), _op("b", "Relu", [], ["t"])])

    def test_dangling_input_becomes_initializer(self):
        graph = construct_agnostic_graph([_op("mul", "Mul", ["w"], ["y"])])

        weight = graph.node_by_name("initializer:w")
        assert weight.operation_type == INITIALIZER_OP
        assert graph.node_by_name("mul").inputs == (weight.id,)

    def test_dangling_input_rejected_in_strict_mode(self):
        with pytest.raises(GraphConstructionError, match="no producer"):
            construct_agnostic_graph([_op("mul", "Mul", ["w"], ["y"])], strict=True)

    def test_cycle_is_reported(self):
        with pytest.raises(GraphConstructionError, match="Cycle detected"):
            construct_agnostic_graph([
                _op("a", "Add", ["y"], ["x"]),
                _op("b", "Relu", ["x"], ["y"]),
            ])

    def test_synthetic_node_order(self):
        graph = construct_agnostic_graph(
            [_op("mul", "Mul", ["x", "c"], ["y"])],
            graph_inputs=["x"],
            graph_outputs=["y"],
            initializers=["c"],
        )

        names = [graph.nodes[node_id].name for node_id in sorted(graph.nodes)]
        assert names == ["input:x", "mul", "output:y", "initializer:c"]
        assert graph.node(graph.graph_inputs[0]).operation_type == INPUT_OP
        assert graph.node(graph.graph_outputs[0]).operation_type == OUTPUT_OP

    def test_repeated_tensor_gives_one_edge(self):
        graph = construct_agnostic_graph([
            _op("a", "Relu", [], ["t"]),
            _op("b", "Mul", ["t", "t"], ["u"]),
        ])

        assert len(graph.edges) == 1
        assert graph.node_by_name("b").inputs == (graph.node_by_name("a").id,)

    def test_omitted_optional_input_is_skipped(self):
        graph = construct_agnostic_graph([
            _op("a", "Relu", [], ["t"]),
            _op("clip", "Clip", ["t", "", ""], ["u"]),
        ])

        assert len(graph) == 2

    def test_adjacency_is_symmetric(self, load_graph):
        graph = load_graph("deberta")

        for node in graph.nodes.values():
            for succ in node.outputs:
                assert node.id in graph.node(succ).inputs
            for pred in node.inputs:
                assert node.id in graph.node(pred).outputs
        assert {(e.source, e.destination) for e in graph.edges} == {
            (node.id, succ) for node in graph.nodes.values() for succ in node.outputs
        }


class TestAssemble:
    def test_self_loop(self):
        with pytest.raises(GraphConstructionError, match="Self-loop"):
            assemble_graph(["a"], ["Relu"], [(0, 0)])

    def test_edge_to_missing_node(self):
        with pytest.raises(GraphConstructionError, match="missing node"):
            assemble_graph(["a", "b"], ["Relu", "Relu"], [(0, 5)])

    def test_duplicate_name(self):
        with pytest.raises(GraphConstructionError, match="Duplicate node name"):
            assemble_graph(["a", "a"], ["Relu", "Relu"], [])


class TestQueries:
    def test_predecessors_of_convergence(self, load_graph):
        graph = load_graph("figure1")
        node = graph.node_by_name("8")

        names = [graph.node(pred).name for pred in predecessors(graph, node.id)]
        assert names == ["6", "7"]

    def test_successors_of_divergence(self, load_graph):
        graph = load_graph("figure1")
        node = graph.node_by_name("3")

        names = [graph.node(succ).name for succ in successors(graph, node.id)]
        assert names == ["4", "5"]

    def test_source_has_no_predecessors(self, load_graph):
        graph = load_graph("figure1")

        assert predecessors(graph, graph.node_by_name("1").id) == ()

    def test_unknown_id(self, load_graph):
        graph = load_graph("figure1")

        with pytest.raises(NodeLookupError, match="999"):
            predecessors(graph, 999)

    def test_unknown_name(self, load_graph):
        with pytest.raises(NodeLookupError):
            load_graph("figure1").node_by_name("missing")

    @pytest.mark.parametrize("op_type,expected", [
        ("Constant", True),
        ("Initializer", True),
        ("ConstantOfShape", False),
        ("Mul", False),
    ])
    def test_is_constant(self, op_type, expected):
        node = Node(id=0, name="n", operation_type=op_type)

        assert is_constant(node) is expected

    def test_is_constant_with_custom_set(self):
        node = Node(id=0, name="n", operation_type="ConstantOfShape")

        assert is_constant(node, {"ConstantOfShape"})
        assert not is_constant(Node(id=1, name="c", operation_type="Constant"), set())


@st.composite
def ssa_programs(draw: st.DrawFn):
    """Operations in single-assignment form, presented in random order"""
    inputs = [f"in{index}" for index in range(draw(st.integers(min_value=0, max_value=3)))]
    available = list(inputs)
    operations = []
    for index in range(draw(st.integers(min_value=0, max_value=15))):
        consumed = draw(st.lists(st.sampled_from(available), max_size=3)) if available else []
        if draw(st.booleans()):
            consumed.append(f"w{index}")
        produced = [f"t{index}_{k}" for k in range(draw(st.integers(min_value=1, max_value=2)))]
        operations.append(_op(f"op{index}", draw(st.sampled_from(["Add", "MatMul", "Relu"])), consumed, produced))
        available += produced
    outputs = draw(st.lists(st.sampled_from(available), unique=True, max_size=2)) if available else []
    order = draw(st.permutations(range(len(operations))))
    return [operations[index] for index in order], inputs, outputs


class TestConstructionProperties:
    @PROPERTY_SETTINGS
    @given(program=ssa_programs())
    def test_adjacency_is_symmetric(self, program):
        operations, inputs, outputs = program

        graph = construct_agnostic_graph(operations, graph_inputs=inputs, graph_outputs=outputs)

        for node in graph.nodes.values():
            assert all(node.id in graph.node(succ).inputs for succ in node.outputs)
            assert all(node.id in graph.node(pred).outputs for pred in node.inputs)
        assert {(e.source, e.destination) for e in graph.edges} == {
            (node.id, succ) for node in graph.nodes.values() for succ in node.outputs
        }

    @PROPERTY_SETTINGS
    @given(program=ssa_programs())
    def test_edges_follow_tensors(self, program):
        operations, inputs, outputs = program
        producer = {tensor: f"input:{tensor}" for tensor in inputs}
        producer.update({tensor: op.name for op in operations for tensor in op.output_names})

        graph = construct_agnostic_graph(operations, graph_inputs=inputs, graph_outputs=outputs)

        names = {(graph.node(e.source).name, graph.node(e.destination).name) for e in graph.edges}
        expected = {
            (producer.get(tensor, f"initializer:{tensor}"), op.name)
            for op in operations for tensor in op.input_names
        }
        expected |= {(producer[tensor], f"output:{tensor}") for tensor in outputs}
        assert names == expected
        assert nx.is_directed_acyclic_graph(nx.DiGraph(list(names)))

    @PROPERTY_SETTINGS
    @given(program=ssa_programs())
    def test_construction_is_deterministic(self, program):
        operations, inputs, outputs = program

        first = construct_agnostic_graph(operations, graph_inputs=inputs, graph_outputs=outputs)
        second = construct_agnostic_graph(operations, graph_inputs=inputs, graph_outputs=outputs)

        assert first.model_dump() == second.model_dump()
