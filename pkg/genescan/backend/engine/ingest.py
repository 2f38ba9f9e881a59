"""
Model readers.

ONNX files are decoded with the onnx package; the JSON interchange format is
validated with pydantic. Both produce a ParsedModel, which load_model hands to
construct_agnostic_graph. Nothing outside this module knows about either
serialization format.
"""

from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

import onnx
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError

from .agnostic_graph import AgnosticGraph, RawOperation, construct_agnostic_graph
from .exceptions import (
    FormatDetectionError,
    GraphConstructionError,
    IngestError,
    JsonGraphError,
    OnnxParseError,
    OnnxStructureError,
    format_json_path,
)


DEFAULT_DOMAINS = ("", "ai.onnx")
SUBGRAPH_ATTRIBUTE_TYPES = (onnx.AttributeProto.GRAPH, onnx.AttributeProto.GRAPHS)


class ModelFormat(str, Enum):
    """Supported serialization formats"""
    ONNX = "onnx"
    JSON_GRAPH = "json"


class ParsedModel(BaseModel):
    """Format-neutral content of a model file"""
    model_config = ConfigDict(frozen=True)

    operations: Tuple[RawOperation, ...] = Field(default=(), description="Operations in file order")
    input_names: Tuple[str, ...] = Field(default=(), description="Graph inputs that are not initializers")
    output_names: Tuple[str, ...] = Field(default=(), description="Graph outputs")
    initializer_names: Tuple[str, ...] = Field(default=(), description="Constant tensors, declaration order")
    opset_version: Optional[int] = Field(None, description="Default-domain opset, if declared")
    warnings: Tuple[str, ...] = Field(default=(), description="Reader diagnostics")


class ModelSource(BaseModel):
    """Raw model bytes plus where they came from"""
    model_config = ConfigDict(frozen=True)

    format: ModelFormat = Field(..., description="Detected serialization format")
    payload: bytes = Field(..., description="File contents")
    origin: str = Field("<memory>", description="Path or URI used in reports")

    # ModelProto decoded while sniffing, reused by parse_source
    _onnx_model: Optional[onnx.ModelProto] = PrivateAttr(default=None)

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> "ModelSource":
        """Read a model file and detect its format"""
        path = Path(path)
        return cls.from_bytes(path.read_bytes(), str(path))

    @classmethod
    def from_bytes(cls, payload: bytes, origin: str = "<memory>") -> "ModelSource":
        model_format, model = _detect(payload, origin)
        source = cls(format=model_format, payload=payload, origin=origin)
        source._onnx_model = model
        return source


# ==================== JSON INTERCHANGE ====================

class JsonNode(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    op: str
    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)


class JsonGraphDocument(BaseModel):
    """Schema of the JSON interchange format"""
    model_config = ConfigDict(extra="forbid")

    nodes: List[JsonNode]
    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    initializers: List[str] = Field(default_factory=list)
    opset: Optional[int] = None


def read_json_graph(payload: Union[bytes, str]) -> ParsedModel:
    """Translate a JSON interchange document into a ParsedModel"""
    try:
        document = JsonGraphDocument.model_validate_json(payload)
    except ValidationError as e:
        first = e.errors()[0]
        raise JsonGraphError(first["msg"], format_json_path(first["loc"])) from None

    produced = {tensor for node in document.nodes for tensor in node.outputs}
    for index, name in enumerate(document.initializers):
        if name in produced:
            raise JsonGraphError(f"initializer '{name}' is also produced by a node", f"initializers[{index}]")

    return ParsedModel(
        operations=tuple(
            RawOperation(
                name=node.name,
                operation_type=node.op,
                input_names=tuple(node.inputs),
                output_names=tuple(node.outputs),
            )
            for node in document.nodes
        ),
        input_names=tuple(document.inputs),
        output_names=tuple(document.outputs),
        initializer_names=tuple(dict.fromkeys(document.initializers)),
        opset_version=document.opset,
    )


# ==================== ONNX ====================

def _read_varint(payload: bytes, position: int) -> Tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if position >= len(payload) or shift > 63:
            raise ValueError("truncated varint")
        byte = payload[position]
        result |= (byte & 0x7F) << shift
        position += 1
        if not byte & 0x80:
            return result, position
        shift += 7


def _failure_offset(payload: bytes) -> int:
    """Walk the top-level wire format and return where it breaks.

    When every top-level field is well formed the damage is nested, and the
    start of the graph field is reported.
    """
    position = 0
    graph_start = None
    while position < len(payload):
        field_start = position
        try:
            key, position = _read_varint(payload, position)
            field_number, wire_type = key >> 3, key & 0x7
            if field_number == 0:
                return field_start
            if wire_type == 0:
                _, position = _read_varint(payload, position)
            elif wire_type == 1:
                position += 8
            elif wire_type == 2:
                length, position = _read_varint(payload, position)
                position += length
            elif wire_type == 5:
                position += 4
            else:
                return field_start
        except ValueError:
            return field_start
        if position > len(payload):
            return field_start
        if field_number == 7 and wire_type == 2:
            graph_start = field_start
    return graph_start if graph_start is not None else 0


def _parse_model_proto(payload: bytes) -> onnx.ModelProto:
    model = onnx.ModelProto()
    model.ParseFromString(payload)
    return model


def read_onnx(payload: bytes, model: Optional[onnx.ModelProto] = None) -> ParsedModel:
    """Decode an ONNX ModelProto into a ParsedModel.

    Only node names, op types, tensor names, graph inputs/outputs, initializer
    names and the default-domain opset are read. An already decoded ``model``
    for the same payload skips the protobuf parse.
    """
    if not payload:
        raise OnnxParseError("empty payload", 0)

    if model is None:
        try:
            model = _parse_model_proto(payload)
        except Exception as e:
            raise OnnxParseError(f"malformed protobuf: {e}", _failure_offset(payload)) from None

    if not model.HasField("graph"):
        raise OnnxStructureError("model has no graph")

    try:
        graph = model.graph
        initializers = tuple(dict.fromkeys(tensor.name for tensor in graph.initializer))
        initializer_set = set(initializers)

        warnings: List[str] = []
        operations = []
        for index, node in enumerate(graph.node):
            name = node.name or f"{node.op_type}_{index}"
            operations.append(RawOperation(
                name=name,
                operation_type=node.op_type,
                input_names=tuple(node.input),
                output_names=tuple(node.output),
            ))
            for attribute in node.attribute:
                if attribute.type in SUBGRAPH_ATTRIBUTE_TYPES:
                    warnings.append(
                        f"subgraph attribute '{attribute.name}' of node '{name}' ({node.op_type}) ignored"
                    )

        produced = {tensor for operation in operations for tensor in operation.output_names}
        clash = sorted(initializer_set & produced)
        if clash:
            raise OnnxStructureError(f"initializer '{clash[0]}' is also produced by a node")

        input_names = tuple(value.name for value in graph.input if value.name not in initializer_set)
        output_names = tuple(value.name for value in graph.output)

        opset_version = None
        for opset in model.opset_import:
            if opset.domain in DEFAULT_DOMAINS:
                opset_version = int(opset.version)
    except IngestError:
        raise
    except Exception as e:
        raise OnnxParseError(f"could not decode graph: {e}", _failure_offset(payload)) from None

    return ParsedModel(
        operations=tuple(operations),
        input_names=input_names,
        output_names=output_names,
        initializer_names=initializers,
        opset_version=opset_version,
        warnings=tuple(warnings),
    )


# ==================== DISPATCH ====================

def _sniff(payload: bytes) -> Tuple[Optional[ModelFormat], Optional[onnx.ModelProto]]:
    stripped = payload.lstrip()
    if stripped[:1] == b"{":
        return ModelFormat.JSON_GRAPH, None
    if not payload:
        return None, None
    try:
        model = _parse_model_proto(payload)
    except Exception:
        return None, None
    if not model.HasField("graph"):
        return None, None
    return ModelFormat.ONNX, model


def _detect(payload: bytes, origin: str) -> Tuple[ModelFormat, Optional[onnx.ModelProto]]:
    suffix = Path(origin).suffix.lower() if origin else ""
    sniffed, model = _sniff(payload)

    if suffix == ".onnx":
        if sniffed == ModelFormat.JSON_GRAPH:
            raise FormatDetectionError("extension says ONNX but the content is JSON", origin or None)
        return ModelFormat.ONNX, model
    if suffix == ".json":
        if sniffed == ModelFormat.ONNX:
            raise FormatDetectionError("extension says JSON but the content is an ONNX model", origin or None)
        return ModelFormat.JSON_GRAPH, None
    if sniffed is None:
        raise FormatDetectionError("unrecognized model format", origin or None)
    return sniffed, model


def detect_format(payload: bytes, origin: str = "") -> ModelFormat:
    """Pick the reader for a payload.

    The file extension decides when present; the bytes must not contradict it.
    Without a known extension the payload is sniffed.
    """
    return _detect(payload, origin)[0]


def parse_source(source: ModelSource) -> ParsedModel:
    """Run the reader for the source's format"""
    try:
        if source.format == ModelFormat.ONNX:
            return read_onnx(source.payload, source._onnx_model)
        return read_json_graph(source.payload)
    except IngestError as e:
        raise e.with_origin(source.origin)


def load_model(source: ModelSource, strict: bool = False) -> AgnosticGraph:
    """Read a model and build its agnostic graph"""
    parsed = parse_source(source)
    try:
        return construct_agnostic_graph(
            parsed.operations,
            graph_inputs=parsed.input_names,
            graph_outputs=parsed.output_names,
            initializers=parsed.initializer_names,
            strict=strict,
            warnings=parsed.warnings,
        )
    except GraphConstructionError as e:
        raise GraphConstructionError(f"{source.origin}: {e}") from e


def load_model_path(path: Union[str, Path], strict: bool = False) -> AgnosticGraph:
    return load_model(ModelSource.from_path(path), strict=strict)


__all__ = [
    'ModelFormat',
    'ParsedModel',
    'ModelSource',
    'JsonGraphDocument',
    'read_json_graph',
    'read_onnx',
    'detect_format',
    'parse_source',
    'load_model',
    'load_model_path',
]
