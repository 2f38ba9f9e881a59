"""
Error types raised by the genescan engine.
Every error carries an error_type code that the service layer prints in its log banners.
"""

from typing import Optional


class GenescanError(Exception):
    """Base class for all engine errors"""
    error_type = "GENESCAN_ERROR"


class GraphConstructionError(GenescanError):
    """Raised when raw operations cannot form a valid agnostic graph"""
    error_type = "GRAPH_CONSTRUCTION_ERROR"


class NodeLookupError(GenescanError, KeyError):
    """Raised for an unknown node id or node name"""
    error_type = "NODE_LOOKUP_ERROR"

    def __str__(self) -> str:
        # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class IngestError(GenescanError):
    """Raised when a serialized model cannot be read"""
    error_type = "INGEST_ERROR"

    def __init__(self, message: str, origin: Optional[str] = None):
        self.message = message
        self.origin = origin
        super().__init__(self._render())

    def _render(self) -> str:
        if self.origin:
            return f"{self.origin}: {self.message}"
        return self.message

    def with_origin(self, origin: str) -> "IngestError":
        """Tag the error with the model it was raised for"""
        if not self.origin:
            self.origin = origin
            self.args = (self._render(),)
        return self


class FormatDetectionError(IngestError):
    error_type = "FORMAT_DETECTION_ERROR"


class OnnxParseError(IngestError):
    """Malformed protobuf; offset is the byte where decoding failed"""
    error_type = "ONNX_PARSE_ERROR"

    def __init__(self, message: str, offset: int, origin: Optional[str] = None):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})", origin)


class OnnxStructureError(IngestError):
    error_type = "ONNX_STRUCTURE_ERROR"


class JsonGraphError(IngestError):
    """Schema violation in a JSON interchange document"""
    error_type = "JSON_GRAPH_ERROR"

    def __init__(self, message: str, path: str = "$", origin: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}", origin)


class SignatureError(GenescanError):
    """Invalid signature database entry"""
    error_type = "SIGNATURE_ERROR"

    def __init__(self, message: str, path: str = "$"):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class RewriteError(GenescanError):
    error_type = "REWRITE_ERROR"


class MatchError(GenescanError):
    error_type = "MATCH_ERROR"


class BruteForceLimitError(MatchError):
    """The exhaustive matcher refuses inputs above its size guard"""
    error_type = "BRUTE_FORCE_LIMIT"


def format_json_path(loc) -> str:
    """Render a pydantic error location as nodes[0].op style path"""
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        elif path:
            path += f".{part}"
        else:
            path = str(part)
    return path or "$"


__all__ = [
    'GenescanError',
    'GraphConstructionError',
    'NodeLookupError',
    'IngestError',
    'FormatDetectionError',
    'OnnxParseError',
    'OnnxStructureError',
    'JsonGraphError',
    'SignatureError',
    'RewriteError',
    'MatchError',
    'BruteForceLimitError',
    'format_json_path',
]
