"""Minimal ONNX model reader.

Parses the protobuf wire format directly so model files can be loaded
without a protobuf or onnx dependency.  Only the messages and fields
needed to describe a feed-forward graph are understood; unknown fields
are skipped, unknown *required* concepts (sparse tensors, functions,
non-tensor types) surface as errors when encountered.

Field numbers follow the public onnx.proto3 schema (ModelProto,
GraphProto, NodeProto, AttributeProto, TensorProto, ValueInfoProto,
TypeProto, TensorShapeProto, OperatorSetIdProto).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .base import BackendError

# TensorProto.DataType values used here
TENSOR_FLOAT = 1
TENSOR_INT64 = 7

# AttributeProto.AttributeType values
ATTR_FLOAT = 1
ATTR_INT = 2
ATTR_STRING = 3
ATTR_TENSOR = 4
ATTR_FLOATS = 6
ATTR_INTS = 7


class OnnxFormatError(BackendError):
    """Raised when model bytes cannot be decoded."""


# --- wire-level primitives --------------------------------------------------

def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise OnnxFormatError("truncated varint")
        b = data[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise OnnxFormatError("varint too long")


def _signed64(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _fields(data: bytes):
    """Yield (field_number, wire_type, value) triples from a message blob.

    Length-delimited values come back as bytes; varints as int;
    fixed32/fixed64 as raw 4/8 byte slices.
    """
    pos = 0
    n = len(data)
    while pos < n:
        key, pos = _read_varint(data, pos)
        number, wire = key >> 3, key & 0x07
        if wire == 0:
            value, pos = _read_varint(data, pos)
        elif wire == 1:
            if pos + 8 > n:
                raise OnnxFormatError("truncated fixed64")
            value = data[pos:pos + 8]
            pos += 8
        elif wire == 2:
            length, pos = _read_varint(data, pos)
            if pos + length > n:
                raise OnnxFormatError("truncated length-delimited field")
            value = data[pos:pos + length]
            pos += length
        elif wire == 5:
            if pos + 4 > n:
                raise OnnxFormatError("truncated fixed32")
            value = data[pos:pos + 4]
            pos += 4
        else:
            raise OnnxFormatError(f"unsupported wire type {wire}")
        yield number, wire, value


def _packed_varints(blob: bytes) -> list[int]:
    out = []
    pos = 0
    while pos < len(blob):
        v, pos = _read_varint(blob, pos)
        out.append(_signed64(v))
    return out


def _packed_floats(blob: bytes) -> list[float]:
    if len(blob) % 4:
        raise OnnxFormatError("packed float blob length not a multiple of 4")
    return list(struct.unpack(f"<{len(blob) // 4}f", blob))


# --- decoded model structures -------------------------------------------------

@dataclass
class OnnxTensor:
    name: str = ""
    dims: tuple[int, ...] = ()
    data_type: int = 0
    array: Optional[np.ndarray] = None


AttrValue = Union[float, int, bytes, OnnxTensor, list[float], list[int], list[bytes]]


@dataclass
class OnnxNode:
    op_type: str = ""
    name: str = ""
    domain: str = ""
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    attrs: dict[str, AttrValue] = field(default_factory=dict)


@dataclass
class OnnxValueInfo:
    name: str = ""
    elem_type: int = 0
    # each entry: int for a fixed extent, str for a named symbol, None if absent
    shape: Optional[list[Union[int, str, None]]] = None


@dataclass
class OnnxGraph:
    name: str = ""
    nodes: list[OnnxNode] = field(default_factory=list)
    initializers: dict[str, OnnxTensor] = field(default_factory=dict)
    inputs: list[OnnxValueInfo] = field(default_factory=list)
    outputs: list[OnnxValueInfo] = field(default_factory=list)


@dataclass
class OnnxModel:
    ir_version: int = 0
    producer: str = ""
    opsets: dict[str, int] = field(default_factory=dict)
    graph: OnnxGraph = field(default_factory=OnnxGraph)


# --- message decoders ---------------------------------------------------------

def _decode_tensor(blob: bytes) -> OnnxTensor:
    t = OnnxTensor()
    dims: list[int] = []
    float_data: list[float] = []
    int64_data: list[int] = []
    raw: Optional[bytes] = None
    for number, wire, value in _fields(blob):
        if number == 1:  # dims
            if wire == 0:
                dims.append(_signed64(value))
            else:
                dims.extend(_packed_varints(value))
        elif number == 2 and wire == 0:  # data_type
            t.data_type = value
        elif number == 4:  # float_data
            if wire == 5:
                float_data.append(struct.unpack("<f", value)[0])
            else:
                float_data.extend(_packed_floats(value))
        elif number == 7:  # int64_data
            if wire == 0:
                int64_data.append(_signed64(value))
            else:
                int64_data.extend(_packed_varints(value))
        elif number == 8 and wire == 2:  # name
            t.name = value.decode("utf-8")
        elif number == 9 and wire == 2:  # raw_data
            raw = value
    t.dims = tuple(dims)
    count = 1
    for d in t.dims:
        count *= d
    if t.data_type == TENSOR_FLOAT:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        else:
            arr = np.asarray(float_data, dtype=np.float32)
    elif t.data_type == TENSOR_INT64:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<i8").astype(np.int64)
        else:
            arr = np.asarray(int64_data, dtype=np.int64)
    else:
        raise OnnxFormatError(
            f"tensor {t.name!r} has unsupported data type {t.data_type} "
            "(float32 and int64 are supported)"
        )
    if arr.size != count:
        raise OnnxFormatError(
            f"tensor {t.name!r} holds {arr.size} values but dims {t.dims} imply {count}"
        )
    t.array = arr.reshape(t.dims) if t.dims else arr.reshape(())
    return t


def _decode_attribute(blob: bytes) -> tuple[str, AttrValue]:
    name = ""
    atype = 0
    f_val: Optional[float] = None
    i_val: Optional[int] = None
    s_val: Optional[bytes] = None
    t_val: Optional[OnnxTensor] = None
    floats: list[float] = []
    ints: list[int] = []
    strings: list[bytes] = []
    for number, wire, value in _fields(blob):
        if number == 1 and wire == 2:
            name = value.decode("utf-8")
        elif number == 2 and wire == 5:
            f_val = struct.unpack("<f", value)[0]
        elif number == 3 and wire == 0:
            i_val = _signed64(value)
        elif number == 4 and wire == 2:
            s_val = value
        elif number == 5 and wire == 2:
            t_val = _decode_tensor(value)
        elif number == 7:
            if wire == 5:
                floats.append(struct.unpack("<f", value)[0])
            else:
                floats.extend(_packed_floats(value))
        elif number == 8:
            if wire == 0:
                ints.append(_signed64(value))
            else:
                ints.extend(_packed_varints(value))
        elif number == 9 and wire == 2:
            strings.append(value)
        elif number == 20 and wire == 0:
            atype = value
    if atype == ATTR_FLOAT:
        return name, (f_val if f_val is not None else 0.0)
    if atype == ATTR_INT:
        return name, (i_val if i_val is not None else 0)
    if atype == ATTR_STRING:
        return name, (s_val if s_val is not None else b"")
    if atype == ATTR_TENSOR:
        if t_val is None:
            raise OnnxFormatError(f"attribute {name!r} declares a tensor but carries none")
        return name, t_val
    if atype == ATTR_FLOATS:
        return name, floats
    if atype == ATTR_INTS:
        return name, ints
    # some writers omit the type tag; infer from whichever field is present
    for candidate in (t_val, s_val, i_val, f_val):
        if candidate is not None:
            return name, candidate
    if ints:
        return name, ints
    if floats:
        return name, floats
    if strings:
        return name, strings
    raise OnnxFormatError(f"attribute {name!r} has unsupported or empty payload")


def _decode_node(blob: bytes) -> OnnxNode:
    node = OnnxNode()
    for number, wire, value in _fields(blob):
        if number == 1 and wire == 2:
            node.inputs.append(value.decode("utf-8"))
        elif number == 2 and wire == 2:
            node.outputs.append(value.decode("utf-8"))
        elif number == 3 and wire == 2:
            node.name = value.decode("utf-8")
        elif number == 4 and wire == 2:
            node.op_type = value.decode("utf-8")
        elif number == 5 and wire == 2:
            aname, aval = _decode_attribute(value)
            node.attrs[aname] = aval
        elif number == 7 and wire == 2:
            node.domain = value.decode("utf-8")
    return node


def _decode_shape(blob: bytes) -> list[Union[int, str, None]]:
    dims: list[Union[int, str, None]] = []
    for number, wire, value in _fields(blob):
        if number == 1 and wire == 2:  # dim
            extent: Union[int, str, None] = None
            for dnum, dwire, dval in _fields(value):
                if dnum == 1 and dwire == 0:
                    extent = _signed64(dval)
                elif dnum == 2 and dwire == 2:
                    extent = dval.decode("utf-8")
            dims.append(extent)
    return dims


def _decode_value_info(blob: bytes) -> OnnxValueInfo:
    info = OnnxValueInfo()
    for number, wire, value in _fields(blob):
        if number == 1 and wire == 2:
            info.name = value.decode("utf-8")
        elif number == 2 and wire == 2:  # TypeProto
            for tnum, twire, tval in _fields(value):
                if tnum == 1 and twire == 2:  # tensor_type
                    for fnum, fwire, fval in _fields(tval):
                        if fnum == 1 and fwire == 0:
                            info.elem_type = fval
                        elif fnum == 2 and fwire == 2:
                            info.shape = _decode_shape(fval)
    return info


def _decode_graph(blob: bytes) -> OnnxGraph:
    graph = OnnxGraph()
    for number, wire, value in _fields(blob):
        if number == 1 and wire == 2:
            graph.nodes.append(_decode_node(value))
        elif number == 2 and wire == 2:
            graph.name = value.decode("utf-8")
        elif number == 5 and wire == 2:
            tensor = _decode_tensor(value)
            graph.initializers[tensor.name] = tensor
        elif number == 11 and wire == 2:
            graph.inputs.append(_decode_value_info(value))
        elif number == 12 and wire == 2:
            graph.outputs.append(_decode_value_info(value))
        # field 13 (value_info) carries optional intermediate shapes; not needed
    return graph


def parse_model(data: bytes) -> OnnxModel:
    """Decode serialized model bytes into the structures above."""
    model = OnnxModel()
    saw_graph = False
    try:
        for number, wire, value in _fields(data):
            if number == 1 and wire == 0:
                model.ir_version = value
            elif number == 2 and wire == 2:
                model.producer = value.decode("utf-8")
            elif number == 7 and wire == 2:
                model.graph = _decode_graph(value)
                saw_graph = True
            elif number == 8 and wire == 2:
                domain = ""
                version = 0
                for onum, owire, oval in _fields(value):
                    if onum == 1 and owire == 2:
                        domain = oval.decode("utf-8")
                    elif onum == 2 and owire == 0:
                        version = oval
                model.opsets[domain] = version
    except OnnxFormatError:
        raise
    except Exception as exc:  # malformed blobs can fail in many ways
        raise OnnxFormatError(f"cannot decode model bytes: {exc}") from exc
    if not saw_graph:
        raise OnnxFormatError("model bytes contain no graph")
    return model


def load_model(path: str) -> OnnxModel:
    with open(path, "rb") as fh:
        return parse_model(fh.read())
