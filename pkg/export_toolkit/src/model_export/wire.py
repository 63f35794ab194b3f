"""Protobuf wire-format encoder for the model exchange files.

Writes the handful of messages a feed-forward graph needs (ModelProto,
GraphProto, NodeProto, AttributeProto, TensorProto, ValueInfoProto)
directly as bytes, so exporting needs no protobuf dependency.  Field
numbers follow the public onnx.proto3 schema.
"""
from __future__ import annotations

import struct
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

TENSOR_FLOAT = 1
TENSOR_INT64 = 7

ATTR_FLOAT = 1
ATTR_INT = 2
ATTR_STRING = 3
ATTR_TENSOR = 4
ATTR_FLOATS = 6
ATTR_INTS = 7

AttrValue = Union[int, float, str, np.ndarray, Sequence[int], Sequence[float]]


def varint(value: int) -> bytes:
    if value < 0:
        value &= (1 << 64) - 1  # two's complement, as protobuf encodes int64
    out = bytearray()
    while True:
        bits = value & 0x7F
        value >>= 7
        if value:
            out.append(bits | 0x80)
        else:
            out.append(bits)
            return bytes(out)


def _tag(field: int, wire_type: int) -> bytes:
    return varint((field << 3) | wire_type)


def uint_field(field: int, value: int) -> bytes:
    return _tag(field, 0) + varint(value)


def bytes_field(field: int, payload: bytes) -> bytes:
    return _tag(field, 2) + varint(len(payload)) + payload


def string_field(field: int, text: str) -> bytes:
    return bytes_field(field, text.encode("utf-8"))


def float32_field(field: int, value: float) -> bytes:
    return _tag(field, 5) + struct.pack("<f", value)


def tensor_proto(name: str, array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array)
    if arr.dtype == np.float32:
        dtype_code = TENSOR_FLOAT
        raw = arr.astype("<f4").tobytes()
    elif arr.dtype == np.int64:
        dtype_code = TENSOR_INT64
        raw = arr.astype("<i8").tobytes()
    else:
        raise ValueError(f"tensor {name!r}: only float32 and int64 are written, got {arr.dtype}")
    parts = bytearray()
    for dim in arr.shape:
        parts += uint_field(1, dim)
    parts += uint_field(2, dtype_code)
    if name:
        parts += string_field(8, name)
    parts += bytes_field(9, raw)
    return bytes(parts)


def attribute(name: str, value: AttrValue) -> bytes:
    parts = bytearray(string_field(1, name))
    if isinstance(value, bool):
        raise ValueError(f"attribute {name!r}: booleans are not a wire type")
    if isinstance(value, (int, np.integer)):
        parts += uint_field(3, int(value))
        parts += uint_field(20, ATTR_INT)
    elif isinstance(value, float):
        parts += float32_field(2, value)
        parts += uint_field(20, ATTR_FLOAT)
    elif isinstance(value, str):
        parts += string_field(4, value)
        parts += uint_field(20, ATTR_STRING)
    elif isinstance(value, np.ndarray):
        parts += bytes_field(5, tensor_proto("", value))
        parts += uint_field(20, ATTR_TENSOR)
    elif isinstance(value, (list, tuple)) and all(isinstance(v, (int, np.integer)) for v in value):
        packed = b"".join(varint(int(v)) for v in value)
        parts += bytes_field(8, packed)
        parts += uint_field(20, ATTR_INTS)
    elif isinstance(value, (list, tuple)) and all(isinstance(v, float) for v in value):
        packed = b"".join(struct.pack("<f", v) for v in value)
        parts += bytes_field(7, packed)
        parts += uint_field(20, ATTR_FLOATS)
    else:
        raise ValueError(f"attribute {name!r}: unsupported value {value!r}")
    return bytes(parts)


def node_proto(op_type: str, inputs: Iterable[str], outputs: Iterable[str],
               name: str = "", attrs: Mapping[str, AttrValue] | None = None) -> bytes:
    parts = bytearray()
    for s in inputs:
        parts += string_field(1, s)
    for s in outputs:
        parts += string_field(2, s)
    if name:
        parts += string_field(3, name)
    parts += string_field(4, op_type)
    for aname, avalue in (attrs or {}).items():
        parts += bytes_field(5, attribute(aname, avalue))
    return bytes(parts)


def value_info_proto(name: str, dims: Sequence[int]) -> bytes:
    shape = b"".join(bytes_field(1, uint_field(1, d)) for d in dims)
    tensor_type = uint_field(1, TENSOR_FLOAT) + bytes_field(2, shape)
    return string_field(1, name) + bytes_field(2, bytes_field(1, tensor_type))


def graph_proto(name: str, nodes: Sequence[bytes], initializers: Sequence[bytes],
                inputs: Sequence[bytes], outputs: Sequence[bytes]) -> bytes:
    parts = bytearray()
    for n in nodes:
        parts += bytes_field(1, n)
    parts += string_field(2, name)
    for t in initializers:
        parts += bytes_field(5, t)
    for vi in inputs:
        parts += bytes_field(11, vi)
    for vi in outputs:
        parts += bytes_field(12, vi)
    return bytes(parts)


def model_proto(graph: bytes, producer: str = "model-export-toolkit",
                ir_version: int = 8, opset: int = 13) -> bytes:
    opset_entry = string_field(1, "") + uint_field(2, opset)
    return (uint_field(1, ir_version) + string_field(2, producer)
            + bytes_field(7, graph) + bytes_field(8, opset_entry))
