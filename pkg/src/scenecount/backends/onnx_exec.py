"""Pure-numpy executor for the decoded model graphs.

Covers the feed-forward op set used by the bundled classifier, detector
and density graphs: convolutions (group=1), pooling, Gemm/MatMul,
elementwise arithmetic, activations and shape plumbing.  Anything else
raises a structured error naming the op, so unsupported models fail
loudly at load or first run rather than returning garbage.
"""
from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .base import BackendError
from .onnx_io import OnnxModel, OnnxNode, OnnxTensor


class UnsupportedOpError(BackendError):
    """Raised when a graph contains an op the executor cannot run."""


def _attr_ints(node: OnnxNode, name: str, default: list[int]) -> list[int]:
    value = node.attrs.get(name)
    if value is None:
        return list(default)
    if isinstance(value, int):
        return [value]
    return [int(v) for v in value]


def _attr_int(node: OnnxNode, name: str, default: int) -> int:
    value = node.attrs.get(name, default)
    if not isinstance(value, int):
        raise UnsupportedOpError(f"{node.op_type} attribute {name!r} must be an int")
    return value


def _attr_float(node: OnnxNode, name: str, default: float) -> float:
    value = node.attrs.get(name, default)
    return float(value)


def _pad2d(pads: list[int]) -> tuple[int, int, int, int]:
    if len(pads) != 4:
        raise UnsupportedOpError(f"expected 4 pad values, got {pads}")
    top, left, bottom, right = pads
    if min(pads) < 0:
        raise UnsupportedOpError(f"negative pads are not supported: {pads}")
    return top, left, bottom, right


def _windows(x: np.ndarray, kh: int, kw: int, sh: int, sw: int,
             dh: int = 1, dw: int = 1) -> np.ndarray:
    eff_h = (kh - 1) * dh + 1
    eff_w = (kw - 1) * dw + 1
    if x.shape[2] < eff_h or x.shape[3] < eff_w:
        raise UnsupportedOpError(
            f"window {eff_h}x{eff_w} larger than padded input {x.shape[2]}x{x.shape[3]}"
        )
    win = sliding_window_view(x, (eff_h, eff_w), axis=(2, 3))
    win = win[:, :, ::sh, ::sw]
    if dh > 1 or dw > 1:
        win = win[..., ::dh, ::dw]
    return win  # (N, C, Hout, Wout, kh, kw)


def _op_conv(node: OnnxNode, inputs: list[np.ndarray]) -> np.ndarray:
    if len(inputs) < 2:
        raise UnsupportedOpError("Conv needs data and weights")
    x, w = inputs[0], inputs[1]
    b = inputs[2] if len(inputs) > 2 else None
    if x.ndim != 4 or w.ndim != 4:
        raise UnsupportedOpError(f"Conv supports 2-D convolutions only, got data rank {x.ndim}")
    auto_pad = node.attrs.get("auto_pad", b"NOTSET")
    if auto_pad not in (b"NOTSET", b""):
        raise UnsupportedOpError(f"Conv auto_pad {auto_pad!r} is not supported")
    group = _attr_int(node, "group", 1)
    if group != 1:
        raise UnsupportedOpError(f"Conv group={group} is not supported")
    sh, sw = (_attr_ints(node, "strides", [1, 1]) + [1, 1])[:2]
    dh, dw = (_attr_ints(node, "dilations", [1, 1]) + [1, 1])[:2]
    top, left, bottom, right = _pad2d(_attr_ints(node, "pads", [0, 0, 0, 0]))
    kh, kw = w.shape[2], w.shape[3]
    if x.shape[1] != w.shape[1]:
        raise UnsupportedOpError(
            f"Conv channel mismatch: data has {x.shape[1]}, weights expect {w.shape[1]}"
        )
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    win = _windows(xp, kh, kw, sh, sw, dh, dw)
    out = np.einsum("ncyxij,ocij->noyx", win, w, optimize=True)
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1)
    return out.astype(np.float32)


def _op_maxpool(node: OnnxNode, inputs: list[np.ndarray]) -> np.ndarray:
    x = inputs[0]
    kh, kw = _attr_ints(node, "kernel_shape", [])[:2]
    sh, sw = (_attr_ints(node, "strides", [1, 1]) + [1, 1])[:2]
    top, left, bottom, right = _pad2d(_attr_ints(node, "pads", [0, 0, 0, 0]))
    if _attr_int(node, "ceil_mode", 0):
        raise UnsupportedOpError("MaxPool ceil_mode=1 is not supported")
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)),
                constant_values=-np.inf)
    win = _windows(xp, kh, kw, sh, sw)
    return win.max(axis=(4, 5)).astype(np.float32)


def _op_averagepool(node: OnnxNode, inputs: list[np.ndarray]) -> np.ndarray:
    x = inputs[0]
    kh, kw = _attr_ints(node, "kernel_shape", [])[:2]
    sh, sw = (_attr_ints(node, "strides", [1, 1]) + [1, 1])[:2]
    top, left, bottom, right = _pad2d(_attr_ints(node, "pads", [0, 0, 0, 0]))
    include_pad = _attr_int(node, "count_include_pad", 0)
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    win = _windows(xp, kh, kw, sh, sw)
    total = win.sum(axis=(4, 5))
    if include_pad or (top, left, bottom, right) == (0, 0, 0, 0):
        denom = float(kh * kw)
        return (total / denom).astype(np.float32)
    ones = np.ones((1, 1) + x.shape[2:], dtype=np.float64)
    onesp = np.pad(ones, ((0, 0), (0, 0), (top, bottom), (left, right)))
    counts = _windows(onesp, kh, kw, sh, sw).sum(axis=(4, 5))
    return (total / counts).astype(np.float32)


def _op_gemm(node: OnnxNode, inputs: list[np.ndarray]) -> np.ndarray:
    a, b = inputs[0], inputs[1]
    c = inputs[2] if len(inputs) > 2 else None
    if _attr_int(node, "transA", 0):
        a = a.T
    if _attr_int(node, "transB", 0):
        b = b.T
    out = _attr_float(node, "alpha", 1.0) * (a @ b)
    if c is not None:
        out = out + _attr_float(node, "beta", 1.0) * c
    return out.astype(np.float32)


def _op_softmax(node: OnnxNode, inputs: list[np.ndarray]) -> np.ndarray:
    x = inputs[0]
    axis = _attr_int(node, "axis", -1)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return (e / e.sum(axis=axis, keepdims=True)).astype(np.float32)


def _op_reshape(node: OnnxNode, inputs: list[np.ndarray]) -> np.ndarray:
    x, shape_in = inputs[0], inputs[1]
    target = [int(v) for v in np.asarray(shape_in).reshape(-1)]
    out_shape: list[int] = []
    for i, v in enumerate(target):
        if v == 0 and not _attr_int(node, "allowzero", 0):
            if i >= x.ndim:
                raise UnsupportedOpError(f"Reshape dim 0 at axis {i} exceeds input rank {x.ndim}")
            out_shape.append(x.shape[i])
        else:
            out_shape.append(v)
    return x.reshape(out_shape)


def _op_flatten(node: OnnxNode, inputs: list[np.ndarray]) -> np.ndarray:
    x = inputs[0]
    axis = _attr_int(node, "axis", 1)
    if axis < 0:
        axis += x.ndim
    lead = int(np.prod(x.shape[:axis], dtype=np.int64)) if axis else 1
    return x.reshape(lead, -1)


def _op_constant(node: OnnxNode, inputs: list[np.ndarray]) -> np.ndarray:
    value = node.attrs.get("value")
    if isinstance(value, OnnxTensor):
        return value.array
    if "value_float" in node.attrs:
        return np.asarray(node.attrs["value_float"], dtype=np.float32)
    if "value_int" in node.attrs:
        return np.asarray(node.attrs["value_int"], dtype=np.int64)
    if "value_floats" in node.attrs:
        return np.asarray(node.attrs["value_floats"], dtype=np.float32)
    if "value_ints" in node.attrs:
        return np.asarray(node.attrs["value_ints"], dtype=np.int64)
    raise UnsupportedOpError("Constant node carries no supported payload")


_OPS: dict[str, Callable[[OnnxNode, list[np.ndarray]], np.ndarray]] = {
    "Conv": _op_conv,
    "Relu": lambda n, i: np.maximum(i[0], 0),
    "Sigmoid": lambda n, i: (1.0 / (1.0 + np.exp(-i[0].astype(np.float64)))).astype(np.float32),
    "Softmax": _op_softmax,
    "MaxPool": _op_maxpool,
    "AveragePool": _op_averagepool,
    "GlobalAveragePool": lambda n, i: i[0].mean(axis=(2, 3), keepdims=True).astype(np.float32),
    "Gemm": _op_gemm,
    "MatMul": lambda n, i: (i[0] @ i[1]).astype(np.float32),
    "Add": lambda n, i: i[0] + i[1],
    "Sub": lambda n, i: i[0] - i[1],
    "Mul": lambda n, i: i[0] * i[1],
    "Div": lambda n, i: i[0] / i[1],
    "Flatten": _op_flatten,
    "Reshape": _op_reshape,
    "Transpose": lambda n, i: np.transpose(i[0], n.attrs.get("perm") or None),
    "Concat": lambda n, i: np.concatenate(i, axis=_attr_int(n, "axis", 0)),
    "Identity": lambda n, i: i[0],
    "Constant": _op_constant,
}


def supported_ops() -> frozenset[str]:
    return frozenset(_OPS)


def check_supported(model: OnnxModel) -> None:
    """Reject graphs containing ops outside the registry."""
    bad = sorted({n.op_type for n in model.graph.nodes
                  if n.op_type not in _OPS or n.domain not in ("", "ai.onnx")})
    if bad:
        raise UnsupportedOpError(f"graph uses unsupported ops: {', '.join(bad)}")


def run_model(model: OnnxModel, feeds: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Execute the graph and return {output name: array}.

    Nodes are scheduled by data availability, so mildly out-of-order
    graphs still run; a node whose inputs never materialize is an error.
    """
    check_supported(model)
    graph = model.graph
    values: dict[str, np.ndarray] = {
        name: t.array for name, t in graph.initializers.items()
    }
    required = [vi.name for vi in graph.inputs if vi.name not in values]
    for name in required:
        if name not in feeds:
            raise BackendError(f"missing feed for graph input {name!r}")
    for name, arr in feeds.items():
        values[name] = np.asarray(arr)

    pending = list(graph.nodes)
    while pending:
        progressed = False
        deferred: list[OnnxNode] = []
        for node in pending:
            # "" marks an omitted optional input
            if all(name == "" or name in values for name in node.inputs):
                args = [values[name] for name in node.inputs if name != ""]
                try:
                    result = _OPS[node.op_type](node, args)
                except BackendError:
                    raise
                except Exception as exc:
                    raise BackendError(
                        f"op {node.op_type} ({node.name or 'unnamed'}) failed: {exc}"
                    ) from exc
                outs = [result] if isinstance(result, np.ndarray) else list(result)
                for out_name, out_val in zip(node.outputs, outs):
                    values[out_name] = out_val
                progressed = True
            else:
                deferred.append(node)
        if not progressed:
            missing = sorted({name for node in deferred for name in node.inputs
                              if name and name not in values})
            raise BackendError(f"graph is not executable; unavailable values: {missing}")
        pending = deferred

    outputs: dict[str, np.ndarray] = {}
    for vi in graph.outputs:
        if vi.name not in values:
            raise BackendError(f"graph output {vi.name!r} was never produced")
        outputs[vi.name] = values[vi.name]
    return outputs


def run(model: OnnxModel, feeds: Mapping[str, np.ndarray]) -> list[np.ndarray]:
    """Like run_model but returns arrays in graph output order."""
    produced = run_model(model, feeds)
    return [produced[vi.name] for vi in model.graph.outputs]
