"""Reader, executor and backend tests for the serialized-model support.

The encoder below is a deliberately independent, test-local writer for
the wire format; the package must parse what it emits. The frozen
fixture in onnx_fixture.py pins byte-level compatibility with files
produced by an external toolchain.
"""
import struct

import numpy as np
import pytest

from onnx_fixture import EXPECTED_LOGITS, input_array, model_bytes
from scenecount.backends.base import BackendError
from scenecount.backends.onnx_backends import (
    LETTERBOX_FILL,
    OnnxClassifierBackend,
    OnnxDensityBackend,
    OnnxDetectorBackend,
    letterbox,
)
from scenecount.backends.onnx_exec import (
    UnsupportedOpError,
    check_supported,
    run,
    run_model,
    supported_ops,
)
from scenecount.backends.onnx_io import (
    OnnxFormatError,
    OnnxGraph,
    OnnxModel,
    OnnxNode,
    OnnxTensor,
    OnnxValueInfo,
    load_model,
    parse_model,
)
from scenecount.domain import Frame


# --- independent wire-format encoder -------------------------------------

def varint(n):
    out = bytearray()
    while True:
        bits = n & 0x7F
        n >>= 7
        if n:
            out.append(bits | 0x80)
        else:
            out.append(bits)
            return bytes(out)


def f_varint(num, val):
    return varint(num << 3) + varint(val)


def f_bytes(num, blob):
    return varint((num << 3) | 2) + varint(len(blob)) + blob


def f_str(num, text):
    return f_bytes(num, text.encode("utf-8"))


def enc_tensor(name, array, data_type=1, payload="raw"):
    arr = np.asarray(array)
    out = b"".join(f_varint(1, d) for d in arr.shape)
    out += f_varint(2, data_type)
    if name:
        out += f_str(8, name)
    if data_type == 1:
        arr = arr.astype("<f4")
        if payload == "raw":
            out += f_bytes(9, arr.tobytes())
        else:
            out += f_bytes(4, b"".join(struct.pack("<f", v) for v in arr.reshape(-1)))
    elif data_type == 7:
        arr = arr.astype("<i8")
        if payload == "raw":
            out += f_bytes(9, arr.tobytes())
        else:
            out += b"".join(f_varint(7, int(v) & ((1 << 64) - 1))
                            for v in arr.reshape(-1))
    else:
        out += f_bytes(9, np.asarray(array).tobytes())
    return out


def enc_attr_int(name, value):
    return f_str(1, name) + f_varint(3, value) + f_varint(20, 2)


def enc_attr_ints(name, values, packed=False):
    if packed:
        body = f_bytes(8, b"".join(varint(v) for v in values))
    else:
        body = b"".join(f_varint(8, v) for v in values)
    return f_str(1, name) + body + f_varint(20, 7)


def enc_attr_tensor(name, array, data_type=1):
    return (f_str(1, name) + f_bytes(5, enc_tensor("", array, data_type))
            + f_varint(20, 4))


def enc_node(op_type, inputs, outputs, attrs=(), name=""):
    out = b"".join(f_str(1, i) for i in inputs)
    out += b"".join(f_str(2, o) for o in outputs)
    if name:
        out += f_str(3, name)
    out += f_str(4, op_type)
    out += b"".join(f_bytes(5, a) for a in attrs)
    return out


def enc_value_info(name, dims):
    shape = b""
    for d in dims:
        if isinstance(d, int):
            shape += f_bytes(1, f_varint(1, d))
        else:
            shape += f_bytes(1, f_str(2, d))
    tensor_type = f_varint(1, 1) + f_bytes(2, shape)
    return f_str(1, name) + f_bytes(2, f_bytes(1, tensor_type))


def enc_model(nodes, inputs, outputs, initializers=(), graph_name="g",
              ir_version=8, opset=13):
    graph = b"".join(f_bytes(1, n) for n in nodes)
    graph += f_str(2, graph_name)
    graph += b"".join(f_bytes(5, t) for t in initializers)
    graph += b"".join(f_bytes(11, vi) for vi in inputs)
    graph += b"".join(f_bytes(12, vi) for vi in outputs)
    return (f_varint(1, ir_version) + f_bytes(7, graph)
            + f_bytes(8, f_varint(2, opset)))


def make_model(nodes, inputs, outputs, initializers=()):
    """Assemble a decoded model directly, bypassing the byte format."""
    init = {t.name: t for t in initializers}
    graph = OnnxGraph(name="test", nodes=list(nodes), initializers=init,
                      inputs=list(inputs), outputs=list(outputs))
    return OnnxModel(ir_version=8, producer="test", opsets={"": 13}, graph=graph)


def vi(name, shape=None):
    return OnnxValueInfo(name=name, elem_type=1, shape=shape)


def init_tensor(name, array):
    arr = np.asarray(array)
    dtype = 7 if arr.dtype.kind == "i" else 1
    return OnnxTensor(name=name, dims=arr.shape, data_type=dtype, array=arr)


# --- reader ---------------------------------------------------------------

class TestReaderFrozenFixture:
    def test_header(self):
        m = parse_model(model_bytes())
        assert m.ir_version == 8
        assert m.producer == "refgen"
        assert m.opsets == {"": 13}
        assert m.graph.name == "tiny_linear_classifier"

    def test_nodes(self):
        g = parse_model(model_bytes()).graph
        assert [n.op_type for n in g.nodes] == ["Flatten", "Gemm"]
        flatten, gemm = g.nodes
        assert flatten.inputs == ["image"] and flatten.outputs == ["flat"]
        assert flatten.attrs == {"axis": 1}
        assert gemm.inputs == ["flat", "W", "b"] and gemm.outputs == ["logits"]
        assert gemm.attrs == {"transB": 1}

    def test_initializers(self):
        g = parse_model(model_bytes()).graph
        assert set(g.initializers) == {"W", "b"}
        w, b = g.initializers["W"], g.initializers["b"]
        assert w.array.shape == (5, 192) and w.array.dtype == np.float32
        assert b.array.shape == (5,) and b.array.dtype == np.float32

    def test_io_shapes(self):
        g = parse_model(model_bytes()).graph
        assert g.inputs[0].name == "image" and g.inputs[0].shape == [1, 3, 8, 8]
        assert g.outputs[0].name == "logits" and g.outputs[0].shape == [1, 5]

    def test_executor_reproduces_frozen_logits(self):
        m = parse_model(model_bytes())
        (out,) = run(m, {"image": input_array()})
        np.testing.assert_array_equal(out, EXPECTED_LOGITS)


class TestReaderEncoderRoundTrip:
    def test_identity_model(self):
        data = enc_model(
            nodes=[enc_node("Identity", ["x"], ["y"], name="id0")],
            inputs=[enc_value_info("x", [1, 4])],
            outputs=[enc_value_info("y", [1, 4])],
            graph_name="tiny",
        )
        m = parse_model(data)
        assert m.graph.name == "tiny"
        assert m.graph.nodes[0].op_type == "Identity"
        assert m.graph.nodes[0].name == "id0"
        assert m.graph.inputs[0].shape == [1, 4]
        x = np.arange(4, dtype=np.float32).reshape(1, 4)
        np.testing.assert_array_equal(run(m, {"x": x})[0], x)

    def test_symbolic_dims(self):
        data = enc_model(
            nodes=[enc_node("Identity", ["x"], ["y"])],
            inputs=[enc_value_info("x", ["batch", 3, "h", "w"])],
            outputs=[enc_value_info("y", ["batch", 3, "h", "w"])],
        )
        assert parse_model(data).graph.inputs[0].shape == ["batch", 3, "h", "w"]

    @pytest.mark.parametrize("payload", ["raw", "typed"])
    def test_float_initializer_payloads(self, payload):
        w = np.array([[1.5, -2.0], [0.25, 4.0]], dtype=np.float32)
        data = enc_model(
            nodes=[enc_node("Identity", ["w"], ["y"])],
            inputs=[enc_value_info("w", [2, 2])],
            outputs=[enc_value_info("y", [2, 2])],
            initializers=[enc_tensor("w", w, payload=payload)],
        )
        got = parse_model(data).graph.initializers["w"].array
        np.testing.assert_array_equal(got, w)

    @pytest.mark.parametrize("payload", ["raw", "typed"])
    def test_int64_initializer_payloads(self, payload):
        shape = np.array([0, -1], dtype=np.int64)
        data = enc_model(
            nodes=[enc_node("Identity", ["s"], ["y"])],
            inputs=[enc_value_info("s", [2])],
            outputs=[enc_value_info("y", [2])],
            initializers=[enc_tensor("s", shape, data_type=7, payload=payload)],
        )
        got = parse_model(data).graph.initializers["s"].array
        assert got.dtype == np.int64
        np.testing.assert_array_equal(got, shape)

    @pytest.mark.parametrize("packed", [False, True])
    def test_ints_attribute_packed_and_unpacked(self, packed):
        data = enc_model(
            nodes=[enc_node("Transpose", ["x"], ["y"],
                            attrs=[enc_attr_ints("perm", [0, 2, 1], packed=packed)])],
            inputs=[enc_value_info("x", [1, 2, 3])],
            outputs=[enc_value_info("y", [1, 3, 2])],
        )
        m = parse_model(data)
        assert m.graph.nodes[0].attrs["perm"] == [0, 2, 1]
        x = np.arange(6, dtype=np.float32).reshape(1, 2, 3)
        np.testing.assert_array_equal(run(m, {"x": x})[0], np.transpose(x, (0, 2, 1)))

    def test_tensor_attribute(self):
        payload = np.array([3.0, 1.0], dtype=np.float32)
        data = enc_model(
            nodes=[enc_node("Constant", [], ["y"],
                            attrs=[enc_attr_tensor("value", payload)])],
            inputs=[enc_value_info("x", [1])],
            outputs=[enc_value_info("y", [2])],
        )
        np.testing.assert_array_equal(
            run(parse_model(data), {"x": np.zeros(1, np.float32)})[0], payload)


class TestReaderErrors:
    def test_empty_bytes(self):
        with pytest.raises(OnnxFormatError, match="no graph"):
            parse_model(b"")

    def test_truncated_fixture(self):
        with pytest.raises(OnnxFormatError):
            parse_model(model_bytes()[:200])

    def test_garbage_bytes(self):
        with pytest.raises(OnnxFormatError):
            parse_model(b"\xff" * 64)

    def test_unsupported_tensor_dtype(self):
        # data_type 11 is double; only float32 and int64 decode
        blob = f_varint(1, 2) + f_varint(2, 11) + f_str(8, "bad") + f_bytes(9, b"\0" * 16)
        graph = (f_bytes(1, enc_node("Identity", ["bad"], ["y"]))
                 + f_str(2, "g") + f_bytes(5, blob)
                 + f_bytes(11, enc_value_info("bad", [2]))
                 + f_bytes(12, enc_value_info("y", [2])))
        full = f_varint(1, 8) + f_bytes(7, graph) + f_bytes(8, f_varint(2, 13))
        with pytest.raises(OnnxFormatError, match="data type 11"):
            parse_model(full)

    def test_size_dims_mismatch(self):
        blob = f_varint(1, 3) + f_varint(2, 1) + f_str(8, "w") + f_bytes(9, b"\0" * 8)
        graph = (f_str(2, "g") + f_bytes(5, blob)
                 + f_bytes(12, enc_value_info("w", [3])))
        full = f_varint(1, 8) + f_bytes(7, graph)
        with pytest.raises(OnnxFormatError, match="holds 2 values"):
            parse_model(full)

    def test_load_model_from_disk(self, tmp_path):
        path = tmp_path / "m.onnx"
        path.write_bytes(model_bytes())
        assert load_model(str(path)).graph.name == "tiny_linear_classifier"


# --- executor -------------------------------------------------------------

def conv_naive(x, w, b, strides, pads):
    top, left, bottom, right = pads
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    n, cin, h, wdt = xp.shape
    cout, _, kh, kw = w.shape
    sh, sw = strides
    oh = (h - kh) // sh + 1
    ow = (wdt - kw) // sw + 1
    out = np.zeros((n, cout, oh, ow))
    for ni in range(n):
        for co in range(cout):
            for oy in range(oh):
                for ox in range(ow):
                    patch = xp[ni, :, oy * sh:oy * sh + kh, ox * sw:ox * sw + kw]
                    out[ni, co, oy, ox] = (patch * w[co]).sum()
    if b is not None:
        out += b.reshape(1, -1, 1, 1)
    return out


class TestExecutorOps:
    def test_conv_matches_naive_loop(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(1, 2, 6, 7)).astype(np.float32)
        w = rng.normal(size=(3, 2, 3, 3)).astype(np.float32)
        b = rng.normal(size=(3,)).astype(np.float32)
        node = OnnxNode(op_type="Conv", inputs=["x", "w", "b"], outputs=["y"],
                        attrs={"strides": [2, 2], "pads": [1, 1, 1, 1]})
        m = make_model([node], [vi("x")], [vi("y")],
                       [init_tensor("w", w), init_tensor("b", b)])
        got = run(m, {"x": x})[0]
        want = conv_naive(x, w, b, (2, 2), (1, 1, 1, 1))
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-6)

    def test_conv_dilation(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 1, 7, 7)).astype(np.float32)
        w = rng.normal(size=(1, 1, 3, 3)).astype(np.float32)
        node = OnnxNode(op_type="Conv", inputs=["x", "w"], outputs=["y"],
                        attrs={"dilations": [2, 2]})
        m = make_model([node], [vi("x")], [vi("y")], [init_tensor("w", w)])
        got = run(m, {"x": x})[0]
        # dilated 3x3 kernel covers a 5x5 footprint sampled every 2nd cell
        want = np.zeros((1, 1, 3, 3))
        for oy in range(3):
            for ox in range(3):
                patch = x[0, 0, oy:oy + 5:2, ox:ox + 5:2]
                want[0, 0, oy, ox] = (patch * w[0, 0]).sum()
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-6)

    def test_conv_channel_mismatch(self):
        node = OnnxNode(op_type="Conv", inputs=["x", "w"], outputs=["y"])
        m = make_model([node], [vi("x")], [vi("y")],
                       [init_tensor("w", np.zeros((1, 4, 3, 3), np.float32))])
        with pytest.raises(BackendError, match="channel mismatch"):
            run(m, {"x": np.zeros((1, 2, 8, 8), np.float32)})

    def test_conv_group_rejected(self):
        node = OnnxNode(op_type="Conv", inputs=["x", "w"], outputs=["y"],
                        attrs={"group": 2})
        m = make_model([node], [vi("x")], [vi("y")],
                       [init_tensor("w", np.zeros((2, 1, 1, 1), np.float32))])
        with pytest.raises(UnsupportedOpError, match="group=2"):
            run(m, {"x": np.zeros((1, 1, 4, 4), np.float32)})

    def test_maxpool_with_padding(self):
        x = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
        node = OnnxNode(op_type="MaxPool", inputs=["x"], outputs=["y"],
                        attrs={"kernel_shape": [3, 3], "strides": [2, 2],
                               "pads": [1, 1, 1, 1]})
        m = make_model([node], [vi("x")], [vi("y")])
        got = run(m, {"x": x})[0]
        want = np.array([[[[5, 7], [13, 15]]]], dtype=np.float32)
        np.testing.assert_array_equal(got, want)

    def test_maxpool_ceil_mode_rejected(self):
        node = OnnxNode(op_type="MaxPool", inputs=["x"], outputs=["y"],
                        attrs={"kernel_shape": [2, 2], "ceil_mode": 1})
        m = make_model([node], [vi("x")], [vi("y")])
        with pytest.raises(UnsupportedOpError, match="ceil_mode"):
            run(m, {"x": np.zeros((1, 1, 4, 4), np.float32)})

    def test_averagepool_excludes_padding_by_default(self):
        x = np.ones((1, 1, 2, 2), dtype=np.float32)
        base = {"kernel_shape": [2, 2], "strides": [1, 1], "pads": [1, 1, 1, 1]}
        exclude = OnnxNode(op_type="AveragePool", inputs=["x"], outputs=["y"],
                           attrs=dict(base))
        include = OnnxNode(op_type="AveragePool", inputs=["x"], outputs=["y"],
                           attrs={**base, "count_include_pad": 1})
        got_ex = run(make_model([exclude], [vi("x")], [vi("y")]), {"x": x})[0]
        got_in = run(make_model([include], [vi("x")], [vi("y")]), {"x": x})[0]
        # corner window sees one real cell: mean 1.0 excluding, 0.25 including
        assert got_ex[0, 0, 0, 0] == pytest.approx(1.0)
        assert got_in[0, 0, 0, 0] == pytest.approx(0.25)

    def test_global_average_pool(self):
        x = np.arange(24, dtype=np.float32).reshape(1, 2, 3, 4)
        node = OnnxNode(op_type="GlobalAveragePool", inputs=["x"], outputs=["y"])
        got = run(make_model([node], [vi("x")], [vi("y")]), {"x": x})[0]
        np.testing.assert_allclose(got, x.mean(axis=(2, 3), keepdims=True), rtol=1e-6)

    def test_gemm_full_attributes(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(4, 2)).astype(np.float32)
        b = rng.normal(size=(3, 4)).astype(np.float32)
        c = rng.normal(size=(2, 3)).astype(np.float32)
        node = OnnxNode(op_type="Gemm", inputs=["a", "b", "c"], outputs=["y"],
                        attrs={"alpha": 0.5, "beta": 2.0, "transA": 1, "transB": 1})
        m = make_model([node], [vi("a")], [vi("y")],
                       [init_tensor("b", b), init_tensor("c", c)])
        got = run(m, {"a": a})[0]
        np.testing.assert_allclose(got, 0.5 * (a.T @ b.T) + 2.0 * c, rtol=1e-5)

    def test_gemm_optional_bias_omitted_via_empty_name(self):
        a = np.eye(2, dtype=np.float32)
        b = np.array([[1, 2], [3, 4]], dtype=np.float32)
        node = OnnxNode(op_type="Gemm", inputs=["a", "b", ""], outputs=["y"])
        m = make_model([node], [vi("a")], [vi("y")], [init_tensor("b", b)])
        np.testing.assert_array_equal(run(m, {"a": a})[0], b)

    def test_softmax_axis(self):
        x = np.array([[0.0, 0.0], [1.0, 3.0]], dtype=np.float32)
        node = OnnxNode(op_type="Softmax", inputs=["x"], outputs=["y"],
                        attrs={"axis": 0})
        got = run(make_model([node], [vi("x")], [vi("y")]), {"x": x})[0]
        np.testing.assert_allclose(got.sum(axis=0), [1.0, 1.0], rtol=1e-6)

    def test_relu_and_sigmoid(self):
        x = np.array([-2.0, 0.0, 3.0], dtype=np.float32)
        relu = OnnxNode(op_type="Relu", inputs=["x"], outputs=["r"])
        sig = OnnxNode(op_type="Sigmoid", inputs=["x"], outputs=["s"])
        m = make_model([relu, sig], [vi("x")], [vi("r"), vi("s")])
        out = run_model(m, {"x": x})
        np.testing.assert_array_equal(out["r"], [0.0, 0.0, 3.0])
        np.testing.assert_allclose(out["s"], 1.0 / (1.0 + np.exp(-x)), rtol=1e-6)

    def test_reshape_zero_and_minus_one(self):
        x = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
        node = OnnxNode(op_type="Reshape", inputs=["x", "shape"], outputs=["y"])
        m = make_model([node], [vi("x")], [vi("y")],
                       [init_tensor("shape", np.array([0, -1], np.int64))])
        assert run(m, {"x": x})[0].shape == (2, 12)

    def test_flatten_axes(self):
        x = np.zeros((2, 3, 4, 5), dtype=np.float32)
        for axis, want in [(0, (1, 120)), (1, (2, 60)), (2, (6, 20)), (-1, (24, 5))]:
            node = OnnxNode(op_type="Flatten", inputs=["x"], outputs=["y"],
                            attrs={"axis": axis})
            got = run(make_model([node], [vi("x")], [vi("y")]), {"x": x})[0]
            assert got.shape == want

    def test_concat_and_arithmetic(self):
        a = np.array([[1.0, 2.0]], dtype=np.float32)
        b = np.array([[3.0, 4.0]], dtype=np.float32)
        nodes = [
            OnnxNode(op_type="Concat", inputs=["a", "b"], outputs=["cat"],
                     attrs={"axis": 0}),
            OnnxNode(op_type="Add", inputs=["a", "b"], outputs=["sum"]),
            OnnxNode(op_type="Sub", inputs=["a", "b"], outputs=["diff"]),
            OnnxNode(op_type="Mul", inputs=["a", "b"], outputs=["prod"]),
            OnnxNode(op_type="Div", inputs=["a", "b"], outputs=["quot"]),
        ]
        m = make_model(nodes, [vi("a"), vi("b")],
                       [vi("cat"), vi("sum"), vi("diff"), vi("prod"), vi("quot")])
        out = run_model(m, {"a": a, "b": b})
        np.testing.assert_array_equal(out["cat"], np.concatenate([a, b], axis=0))
        np.testing.assert_array_equal(out["sum"], a + b)
        np.testing.assert_array_equal(out["diff"], a - b)
        np.testing.assert_array_equal(out["prod"], a * b)
        np.testing.assert_array_equal(out["quot"], a / b)

    def test_matmul(self):
        a = np.random.default_rng(3).normal(size=(2, 3)).astype(np.float32)
        b = np.random.default_rng(4).normal(size=(3, 4)).astype(np.float32)
        node = OnnxNode(op_type="MatMul", inputs=["a", "b"], outputs=["y"])
        m = make_model([node], [vi("a")], [vi("y")], [init_tensor("b", b)])
        np.testing.assert_allclose(run(m, {"a": a})[0], a @ b, rtol=1e-5)

    def test_constant_payloads(self):
        tensor = OnnxTensor(name="", dims=(2,), data_type=1,
                            array=np.array([7.0, 8.0], np.float32))
        cases = [
            ({"value": tensor}, np.array([7.0, 8.0], np.float32)),
            ({"value_float": 2.5}, np.float32(2.5)),
            ({"value_int": 9}, np.int64(9)),
            ({"value_ints": [1, 2]}, np.array([1, 2], np.int64)),
        ]
        for attrs, want in cases:
            node = OnnxNode(op_type="Constant", inputs=[], outputs=["y"],
                            attrs=attrs)
            m = make_model([node], [vi("x")], [vi("y")])
            got = run(m, {"x": np.zeros(1, np.float32)})[0]
            np.testing.assert_array_equal(got, want)


class TestExecutorScheduling:
    def test_out_of_order_nodes_still_run(self):
        second = OnnxNode(op_type="Relu", inputs=["mid"], outputs=["y"])
        first = OnnxNode(op_type="Identity", inputs=["x"], outputs=["mid"])
        m = make_model([second, first], [vi("x")], [vi("y")])
        x = np.array([-1.0, 2.0], dtype=np.float32)
        np.testing.assert_array_equal(run(m, {"x": x})[0], [0.0, 2.0])

    def test_missing_feed(self):
        node = OnnxNode(op_type="Identity", inputs=["x"], outputs=["y"])
        m = make_model([node], [vi("x")], [vi("y")])
        with pytest.raises(BackendError, match="missing feed"):
            run(m, {})

    def test_unavailable_value_deadlock(self):
        node = OnnxNode(op_type="Identity", inputs=["ghost"], outputs=["y"])
        m = make_model([node], [vi("x")], [vi("y")])
        with pytest.raises(BackendError, match="unavailable values"):
            run(m, {"x": np.zeros(1, np.float32)})

    def test_op_failure_names_the_node(self):
        node = OnnxNode(op_type="MatMul", name="mm0", inputs=["a", "b"],
                        outputs=["y"])
        m = make_model([node], [vi("a"), vi("b")], [vi("y")])
        with pytest.raises(BackendError, match=r"op MatMul \(mm0\) failed"):
            run(m, {"a": np.zeros((2, 3), np.float32),
                    "b": np.zeros((5, 2), np.float32)})

    def test_unsupported_op_rejected(self):
        node = OnnxNode(op_type="LSTM", inputs=["x"], outputs=["y"])
        m = make_model([node], [vi("x")], [vi("y")])
        with pytest.raises(UnsupportedOpError, match="LSTM"):
            check_supported(m)
        with pytest.raises(UnsupportedOpError, match="LSTM"):
            run(m, {"x": np.zeros(1, np.float32)})

    def test_custom_domain_rejected(self):
        node = OnnxNode(op_type="Relu", domain="com.example",
                        inputs=["x"], outputs=["y"])
        m = make_model([node], [vi("x")], [vi("y")])
        with pytest.raises(UnsupportedOpError):
            check_supported(m)

    def test_supported_ops_listing(self):
        ops = supported_ops()
        assert {"Conv", "Gemm", "Softmax", "Relu", "MaxPool"} <= ops


# --- backends -------------------------------------------------------------

@pytest.fixture
def fixture_path(tmp_path):
    path = tmp_path / "clf.onnx"
    path.write_bytes(model_bytes())
    return str(path)


class TestClassifierBackend:
    def test_logits_match_frozen_reference(self, fixture_path):
        backend = OnnxClassifierBackend(fixture_path)
        assert backend.thread_safe is True
        assert backend.layout == "nchw"
        # hand the backend the HWC tensor the preprocessor would produce
        tensor = np.transpose(input_array()[0], (1, 2, 0))
        got = backend.logits(tensor, Frame(frame_id="f"))
        np.testing.assert_array_equal(got, EXPECTED_LOGITS[0].astype(np.float64))

    def test_requires_tensor(self, fixture_path):
        backend = OnnxClassifierBackend(fixture_path)
        with pytest.raises(BackendError, match="no pixels"):
            backend.logits(None, Frame(frame_id="f"))

    def test_rejects_wrong_output_width(self, tmp_path):
        data = enc_model(
            nodes=[enc_node("Identity", ["x"], ["y"])],
            inputs=[enc_value_info("x", [1, 4])],
            outputs=[enc_value_info("y", [1, 4])],
        )
        path = tmp_path / "bad.onnx"
        path.write_bytes(data)
        with pytest.raises(BackendError, match="expected output dim 5, found 4"):
            OnnxClassifierBackend(str(path))

    def test_rejects_bad_layout(self, fixture_path):
        with pytest.raises(BackendError, match="layout"):
            OnnxClassifierBackend(fixture_path, layout="chw")


class TestLetterbox:
    def test_identity_when_sizes_match(self):
        img = np.random.default_rng(5).integers(0, 255, (32, 32, 3), np.uint8)
        canvas, scale, dx, dy = letterbox(img, (32, 32))
        assert scale == 1.0 and dx == 0.0 and dy == 0.0
        np.testing.assert_array_equal(canvas, img)

    def test_wide_image_pads_top_and_bottom(self):
        img = np.zeros((32, 64, 3), dtype=np.uint8)
        canvas, scale, dx, dy = letterbox(img, (32, 32))
        assert scale == 0.5 and dx == 0.0 and dy == 8.0
        assert canvas.shape == (32, 32, 3)
        assert (canvas[:8] == LETTERBOX_FILL).all()
        assert (canvas[24:] == LETTERBOX_FILL).all()
        assert (canvas[8:24] == 0).all()

    def test_mapping_round_trip(self):
        canvas, scale, dx, dy = letterbox(np.zeros((30, 50, 3), np.uint8), (40, 40))
        # source corner (50, 30) must land inside the canvas
        x, y = 50 * scale + dx, 30 * scale + dy
        assert 0 <= x <= 40 and 0 <= y <= 40


def detector_model_bytes(rows, input_dims=(1, 3, 32, 32)):
    arr = np.asarray(rows, dtype=np.float32).reshape(-1, 5)
    return enc_model(
        nodes=[enc_node("Constant", [], ["boxes"],
                        attrs=[enc_attr_tensor("value", arr)])],
        inputs=[enc_value_info("image", list(input_dims))],
        outputs=[enc_value_info("boxes", list(arr.shape))],
    )


class TestDetectorBackend:
    def test_constant_boxes_map_back_to_source(self, tmp_path):
        rows = [[4, 4, 12, 12, 0.95], [20, 20, 28, 28, 0.8]]
        path = tmp_path / "det.onnx"
        path.write_bytes(detector_model_bytes(rows))
        backend = OnnxDetectorBackend(str(path))
        frame = Frame(frame_id="f", image=np.zeros((32, 32, 3), np.uint8))
        dets = backend.detect(frame)
        assert len(dets) == 2
        assert dets[0].box.x_min == pytest.approx(4.0)
        assert dets[0].box.x_max == pytest.approx(12.0)
        assert dets[0].score == pytest.approx(0.95, abs=1e-6)
        assert all(d.kind == "body" for d in dets)

    def test_letterbox_inverse_mapping(self, tmp_path):
        # source 32x64 into 32x32: scale 0.5, dy 8
        rows = [[0, 8, 32, 24, 0.9]]
        path = tmp_path / "det.onnx"
        path.write_bytes(detector_model_bytes(rows))
        backend = OnnxDetectorBackend(str(path))
        frame = Frame(frame_id="f", image=np.zeros((32, 64, 3), np.uint8))
        (det,) = backend.detect(frame)
        assert det.box.x_min == pytest.approx(0.0)
        assert det.box.y_min == pytest.approx(0.0)
        assert det.box.x_max == pytest.approx(64.0)
        assert det.box.y_max == pytest.approx(32.0)

    def test_head_kind(self, tmp_path):
        path = tmp_path / "det.onnx"
        path.write_bytes(detector_model_bytes([[1, 1, 5, 5, 0.7]]))
        backend = OnnxDetectorBackend(str(path), kind="head")
        frame = Frame(frame_id="f", image=np.zeros((32, 32, 3), np.uint8))
        assert backend.detect(frame)[0].kind == "head"

    def test_dynamic_input_needs_explicit_size(self, tmp_path):
        data = enc_model(
            nodes=[enc_node("Constant", [], ["boxes"],
                            attrs=[enc_attr_tensor(
                                "value", np.zeros((1, 5), np.float32))])],
            inputs=[enc_value_info("image", ["n", 3, "h", "w"])],
            outputs=[enc_value_info("boxes", [1, 5])],
        )
        path = tmp_path / "dyn.onnx"
        path.write_bytes(data)
        with pytest.raises(BackendError, match="input_size"):
            OnnxDetectorBackend(str(path))
        backend = OnnxDetectorBackend(str(path), input_size=(32, 32))
        assert backend.input_size == (32, 32)

    def test_requires_image(self, tmp_path):
        path = tmp_path / "det.onnx"
        path.write_bytes(detector_model_bytes([[1, 1, 5, 5, 0.7]]))
        backend = OnnxDetectorBackend(str(path))
        with pytest.raises(BackendError, match="no pixels"):
            backend.detect(Frame(frame_id="f"))

    def test_wrong_row_width_rejected(self, tmp_path):
        data = enc_model(
            nodes=[enc_node("Constant", [], ["boxes"],
                            attrs=[enc_attr_tensor(
                                "value", np.zeros((2, 4), np.float32))])],
            inputs=[enc_value_info("image", [1, 3, 32, 32])],
            outputs=[enc_value_info("boxes", [2, 4])],
        )
        path = tmp_path / "bad.onnx"
        path.write_bytes(data)
        backend = OnnxDetectorBackend(str(path))
        frame = Frame(frame_id="f", image=np.zeros((32, 32, 3), np.uint8))
        with pytest.raises(BackendError, match="5 values"):
            backend.detect(frame)


class TestDensityBackend:
    def test_constant_map(self, tmp_path):
        grid = np.full((1, 1, 4, 4), 0.5, dtype=np.float32)
        data = enc_model(
            nodes=[enc_node("Constant", [], ["map"],
                            attrs=[enc_attr_tensor("value", grid)])],
            inputs=[enc_value_info("image", [1, 3, 8, 8])],
            outputs=[enc_value_info("map", [1, 1, 4, 4])],
        )
        path = tmp_path / "den.onnx"
        path.write_bytes(data)
        backend = OnnxDensityBackend(str(path))
        frame = Frame(frame_id="f", image=np.zeros((16, 16, 3), np.uint8))
        dmap = backend.density(frame)
        assert (dmap.height, dmap.width) == (4, 4)
        assert dmap.total_mass() == pytest.approx(8.0, rel=1e-6)

    def test_non_2d_output_rejected(self, tmp_path):
        grid = np.zeros((1, 2, 4, 4), dtype=np.float32)
        data = enc_model(
            nodes=[enc_node("Constant", [], ["map"],
                            attrs=[enc_attr_tensor("value", grid)])],
            inputs=[enc_value_info("image", [1, 3, 8, 8])],
            outputs=[enc_value_info("map", [1, 2, 4, 4])],
        )
        path = tmp_path / "den.onnx"
        path.write_bytes(data)
        backend = OnnxDensityBackend(str(path))
        frame = Frame(frame_id="f", image=np.zeros((8, 8, 3), np.uint8))
        with pytest.raises(BackendError, match="2-D"):
            backend.density(frame)

    def test_normalization_validation(self, tmp_path):
        path = tmp_path / "den.onnx"
        grid = np.zeros((1, 1, 2, 2), dtype=np.float32)
        path.write_bytes(enc_model(
            nodes=[enc_node("Constant", [], ["map"],
                            attrs=[enc_attr_tensor("value", grid)])],
            inputs=[enc_value_info("image", [1, 3, 8, 8])],
            outputs=[enc_value_info("map", [1, 1, 2, 2])],
        ))
        with pytest.raises(BackendError, match="3 values"):
            OnnxDensityBackend(str(path), mean=(0.5, 0.5))
        with pytest.raises(BackendError, match="non-zero"):
            OnnxDensityBackend(str(path), std=(0.0, 1.0, 1.0))
