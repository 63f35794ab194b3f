"""Graph builders for the three fixture families.

Every builder returns complete serialized model bytes.  Input and output
tensors are declared with fully static shapes so consumers can validate
the family contract at load time (5 logits, K x 5 box rows, a map that
squeezes to 2-D).
"""
from __future__ import annotations

from .fixtures import (
    CANVAS_EDGE,
    CLASSIFIER_EDGE,
    NUM_CLASSES,
    ClassifierWeights,
    FixtureSpec,
    classifier_weights,
    density_values,
    detector_rows,
)
from .wire import graph_proto, model_proto, node_proto, tensor_proto, value_info_proto

INPUT_NAME = "input"
CLASSIFIER_OUTPUT = "logits"
DETECTOR_OUTPUT = "boxes"
DENSITY_OUTPUT = "density"


def classifier_model_bytes(weights: ClassifierWeights) -> bytes:
    nodes = [
        node_proto("Conv", [INPUT_NAME, "conv_w"], ["conv_out"], name="stem",
                   attrs={"kernel_shape": [3, 3], "strides": [2, 2],
                          "pads": [1, 1, 1, 1]}),
        node_proto("Relu", ["conv_out"], ["relu_out"]),
        node_proto("GlobalAveragePool", ["relu_out"], ["pool_out"]),
        node_proto("Flatten", ["pool_out"], ["features"], attrs={"axis": 1}),
        node_proto("Gemm", ["features", "head_w", "head_b"], [CLASSIFIER_OUTPUT],
                   name="head", attrs={"transB": 1}),
    ]
    graph = graph_proto(
        "fixture_classifier",
        nodes=nodes,
        initializers=[
            tensor_proto("conv_w", weights.conv),
            tensor_proto("head_w", weights.head_w),
            tensor_proto("head_b", weights.head_b),
        ],
        inputs=[value_info_proto(INPUT_NAME, [1, 3, CLASSIFIER_EDGE, CLASSIFIER_EDGE])],
        outputs=[value_info_proto(CLASSIFIER_OUTPUT, [1, NUM_CLASSES])],
    )
    return model_proto(graph)


def detector_model_bytes(spec: FixtureSpec) -> bytes:
    rows = detector_rows(spec)
    nodes = [node_proto("Constant", [], [DETECTOR_OUTPUT], name="rows",
                        attrs={"value": rows})]
    graph = graph_proto(
        "fixture_detector",
        nodes=nodes,
        initializers=[],
        inputs=[value_info_proto(INPUT_NAME, [1, 3, CANVAS_EDGE, CANVAS_EDGE])],
        outputs=[value_info_proto(DETECTOR_OUTPUT, list(rows.shape))],
    )
    return model_proto(graph)


def density_model_bytes(spec: FixtureSpec) -> bytes:
    values = density_values(spec)
    nodes = [node_proto("Constant", [], [DENSITY_OUTPUT], name="map",
                        attrs={"value": values})]
    graph = graph_proto(
        "fixture_density",
        nodes=nodes,
        initializers=[],
        inputs=[value_info_proto(INPUT_NAME, [1, 3, CANVAS_EDGE, CANVAS_EDGE])],
        outputs=[value_info_proto(DENSITY_OUTPUT, list(values.shape))],
    )
    return model_proto(graph)


def model_bytes_for(spec: FixtureSpec) -> bytes:
    if spec.family == "classifier":
        return classifier_model_bytes(classifier_weights(spec.seed))
    if spec.family == "detector":
        return detector_model_bytes(spec)
    return density_model_bytes(spec)
