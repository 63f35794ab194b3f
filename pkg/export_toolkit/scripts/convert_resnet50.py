"""Convert a torchvision ResNet-50 into the 5-way classifier exchange format.

Usage:
    python3 scripts/convert_resnet50.py --out resnet50_5way.onnx [--weights head.pth]

Requires torch and torchvision, which the toolkit deliberately does not
depend on.  The exported graph takes a [1,3,224,224] float input named
"input" and emits 5 raw logits named "logits"; pair it with the ImageNet
normalization constants (mean 0.485/0.456/0.406, std 0.229/0.224/0.225)
in the consumer's preprocess configuration.  Converted real models use
ops beyond the tiny-fixture subset, so run them under onnxruntime.
"""
from __future__ import annotations

import argparse
import sys


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output .onnx path")
    parser.add_argument("--weights", help="optional state-dict .pth with a 5-way fc head")
    args = parser.parse_args()

    try:
        import torch
        import torchvision
    except ImportError:
        sys.exit("torch and torchvision are required; install them and re-run")

    model = torchvision.models.resnet50(weights=None)
    model.fc = torch.nn.Linear(model.fc.in_features, 5)
    if args.weights:
        state = torch.load(args.weights, map_location="cpu")
        model.load_state_dict(state)
    model.eval()

    dummy = torch.zeros(1, 3, 224, 224)
    torch.onnx.export(
        model, dummy, args.out,
        input_names=["input"], output_names=["logits"],
        opset_version=13, do_constant_folding=True,
    )
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
