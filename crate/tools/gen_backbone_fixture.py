#!/usr/bin/env python3
"""Generate the encoder parity fixture.

Fills a reference resnet18 (float64, eval mode) with deterministic
hash-derived weights, runs one forward pass on a hash-derived input, and
freezes the four stage taps (global-average-pooled) into a JSON fixture.
The Rust test rebuilds the same weights from the same integer hashes, so
the comparison validates the architecture and the weight-import naming,
not any particular checkpoint.

Run from the repo root:  python3 tools/gen_backbone_fixture.py
"""

import json
import pathlib

import torch
import torchvision

MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def unit_float(name: str, index: int) -> float:
    h = splitmix64((fnv1a64(name.encode()) + index) & MASK)
    return (h >> 11) * (2.0 ** -53)


RULES = {
    "conv": lambda u: (u - 0.5) * 0.2,
    "bn_weight": lambda u: 0.5 + u,
    "bn_bias": lambda u: (u - 0.5) * 0.5,
    "bn_mean": lambda u: (u - 0.5) * 0.5,
    "bn_var": lambda u: 0.5 + u,
}

INPUT_MEAN = [0.485, 0.456, 0.406]
INPUT_STD = [0.229, 0.224, 0.225]


def fill(tensor: torch.Tensor, name: str, rule: str) -> None:
    f = RULES[rule]
    flat = tensor.view(-1)
    vals = [f(unit_float(name, i)) for i in range(flat.numel())]
    flat.copy_(torch.tensor(vals, dtype=tensor.dtype))


def main() -> None:
    net = torchvision.models.resnet18(weights=None).double().eval()

    bn_names = {
        n for n, m in net.named_modules() if isinstance(m, torch.nn.BatchNorm2d)
    }
    tensors = []
    with torch.no_grad():
        for name, t in net.state_dict().items():
            if name.startswith("fc.") or name.endswith("num_batches_tracked"):
                continue
            module = name.rsplit(".", 1)[0]
            leaf = name.rsplit(".", 1)[1]
            if module in bn_names:
                rule = {
                    "weight": "bn_weight",
                    "bias": "bn_bias",
                    "running_mean": "bn_mean",
                    "running_var": "bn_var",
                }[leaf]
            else:
                rule = "conv"
            fill(t, name, rule)
            tensors.append({"name": name, "rule": rule, "shape": list(t.shape)})

    side = 64
    raw = torch.tensor(
        [unit_float("input", i) for i in range(3 * side * side)], dtype=torch.float64
    ).view(1, 3, side, side)
    mean = torch.tensor(INPUT_MEAN, dtype=torch.float64).view(1, 3, 1, 1)
    std = torch.tensor(INPUT_STD, dtype=torch.float64).view(1, 3, 1, 1)
    x = (raw - mean) / std

    taps = []
    with torch.no_grad():
        y = net.relu(net.bn1(net.conv1(x)))
        y = net.maxpool(y)
        for layer in (net.layer1, net.layer2, net.layer3, net.layer4):
            y = layer(y)
            taps.append(y)

    pooled = torch.cat([t.mean(dim=(2, 3)).squeeze(0) for t in taps])
    fixture = {
        "input": {"name": "input", "shape": [3, side, side]},
        "tensors": tensors,
        "expected_pooled": [float(v) for v in pooled],
        "tap_shapes": [list(t.shape[1:]) for t in taps],
    }
    out = pathlib.Path(__file__).resolve().parent.parent / (
        "crates/fdim-core/tests/fixtures/backbone_parity.json"
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixture))
    print(f"wrote {out} ({len(tensors)} tensors, {pooled.numel()} pooled values)")


if __name__ == "__main__":
    main()
