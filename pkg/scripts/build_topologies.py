"""Regenerate the bundled network descriptions in src/acceldse/networks/.

Run from the repo root:  python scripts/build_topologies.py
"""
import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "acceldse" / "networks"


def conv(name, m, k, stride=1, pad=0, **kw):
    return {"kind": "Conv", "name": name, "m": m, "k": k, "stride": stride, "pad": pad, **kw}


def pool(name, window, stride=None, **kw):
    d = {"kind": "Pool", "name": name, "pool": window}
    if stride is not None:
        d["pool_stride"] = stride
    d.update(kw)
    return d


def fc(name, units):
    return {"kind": "FullyConnected", "name": name, "units": units}


def doc(name, c, h, w, conv_part, fc_part):
    return {"name": name, "input": {"c": c, "h": h, "w": w},
            "conv_part": [{"kind": "Input", "name": "input"}] + conv_part, "fc_part": fc_part}


def alexnet():
    layers = [
        conv("conv1", 96, 11, 4), pool("pool1", 3, 2),
        conv("conv2", 256, 5, 1, 2), pool("pool2", 3, 2),
        conv("conv3", 384, 3, 1, 1), conv("conv4", 384, 3, 1, 1), conv("conv5", 256, 3, 1, 1),
        pool("pool5", 3, 2),
    ]
    return doc("AlexNet", 3, 227, 227, layers, [fc("fc6", 4096), fc("fc7", 4096), fc("fc8", 1000)])


def vgg(name, blocks):
    layers = []
    for b, (m, n) in enumerate(blocks, 1):
        layers += [conv(f"conv{b}_{i}", m, 3, 1, 1) for i in range(1, n + 1)]
        layers.append(pool(f"pool{b}", 2))
    return doc(name, 3, 224, 224, layers, [fc("fc6", 4096), fc("fc7", 4096), fc("fc8", 1000)])


def resnet50():
    layers = [conv("conv1", 64, 7, 2, 3), pool("pool1", 3, 2, pad=1)]
    prev = "pool1"
    for stage, (width, blocks, stride) in enumerate([(64, 3, 1), (128, 4, 2), (256, 6, 2), (512, 3, 2)], 2):
        for b in range(blocks):
            tag = f"res{stage}{chr(ord('a') + b)}"
            s = stride if b == 0 else 1
            if b == 0:
                layers.append(conv(f"{tag}_proj", width * 4, 1, s, input=prev))
                layers.append(conv(f"{tag}_2a", width, 1, s, input=prev))
            else:
                layers.append(conv(f"{tag}_2a", width, 1, 1))
            layers.append(conv(f"{tag}_2b", width, 3, 1, 1))
            layers.append(conv(f"{tag}_2c", width * 4, 1, 1))
            layers.append(pool(f"{tag}_add", 1))  # elementwise add, data movement only
            prev = f"{tag}_add"
    layers.append(pool("avgpool", 7))
    return doc("ResNet50", 3, 224, 224, layers, [fc("fc1000", 1000)])


def mobilenet():
    layers = [conv("conv1", 32, 3, 2, 1)]
    cfg = [(64, 1), (128, 2), (128, 1), (256, 2), (256, 1), (512, 2)] + [(512, 1)] * 5 + [(1024, 2), (1024, 1)]
    for i, (m, s) in enumerate(cfg, 1):
        layers.append({"kind": "DepthwiseConv", "name": f"dw{i}", "k": 3, "stride": s, "pad": 1})
        layers.append({"kind": "PointwiseConv", "name": f"pw{i}", "m": m})
    layers.append(pool("avgpool", 7))
    return doc("MobileNet", 3, 224, 224, layers, [fc("fc1000", 1000)])


NETWORKS = {
    "AlexNet": alexnet,
    "VGG16": lambda: vgg("VGG16", [(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)]),
    "VGG19": lambda: vgg("VGG19", [(64, 2), (128, 2), (256, 4), (512, 4), (512, 4)]),
    "ResNet50": resnet50,
    "MobileNet": mobilenet,
}

if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, build in NETWORKS.items():
        (OUT / f"{name}.json").write_text(json.dumps(build(), indent=1) + "\n")
        print("wrote", OUT / f"{name}.json")
