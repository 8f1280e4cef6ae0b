"""Network topologies: layer specs, JSON parsing, shape inference and MAC/volume arithmetic.

A topology is a linear sequence of layers split into a convolutional part and a
fully-connected part. Branching networks are stored linearized in topological
order; a layer may name an earlier layer as its ``input`` to describe shortcut
projections, and elementwise adds are written as 1x1 pools (no MACs).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable


class NetworkError(ValueError):
    """Base class for topology errors."""


class NetworkSyntaxError(NetworkError):
    def __init__(self, msg: str, lineno: int | None = None, colno: int | None = None):
        where = f" (line {lineno}, column {colno})" if lineno is not None else ""
        super().__init__(f"{msg}{where}")
        self.lineno = lineno
        self.colno = colno


class NetworkSemanticError(NetworkError):
    pass


class ShapeError(NetworkError):
    pass


class LayerKind(str, enum.Enum):
    INPUT = "Input"
    CONV = "Conv"
    DEPTHWISE = "DepthwiseConv"
    POINTWISE = "PointwiseConv"
    POOL = "Pool"
    FC = "FullyConnected"

    @property
    def conv_like(self) -> bool:
        return self in (LayerKind.CONV, LayerKind.DEPTHWISE, LayerKind.POINTWISE)


_KIND_ALIASES = {
    "input": LayerKind.INPUT,
    "conv": LayerKind.CONV,
    "convolution": LayerKind.CONV,
    "depthwiseconv": LayerKind.DEPTHWISE,
    "depthwise": LayerKind.DEPTHWISE,
    "dwconv": LayerKind.DEPTHWISE,
    "pointwiseconv": LayerKind.POINTWISE,
    "pointwise": LayerKind.POINTWISE,
    "pwconv": LayerKind.POINTWISE,
    "pool": LayerKind.POOL,
    "pooling": LayerKind.POOL,
    "subsampling": LayerKind.POOL,
    "fullyconnected": LayerKind.FC,
    "fc": LayerKind.FC,
    "dense": LayerKind.FC,
}


@dataclass(frozen=True)
class TensorShape:
    channels: int
    height: int
    width: int

    def __post_init__(self):
        if min(self.channels, self.height, self.width) < 1:
            raise ShapeError(f"non-positive tensor shape {self}")

    @property
    def words(self) -> int:
        return self.channels * self.height * self.width


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    name: str
    in_channels: int | None = None
    num_filters: int | None = None
    kernel: tuple[int, int] = (1, 1)  # (K_x, K_y)
    stride: int = 1
    pad: int = 0
    pool_window: int | None = None
    pool_stride: int | None = None
    units: int | None = None
    source: str | None = None  # earlier layer feeding this one; None means the predecessor

    def __post_init__(self):
        if self.stride < 1:
            raise NetworkSemanticError(f"{self.name}: stride must be >= 1")
        if self.pad < 0:
            raise NetworkSemanticError(f"{self.name}: pad must be >= 0")
        kx, ky = self.kernel
        if self.kind.conv_like and (kx < 1 or ky < 1):
            raise NetworkSemanticError(f"{self.name}: kernel must be >= 1")
        if self.kind is LayerKind.POINTWISE and self.kernel != (1, 1):
            raise NetworkSemanticError(f"{self.name}: pointwise layers have a 1x1 kernel")
        if self.kind is LayerKind.DEPTHWISE and None not in (self.num_filters, self.in_channels):
            if self.num_filters != self.in_channels:
                raise NetworkSemanticError(f"{self.name}: depthwise layer needs m == c")
        if self.kind in (LayerKind.CONV, LayerKind.POINTWISE) and (self.num_filters or 0) < 1:
            raise NetworkSemanticError(f"{self.name}: conv layer needs m >= 1")
        if self.kind is LayerKind.POOL and (self.pool_window or 0) < 1:
            raise NetworkSemanticError(f"{self.name}: pool layer needs pool >= 1")
        if self.kind is LayerKind.FC and (self.units or 0) < 1:
            raise NetworkSemanticError(f"{self.name}: fc layer needs units >= 1")
        for attr in ("in_channels", "num_filters", "pool_stride"):
            v = getattr(self, attr)
            if v is not None and v < 1:
                raise NetworkSemanticError(f"{self.name}: {attr} must be >= 1")


@dataclass(frozen=True)
class NetworkTopology:
    name: str
    input_shape: TensorShape
    conv_part: tuple[LayerSpec, ...]
    fc_part: tuple[LayerSpec, ...] = ()
    shapes: tuple[TensorShape, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self.conv_part or self.conv_part[0].kind is not LayerKind.INPUT:
            raise NetworkSemanticError(f"{self.name}: conv_part must start with an Input layer")
        for layer in self.conv_part[1:]:
            if layer.kind in (LayerKind.INPUT, LayerKind.FC):
                raise NetworkSemanticError(f"{layer.name}: {layer.kind.value} not allowed in conv_part")
        for layer in self.fc_part:
            if layer.kind is not LayerKind.FC:
                raise NetworkSemanticError(f"{layer.name}: fc_part holds only FullyConnected layers")
        names = [l.name for l in self.layers]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise NetworkSemanticError(f"duplicate layer names: {sorted(dup)}")
        object.__setattr__(self, "shapes", tuple(_infer(self)))

    @property
    def layers(self) -> tuple[LayerSpec, ...]:
        return self.conv_part + self.fc_part

    def input_shapes(self) -> list[TensorShape]:
        """Shape feeding each layer (the Input layer is fed by ``input_shape``)."""
        index = {l.name: i for i, l in enumerate(self.layers)}
        out = []
        for i, layer in enumerate(self.layers):
            if i == 0:
                out.append(self.input_shape)
            elif layer.source is not None:
                out.append(self.shapes[index[layer.source]])
            else:
                out.append(self.shapes[i - 1])
        return out


def conv_out(size: int, kernel: int, pad: int, stride: int) -> int:
    return (size - kernel + 2 * pad) // stride + 1


def _pool_stride(layer: LayerSpec) -> int:
    return layer.pool_stride if layer.pool_stride is not None else layer.pool_window


def output_shape(layer: LayerSpec, in_shape: TensorShape) -> TensorShape:
    kind = layer.kind
    if kind is LayerKind.INPUT:
        return in_shape
    if kind is LayerKind.FC:
        return TensorShape(layer.units, 1, 1)
    if kind is LayerKind.POOL:
        kx = ky = layer.pool_window
        stride = _pool_stride(layer)
    else:
        kx, ky = layer.kernel
        stride = layer.stride
    ox = conv_out(in_shape.width, kx, layer.pad, stride)
    oy = conv_out(in_shape.height, ky, layer.pad, stride)
    if ox < 1 or oy < 1:
        raise ShapeError(f"layer {layer.name!r}: non-positive output {oy}x{ox} from input {in_shape}")
    if kind in (LayerKind.CONV, LayerKind.POINTWISE):
        channels = layer.num_filters
    else:
        channels = in_shape.channels
    return TensorShape(channels, oy, ox)


def _infer(net: NetworkTopology) -> list[TensorShape]:
    index = {l.name: i for i, l in enumerate(net.layers)}
    shapes: list[TensorShape] = []
    for i, layer in enumerate(net.layers):
        if i == 0:
            src = net.input_shape
        elif layer.source is not None:
            j = index.get(layer.source)
            if j is None or j >= i:
                raise NetworkSemanticError(f"{layer.name}: input {layer.source!r} is not an earlier layer")
            src = shapes[j]
        else:
            src = shapes[-1]
        if layer.in_channels is not None and layer.kind is not LayerKind.FC:
            if layer.in_channels != src.channels:
                raise NetworkSemanticError(
                    f"{layer.name}: c={layer.in_channels} but input has {src.channels} channels")
        if layer.kind is LayerKind.DEPTHWISE and layer.num_filters not in (None, src.channels):
            raise NetworkSemanticError(f"{layer.name}: depthwise layer needs m == c ({src.channels})")
        shapes.append(output_shape(layer, src))
    return shapes


def infer_shapes(net: NetworkTopology) -> list[TensorShape]:
    return list(net.shapes)


@dataclass(frozen=True)
class ConvGeometry:
    """A layer as seen by the conv loop nest. ``depthwise`` means filter m reads channel m only."""
    C: int
    M: int
    kx: int
    ky: int
    stride: int
    pad: int
    ix: int
    iy: int
    depthwise: bool = False

    @property
    def ox(self) -> int:
        return conv_out(self.ix, self.kx, self.pad, self.stride)

    @property
    def oy(self) -> int:
        return conv_out(self.iy, self.ky, self.pad, self.stride)


def geometry(layer: LayerSpec, in_shape: TensorShape) -> ConvGeometry:
    if layer.kind is LayerKind.FC:
        return ConvGeometry(in_shape.words, layer.units, 1, 1, 1, 0, 1, 1)
    if not layer.kind.conv_like:
        raise ValueError(f"{layer.name}: {layer.kind.value} has no conv geometry")
    kx, ky = layer.kernel
    dw = layer.kind is LayerKind.DEPTHWISE
    m = in_shape.channels if dw else layer.num_filters
    return ConvGeometry(in_shape.channels, m, kx, ky, layer.stride, layer.pad,
                        in_shape.width, in_shape.height, dw)



def used_span(size: int, kernel: int, pad: int, stride: int, out_lo: int, out_hi: int) -> int:
    """Number of real (non-padding) input indices read by outputs ``out_lo..out_hi-1``."""
    count = 0
    last = -1  # highest input index counted so far
    for o in range(out_lo, out_hi):
        lo = max(o * stride - pad, 0, last + 1)
        hi = min(o * stride - pad + kernel - 1, size - 1)
        if hi >= lo:
            count += hi - lo + 1
            last = hi
    return count


def layer_macs(layer: LayerSpec, in_shape: TensorShape) -> int:
    if layer.kind in (LayerKind.POOL, LayerKind.INPUT):
        return 0
    g = geometry(layer, in_shape)
    per_filter = g.ox * g.oy * g.kx * g.ky
    return g.M * per_filter if g.depthwise else g.M * g.C * per_filter


@dataclass(frozen=True)
class LayerVolumes:
    ifmap_words: int
    weight_words: int
    ofmap_words: int


def layer_volumes(layer: LayerSpec, in_shape: TensorShape) -> LayerVolumes:
    """Word counts of the data a layer actually touches.

    Padding is generated, never fetched; input rows/columns skipped by a stride
    larger than the kernel are not fetched either.
    """
    if layer.kind is LayerKind.INPUT:
        return LayerVolumes(in_shape.words, 0, in_shape.words)
    out = output_shape(layer, in_shape)
    if layer.kind is LayerKind.POOL:
        w, s = layer.pool_window, _pool_stride(layer)
        rows = used_span(in_shape.height, w, layer.pad, s, 0, out.height)
        cols = used_span(in_shape.width, w, layer.pad, s, 0, out.width)
        return LayerVolumes(in_shape.channels * rows * cols, 0, out.words)
    g = geometry(layer, in_shape)
    rows = used_span(g.iy, g.ky, g.pad, g.stride, 0, g.oy)
    cols = used_span(g.ix, g.kx, g.pad, g.stride, 0, g.ox)
    weights = g.C * g.kx * g.ky if g.depthwise else g.M * g.C * g.kx * g.ky
    return LayerVolumes(g.C * rows * cols, weights, g.M * g.ox * g.oy)


# --- parsing ---------------------------------------------------------------

_LAYER_KEYS = {"kind", "name", "m", "c", "k", "stride", "pad", "pool", "pool_stride", "units", "input"}
_TOP_KEYS = {"name", "input", "conv_part", "fc_part"}


def _kind(value: Any, where: str) -> LayerKind:
    if not isinstance(value, str):
        raise NetworkSemanticError(f"{where}: kind must be a string")
    key = value.replace("_", "").replace("-", "").lower()
    if key not in _KIND_ALIASES:
        raise NetworkSemanticError(f"{where}: unknown layer kind {value!r}")
    return _KIND_ALIASES[key]


def _int(obj: dict, key: str, where: str, default: Any = None) -> Any:
    v = obj.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise NetworkSemanticError(f"{where}: {key} must be an integer, got {v!r}")
    return v


def _kernel(obj: dict, where: str) -> tuple[int, int]:
    k = obj.get("k", 1)
    if isinstance(k, int) and not isinstance(k, bool):
        return (k, k)
    if isinstance(k, (list, tuple)) and len(k) == 2 and all(isinstance(x, int) for x in k):
        return (k[0], k[1])
    raise NetworkSemanticError(f"{where}: k must be an int or [k_x, k_y]")


def _layer(obj: Any, where: str) -> LayerSpec:
    if not isinstance(obj, dict):
        raise NetworkSemanticError(f"{where}: layer must be an object")
    unknown = set(obj) - _LAYER_KEYS
    if unknown:
        raise NetworkSemanticError(f"{where}: unknown keys {sorted(unknown)}")
    kind = _kind(obj.get("kind"), where)
    name = obj.get("name", where)
    if not isinstance(name, str):
        raise NetworkSemanticError(f"{where}: name must be a string")
    m = _int(obj, "m", name)
    if kind is LayerKind.POINTWISE and "k" in obj and _kernel(obj, name) != (1, 1):
        raise NetworkSemanticError(f"{name}: pointwise layers have a 1x1 kernel")
    return LayerSpec(
        kind=kind,
        name=name,
        in_channels=_int(obj, "c", name),
        num_filters=m,
        kernel=_kernel(obj, name) if kind.conv_like else (1, 1),
        stride=_int(obj, "stride", name, 1),
        pad=_int(obj, "pad", name, 0),
        pool_window=_int(obj, "pool", name),
        pool_stride=_int(obj, "pool_stride", name),
        units=_int(obj, "units", name),
        source=obj.get("input"),
    )


def network_from_dict(doc: Any) -> NetworkTopology:
    if not isinstance(doc, dict):
        raise NetworkSemanticError("network document must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise NetworkSemanticError(f"unknown top-level keys {sorted(unknown)}")
    inp = doc.get("input")
    if not isinstance(inp, dict) or set(inp) != {"c", "h", "w"}:
        raise NetworkSemanticError("input must be an object with exactly c, h, w")
    shape = TensorShape(_int(inp, "c", "input"), _int(inp, "h", "input"), _int(inp, "w", "input"))
    conv = doc.get("conv_part")
    if not isinstance(conv, list) or not conv:
        raise NetworkSemanticError("conv_part must be a non-empty list")
    fc = doc.get("fc_part", [])
    if not isinstance(fc, list):
        raise NetworkSemanticError("fc_part must be a list")
    conv_layers = tuple(_layer(o, f"conv_part[{i}]") for i, o in enumerate(conv))
    fc_layers = tuple(_layer(o, f"fc_part[{i}]") for i, o in enumerate(fc))
    first = conv_layers[0]
    if first.kind is LayerKind.INPUT and first.in_channels not in (None, shape.channels):
        raise NetworkSemanticError("Input layer channel count disagrees with input.c")
    return NetworkTopology(doc.get("name", "network"), shape, conv_layers, fc_layers)


def parse_network(text: str) -> NetworkTopology:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkSyntaxError(e.msg, e.lineno, e.colno) from None
    return network_from_dict(doc)


def network_to_dict(net: NetworkTopology) -> dict:
    def one(layer: LayerSpec) -> dict:
        d: dict[str, Any] = {"kind": layer.kind.value, "name": layer.name}
        if layer.kind.conv_like:
            kx, ky = layer.kernel
            d["k"] = kx if kx == ky else [kx, ky]
            if layer.num_filters is not None:
                d["m"] = layer.num_filters
        if layer.in_channels is not None:
            d["c"] = layer.in_channels
        if layer.kind.conv_like or layer.kind is LayerKind.POOL:
            d["stride"], d["pad"] = layer.stride, layer.pad
        if layer.kind is LayerKind.POOL:
            d["pool"] = layer.pool_window
            if layer.pool_stride is not None:
                d["pool_stride"] = layer.pool_stride
        if layer.units is not None:
            d["units"] = layer.units
        if layer.source is not None:
            d["input"] = layer.source
        return d

    s = net.input_shape
    return {
        "name": net.name,
        "input": {"c": s.channels, "h": s.height, "w": s.width},
        "conv_part": [one(l) for l in net.conv_part],
        "fc_part": [one(l) for l in net.fc_part],
    }


# --- bundled topologies ----------------------------------------------------

def available() -> list[str]:
    files = resources.files("acceldse").joinpath("networks").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def builtin(name: str) -> NetworkTopology:
    names = available()
    match = {n.lower(): n for n in names}.get(name.lower())
    if match is None:
        raise KeyError(f"unknown topology {name!r}; available: {', '.join(names)}")
    text = resources.files("acceldse").joinpath("networks").joinpath(f"{match}.json").read_text()
    return parse_network(text)


def count_kinds(layers: Iterable[LayerSpec]) -> dict[LayerKind, int]:
    out: dict[LayerKind, int] = {}
    for layer in layers:
        out[layer.kind] = out.get(layer.kind, 0) + 1
    return out
