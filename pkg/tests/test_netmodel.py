import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acceldse import netmodel
from acceldse.netmodel import (
    LayerKind,
    LayerSpec,
    NetworkSemanticError,
    NetworkSyntaxError,
    ShapeError,
    TensorShape,
    builtin,
    conv_out,
    count_kinds,
    geometry,
    layer_macs,
    layer_volumes,
    network_to_dict,
    parse_network,
)
from oracles import loop_nest

MINIMAL = {
    "name": "tiny",
    "input": {"c": 3, "h": 32, "w": 32},
    "conv_part": [{"kind": "Input", "name": "in"},
                  {"kind": "Conv", "name": "c1", "m": 8, "k": 3, "stride": 1, "pad": 1}],
}


def conv(m, k, stride=1, pad=0, name="L", kind=LayerKind.CONV):
    return LayerSpec(kind, name, num_filters=m, kernel=(k, k), stride=stride, pad=pad)


def test_minimal_document_parses():
    net = parse_network(json.dumps(MINIMAL))
    assert len(net.layers) == 2
    assert net.shapes[-1] == TensorShape(8, 32, 32)


def test_conv_before_input_rejected():
    doc = dict(MINIMAL, conv_part=MINIMAL["conv_part"][::-1])
    with pytest.raises(NetworkSemanticError):
        parse_network(json.dumps(doc))


def test_syntax_error_reports_position():
    with pytest.raises(NetworkSyntaxError) as err:
        parse_network('{"name": "x",\n  "input": }')
    assert err.value.lineno == 2


def test_unknown_key_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["conv_part"][1]["dilation"] = 2
    with pytest.raises(NetworkSemanticError, match="dilation"):
        parse_network(json.dumps(doc))


def test_depthwise_needs_m_equal_c():
    doc = json.loads(json.dumps(MINIMAL))
    doc["conv_part"][1] = {"kind": "DepthwiseConv", "name": "dw", "m": 5, "k": 3}
    with pytest.raises(NetworkSemanticError):
        parse_network(json.dumps(doc))


def test_pointwise_kernel_forced():
    with pytest.raises(NetworkSemanticError):
        LayerSpec(LayerKind.POINTWISE, "pw", num_filters=4, kernel=(3, 3))


def test_shape_failure_names_layer():
    doc = json.loads(json.dumps(MINIMAL))
    doc["conv_part"][1] = {"kind": "Conv", "name": "huge", "m": 2, "k": 40}
    with pytest.raises(ShapeError, match="huge"):
        parse_network(json.dumps(doc))


def test_fc_in_conv_part_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["conv_part"].append({"kind": "FullyConnected", "name": "fc", "units": 10})
    with pytest.raises(NetworkSemanticError):
        parse_network(json.dumps(doc))


@pytest.mark.parametrize("i,k,pad,stride,expected", [(5, 3, 0, 1, 3), (224, 3, 1, 1, 224), (227, 11, 0, 4, 55)])
def test_output_size(i, k, pad, stride, expected):
    assert conv_out(i, k, pad, stride) == expected


@given(st.integers(1, 300), st.sampled_from([1, 3, 5, 7, 9, 11]))
def test_same_padding_keeps_size(i, k):
    assert conv_out(i, k, (k - 1) // 2, 1) == i


def test_macs_examples():
    assert layer_macs(conv(2, 3), TensorShape(3, 6, 6)) == 864
    pw = LayerSpec(LayerKind.POINTWISE, "pw", num_filters=4)
    assert layer_macs(pw, TensorShape(2, 5, 5)) == 200
    pool = LayerSpec(LayerKind.POOL, "p", pool_window=2)
    assert layer_macs(pool, TensorShape(2, 4, 4)) == 0


def test_volume_examples():
    assert layer_volumes(conv(2, 3), TensorShape(3, 8, 8)).weight_words == 54
    inp = LayerSpec(LayerKind.INPUT, "in")
    assert layer_volumes(inp, TensorShape(3, 32, 32)).ifmap_words == 3072
    dw = LayerSpec(LayerKind.DEPTHWISE, "dw", kernel=(3, 3), pad=1)
    assert layer_volumes(dw, TensorShape(3, 8, 8)).weight_words == 27


def test_padding_is_not_fetched():
    v = layer_volumes(conv(1, 3, pad=1), TensorShape(1, 4, 4))
    assert v.ifmap_words == 16


def test_stride_skipped_rows_not_fetched():
    # kernel 1, stride 2 over 5 rows reads rows 0, 2, 4 only
    v = layer_volumes(conv(1, 1, stride=2), TensorShape(1, 5, 5))
    assert v.ifmap_words == 9


def test_fc_maps_as_pointwise():
    fc = LayerSpec(LayerKind.FC, "fc", units=10)
    g = geometry(fc, TensorShape(4, 3, 3))
    assert (g.C, g.M, g.ox, g.oy) == (36, 10, 1, 1)
    assert layer_macs(fc, TensorShape(4, 3, 3)) == 360


layer_cases = st.builds(
    lambda kind, c, m, k, stride, pad, h, w: (kind, c, m, k, stride, min(pad, k - 1), h, w),
    st.sampled_from([LayerKind.CONV, LayerKind.DEPTHWISE, LayerKind.POINTWISE]),
    st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(1, 3),
    st.integers(0, 2), st.integers(3, 8), st.integers(3, 8),
)


@settings(max_examples=60, deadline=None)
@given(layer_cases)
def test_macs_and_volumes_match_loop_nest(case):
    kind, c, m, k, stride, pad, h, w = case
    if kind is LayerKind.POINTWISE:
        k, pad = 1, 0
    layer = LayerSpec(kind, "L", num_filters=None if kind is LayerKind.DEPTHWISE else m,
                      kernel=(k, k), stride=stride, pad=pad)
    shape = TensorShape(c, h, w)
    macs, ifmap, weights, ofmap = loop_nest(geometry(layer, shape))
    vol = layer_volumes(layer, shape)
    assert layer_macs(layer, shape) == macs
    assert (vol.ifmap_words, vol.weight_words, vol.ofmap_words) == (ifmap, weights, ofmap)


def test_shape_inference_deterministic():
    a, b = builtin("VGG16"), builtin("VGG16")
    assert a.shapes == b.shapes


def test_vgg16_layer_counts():
    kinds = count_kinds(builtin("VGG16").layers)
    assert kinds[LayerKind.CONV] == 13
    assert kinds[LayerKind.POOL] == 5
    assert kinds[LayerKind.FC] == 3


def test_alexnet_conv_part():
    net = builtin("AlexNet")
    kinds = count_kinds(net.conv_part)
    assert (kinds[LayerKind.INPUT], kinds[LayerKind.CONV], kinds[LayerKind.POOL]) == (1, 5, 3)
    assert len(net.conv_part) == 9
    assert net.shapes[1] == TensorShape(96, 55, 55)


@pytest.mark.parametrize("name", ["AlexNet", "VGG16", "VGG19", "ResNet50", "MobileNet"])
def test_builtins_round_trip(name):
    net = builtin(name)
    again = netmodel.network_from_dict(json.loads(json.dumps(network_to_dict(net))))
    assert again == net
    assert again.shapes == net.shapes


def test_builtin_names_case_insensitive():
    assert builtin("vgg16").name == "VGG16"


def test_unknown_builtin_lists_available():
    with pytest.raises(KeyError, match="VGG16"):
        builtin("nonexistent")


def test_resnet_shortcut_reads_block_input():
    net = builtin("ResNet50")
    shapes = dict(zip((l.name for l in net.layers), net.input_shapes()))
    assert shapes["res2a_proj"] == shapes["res2a_2a"]
    assert net.shapes[-1] == TensorShape(1000, 1, 1)
