# tests/test_net.py

import io
from collections import OrderedDict

import numpy as np
import pytest

from sosdetect._exceptions import (
    CheckpointMagicError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    ConfigError,
    NumericalError,
    ShapeError,
)
from sosdetect.anchors import AnchorSpec
from sosdetect.net import (
    DetectorModel,
    ModelConfig,
    checkpoint_bytes,
    conv2d_backward,
    conv2d_forward,
    forward_detector,
    init_weights,
    load_checkpoint,
    maxpool2_backward,
    maxpool2_forward,
    patches_to_tensor,
    prediction_count,
    receptive_field,
    relu_backward,
    relu_forward,
    save_checkpoint,
)
from sosdetect.net.checkpoint import parse_checkpoint
from sosdetect.net.model import anchor_major_to_head, head_to_anchor_major
from sosdetect.net.net_utils import check_finite, col2im_3x3, im2col_3x3


def _relative_error(analytic, numeric):
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return np.linalg.norm(analytic - numeric) / scale


def _numeric_grad(f, x, indices, eps=1e-6):
    out = []
    for index in indices:
        saved = x[index]
        x[index] = saved + eps
        plus = f()
        x[index] = saved - eps
        minus = f()
        x[index] = saved
        out.append((plus - minus) / (2 * eps))
    return np.array(out)


def _sample_indices(rng, shape, count):
    return [tuple(int(rng.integers(0, d)) for d in shape) for _ in range(count)]


def _naive_conv(x, w, b):
    batch, _, height, width = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((batch, w.shape[0], height, width))
    for n in range(batch):
        for o in range(w.shape[0]):
            for i in range(height):
                for j in range(width):
                    out[n, o, i, j] = np.sum(padded[n, :, i : i + 3, j : j + 3] * w[o]) + b[o]
    return out


def test_im2col_col2im_are_adjoint(rng):
    x = rng.normal(size=(3, 5, 6))
    y = rng.normal(size=(27, 30))
    assert np.sum(im2col_3x3(x) * y) == pytest.approx(np.sum(x * col2im_3x3(y, 3, 5, 6)))


def test_conv_matches_naive_loop(rng):
    x = rng.normal(size=(2, 3, 6, 5))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    out, _ = conv2d_forward(x, w, b)
    assert np.allclose(out, _naive_conv(x, w, b), atol=1e-12)


def test_conv_preserves_dtype(rng):
    x = rng.normal(size=(1, 2, 4, 4)).astype(np.float32)
    w = rng.normal(size=(3, 2, 3, 3)).astype(np.float32)
    out, _ = conv2d_forward(x, w, np.zeros(3, dtype=np.float32))
    assert out.dtype == np.float32


def test_conv_shape_errors(rng):
    with pytest.raises(ShapeError):
        conv2d_forward(rng.normal(size=(1, 2, 4, 4)), rng.normal(size=(3, 4, 3, 3)), np.zeros(3))
    with pytest.raises(ShapeError):
        conv2d_forward(rng.normal(size=(2, 4, 4)), rng.normal(size=(3, 2, 3, 3)), np.zeros(3))


@pytest.mark.parametrize("seed", range(20))
def test_conv_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 3, 5, 4))
    w = rng.normal(size=(2, 3, 3, 3))
    b = rng.normal(size=2)
    r = rng.normal(size=(2, 2, 5, 4))

    def loss():
        return float(np.sum(conv2d_forward(x, w, b)[0] * r))

    _, cache = conv2d_forward(x, w, b)
    grad_x, grad_w, grad_b = conv2d_backward(r, cache)
    for array, grad in ((x, grad_x), (w, grad_w), (b, grad_b)):
        indices = _sample_indices(rng, array.shape, 10)
        numeric = _numeric_grad(loss, array, indices)
        analytic = np.array([grad[i] for i in indices])
        assert _relative_error(analytic, numeric) < 1e-4


@pytest.mark.parametrize("seed", range(20))
def test_maxpool_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    # distinct values keep every window's max away from a tie
    x = rng.permutation(2 * 2 * 6 * 4).reshape(2, 2, 6, 4).astype(np.float64) * 0.1
    r = rng.normal(size=(2, 2, 3, 2))

    def loss():
        return float(np.sum(maxpool2_forward(x)[0] * r))

    _, cache = maxpool2_forward(x)
    grad = maxpool2_backward(r, cache)
    indices = _sample_indices(rng, x.shape, 15)
    numeric = _numeric_grad(loss, x, indices, eps=1e-4)
    assert _relative_error([grad[i] for i in indices], numeric) < 1e-4


@pytest.mark.parametrize("seed", range(20))
def test_relu_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 3, 4, 4))
    x[np.abs(x) < 1e-3] = 0.5
    r = rng.normal(size=x.shape)

    def loss():
        return float(np.sum(relu_forward(x)[0] * r))

    _, mask = relu_forward(x)
    grad = relu_backward(r, mask)
    indices = _sample_indices(rng, x.shape, 15)
    numeric = _numeric_grad(loss, x, indices)
    assert _relative_error([grad[i] for i in indices], numeric) < 1e-4


def test_maxpool_ties_pick_first_position():
    x = np.ones((1, 1, 2, 2))
    out, cache = maxpool2_forward(x)
    assert out[0, 0, 0, 0] == 1.0
    grad = maxpool2_backward(np.ones((1, 1, 1, 1)), cache)
    assert grad[0, 0].tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_maxpool_rejects_odd_dims():
    with pytest.raises(ShapeError):
        maxpool2_forward(np.zeros((1, 1, 3, 4)))


def test_head_geometry():
    spec = AnchorSpec()
    assert spec.anchor_count == 3750
    assert prediction_count(6, spec) == (6 + 4) * 6 * 25 * 25
    for c in (2, 21, 101):
        assert prediction_count(c, spec) == (c + 4) * 3750


def test_receptive_field_of_default_trunk():
    assert receptive_field(ModelConfig()) == 84


def test_model_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(stage_channels=(8, 16, 32))
    with pytest.raises(ConfigError):
        ModelConfig(anchor_spec=AnchorSpec(input_side=200, feature_side=50))
    with pytest.raises(ConfigError):
        ModelConfig(class_count_with_background=1)


def test_forward_shapes(tiny_model, rng):
    patches = [rng.integers(0, 256, size=(200, 200, 3), dtype=np.uint8) for _ in range(2)]
    conf, loc = forward_detector(tiny_model, patches_to_tensor(patches))
    assert conf.shape == (2, 6 * 3, 25, 25)
    assert loc.shape == (2, 6 * 4, 25, 25)
    assert conf.dtype == np.float32
    with pytest.raises(ShapeError):
        forward_detector(tiny_model, np.zeros((1, 3, 100, 100), dtype=np.float32))


def test_forward_is_independent_of_batch_composition(tiny_model, rng):
    patches = [rng.integers(0, 256, size=(200, 200, 3), dtype=np.uint8) for _ in range(3)]
    conf, loc = forward_detector(tiny_model, patches_to_tensor(patches))
    for n, patch in enumerate(patches):
        single_conf, single_loc = forward_detector(tiny_model, patches_to_tensor([patch]))
        assert np.array_equal(single_conf[0], conf[n])
        assert np.array_equal(single_loc[0], loc[n])


def test_anchor_major_reshape_round_trip(rng):
    pred = rng.normal(size=(2, 6 * 3, 25, 25))
    values = head_to_anchor_major(pred, 6)
    assert values.shape == (2, 3750, 3)
    # channel slot*c + class at cell (i, j) is anchor (i*25 + j)*6 + slot
    assert values[1, (4 * 25 + 7) * 6 + 2, 1] == pred[1, 2 * 3 + 1, 4, 7]
    assert np.array_equal(anchor_major_to_head(values, 6, 25), pred)


def test_model_backward_matches_finite_differences(tiny_model_config):
    rng = np.random.default_rng(7)
    base = init_weights(tiny_model_config, seed=3)
    model = DetectorModel(
        tiny_model_config,
        OrderedDict((k, v.astype(np.float64)) for k, v in base.params.items()),
    )
    x = rng.uniform(0, 1, size=(1, 3, 200, 200))
    conf, loc, cache = model.forward(x)
    r_conf = rng.normal(size=conf.shape)
    r_loc = rng.normal(size=loc.shape)
    grads = model.backward(cache, r_conf, r_loc)

    def loss():
        c, l, _ = model.forward(x)
        return float(np.sum(c * r_conf) + np.sum(l * r_loc))

    for name in ("stage1.conv1.weight", "stage4.conv1.bias", "head.conf.weight", "head.loc.bias"):
        param = model.params[name]
        indices = _sample_indices(rng, param.shape, 3)
        numeric = _numeric_grad(loss, param, indices)
        assert _relative_error([grads[name][i] for i in indices], numeric) < 1e-4


def test_one_pixel_only_reaches_outputs_whose_receptive_field_covers_it():
    config = ModelConfig(class_count_with_background=3)
    base = init_weights(config, seed=0)
    model = DetectorModel(
        config, OrderedDict((k, v.astype(np.float64)) for k, v in base.params.items())
    )
    x = np.random.default_rng(2).uniform(0, 1, size=(1, 3, 200, 200))
    py, px = 97, 61
    bumped = x.copy()
    bumped[0, :, py, px] += 0.5

    conf, loc, _ = model.forward(x)
    conf2, loc2, _ = model.forward(bumped)
    changed = (np.abs(conf2 - conf) > 1e-12).any(axis=(0, 1)) | (
        np.abs(loc2 - loc) > 1e-12
    ).any(axis=(0, 1))

    field = receptive_field(config)
    stride = config.anchor_spec.cell_stride
    starts = np.arange(25) * stride + stride // 2 - field // 2
    covers_x = (starts <= px) & (px < starts + field)
    covers_y = (starts <= py) & (py < starts + field)
    assert not np.any(changed & ~np.outer(covers_y, covers_x))
    assert changed[py // stride, px // stride]


def test_init_weights_is_seeded(tiny_model_config):
    a = init_weights(tiny_model_config, 5)
    b = init_weights(tiny_model_config, 5)
    c = init_weights(tiny_model_config, 6)
    assert checkpoint_bytes(a) == checkpoint_bytes(b)
    assert checkpoint_bytes(a) != checkpoint_bytes(c)
    assert not np.any(a.params["head.conf.bias"])
    assert all(v.dtype == np.float32 for v in a.params.values())


def test_model_rejects_wrong_parameters(tiny_model):
    params = OrderedDict(tiny_model.params)
    params["head.loc.bias"] = np.zeros(5, dtype=np.float32)
    with pytest.raises(ShapeError):
        DetectorModel(tiny_model.config, params)


def test_check_finite():
    check_finite("ok", np.ones(3))
    with pytest.raises(NumericalError):
        check_finite("bad", np.array([1.0, np.inf]))


def test_checkpoint_round_trip_is_bit_exact(tiny_model, tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(tiny_model, path)
    loaded = load_checkpoint(path)
    assert loaded.config == tiny_model.config
    assert loaded.seed == 0
    for name, value in tiny_model.params.items():
        assert np.array_equal(loaded.params[name], value)
    assert checkpoint_bytes(loaded) == path.read_bytes()


def test_checkpoint_errors(tiny_model):
    data = checkpoint_bytes(tiny_model)
    with pytest.raises(CheckpointMagicError):
        parse_checkpoint(io.BytesIO(b"XXXX" + data[4:]))
    with pytest.raises(CheckpointVersionError):
        parse_checkpoint(io.BytesIO(data[:4] + (99).to_bytes(4, "little") + data[8:]))
    with pytest.raises(CheckpointTruncatedError):
        parse_checkpoint(io.BytesIO(data[:-3]))
    with pytest.raises(CheckpointShapeError):
        parse_checkpoint(io.BytesIO(data + b"\x00"))


def test_checkpoint_with_other_config_is_a_shape_error(tiny_model):
    data = checkpoint_bytes(tiny_model)
    meta_length = int.from_bytes(data[8:12], "little")
    meta = data[12 : 12 + meta_length]
    # Same-length edit: a different class count changes every head shape.
    edited = meta.replace(b'"class_count_with_background":3', b'"class_count_with_background":4')
    assert edited != meta
    with pytest.raises(CheckpointShapeError):
        parse_checkpoint(io.BytesIO(data[:12] + edited + data[12 + meta_length :]))
