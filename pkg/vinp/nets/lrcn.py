"""Slice-recurrent upsampler: a 3D encoder per slice stack, a peephole LSTM and a 2D decoder.

Parameter names:

    enc.conv{1,2,3}.w/.b, enc.bn{1,2,3}.gamma/.beta    as in the volumetric encoder
    enc.fc.w/.b                                        [feature_dim, encoded_dim]
    lstm.w_v{i,f,c,o}                                  [hidden, feature_dim]
    lstm.w_h{i,f,c,o}                                  [hidden, hidden]
    lstm.w_c{i,f,o}                                    [hidden], elementwise peepholes
    lstm.b_{i,f,c,o}                                   [hidden]
    dec.fc.w/.b                                        [seed_channels * (d_h/4)^2, hidden]
    dec.deconv1.w/.b, dec.bn1.gamma/.beta, dec.deconv2.w/.b
"""
from typing import NamedTuple

import numpy as np

from vinp.enums import BnMode, Network
from vinp.errors import ContractError
from vinp.grad import ops
from vinp.grad.conv import conv_transpose_nd
from vinp.grad.norm import batch_norm
from vinp.grad.params import ModelParams
from vinp.grad.tensor import Tensor, add, mul
from vinp.nets.config import KERNEL, PAD, STRIDE, LrcnConfig
from vinp.nets.edgan import INIT_STD, add_bn, add_conv, add_encoder, add_linear, encode_features, to_unit_interval
from vinp.vox.slices import thin_volumes

GATES = ("i", "f", "c", "o")
PEEPHOLES = ("i", "f", "o")


class LstmState(NamedTuple):
    o: Tensor
    h: Tensor
    c: Tensor


def init_lrcn(config: LrcnConfig, seed: int, network: Network = Network.LRCN) -> ModelParams:
    rng = np.random.default_rng(seed)
    params = ModelParams(Network(network).value)
    add_encoder(params, rng, config.channels, config.bn_momentum)
    add_linear(params, rng, "enc.fc", config.feature_dim, config.encoded_dim)

    hid = config.hidden_dim
    for g in GATES:
        params.add(f"lstm.w_v{g}", rng.normal(0.0, INIT_STD, size=(hid, config.feature_dim)).astype(np.float32))
        params.add(f"lstm.w_h{g}", rng.normal(0.0, INIT_STD, size=(hid, hid)).astype(np.float32))
        if g in PEEPHOLES:
            params.add(f"lstm.w_c{g}", rng.normal(0.0, INIT_STD, size=hid).astype(np.float32))
        params.add(f"lstm.b_{g}", np.zeros(hid, dtype=np.float32))

    s = config.seed_extent
    add_linear(params, rng, "dec.fc", config.seed_channels * s * s, hid)
    k2 = (KERNEL, KERNEL)
    add_conv(params, rng, "dec.deconv1", (config.seed_channels, config.mid_channels) + k2, out_axis=1)
    add_bn(params, "dec.bn1", config.mid_channels, config.bn_momentum)
    add_conv(params, rng, "dec.deconv2", (config.mid_channels, 1) + k2, out_axis=1)
    return params


def lrcn_encoder(x: Tensor, params: ModelParams, config: LrcnConfig, mode: BnMode = BnMode.EVAL) -> Tensor:
    """Encodes slice stacks [N, 1, d_l, d_l, c] into features [N, feature_dim].

    The thickness axis shrinks 5 -> 3 -> 2 -> 1 through the three stride-2
    convolutions before the dense layer.
    """
    d = config.d_l
    if x.ndim != 5 or x.shape[1:] != (1, d, d, config.c):
        raise ContractError("lrcn_encoder", f"expected input [N, 1, {d}, {d}, {config.c}], got {x.shape}")
    h = ops.flatten(encode_features(x, params, mode, config.bn_eps))
    return ops.linear(h, params["enc.fc.w"], params["enc.fc.b"])


def zero_state(n: int, config: LrcnConfig, dtype=np.float32) -> LstmState:
    z = Tensor(np.zeros((n, config.hidden_dim), dtype=dtype))
    return LstmState(z, z, z)


def _gate(v: Tensor, h: Tensor, params: ModelParams, g: str, peep: Tensor = None) -> Tensor:
    pre = add(ops.linear(v, params[f"lstm.w_v{g}"]), ops.linear(h, params[f"lstm.w_h{g}"]))
    if peep is not None:
        pre = add(pre, mul(peep, params[f"lstm.w_c{g}"]))
    return add(pre, params[f"lstm.b_{g}"])


def lstm_step(v: Tensor, h_prev: Tensor, c_prev: Tensor, params: ModelParams) -> LstmState:
    """One peephole LSTM update.

        i = sigmoid(W_vi v + W_hi h' + w_ci * c' + b_i)
        f = sigmoid(W_vf v + W_hf h' + w_cf * c' + b_f)
        c = f * c' + i * tanh(W_vc v + W_hc h' + b_c)
        o = sigmoid(W_vo v + W_ho h' + w_co * c + b_o)
        h = o * tanh(c)

    Raises:
        ContractError: If the state widths do not match the hidden width.
    """
    hid = params["lstm.b_i"].shape[0]
    if h_prev.shape != (v.shape[0], hid) or c_prev.shape != (v.shape[0], hid):
        raise ContractError("lstm_step", f"state {h_prev.shape}/{c_prev.shape} vs hidden width {hid}")
    i = ops.sigmoid(_gate(v, h_prev, params, "i", c_prev))
    f = ops.sigmoid(_gate(v, h_prev, params, "f", c_prev))
    g = ops.tanh(_gate(v, h_prev, params, "c"))
    c = add(mul(f, c_prev), mul(i, g))
    o = ops.sigmoid(_gate(v, h_prev, params, "o", c))
    h = mul(o, ops.tanh(c))
    return LstmState(o, h, c)


def lrcn_decoder(h: Tensor, params: ModelParams, config: LrcnConfig, mode: BnMode = BnMode.EVAL) -> Tensor:
    """Decodes LSTM states [N, hidden] into slice images [N, 1, d_h, d_h] in (0, 1)."""
    if h.ndim != 2 or h.shape[1] != config.hidden_dim:
        raise ContractError("lrcn_decoder", f"expected states [N, {config.hidden_dim}], got {h.shape}")
    s = config.seed_extent
    y = ops.linear(h, params["dec.fc.w"], params["dec.fc.b"])
    y = ops.reshape(y, (h.shape[0], config.seed_channels, s, s))
    y = conv_transpose_nd(y, params["dec.deconv1.w"], params["dec.deconv1.b"], STRIDE, PAD)
    y = batch_norm(y, params["dec.bn1.gamma"], params["dec.bn1.beta"], mode, params.bn_state("dec.bn1"),
                   config.bn_eps, layer="dec.bn1")
    y = ops.relu(y)
    y = conv_transpose_nd(y, params["dec.deconv2.w"], params["dec.deconv2.b"], STRIDE, PAD)
    return to_unit_interval(ops.tanh(y))


def lrcn_forward(volumes: np.ndarray, params: ModelParams, config: LrcnConfig,
                 mode: BnMode = BnMode.EVAL, state: LstmState = None,
                 steps: range = None) -> tuple[Tensor, LstmState]:
    """Runs the upsampler over the slice sequence of aligned volumes.

    Args:
        volumes: Array [N, d_l, d_l, d_l] indexed [n, x, y, z], treated as constant input.
        state: LSTM state carried in; zeros if omitted.
        steps: Step range to run; all d_h steps if omitted.

    Returns:
        (probabilities [N, len(steps), d_h, d_h], final LSTM state). Row t
        holds the image for x-index t of the high-resolution volume.
    """
    volumes = np.asarray(volumes)
    d = config.d_l
    if volumes.ndim != 4 or volumes.shape[1:] != (d, d, d):
        raise ContractError("lrcn_forward", f"expected volumes [N, {d}, {d}, {d}], got {volumes.shape}")
    dtype = params["lstm.b_i"].dtype
    n = volumes.shape[0]
    state = state or zero_state(n, config, dtype)
    steps = steps if steps is not None else range(config.d_h)
    images = []
    for t in steps:
        x = Tensor(thin_volumes(volumes, t, config.d_h, config.c).astype(dtype))
        v = lrcn_encoder(x, params, config, mode)
        state = lstm_step(v, state.h, state.c, params)
        img = lrcn_decoder(state.h, params, config, mode)
        images.append(ops.reshape(img, (n, config.d_h, config.d_h)))
    return ops.stack(images, axis=1), state
