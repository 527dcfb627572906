"""Volumetric encoder-decoder generator and its discriminator.

Parameter names:

    enc.conv{1,2,3}.w/.b   [C_out, C_in, 5, 5, 5] / [C_out]
    enc.bn{1,2,3}.gamma/.beta
    dec.deconv{1,2,3}.w/.b [C_in, C_out, 5, 5, 5] / [C_out]
    dec.bn{1,2}.gamma/.beta
    fc.w/.b                [1, latent_dim] / [1]       (discriminator only)
"""
import numpy as np

from vinp.enums import BnMode, Network
from vinp.errors import ContractError
from vinp.grad import ops
from vinp.grad.conv import conv_nd, conv_transpose_nd
from vinp.grad.norm import batch_norm
from vinp.grad.params import ModelParams
from vinp.grad.tensor import Tensor, scale, shift
from vinp.nets.config import KERNEL, PAD, STRIDE, EDGanConfig

INIT_STD = 0.02


def add_conv(params: ModelParams, rng: np.random.Generator, name: str, shape: tuple[int, ...], out_axis: int = 0):
    params.add(f"{name}.w", rng.normal(0.0, INIT_STD, size=shape).astype(np.float32))
    params.add(f"{name}.b", np.zeros(shape[out_axis], dtype=np.float32))


def add_bn(params: ModelParams, name: str, width: int, momentum: float):
    params.add(f"{name}.gamma", np.ones(width, dtype=np.float32))
    params.add(f"{name}.beta", np.zeros(width, dtype=np.float32))
    params.add_bn_state(name, momentum)


def add_linear(params: ModelParams, rng: np.random.Generator, name: str, n_out: int, n_in: int):
    params.add(f"{name}.w", rng.normal(0.0, INIT_STD, size=(n_out, n_in)).astype(np.float32))
    params.add(f"{name}.b", np.zeros(n_out, dtype=np.float32))


def add_encoder(params: ModelParams, rng: np.random.Generator, channels: tuple[int, ...], momentum: float,
                prefix: str = "enc"):
    c_in = 1
    k3 = (KERNEL,) * 3
    for i, c_out in enumerate(channels, start=1):
        add_conv(params, rng, f"{prefix}.conv{i}", (c_out, c_in) + k3)
        add_bn(params, f"{prefix}.bn{i}", c_out, momentum)
        c_in = c_out


def init_generator(config: EDGanConfig, seed: int) -> ModelParams:
    rng = np.random.default_rng(seed)
    params = ModelParams(Network.GENERATOR.value)
    add_encoder(params, rng, config.channels, config.bn_momentum)
    c0, c1, c2 = config.channels
    k3 = (KERNEL,) * 3
    add_conv(params, rng, "dec.deconv1", (c2, c1) + k3, out_axis=1)
    add_bn(params, "dec.bn1", c1, config.bn_momentum)
    add_conv(params, rng, "dec.deconv2", (c1, c0) + k3, out_axis=1)
    add_bn(params, "dec.bn2", c0, config.bn_momentum)
    add_conv(params, rng, "dec.deconv3", (c0, 1) + k3, out_axis=1)
    return params


def init_discriminator(config: EDGanConfig, seed: int) -> ModelParams:
    rng = np.random.default_rng(seed)
    params = ModelParams(Network.DISCRIMINATOR.value)
    add_encoder(params, rng, config.channels, config.bn_momentum)
    add_linear(params, rng, "fc", 1, config.latent_dim)
    return params


def conv_block(x: Tensor, params: ModelParams, conv: str, bn: str, mode: BnMode, eps: float) -> Tensor:
    y = conv_nd(x, params[f"{conv}.w"], params[f"{conv}.b"], STRIDE, PAD)
    y = batch_norm(y, params[f"{bn}.gamma"], params[f"{bn}.beta"], mode, params.bn_state(bn), eps, layer=bn)
    return ops.relu(y)


def encode_features(x: Tensor, params: ModelParams, mode: BnMode, eps: float, prefix: str = "enc") -> Tensor:
    for i in (1, 2, 3):
        x = conv_block(x, params, f"{prefix}.conv{i}", f"{prefix}.bn{i}", mode, eps)
    return x


def _check_volume(op: str, x: Tensor, d: int):
    if x.ndim != 5 or x.shape[1] != 1 or x.shape[2:] != (d, d, d):
        raise ContractError(op, f"expected input [N, 1, {d}, {d}, {d}], got {x.shape}")


def edgan_encoder(x: Tensor, params: ModelParams, config: EDGanConfig, mode: BnMode = BnMode.EVAL) -> Tensor:
    """Maps corrupted volumes [N, 1, d, d, d] to latent codes [N, latent_dim].

    Three conv(k5, s2) -> BN -> ReLU blocks; the last feature map is flattened
    as is, with no dense layer.
    """
    _check_volume("edgan_encoder", x, config.d_l)
    return ops.flatten(encode_features(x, params, mode, config.bn_eps))


def to_unit_interval(y: Tensor) -> Tensor:
    """(y + 1) / 2, mapping tanh outputs into (0, 1)."""
    return scale(shift(y, 1.0), 0.5)


def edgan_decoder(z: Tensor, params: ModelParams, config: EDGanConfig, mode: BnMode = BnMode.EVAL) -> Tensor:
    """Maps latent codes back to occupancy probabilities [N, 1, d, d, d].

    Raises:
        ContractError: If the code length differs from latent_dim.
    """
    if z.ndim != 2 or z.shape[1] != config.latent_dim:
        raise ContractError("edgan_decoder", f"expected codes [N, {config.latent_dim}], got {z.shape}")
    e = config.latent_extent
    y = ops.reshape(z, (z.shape[0], config.channels[2], e, e, e))
    for i in (1, 2):
        y = conv_transpose_nd(y, params[f"dec.deconv{i}.w"], params[f"dec.deconv{i}.b"], STRIDE, PAD)
        bn = f"dec.bn{i}"
        y = batch_norm(y, params[f"{bn}.gamma"], params[f"{bn}.beta"], mode, params.bn_state(bn),
                       config.bn_eps, layer=bn)
        y = ops.relu(y)
    y = conv_transpose_nd(y, params["dec.deconv3.w"], params["dec.deconv3.b"], STRIDE, PAD)
    return to_unit_interval(ops.tanh(y))


def generator(x: Tensor, params: ModelParams, config: EDGanConfig, mode: BnMode = BnMode.EVAL) -> Tensor:
    return edgan_decoder(edgan_encoder(x, params, config, mode), params, config, mode)


def discriminator(x: Tensor, params: ModelParams, config: EDGanConfig, mode: BnMode = BnMode.EVAL) -> Tensor:
    """Probability [N] that each volume is a real shape."""
    _check_volume("discriminator", x, config.d_l)
    h = ops.flatten(encode_features(x, params, mode, config.bn_eps))
    logit = ops.linear(h, params["fc.w"], params["fc.b"])
    return ops.reshape(ops.sigmoid(logit), (x.shape[0],))
