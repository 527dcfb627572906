import numpy as np
import pytest

from vinp.enums import BnMode, Network
from vinp.errors import ContractError, StatsUninitializedError
from vinp.grad import ops
from vinp.grad.check import grad_check
from vinp.grad.conv import conv_nd
from vinp.grad.norm import BatchNormState, batch_norm
from vinp.grad.tensor import Tensor, no_grad
from vinp.nets.config import EDGanConfig, LrcnConfig, arch_table, configs_from_table, desk_configs, full_configs
from vinp.nets.edgan import discriminator, edgan_decoder, edgan_encoder, generator, init_discriminator, init_generator
from vinp.nets.hybrid import count_params, hybrid_forward, init_params, upsample_only
from vinp.nets.lrcn import init_lrcn, lrcn_encoder, lrcn_forward, lstm_step, zero_state
from vinp.train.losses import generator_objective, loss_recon
from vinp.vox.grid import VoxelGrid

EDGAN = EDGanConfig(16, (2, 3, 4))
LRCN = LrcnConfig(16, 32, 5, (2, 2, 3), 4, 3, 2, 2)


def volumes(n, seed=0):
    return (np.random.default_rng(seed).random((n, 16, 16, 16)) < 0.4).astype(np.float32)


def sigmoid(x):
    return 1 / (1 + np.exp(-x))


def test_latent_and_encoded_dims():
    assert EDGAN.latent_dim == 2 ** 3 * 4
    assert full_configs()[0].latent_dim == 4 ** 3 * 256
    desk_edgan, desk_lrcn = desk_configs()
    assert desk_edgan.latent_dim == 8 * 32
    # thickness 5 -> 3 -> 2 -> 1
    assert LRCN.encoded_dim == 2 * 2 * 1 * 3
    assert desk_lrcn.factor == 4 and desk_lrcn.seed_extent == 16


@pytest.mark.parametrize("kwargs", [{"d_l": 12}, {"channels": (2, 2)}, {"channels": (2, 0, 2)}])
def test_edgan_config_validation(kwargs):
    with pytest.raises(ContractError):
        EDGanConfig(**kwargs)


@pytest.mark.parametrize("kwargs", [{"d_h": 40}, {"d_h": 24, "d_l": 8, "c": 4}, {"feature_dim": 0}])
def test_lrcn_config_validation(kwargs):
    with pytest.raises(ContractError):
        LrcnConfig(**kwargs)


def test_arch_table_round_trip():
    assert configs_from_table(arch_table(EDGAN, LRCN)) == (EDGAN, LRCN)
    with pytest.raises(ContractError):
        configs_from_table({"d_l": "16"})


def test_parameter_counts():
    gen = init_generator(EDGAN, 0)
    enc = (2 * 125 + 2 + 4) + (3 * 2 * 125 + 3 + 6) + (4 * 3 * 125 + 4 + 8)
    dec = (4 * 3 * 125 + 3 + 6) + (3 * 2 * 125 + 2 + 4) + (2 * 125 + 1)
    assert gen.count() == enc + dec
    counts = count_params(EDGAN, LRCN)
    assert counts["generator"] == enc + dec
    assert counts["discriminator"] == enc + EDGAN.latent_dim + 1
    assert counts["total"] == counts["generator"] + counts["discriminator"] + counts["lrcn"]


def test_initialization_is_seeded():
    a = init_params(EDGAN, 3)
    b = init_params(EDGAN, 3)
    assert a.digest() == b.digest()
    assert init_params(EDGAN, 4).digest() != a.digest()
    assert init_params(EDGAN, 3, Network.DISCRIMINATOR).network == "discriminator"
    lrcn = init_params(LRCN, 3)
    assert "lstm.w_ci" in lrcn and "lstm.w_cc" not in lrcn
    np.testing.assert_array_equal(lrcn["dec.bn1.gamma"].data, 1.0)
    np.testing.assert_array_equal(lrcn["lstm.b_f"].data, 0.0)
    assert abs(float(np.std(a["enc.conv3.w"].data)) - 0.02) < 0.005


def test_generator_and_discriminator_shapes():
    gen = init_params(EDGAN, 0)
    disc = init_params(EDGAN, 0, Network.DISCRIMINATOR)
    x = Tensor(volumes(3)[:, np.newaxis])
    z = edgan_encoder(x, gen, EDGAN, BnMode.TRAIN)
    assert z.shape == (3, EDGAN.latent_dim)
    y = edgan_decoder(z, gen, EDGAN, BnMode.TRAIN)
    assert y.shape == (3, 1, 16, 16, 16)
    assert np.all((y.data > 0) & (y.data < 1))
    p = discriminator(x, disc, EDGAN, BnMode.TRAIN)
    assert p.shape == (3,)
    assert np.all((p.data > 0) & (p.data < 1))


def test_zero_output_layers_give_one_half():
    gen = init_params(EDGAN, 0)
    gen["dec.deconv3.w"].data[:] = 0
    disc = init_params(EDGAN, 0, Network.DISCRIMINATOR)
    disc["fc.w"].data[:] = 0
    x = Tensor(volumes(2)[:, np.newaxis])
    np.testing.assert_array_equal(generator(x, gen, EDGAN, BnMode.TRAIN).data, 0.5)
    np.testing.assert_array_equal(discriminator(x, disc, EDGAN, BnMode.TRAIN).data, 0.5)


def test_shape_contracts():
    gen = init_params(EDGAN, 0)
    with pytest.raises(ContractError):
        edgan_encoder(Tensor(np.zeros((1, 1, 8, 8, 8))), gen, EDGAN, BnMode.TRAIN)
    with pytest.raises(ContractError):
        edgan_decoder(Tensor(np.zeros((1, 5))), gen, EDGAN, BnMode.TRAIN)


def test_eval_before_training_raises():
    gen = init_params(EDGAN, 0)
    with pytest.raises(StatsUninitializedError):
        generator(Tensor(volumes(1)[:, np.newaxis]), gen, EDGAN, BnMode.EVAL)


def test_lstm_step_matches_reference():
    params = init_lrcn(LRCN, 0).astype(np.float64)
    rng = np.random.default_rng(5)
    for name in params:
        if name.startswith("lstm."):
            params[name].data = rng.normal(0, 0.5, size=params[name].shape)
    v = rng.normal(size=(2, 4))
    h0 = rng.normal(size=(2, 3))
    c0 = rng.normal(size=(2, 3))
    state = lstm_step(Tensor(v), Tensor(h0), Tensor(c0), params)

    def w(name):
        return params[f"lstm.{name}"].data

    i = sigmoid(v @ w("w_vi").T + h0 @ w("w_hi").T + w("w_ci") * c0 + w("b_i"))
    f = sigmoid(v @ w("w_vf").T + h0 @ w("w_hf").T + w("w_cf") * c0 + w("b_f"))
    c = f * c0 + i * np.tanh(v @ w("w_vc").T + h0 @ w("w_hc").T + w("b_c"))
    o = sigmoid(v @ w("w_vo").T + h0 @ w("w_ho").T + w("w_co") * c + w("b_o"))
    np.testing.assert_allclose(state.c.data, c, rtol=1e-10)
    np.testing.assert_allclose(state.o.data, o, rtol=1e-10)
    np.testing.assert_allclose(state.h.data, o * np.tanh(c), rtol=1e-10)
    with pytest.raises(ContractError):
        lstm_step(Tensor(v), Tensor(np.zeros((2, 5))), Tensor(c0), params)


def test_lstm_gradients():
    params = init_lrcn(LRCN, 0).astype(np.float64)
    rng = np.random.default_rng(6)
    for name in params:
        if name.startswith("lstm."):
            params[name].data = rng.normal(0, 0.5, size=params[name].shape)
    v = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
    h0 = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    c0 = Tensor(rng.normal(size=(2, 3)), requires_grad=True)

    def build():
        s1 = lstm_step(v, h0, c0, params)
        s2 = lstm_step(v, s1.h, s1.c, params)
        return ops.sum(s2.h * s2.c)

    wrt = {"v": v, "h0": h0, "c0": c0, "w_co": params["lstm.w_co"], "w_hf": params["lstm.w_hf"]}
    report = grad_check(build, wrt, 1e-4, h=1e-6)
    assert report.passed(), report.per_input


def test_lrcn_encoder_zero_input():
    params = init_lrcn(LRCN, 0)
    v = lrcn_encoder(Tensor(np.zeros((2, 1, 16, 16, 5), dtype=np.float32)), params, LRCN, BnMode.TRAIN)
    assert v.shape == (2, 4)
    np.testing.assert_array_equal(v.data, 0.0)


def test_lrcn_forward_shapes_and_state_carry():
    params = init_lrcn(LRCN, 0).astype(np.float64)
    vols = volumes(2).astype(np.float64)
    with no_grad():
        full, final = lrcn_forward(vols, params, LRCN, BnMode.TRAIN, steps=range(4))
        head, mid = lrcn_forward(vols, params, LRCN, BnMode.TRAIN, steps=range(2))
        tail, end = lrcn_forward(vols, params, LRCN, BnMode.TRAIN, state=mid, steps=range(2, 4))
    assert full.shape == (2, 4, 32, 32)
    np.testing.assert_allclose(np.concatenate([head.data, tail.data], axis=1), full.data, rtol=1e-12)
    np.testing.assert_allclose(end.h.data, final.h.data, rtol=1e-12)
    assert zero_state(2, LRCN).h.shape == (2, 3)


def test_hybrid_forward(warm_model):
    grid = VoxelGrid(16, volumes(1)[0] > 0)
    out = hybrid_forward(grid, warm_model)
    assert out.lowres.shape == (16, 16, 16)
    assert out.highres.shape == (32, 32, 32)
    assert out.z.shape == (warm_model.edgan.latent_dim,)
    assert np.all((out.highres > 0) & (out.highres < 1))
    again = hybrid_forward(grid, warm_model)
    np.testing.assert_array_equal(again.highres, out.highres)
    assert upsample_only(grid, warm_model).shape == (32, 32, 32)
    with pytest.raises(ContractError):
        hybrid_forward(VoxelGrid.empty(8), warm_model)


def test_conv_bn_relu_linear_gradients():
    rng = np.random.default_rng(4)
    x = Tensor(rng.normal(size=(3, 1, 6, 6, 6)), requires_grad=True)
    w = Tensor(rng.normal(0, 0.3, size=(2, 1, 5, 5, 5)), requires_grad=True)
    b = Tensor(rng.normal(size=2), requires_grad=True)
    gamma = Tensor(rng.uniform(0.5, 1.5, size=2), requires_grad=True)
    beta = Tensor(rng.normal(size=2), requires_grad=True)
    fc_w = Tensor(rng.normal(size=(1, 2 * 3 ** 3)), requires_grad=True)
    fc_b = Tensor(rng.normal(size=1), requires_grad=True)

    def build():
        y = ops.relu(batch_norm(conv_nd(x, w, b), gamma, beta, BnMode.TRAIN, BatchNormState()))
        return ops.sum(ops.sigmoid(ops.linear(ops.flatten(y), fc_w, fc_b)))

    wrt = {"x": x, "w": w, "b": b, "gamma": gamma, "beta": beta, "fc_w": fc_w, "fc_b": fc_b}
    report = grad_check(build, wrt, 1e-4, h=1e-6, sample=20)
    assert report.passed(), report.per_input


def test_generator_objective_gradients():
    gen = init_generator(EDGAN, 0).astype(np.float64)
    disc = init_discriminator(EDGAN, 1).astype(np.float64)
    x = Tensor(volumes(2, seed=2).astype(np.float64)[:, np.newaxis])
    target = volumes(2, seed=3).astype(np.float64)[:, np.newaxis]

    def build():
        fake = generator(x, gen, EDGAN, BnMode.TRAIN)
        d_fake = discriminator(fake, disc, EDGAN, BnMode.TRAIN)
        return generator_objective(d_fake, loss_recon(fake, target), 0.5, 0.5)

    wrt = {"enc.conv1.w": gen["enc.conv1.w"], "dec.bn1.gamma": gen["dec.bn1.gamma"],
           "dec.deconv3.w": gen["dec.deconv3.w"], "disc.fc.w": disc["fc.w"]}
    report = grad_check(build, wrt, 1e-3, h=1e-6, sample=8)
    assert report.passed(), report.per_input


def test_discriminator_input_gradients():
    disc = init_discriminator(EDGAN, 1).astype(np.float64)
    x = Tensor(np.random.default_rng(5).random((2, 1, 16, 16, 16)), requires_grad=True)
    report = grad_check(lambda: ops.sum(discriminator(x, disc, EDGAN, BnMode.TRAIN)), {"x": x},
                        1e-3, h=1e-6, sample=20)
    assert report.passed(), report.per_input
