import dataclasses

import numpy as np
import pytest

from vinp.data.dataset import build_dataset, load_arrays
from vinp.enums import Network, Stage
from vinp.errors import DatasetError, NumericError
from vinp.nets.checkpoint import encode_checkpoint
from vinp.nets.hybrid import HybridModel
from vinp.train.log import TrainLog
from vinp.train.losses import DiscriminatorGate
from vinp.train.stages import (
    STAGE_ORDER,
    _adversarial_step,
    batches,
    run_schedule,
    train_lrcn_ablation,
    train_stage1,
    train_stage1a,
    train_stage1b,
    train_stage2,
    train_stage3,
)


def digests(model):
    return {net: params.digest() for net, params in model.networks().items()}


def test_batches_cover_every_index_once():
    seen = np.concatenate(list(batches(10, 3, 0, Stage.STAGE_2, 4)))
    assert sorted(seen.tolist()) == list(range(10))
    again = np.concatenate(list(batches(10, 3, 0, Stage.STAGE_2, 4)))
    np.testing.assert_array_equal(seen, again)
    assert [len(b) for b in batches(10, 3, 0, Stage.STAGE_2, 4)] == [3, 3, 3, 1]


def test_stage1a_touches_only_the_generator(tiny_dataset, tiny_model, tiny_config):
    before = digests(tiny_model)
    model, log = train_stage1a(tiny_dataset, tiny_model, tiny_config)
    after = digests(model)
    assert after[Network.GENERATOR] != before[Network.GENERATOR]
    assert after[Network.DISCRIMINATOR] == before[Network.DISCRIMINATOR]
    assert after[Network.LRCN] == before[Network.LRCN]
    assert len(log) == 4
    assert all(r.stage == "1a" and r.losses["recon"] <= 0 for r in log.records)
    assert all(r.gate_update is None for r in log.records)


def test_stage1b_gate_follows_previous_batch(tiny_dataset, tiny_model, tiny_config):
    config = dataclasses.replace(tiny_config, stage1b_epochs=2)
    lrcn_before = tiny_model.lrcn_params.digest()
    model, log = train_stage1b(tiny_dataset, tiny_model, config)
    records = log.for_stage("1b")
    assert len(records) == 8
    assert records[0].gate_update is True
    for prev, rec in zip(records, records[1:]):
        assert rec.gate_update == (prev.accuracy <= config.gate_threshold)
    for rec in records:
        assert 0.0 <= rec.accuracy <= 1.0
        assert rec.losses["gan"] <= 0
        assert rec.losses["edgan"] == pytest.approx(
            config.alpha1 * rec.losses["gan"] + config.alpha2 * rec.losses["recon"])
        if not rec.gate_update:
            assert rec.d_delta == 0.0
    assert model.lrcn_params.digest() == lrcn_before


def test_stage1b_discriminator_moves_when_updating(tiny_dataset, tiny_model, tiny_config):
    before = tiny_model.discriminator.digest()
    model, log = train_stage1b(tiny_dataset, tiny_model, tiny_config)
    assert log.records[0].d_delta > 0
    assert model.discriminator.digest() != before


def test_stage1_runs_both_phases(tiny_dataset, tiny_model, tiny_config):
    _, log = train_stage1(tiny_dataset, tiny_model, tiny_config)
    assert [r.stage for r in log.records] == ["1a"] * 4 + ["1b"] * 4
    assert [r.step for r in log.records] == list(range(8))


def test_stage2_touches_only_the_upsampler(tiny_dataset, tiny_model, tiny_config):
    before = digests(tiny_model)
    model, log = train_stage2(tiny_dataset, tiny_model, tiny_config)
    after = digests(model)
    assert after[Network.LRCN] != before[Network.LRCN]
    assert after[Network.GENERATOR] == before[Network.GENERATOR]
    assert after[Network.DISCRIMINATOR] == before[Network.DISCRIMINATOR]
    assert all(0 <= v <= 1 for v in log.series("l1"))


def test_stage3_updates_generator_and_upsampler(tiny_dataset, tiny_model, tiny_config):
    before = digests(tiny_model)
    model, log = train_stage3(tiny_dataset, tiny_model, tiny_config)
    after = digests(model)
    assert after[Network.GENERATOR] != before[Network.GENERATOR]
    assert after[Network.LRCN] != before[Network.LRCN]
    for rec in log.records:
        assert rec.losses["hybrid"] == pytest.approx(
            tiny_config.alpha3 * rec.losses["edgan"] + tiny_config.alpha4 * rec.losses["l1"])
        assert rec.accuracy is not None


def test_ablation_copies_the_upsampler(tiny_dataset, tiny_model, tiny_config):
    before = tiny_model.lrcn_params.digest()
    model, log = train_lrcn_ablation(tiny_dataset, tiny_model, tiny_config)
    assert model.lrcn_params.digest() == before
    assert model.lrcn_only is not None
    assert model.lrcn_only.network == "lrcn_only"
    assert model.lrcn_only.digest() != before
    assert {r.stage for r in log.records} == {"ablation"}


def test_training_is_deterministic(tiny_dataset, tiny_config):
    runs = []
    for _ in range(2):
        model = HybridModel.init(tiny_config.edgan_config(), tiny_config.lrcn_config(), seed=3)
        model, log = run_schedule(tiny_dataset, model, tiny_config, [Stage.STAGE_1A, Stage.STAGE_1B])
        runs.append((digests(model), [r.losses for r in log.records]))
    assert runs[0] == runs[1]


def test_run_schedule_numbers_steps_across_stages(tiny_dataset, tiny_model, tiny_config):
    model, log = run_schedule(tiny_dataset, tiny_model, tiny_config, list(STAGE_ORDER) + [Stage.ABLATION])
    steps = [r.step for r in log.records]
    assert steps == sorted(steps) and len(set(steps)) == len(steps)
    assert [s for i, s in enumerate(r.stage for r in log.records) if i % 4 == 0] == ["1a", "1b", "2", "3", "ablation"]
    assert model.lrcn_only is not None


def test_non_finite_loss_aborts(tiny_dataset, tiny_model, tiny_config):
    tiny_model.generator["dec.deconv3.b"].data[:] = np.nan
    with pytest.raises(NumericError) as e:
        train_stage1a(tiny_dataset, tiny_model, tiny_config)
    assert e.value.stage == "1a"
    assert e.value.step == 0


def test_empty_training_split(tiny_model, tiny_config):
    with pytest.raises(DatasetError):
        train_stage2([], tiny_model, tiny_config, TrainLog())


def test_float64_training(tiny_dataset, tiny_config):
    config = dataclasses.replace(tiny_config, precision="float64")
    model = HybridModel.init(config.edgan_config(), config.lrcn_config(), seed=0, dtype=config.dtype)
    model, _ = train_stage1a(tiny_dataset, model, config)
    assert model.generator["enc.conv1.w"].dtype == np.float64


@pytest.mark.slow
def test_stage1a_overfits_one_sample(tmp_path, tiny_config):
    data = build_dataset(tmp_path, 5, d_l=16, d_h=32)
    config = dataclasses.replace(tiny_config, channels=(8, 16, 32), stage1a_epochs=500, stage1a_batch=1)
    model = HybridModel.init(config.edgan_config(), config.lrcn_config(), seed=1)
    _, log = train_stage1a(data.train[:1], model, config)
    cross_entropy = [-r for r in log.series("recon")]
    assert len(cross_entropy) == 500
    assert min(cross_entropy) < 0.05


@pytest.mark.slow
def test_stage2_overfits_one_sample(tmp_path, tiny_config):
    data = build_dataset(tmp_path, 5, d_l=16, d_h=32)
    config = dataclasses.replace(tiny_config, lrcn_channels=(8, 16, 32), feature_dim=32, hidden_dim=32,
                                 seed_channels=8, mid_channels=4, stage2_epochs=1000, stage2_batch=1)
    model = HybridModel.init(config.edgan_config(), config.lrcn_config(), seed=1)
    _, log = train_stage2(data.train[:1], model, config)
    l1 = log.series("l1")
    assert len(l1) == 1000
    assert min(l1) < 0.02


def test_skipped_step_leaves_discriminator_bytes_unchanged(tiny_dataset, tiny_model, tiny_config):
    config = dataclasses.replace(tiny_config, gate_threshold=0.01)
    stage = config.stage(Stage.STAGE_1B)
    x_all, low_all, _ = load_arrays(tiny_dataset.train)
    gate = DiscriminatorGate(config.gate_threshold)
    skipped = 0
    for epoch in range(3):
        for idx in batches(len(x_all), stage.batch, config.seed, stage.stage, epoch):
            will_update = gate.allows_update()
            before = encode_checkpoint(tiny_model.discriminator)
            _, _, update_d, _ = _adversarial_step(tiny_model, config, stage, gate, x_all[idx], low_all[idx])
            assert update_d == will_update
            if not update_d:
                skipped += 1
                assert encode_checkpoint(tiny_model.discriminator) == before
    assert skipped > 0
