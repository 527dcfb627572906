"""The three-phase training schedule plus the LRCN-only ablation.

    1a  encoder-decoder alone on reconstruction
    1b  encoder-decoder against the discriminator, gated
    2   LRCN as a pure upsampler on clean low-resolution input
    3   joint fine-tuning on corrupted input
    ablation  a copy of the stage-2 LRCN trained on corrupted input directly

All stages share one Adam configuration (beta1 0.5) and carry moment state
over between phases of the same network.
"""
import logging
import math
from typing import Iterator, Sequence

import numpy as np

from vinp.data.dataset import Manifest, Sample, load_arrays
from vinp.enums import BnMode, Network, Stage
from vinp.errors import DatasetError, NumericError
from vinp.grad.adam import adam_step
from vinp.grad.params import ModelParams
from vinp.grad.tensor import Tensor, backward, get_tape
from vinp.nets.edgan import discriminator, generator
from vinp.nets.hybrid import HybridModel
from vinp.nets.lrcn import lrcn_forward
from vinp.train.config import StageConfig, TrainConfig
from vinp.train.log import TrainLog
from vinp.train.losses import (
    DiscriminatorGate,
    discriminator_objective,
    generator_objective,
    loss_edgan,
    loss_gan,
    loss_hybrid,
    loss_l1,
    loss_recon,
)

STAGE_ORDER = (Stage.STAGE_1A, Stage.STAGE_1B, Stage.STAGE_2, Stage.STAGE_3)


def _training_samples(dataset: Manifest | Sequence[Sample]) -> list[Sample]:
    samples = dataset.train if isinstance(dataset, Manifest) else list(dataset)
    if not samples:
        raise DatasetError("no training samples")
    return samples


def batches(n: int, batch: int, seed: int, stage: Stage, epoch: int) -> Iterator[np.ndarray]:
    """Shuffled index batches, reproducible from (seed, stage, epoch)."""
    rng = np.random.default_rng([seed, list(Stage).index(Stage(stage)), epoch])
    order = rng.permutation(n)
    for i in range(0, n, batch):
        yield order[i:i + batch]


def _check_finite(stage: Stage, step: int, losses: dict[str, float]) -> None:
    for name, value in losses.items():
        if not math.isfinite(value):
            logging.error(f"vinp: stage {stage.value} step {step}: {name}={value}, aborting")
            raise NumericError(stage.value, step, name, value)


def _adam(params: ModelParams, config: TrainConfig, lr: float, grads=None) -> None:
    adam_step(params, grads, lr=lr, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)


def _dtype(params: ModelParams):
    return next(iter(params.tensors.values())).dtype


def _volumes(arr: np.ndarray, dtype) -> Tensor:
    return Tensor(arr[:, np.newaxis].astype(dtype))


def train_stage1a(dataset, model: HybridModel, config: TrainConfig, log: TrainLog = None) -> tuple[HybridModel, TrainLog]:
    """Encoder-decoder alone, minimizing the negated reconstruction likelihood."""
    log = TrainLog() if log is None else log
    stage = config.stage(Stage.STAGE_1A)
    x_all, low_all, _ = load_arrays(_training_samples(dataset), corrupted=True)
    gen = model.generator
    dtype = _dtype(gen)
    for epoch in range(stage.epochs):
        for idx in batches(len(x_all), stage.batch, config.seed, stage.stage, epoch):
            gen.zero_grad()
            pred = generator(_volumes(x_all[idx], dtype), gen, model.edgan, BnMode.TRAIN)
            recon = loss_recon(pred, low_all[idx][:, np.newaxis].astype(dtype))
            objective = -recon
            losses = {"recon": recon.item(), "objective": objective.item()}
            _check_finite(stage.stage, log.next_step, losses)
            backward(objective)
            _adam(gen, config, stage.lr)
            log.add(stage.stage.value, epoch, losses)
        logging.info(f"vinp: stage 1a epoch {epoch + 1}/{stage.epochs} recon={log.records[-1].losses['recon']:.6f}")
    return model, log


def _adversarial_step(model: HybridModel, config: TrainConfig, stage: StageConfig, gate: DiscriminatorGate,
                      x: np.ndarray, low: np.ndarray, high: np.ndarray = None,
                      step: int = 0) -> tuple[dict[str, float], float, bool, float]:
    gen, disc = model.generator, model.discriminator
    dtype = _dtype(gen)
    gen.zero_grad()
    disc.zero_grad()
    model.lrcn_params.zero_grad()

    # a skipped step leaves every part of D untouched, running statistics included
    update_d = gate.allows_update()
    bn_before = None if update_d else disc.bn_snapshot()

    target = low[:, np.newaxis].astype(dtype)
    fake = generator(_volumes(x, dtype), gen, model.edgan, BnMode.TRAIN)
    d_fake = discriminator(fake, disc, model.edgan, BnMode.TRAIN)
    d_real = discriminator(Tensor(target), disc, model.edgan, BnMode.TRAIN)
    recon = loss_recon(fake, target)
    gan = loss_gan(d_real, d_fake)
    g_objective = generator_objective(d_fake, recon, config.alpha1, config.alpha2)

    losses = {"gan": gan.item(), "recon": recon.item()}
    losses["edgan"] = loss_edgan(losses["gan"], losses["recon"], config.alpha1, config.alpha2)
    objective = g_objective
    if high is not None:
        # binarization cuts the graph, so the upsampler's loss cannot reach the generator
        binary = (fake.data[:, 0] > model.threshold).astype(dtype)
        pred, _ = lrcn_forward(binary, model.lrcn_params, model.lrcn, BnMode.TRAIN)
        l1 = loss_l1(pred, high.astype(dtype))
        losses["l1"] = l1.item()
        losses["hybrid"] = loss_hybrid(losses["edgan"], losses["l1"], config.alpha3, config.alpha4)
        objective = loss_hybrid(g_objective, l1, config.alpha3, config.alpha4)
    losses["objective"] = objective.item()
    _check_finite(stage.stage, step, losses)

    backward(objective, keep_tape=True)
    g_grads = gen.grads()
    u_grads = model.lrcn_params.grads()
    gen.zero_grad()
    disc.zero_grad()
    if update_d:
        backward(discriminator_objective(gan))
    else:
        get_tape().clear()
        disc.restore_bn(bn_before)

    before = disc.arrays()
    _adam(gen, config, stage.lr, g_grads)
    if high is not None:
        _adam(model.lrcn_params, config, stage.lr, u_grads)
    if update_d:
        _adam(disc, config, stage.lr_d)
    decision = gate.observe(d_real, d_fake)
    return losses, decision.accuracy, update_d, disc.max_delta(before)


def train_stage1b(dataset, model: HybridModel, config: TrainConfig, log: TrainLog = None) -> tuple[HybridModel, TrainLog]:
    """Adversarial training of the encoder-decoder against the gated discriminator."""
    log = TrainLog() if log is None else log
    stage = config.stage(Stage.STAGE_1B)
    x_all, low_all, _ = load_arrays(_training_samples(dataset), corrupted=True)
    gate = DiscriminatorGate(config.gate_threshold)
    for epoch in range(stage.epochs):
        skipped = 0
        for idx in batches(len(x_all), stage.batch, config.seed, stage.stage, epoch):
            losses, acc, update_d, d_delta = _adversarial_step(model, config, stage, gate, x_all[idx], low_all[idx],
                                                               step=log.next_step)
            skipped += not update_d
            log.add(stage.stage.value, epoch, losses, acc, update_d, d_delta)
        logging.info(f"vinp: stage 1b epoch {epoch + 1}/{stage.epochs} edgan={log.records[-1].losses['edgan']:.6f} "
                     f"gate skipped {skipped} updates")
    return model, log


def train_stage1(dataset, model: HybridModel, config: TrainConfig, log: TrainLog = None) -> tuple[HybridModel, TrainLog]:
    model, log = train_stage1a(dataset, model, config, log)
    return train_stage1b(dataset, model, config, log)


def _train_upsampler(params: ModelParams, model: HybridModel, config: TrainConfig, stage: StageConfig,
                     inputs: np.ndarray, highs: np.ndarray, log: TrainLog) -> None:
    dtype = _dtype(params)
    for epoch in range(stage.epochs):
        for idx in batches(len(inputs), stage.batch, config.seed, stage.stage, epoch):
            params.zero_grad()
            pred, _ = lrcn_forward(inputs[idx].astype(dtype), params, model.lrcn, BnMode.TRAIN)
            l1 = loss_l1(pred, highs[idx].astype(dtype))
            losses = {"l1": l1.item()}
            _check_finite(stage.stage, log.next_step, losses)
            backward(l1)
            _adam(params, config, stage.lr)
            log.add(stage.stage.value, epoch, losses)
        logging.info(f"vinp: stage {stage.stage.value} epoch {epoch + 1}/{stage.epochs} "
                     f"l1={log.records[-1].losses['l1']:.6f}")


def train_stage2(dataset, model: HybridModel, config: TrainConfig, log: TrainLog = None) -> tuple[HybridModel, TrainLog]:
    """LRCN alone, clean low-resolution input against high-resolution truth, on L1."""
    log = TrainLog() if log is None else log
    _, low_all, high_all = load_arrays(_training_samples(dataset), corrupted=False)
    _train_upsampler(model.lrcn_params, model, config, config.stage(Stage.STAGE_2), low_all, high_all, log)
    return model, log


def train_stage3(dataset, model: HybridModel, config: TrainConfig, log: TrainLog = None) -> tuple[HybridModel, TrainLog]:
    """Joint fine-tuning of the whole pipeline on corrupted input."""
    log = TrainLog() if log is None else log
    stage = config.stage(Stage.STAGE_3)
    x_all, low_all, high_all = load_arrays(_training_samples(dataset), corrupted=True)
    gate = DiscriminatorGate(config.gate_threshold)
    for epoch in range(stage.epochs):
        for idx in batches(len(x_all), stage.batch, config.seed, stage.stage, epoch):
            losses, acc, update_d, d_delta = _adversarial_step(model, config, stage, gate, x_all[idx], low_all[idx],
                                                               high_all[idx], step=log.next_step)
            log.add(stage.stage.value, epoch, losses, acc, update_d, d_delta)
        logging.info(f"vinp: stage 3 epoch {epoch + 1}/{stage.epochs} hybrid={log.records[-1].losses['hybrid']:.6f}")
    return model, log


def train_lrcn_ablation(dataset, model: HybridModel, config: TrainConfig,
                        log: TrainLog = None) -> tuple[HybridModel, TrainLog]:
    """Copies the stage-2 LRCN and trains it on corrupted low-resolution input directly."""
    log = TrainLog() if log is None else log
    x_all, _, high_all = load_arrays(_training_samples(dataset), corrupted=True)
    params = model.lrcn_params.copy()
    params.network = Network.LRCN_ONLY.value
    _train_upsampler(params, model, config, config.stage(Stage.ABLATION), x_all, high_all, log)
    model.lrcn_only = params
    return model, log


STAGES = {
    Stage.STAGE_1A: train_stage1a,
    Stage.STAGE_1B: train_stage1b,
    Stage.STAGE_2: train_stage2,
    Stage.STAGE_3: train_stage3,
    Stage.ABLATION: train_lrcn_ablation,
}


def run_schedule(dataset, model: HybridModel, config: TrainConfig,
                 stages: Sequence[Stage] = STAGE_ORDER, log: TrainLog = None) -> tuple[HybridModel, TrainLog]:
    log = TrainLog() if log is None else log
    for stage in stages:
        logging.info(f"vinp: stage {Stage(stage).value} starting")
        model, log = STAGES[Stage(stage)](dataset, model, config, log)
    return model, log
