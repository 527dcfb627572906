"""Training losses and the discriminator gate.

Adversarial and reconstruction losses are likelihoods (values <= 0, higher is
better) and are logged that way; the objectives handed to `backward` are the
quantities each network minimizes:

    discriminator:  -L_gan
    generator:      alpha1 * mean(log(1 - D(G(x')))) - alpha2 * L_recon
    joint:          alpha3 * generator objective + alpha4 * L1
"""
from dataclasses import dataclass
from typing import Union

import numpy as np

from vinp.errors import ContractError
from vinp.grad import ops
from vinp.grad.tensor import Tensor, as_tensor

CLAMP = 1e-7

Scalar = Union[Tensor, float]


def _probabilities(op: str, x: Tensor) -> Tensor:
    x = as_tensor(x)
    # NaN passes through; the stage loops report it as a NumericError
    if x.size and (np.any(x.data < 0) or np.any(x.data > 1)):
        raise ContractError(op, f"probabilities outside [0, 1]: min {x.data.min()}, max {x.data.max()}")
    return ops.clamp(x, CLAMP, 1 - CLAMP)


def _same_shape(op: str, a: Tensor, b) -> None:
    if tuple(a.shape) != tuple(np.shape(b.data if isinstance(b, Tensor) else b)):
        raise ContractError(op, f"shape mismatch {a.shape} vs {np.shape(b.data if isinstance(b, Tensor) else b)}")


def log_one_minus(p: Tensor) -> Tensor:
    return ops.log(1.0 - p)


def loss_gan(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """mean(log D(x) + log(1 - D(G(x')))) over the batch, probabilities clamped to [1e-7, 1 - 1e-7].

    Raises:
        ContractError: For values outside [0, 1] or batches of different size.
    """
    real = _probabilities("loss_gan", d_real)
    fake = _probabilities("loss_gan", d_fake)
    _same_shape("loss_gan", real, fake)
    return ops.mean(ops.log(real) + log_one_minus(fake))


def adversarial_term(d_fake: Tensor) -> Tensor:
    """mean(log(1 - D(G(x')))), the part of L_gan the generator descends."""
    return ops.mean(log_one_minus(_probabilities("adversarial_term", d_fake)))


def loss_recon(pred: Tensor, target) -> Tensor:
    """Voxel-averaged log-likelihood: mean(x log p + (1 - x) log(1 - p)).

    Raises:
        ContractError: If shapes differ or predictions leave [0, 1].
    """
    p = _probabilities("loss_recon", pred)
    _same_shape("loss_recon", p, target)
    t = as_tensor(target, like=p)
    return ops.mean(t * ops.log(p) + (1.0 - t) * log_one_minus(p))


def loss_edgan(gan: Scalar, recon: Scalar, alpha1: float, alpha2: float) -> Scalar:
    return gan * alpha1 + recon * alpha2


def loss_l1(pred: Tensor, target) -> Tensor:
    pred = as_tensor(pred)
    _same_shape("loss_l1", pred, target)
    return ops.mean(ops.abs(pred - as_tensor(target, like=pred)))


def loss_hybrid(l_edgan: Scalar, l_lrcn: Scalar, alpha3: float, alpha4: float) -> Scalar:
    return l_edgan * alpha3 + l_lrcn * alpha4


def generator_objective(d_fake: Tensor, recon: Tensor, alpha1: float, alpha2: float) -> Tensor:
    return adversarial_term(d_fake) * alpha1 - recon * alpha2


def discriminator_objective(gan: Tensor) -> Tensor:
    return -gan


@dataclass(frozen=True)
class GateDecision:
    accuracy: float
    update: bool


def disc_accuracy_gate(d_real, d_fake, threshold: float = 0.8) -> GateDecision:
    """Discriminator accuracy over 2N judgments and whether it may update.

    A real sample is judged right above 0.5, a fake one at or below 0.5.
    The discriminator updates when accuracy <= threshold.

    Raises:
        ContractError: For an empty batch.
    """
    real = np.asarray(d_real.data if isinstance(d_real, Tensor) else d_real, dtype=np.float64).ravel()
    fake = np.asarray(d_fake.data if isinstance(d_fake, Tensor) else d_fake, dtype=np.float64).ravel()
    if real.size == 0 or fake.size == 0:
        raise ContractError("disc_accuracy_gate", "empty batch")
    correct = int(np.sum(real > 0.5)) + int(np.sum(fake <= 0.5))
    accuracy = correct / (real.size + fake.size)
    return GateDecision(accuracy, accuracy <= threshold)


class DiscriminatorGate:
    """Applies each batch's gate decision to the next batch; the first batch always updates."""

    def __init__(self, threshold: float = 0.8):
        self.threshold = threshold
        self.previous: GateDecision | None = None

    def allows_update(self) -> bool:
        return self.previous is None or self.previous.update

    def observe(self, d_real, d_fake) -> GateDecision:
        self.previous = disc_accuracy_gate(d_real, d_fake, self.threshold)
        return self.previous
