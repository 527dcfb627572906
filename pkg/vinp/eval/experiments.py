"""Held-out scoring, noise sweeps, latent interpolation and the latent linear probe."""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from vinp.data.corrupt import inject_random_noise
from vinp.data.dataset import Sample
from vinp.data.shapes import generate_shape, sample_recipe
from vinp.enums import BnMode, ShapeCategory
from vinp.errors import ContractError, DatasetError
from vinp.eval.metrics import reconstruction_error, upsampled_error
from vinp.eval.report import EvalReport, SampleScore
from vinp.grad import ops
from vinp.grad.adam import adam_step
from vinp.grad.params import ModelParams
from vinp.grad.tensor import Tensor, backward, no_grad
from vinp.nets.edgan import edgan_decoder, edgan_encoder
from vinp.nets.hybrid import HybridModel, hybrid_forward, upsample_only, volume_tensor
from vinp.vox.grid import VoxelGrid, binarize


def score_sample(model: HybridModel, sid: str, category: str, corruption: str, x: VoxelGrid, truth: VoxelGrid,
                 noise_fraction: float = None) -> SampleScore:
    """Scores one corrupted input by every method the model can run."""
    out = hybrid_forward(x, model)
    lowres = binarize(out.lowres, model.threshold)
    lrcn_error = None
    if model.lrcn_only is not None:
        alone = upsample_only(x, model, model.lrcn_only)
        lrcn_error = reconstruction_error(binarize(alone, model.threshold), truth)
    return SampleScore(
        id=sid,
        category=category,
        corruption=corruption,
        noise_fraction=noise_fraction,
        input_error=upsampled_error(x, truth),
        lowres_error=upsampled_error(lowres, truth),
        hybrid_error=reconstruction_error(binarize(out.highres, model.threshold), truth),
        lrcn_error=lrcn_error,
    )


def evaluate_testset(model: HybridModel, samples: Sequence[Sample]) -> EvalReport:
    """Scores every sample's corrupted input against its high-resolution truth.

    Raises:
        DatasetError: For an empty sample list.
    """
    if not samples:
        raise DatasetError("empty testset")
    report = EvalReport()
    for s in samples:
        report.scores.append(score_sample(model, s.id, s.category.value, s.corruption,
                                          s.load_corrupted(), s.load_clean_high()))
    logging.info(f"vinp: evaluated {len(report)} samples, mean hybrid error {report.mean('hybrid_error'):.6f}")
    return report


def noise_sweep(model: HybridModel, samples: Sequence[Sample], fractions: Sequence[float],
                seed: int = 0) -> EvalReport:
    """Re-corrupts each clean low-resolution sample by random deletion at every fraction and scores it.

    The deletion seed of a sample depends on its position and `seed` only, so
    higher fractions delete supersets of what lower fractions delete.

    Raises:
        ContractError: If fractions are not ascending or leave [0, 1].
        DatasetError: For an empty sample list.
    """
    fractions = [float(p) for p in fractions]
    if fractions != sorted(fractions) or any(not 0 <= p <= 1 for p in fractions):
        raise ContractError("noise_sweep", f"fractions must be ascending within [0, 1], got {fractions}")
    if not samples:
        raise DatasetError("empty testset")
    report = EvalReport()
    for i, s in enumerate(samples):
        clean = s.load_clean_low()
        truth = s.load_clean_high()
        sample_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        for p in fractions:
            x = inject_random_noise(clean, p, sample_seed)
            report.scores.append(score_sample(model, s.id, s.category.value, x.meta, x, truth, noise_fraction=p))
    for p, err in report.by_noise("hybrid_error").items():
        logging.info(f"vinp: noise {p:g} mean hybrid error {err:.6f}")
    return report


def extract_latent(model: HybridModel, grid: VoxelGrid) -> np.ndarray:
    """The encoder's code for one grid, as a float64 vector."""
    dtype = model.generator["enc.conv1.w"].dtype
    with no_grad():
        z = edgan_encoder(volume_tensor(grid, dtype), model.generator, model.edgan, BnMode.EVAL)
    return z.data[0].astype(np.float64)


def probe_features(model: HybridModel, categories: Sequence[ShapeCategory], per_category: int,
                   seed: int = 0) -> tuple[np.ndarray, list[str]]:
    """Latent codes of freshly generated shapes, `per_category` of each, with their category labels."""
    features, labels = [], []
    for category in categories:
        category = ShapeCategory(category)
        for _ in range(per_category):
            shape_seed = int(np.random.SeedSequence([seed, len(labels)]).generate_state(1)[0])
            grid = generate_shape(sample_recipe(category, shape_seed), model.edgan.d_l)
            features.append(extract_latent(model, grid))
            labels.append(category.value)
    return np.stack(features), labels


def interpolate_codes(z_a: np.ndarray, z_b: np.ndarray, gammas: Sequence[float]) -> list[np.ndarray]:
    """gamma * z_a + (1 - gamma) * z_b for every gamma in [0, 1]."""
    for g in gammas:
        if not 0 <= g <= 1:
            raise ContractError("interpolate_latent", f"gamma {g} outside [0, 1]")
    return [g * z_a + (1 - g) * z_b for g in gammas]


def decode_latent(model: HybridModel, z: np.ndarray) -> VoxelGrid:
    dtype = model.generator["enc.conv1.w"].dtype
    with no_grad():
        prob = edgan_decoder(Tensor(np.asarray(z, dtype=dtype)[np.newaxis]), model.generator, model.edgan,
                             BnMode.EVAL)
    return binarize(prob.data[0, 0], model.threshold)


def interpolate_latent(model: HybridModel, grid_a: VoxelGrid, grid_b: VoxelGrid,
                       gammas: Sequence[float]) -> list[VoxelGrid]:
    """Decodes convex combinations of two shapes' codes; gamma 1 gives shape a, 0 gives shape b."""
    z_a = extract_latent(model, grid_a)
    z_b = extract_latent(model, grid_b)
    return [decode_latent(model, z).with_meta(f"interpolate:gamma={g:g}")
            for g, z in zip(gammas, interpolate_codes(z_a, z_b, gammas))]


@dataclass(frozen=True)
class ProbeResult:
    accuracy: float
    train_accuracy: float
    n_train: int
    n_test: int
    classes: tuple[str, ...]


def stratified_split(labels: Sequence, train_fraction: float = 0.8, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    train, test = [], []
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_train = min(max(1, int(round(len(idx) * train_fraction))), len(idx) - 1)
        train.extend(idx[:n_train])
        test.extend(idx[n_train:])
    return np.sort(np.asarray(train)), np.sort(np.asarray(test))


def linear_probe(features: np.ndarray, labels: Sequence, split: tuple[np.ndarray, np.ndarray] = None, *,
                 seed: int = 0, steps: int = 300, lr: float = 0.05) -> ProbeResult:
    """Trains one softmax-linear classifier on the train split and scores the test split.

    Features are standardized with train-split statistics; the classifier is
    fitted full-batch with Adam on mean cross-entropy.

    Raises:
        ContractError: With fewer than 2 classes or fewer than 5 samples in a class.
    """
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    classes = tuple(sorted(set(labels.tolist())))
    if x.ndim != 2 or len(x) != len(labels):
        raise ContractError("linear_probe", f"features {x.shape} vs {len(labels)} labels")
    counts = {c: int(np.sum(labels == c)) for c in classes}
    if len(classes) < 2 or min(counts.values()) < 5:
        raise ContractError("linear_probe", f"need >= 2 classes with >= 5 samples each, got {counts}")
    y = np.searchsorted(np.asarray(classes), labels)
    train, test = split if split is not None else stratified_split(labels, seed=seed)

    mu = x[train].mean(axis=0)
    sd = x[train].std(axis=0)
    sd[sd == 0] = 1.0
    xs = (x - mu) / sd

    rng = np.random.default_rng(seed)
    params = ModelParams("probe")
    params.add("w", rng.normal(0.0, 0.01, size=(len(classes), x.shape[1])))
    params.add("b", np.zeros(len(classes)))
    inputs = Tensor(xs[train])
    for _ in range(steps):
        params.zero_grad()
        loss = ops.softmax_cross_entropy(ops.linear(inputs, params["w"], params["b"]), y[train])
        backward(loss)
        adam_step(params, lr=lr, beta1=0.9)

    def accuracy(idx) -> float:
        logits = xs[idx] @ params["w"].data.T + params["b"].data
        return float(np.mean(np.argmax(logits, axis=1) == y[idx]))

    return ProbeResult(accuracy(test), accuracy(train), len(train), len(test), classes)


def shuffled_probe_baseline(features: np.ndarray, labels: Sequence, shuffles: int = 20, seed: int = 0,
                            **probe_kwargs) -> float:
    """Mean probe accuracy over label permutations; chance level for the feature set."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    split = stratified_split(labels, seed=seed)
    scores = []
    for _ in range(shuffles):
        scores.append(linear_probe(features, rng.permutation(labels), split, seed=seed, **probe_kwargs).accuracy)
    return float(np.mean(scores))
