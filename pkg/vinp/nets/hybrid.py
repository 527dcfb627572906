"""The full pipeline: volumetric completion, binarization, slice-wise upsampling."""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from vinp.enums import BnMode, Network
from vinp.errors import ContractError, FormatError
from vinp.grad.params import ModelParams
from vinp.grad.tensor import Tensor, no_grad
from vinp.nets.checkpoint import read_checkpoint, write_checkpoint
from vinp.nets.config import EDGanConfig, LrcnConfig, arch_table, configs_from_table
from vinp.nets.edgan import edgan_decoder, edgan_encoder, init_discriminator, init_generator
from vinp.nets.lrcn import init_lrcn, lrcn_forward
from vinp.vox.grid import VoxelGrid

ARCH_FILE = "model.txt"
DEFAULT_THRESHOLD = 0.5


def network_seed(seed: int, network: Network) -> int:
    index = list(Network).index(Network(network))
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def init_params(config: EDGanConfig | LrcnConfig, seed: int, network: Network = None) -> ModelParams:
    """Seeded initial parameters of one network.

    Weights are drawn from N(0, 0.02), biases are zero, batch-norm scales
    one and shifts zero. An EDGanConfig yields the generator unless
    `network` asks for the discriminator.
    """
    if isinstance(config, LrcnConfig):
        return init_lrcn(config, seed, network or Network.LRCN)
    if Network(network or Network.GENERATOR) == Network.DISCRIMINATOR:
        return init_discriminator(config, seed)
    return init_generator(config, seed)


@dataclass
class HybridModel:
    edgan: EDGanConfig
    lrcn: LrcnConfig
    generator: ModelParams
    discriminator: ModelParams
    lrcn_params: ModelParams
    lrcn_only: ModelParams | None = None
    threshold: float = DEFAULT_THRESHOLD
    extra: dict[str, str] = field(default_factory=dict)

    @classmethod
    def init(cls, edgan: EDGanConfig, lrcn: LrcnConfig, seed: int, threshold: float = DEFAULT_THRESHOLD,
             dtype=np.float32) -> "HybridModel":
        if edgan.d_l != lrcn.d_l:
            raise ContractError("HybridModel", f"d_l differs: {edgan.d_l} vs {lrcn.d_l}")
        gen = init_generator(edgan, network_seed(seed, Network.GENERATOR))
        disc = init_discriminator(edgan, network_seed(seed, Network.DISCRIMINATOR))
        up = init_lrcn(lrcn, network_seed(seed, Network.LRCN))
        model = cls(edgan, lrcn, gen, disc, up, threshold=threshold)
        return model.astype(dtype)

    def networks(self) -> dict[Network, ModelParams]:
        nets = {
            Network.GENERATOR: self.generator,
            Network.DISCRIMINATOR: self.discriminator,
            Network.LRCN: self.lrcn_params,
        }
        if self.lrcn_only is not None:
            nets[Network.LRCN_ONLY] = self.lrcn_only
        return nets

    def astype(self, dtype) -> "HybridModel":
        if np.dtype(dtype) == np.float32 and all(
                t.dtype == np.float32 for p in self.networks().values() for t in p.tensors.values()):
            return self
        return HybridModel(
            self.edgan, self.lrcn,
            self.generator.astype(dtype), self.discriminator.astype(dtype), self.lrcn_params.astype(dtype),
            None if self.lrcn_only is None else self.lrcn_only.astype(dtype),
            self.threshold, dict(self.extra))

    def count_params(self) -> dict[str, int]:
        counts = {net.value: p.count() for net, p in self.networks().items() if net != Network.LRCN_ONLY}
        counts["total"] = sum(counts.values())
        return counts

    def save(self, out_dir: str | Path) -> Path:
        """Writes model.txt plus one `<network>.ckpt` per network."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table = arch_table(self.edgan, self.lrcn)
        table["threshold"] = repr(self.threshold)
        table.update(self.extra)
        (out / ARCH_FILE).write_text("".join(f"{k}={v}\n" for k, v in sorted(table.items())))
        for net, params in self.networks().items():
            write_checkpoint(out / f"{net.value}.ckpt", params)
        return out

    @classmethod
    def load(cls, model_dir: str | Path) -> "HybridModel":
        """Reads a directory written by `save`.

        Raises:
            FormatError: If a checkpoint is missing or does not match the stored architecture.
        """
        root = Path(model_dir)
        arch = root / ARCH_FILE
        try:
            lines = arch.read_text().splitlines()
        except OSError as e:
            raise FormatError(f"unreadable model description: {e}", str(arch))
        table = dict(line.split("=", 1) for line in lines if "=" in line)
        edgan, lrcn = configs_from_table(table)
        template = cls.init(edgan, lrcn, seed=0)

        loaded = {}
        for net, expected in template.networks().items():
            loaded[net] = _load_network(root / f"{net.value}.ckpt", expected, edgan.bn_momentum)
        only_path = root / f"{Network.LRCN_ONLY.value}.ckpt"
        lrcn_only = None
        if only_path.is_file():
            lrcn_only = _load_network(only_path, template.lrcn_params, lrcn.bn_momentum, Network.LRCN_ONLY)
        known = set(arch_table(edgan, lrcn)) | {"threshold"}
        extra = {k: v for k, v in table.items() if k not in known}
        return cls(edgan, lrcn, loaded[Network.GENERATOR], loaded[Network.DISCRIMINATOR], loaded[Network.LRCN],
                   lrcn_only, float(table.get("threshold", DEFAULT_THRESHOLD)), extra)


def _load_network(path: Path, expected: ModelParams, momentum: float, network: Network = None) -> ModelParams:
    if not path.is_file():
        raise FormatError("missing checkpoint", str(path))
    params = read_checkpoint(path, Network(network).value if network else expected.network, momentum)
    if params.names() != expected.names():
        raise FormatError(f"parameter names do not match the {expected.network} architecture", str(path))
    for name in expected:
        if params[name].shape != expected[name].shape:
            raise FormatError(f"{name} has shape {params[name].shape}, expected {expected[name].shape}", str(path))
    logging.info(f"vinp: loaded {params.network} checkpoint {path} (step {params.t})")
    return params


def count_params(edgan: EDGanConfig, lrcn: LrcnConfig) -> dict[str, int]:
    return HybridModel.init(edgan, lrcn, seed=0).count_params()


@dataclass(frozen=True)
class HybridOutput:
    lowres: np.ndarray
    highres: np.ndarray
    z: np.ndarray


def volume_tensor(grids: list[VoxelGrid] | VoxelGrid, dtype=np.float32) -> Tensor:
    if isinstance(grids, VoxelGrid):
        grids = [grids]
    return Tensor(np.stack([g.occupancy for g in grids])[:, np.newaxis].astype(dtype))


def hybrid_forward(x: VoxelGrid, model: HybridModel, threshold: float = None,
                   lrcn: ModelParams = None) -> HybridOutput:
    """Completes one aligned low-resolution grid and upsamples it.

    The volumetric generator produces low-resolution probabilities, which are
    binarized at `threshold` and fed slice-wise to the recurrent upsampler.
    `lrcn` substitutes different upsampler weights (the LRCN-only model).

    Returns:
        Low-resolution probabilities [d_l]^3, high-resolution probabilities
        [d_h]^3 and the latent code.
    """
    if x.resolution != model.edgan.d_l:
        raise ContractError("hybrid_forward", f"input resolution {x.resolution}, model expects {model.edgan.d_l}")
    threshold = model.threshold if threshold is None else threshold
    dtype = model.generator["enc.conv1.w"].dtype
    with no_grad():
        z = edgan_encoder(volume_tensor(x, dtype), model.generator, model.edgan, BnMode.EVAL)
        low = edgan_decoder(z, model.generator, model.edgan, BnMode.EVAL)
        binary = (low.data[:, 0] > threshold).astype(dtype)
        high, _ = lrcn_forward(binary, lrcn or model.lrcn_params, model.lrcn, BnMode.EVAL)
    return HybridOutput(low.data[0, 0], high.data[0], z.data[0])


def upsample_only(x: VoxelGrid, model: HybridModel, lrcn: ModelParams = None) -> np.ndarray:
    """Runs the recurrent upsampler straight on a low-resolution grid."""
    dtype = model.generator["enc.conv1.w"].dtype
    with no_grad():
        high, _ = lrcn_forward(x.occupancy[np.newaxis].astype(dtype), lrcn or model.lrcn_params, model.lrcn,
                               BnMode.EVAL)
    return high.data[0]
