import numpy as np

from vinp.enums import BnMode
from vinp.errors import ContractError
from vinp.grad.tensor import no_grad
from vinp.nets.edgan import generator
from vinp.nets.hybrid import HybridModel, volume_tensor
from vinp.vox.grid import VoxelGrid, binarize, upsample_nearest


def reconstruction_error(pred: VoxelGrid, truth: VoxelGrid) -> float:
    """Fraction of the d^3 voxels on which two grids disagree.

    Raises:
        ContractError: If the resolutions differ.
    """
    if pred.resolution != truth.resolution:
        raise ContractError("reconstruction_error", f"resolution {pred.resolution} vs {truth.resolution}")
    return np.count_nonzero(pred.occupancy != truth.occupancy) / truth.resolution ** 3


def upsampled_error(low: VoxelGrid, truth: VoxelGrid) -> float:
    """Error of a low-resolution grid nearest-upsampled to the truth's resolution."""
    if truth.resolution % low.resolution != 0:
        raise ContractError("upsampled_error", f"{truth.resolution} is not a multiple of {low.resolution}")
    return reconstruction_error(upsample_nearest(low, truth.resolution // low.resolution), truth)


def complete_lowres(model: HybridModel, x: VoxelGrid) -> VoxelGrid:
    """The generator's completion of one grid, binarized at the model threshold."""
    dtype = model.generator["enc.conv1.w"].dtype
    with no_grad():
        prob = generator(volume_tensor(x, dtype), model.generator, model.edgan, BnMode.EVAL)
    return binarize(prob.data[0, 0], model.threshold)


def eval_lowres_path(model: HybridModel, x: VoxelGrid, truth: VoxelGrid, factor: int = None) -> float:
    """Scores the generator alone: binarized output, nearest-upsampled by `factor`, against high-resolution truth."""
    factor = factor or truth.resolution // x.resolution
    return reconstruction_error(upsample_nearest(complete_lowres(model, x), factor), truth)
