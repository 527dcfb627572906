from enum import Enum


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"


class BnMode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class Precision(str, Enum):
    FLOAT32 = "float32"
    FLOAT64 = "float64"


class FillMode(str, Enum):
    SURFACE = "surface"
    SOLID = "solid"


class CorruptionKind(str, Enum):
    RANDOM_DELETION = "random_deletion"
    SINGLE_VIEW_SCAN = "single_view_scan"


class ViewDirection(str, Enum):
    POS_X = "+x"
    NEG_X = "-x"
    POS_Y = "+y"
    NEG_Y = "-y"
    POS_Z = "+z"
    NEG_Z = "-z"

    def axis(self) -> int:
        return "xyz".index(self.value[1])

    def reversed(self) -> bool:
        return self.value[0] == "-"


class ShapeCategory(str, Enum):
    BOX = "box"
    TABLE = "table"
    CHAIR = "chair"
    LSHAPE = "lshape"
    LAMP = "lamp"


SHAPE_CATEGORIES = [
    ShapeCategory.BOX,
    ShapeCategory.TABLE,
    ShapeCategory.CHAIR,
    ShapeCategory.LSHAPE,
    ShapeCategory.LAMP,
]


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


class Network(str, Enum):
    GENERATOR = "generator"
    DISCRIMINATOR = "discriminator"
    LRCN = "lrcn"
    LRCN_ONLY = "lrcn_only"


class Stage(str, Enum):
    STAGE_1A = "1a"
    STAGE_1B = "1b"
    STAGE_2 = "2"
    STAGE_3 = "3"
    ABLATION = "ablation"


class Profile(str, Enum):
    DESK = "desk"
    FULL = "full"


class Command(str, Enum):
    GEN_DATA = "gen-data"
    TRAIN = "train"
    COMPLETE = "complete"
    EVAL = "eval"
    SWEEP = "sweep"
    INTERPOLATE = "interpolate"
    PROBE = "probe"


class ReportFormat(str, Enum):
    TEXT = "text"
    TABLE = "table"
