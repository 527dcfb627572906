class InpaintError(Exception):
    """Base class of every error raised by vinp."""


class ContractError(InpaintError, ValueError):
    def __init__(self, op: str, detail: str):
        self.op = op
        self.detail = detail
        super().__init__(f"vinp: {op}: {detail}")


class StatsUninitializedError(InpaintError):
    def __init__(self, layer: str = ""):
        self.layer = layer
        super().__init__(f"vinp: batch_norm {layer or '<unnamed>'}: eval mode before any running-state update")


class AlignmentError(InpaintError):
    def __init__(self, count: int, detail: str = "alignment undefined"):
        self.count = count
        self.detail = detail
        super().__init__(f"vinp: pca_align: {detail} ({count} occupied voxels)")


class MeshParseError(InpaintError):
    def __init__(self, detail: str, line: int = None, path: str = None):
        self.detail = detail
        self.line = line
        self.path = path
        where = path or "<mesh>"
        if line is None:
            super().__init__(f"vinp: mesh {where}: {detail}")
        else:
            super().__init__(f"vinp: mesh {where} line {line}: {detail}")


class FormatError(InpaintError):
    def __init__(self, detail: str, path: str = None):
        self.detail = detail
        self.path = path
        super().__init__(f"vinp: {path or '<bytes>'}: {detail}")


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class ResolutionOverflowError(FormatError):
    pass


class ConfigError(InpaintError):
    def __init__(self, detail: str, key: str = None, line: int = None):
        self.detail = detail
        self.key = key
        self.line = line
        if line is not None:
            super().__init__(f"vinp: config line {line}: {detail}")
        elif key is not None:
            super().__init__(f"vinp: config key {key!r}: {detail}")
        else:
            super().__init__(f"vinp: config: {detail}")


class DatasetError(InpaintError):
    def __init__(self, detail: str, path: str = None, exception: Exception = None):
        self.detail = detail
        self.path = path
        self.exception = exception
        if path:
            super().__init__(f"vinp: dataset {path}: {detail}")
        else:
            super().__init__(f"vinp: dataset: {detail}")


class NumericError(InpaintError):
    def __init__(self, stage: str, step: int, name: str, value: float):
        self.stage = stage
        self.step = step
        self.name = name
        self.value = value
        super().__init__(f"vinp: stage {stage} step {step}: non-finite {name}={value}")
