"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not satisfy an operation's contract."""


class ContractError(ValueError):
    """An operation was called outside its stated contract."""


class SeedPlacementError(ValueError):
    """A seed cell would fall outside the grid."""


class TargetFormatError(ValueError):
    """Target image is not a valid 8-bit RGBA PNG."""


class ConfigError(ValueError):
    """Malformed experiment configuration; message carries the line number."""


class CheckpointIntegrityError(ValueError):
    """Checkpoint file is truncated, corrupt, or internally inconsistent."""


class CheckpointVersionError(ValueError):
    """Checkpoint was written by an unsupported format version."""


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss; message carries step and rng state."""
