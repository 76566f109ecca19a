"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor shapes disagree with an operation's contract."""


class NumericError(ValueError):
    """Non-finite values where finite ones are required."""


class ScheduleError(ValueError):
    """Invalid timestep, stage layout, or step ordering."""


class FormatError(ValueError):
    """Malformed binary container (bad magic, truncation, duplicates)."""


class ConfigError(ValueError):
    """Invalid or contradictory run configuration."""


class ContractError(RuntimeError):
    """A caller violated an orchestration contract (wrong iteration index,
    missing source tensors, missing layer map)."""
