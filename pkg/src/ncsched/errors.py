"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


class ContractViolation(ValueError):
    """An operation was called with arguments outside its contract."""


class NumericalFailure(RuntimeError):
    """A linear-algebra step is too ill-conditioned to trust."""


class TrainingFailure(RuntimeError):
    """Q-network training produced non-finite values."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class BudgetExceeded(RuntimeError):
    """A combinatorial search would exceed its candidate budget."""


class BufferNotReady(RuntimeError):
    """Replay buffer holds fewer transitions than one minibatch."""


class CheckpointMismatch(RuntimeError):
    """Checkpoint shapes or metadata do not fit the given config."""
