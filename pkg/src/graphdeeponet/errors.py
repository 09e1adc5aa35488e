"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class SchemaError(ValueError):
    """A dataset or checkpoint file is missing a required field."""

    def __init__(self, field, path=None):
        self.field = field
        self.path = path
        where = f" in {path}" if path is not None else ""
        super().__init__(f"missing required field {field!r}{where}")


class IntegrationError(RuntimeError):
    """The PDE solver blew up. ``time`` is the simulation time of failure."""

    def __init__(self, message, time, trajectory=None):
        self.time = float(time)
        self.trajectory = trajectory
        prefix = f"trajectory {trajectory}: " if trajectory is not None else ""
        super().__init__(f"{prefix}{message} (t={self.time:.6g})")


class NumericFailureError(FloatingPointError):
    def __init__(self, message, block=None):
        self.block = block
        if block is not None:
            message = f"{message} (rollout block {block})"
        super().__init__(message)


class UndefinedMetricError(ValueError):
    def __init__(self, frame):
        self.frame = frame
        super().__init__(f"reference frame {frame} has zero norm; relative error undefined")


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch, batch, param_norm):
        self.epoch = epoch
        self.batch = batch
        self.param_norm = param_norm
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch} (parameter norm {param_norm:.4g})"
        )
