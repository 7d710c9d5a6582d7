"""Exception types raised across the workbench."""


class SurfBenchError(Exception):
    """Base class for every error raised by surfbench."""


class Unreachable(SurfBenchError):
    """Foot target lies outside the leg workspace or IK did not converge."""


class InvalidCycle(SurfBenchError, ValueError):
    pass


class NumericalBlowup(SurfBenchError, FloatingPointError):
    pass


class DegenerateChannel(SurfBenchError, ValueError):
    def __init__(self, channels):
        self.channels = list(channels)
        super().__init__(f"zero variance in channel(s) {self.channels}")


class NonFiniteLoss(SurfBenchError, FloatingPointError):
    def __init__(self, epoch, batch, loss):
        self.epoch, self.batch, self.loss = epoch, batch, loss
        super().__init__(f"loss became {loss!r} at epoch {epoch}, batch {batch}")


class NonMonotonicTime(SurfBenchError, ValueError):
    pass


class ParseError(SurfBenchError, ValueError):
    def __init__(self, line, reason):
        self.line, self.reason = line, reason
        super().__init__(f"line {line}: {reason}")


class InsufficientEpisodes(SurfBenchError, ValueError):
    pass


class IncompatibleModel(SurfBenchError, ValueError):
    pass


class NoEventsFound(SurfBenchError):
    pass


class AlignmentFailed(SurfBenchError):
    pass


class ConfigError(SurfBenchError, ValueError):
    pass
