"""Exception types raised across the pipeline.

Input problems (bad files, bad scenario specs) derive from ``InputError`` so
the CLI can map them to exit code 1. Per-window signal conditions such as
``EmptySpectrum`` or ``ZeroVariance`` are raised by the pure functions and
caught by the streaming pipeline, which skips the window and counts it.
"""


class PulseTraceError(Exception):
    pass


class InputError(PulseTraceError):
    pass


class MalformedRow(InputError):
    def __init__(self, line, reason=""):
        self.line = line
        msg = f"malformed row at line {line}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class NonMonotoneTimestamp(InputError):
    def __init__(self, line):
        self.line = line
        super().__init__(f"timestamp does not strictly increase at line {line}")


class EmptyStream(InputError):
    def __init__(self, msg="EmptyStream: no data rows"):
        super().__init__(msg)


class InvalidSpec(InputError):
    pass


class NoOverlap(InputError):
    pass


class InsufficientDuration(InputError):
    pass


class NonPositiveRate(PulseTraceError):
    pass


class InsufficientSamples(PulseTraceError):
    pass


class ZeroMeanChannel(PulseTraceError):
    pass


class LengthMismatch(PulseTraceError):
    pass


class TooShort(PulseTraceError):
    pass


class EmptySpectrum(PulseTraceError):
    """No usable pulse peak inside the heart-rate band for this window."""


class ZeroVariance(PulseTraceError):
    pass


class NegativePlacement(PulseTraceError):
    pass


class InsufficientBeats(PulseTraceError):
    pass


class ZeroPower(PulseTraceError):
    pass
