"""Exception hierarchy shared by every stage of the verifier and refinement loop."""

from __future__ import annotations


class VidRefineError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


# -- temporal logic -----------------------------------------------------------

class FormulaSyntaxError(VidRefineError, ValueError):
    def __init__(self, position: int, expected: str, text: str = ""):
        self.position = position
        self.expected = expected
        self.text = text
        super().__init__(f"syntax error at position {position}: expected {expected}")


class UnknownProposition(VidRefineError, KeyError):
    def __init__(self, text: str):
        self.text = text
        super().__init__(text)

    def __str__(self) -> str:
        return f"unknown proposition: {self.text!r}"


class IndexOutOfRange(VidRefineError, IndexError):
    pass


# -- automaton / checking -----------------------------------------------------

class DimensionMismatch(VidRefineError, ValueError):
    pass


class LayerOutOfRange(VidRefineError, IndexError):
    pass


class TooManyPropositions(VidRefineError, ValueError):
    pass


class MonitorBlowup(VidRefineError):
    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"monitor construction exceeded {cap} states")


class TooLargeForOracle(VidRefineError):
    def __init__(self, n_frames: int, n_props: int, bound: int):
        self.n_frames = n_frames
        self.n_props = n_props
        super().__init__(
            f"oracle enumeration needs N*|P| <= {bound}, got {n_frames}*{n_props}"
        )


# -- calibration --------------------------------------------------------------

class DegenerateDataset(VidRefineError, ValueError):
    pass


class EmptyResponse(VidRefineError, ValueError):
    pass


# -- external services --------------------------------------------------------

class ServiceError(VidRefineError):
    def __init__(self, status: int | None, body: str = ""):
        self.status = status
        self.body = body
        super().__init__(f"service error (status={status}): {body[:200]}")


class MalformedDecomposition(VidRefineError):
    def __init__(self, raw: str, reason: str = ""):
        self.raw = raw
        self.reason = reason
        super().__init__(f"could not parse decomposition: {reason}")


class AmbiguousVerdict(VidRefineError):
    def __init__(self, text: str):
        self.text = text
        super().__init__(f"response is neither Yes nor No: {text!r}")


class GenerationTimeout(VidRefineError):
    pass


class ClientFailure(VidRefineError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage} failed: {cause}")


# -- video --------------------------------------------------------------------

class UnreadableVideo(VidRefineError):
    pass


class ResampleError(VidRefineError, ValueError):
    pass


class IncompatibleStreams(VidRefineError):
    pass


class EmptyVideo(VidRefineError, ValueError):
    pass
