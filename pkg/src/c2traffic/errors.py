"""Exception hierarchy.

Everything raised because of bad *input data* derives from :class:`DataError`
so the command line can map it to exit code 2.
"""


class DataError(Exception):
    """Input data could not be processed."""


class BadMagic(DataError):
    def __init__(self, magic: int):
        super().__init__(f"unrecognized pcap magic 0x{magic:08X}")
        self.magic = magic


class Truncated(DataError):
    def __init__(self, position: int, detail: str = ""):
        msg = f"truncated capture at byte offset {position}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.position = position


class ParseError(DataError):
    def __init__(self, line: int, detail: str):
        super().__init__(f"line {line}: {detail}")
        self.line = line
        self.detail = detail


class Undecodable(DataError):
    """A UDP payload is not a DNS message we can decode."""


class CannotCorrect(DataError):
    """The imbalance gate refused the dataset."""

    def __init__(self, d: float, threshold: float):
        super().__init__(
            f"imbalance d={d:.6f} outside (0, {threshold}); cannot be corrected")
        self.d = d
        self.threshold = threshold


class DegenerateCounts(DataError):
    pass


class NegativeTarget(DataError):
    pass


class SingleClassSubset(DataError):
    pass


class TooWeak(Exception):
    """Base learner no better than random guessing."""


class InfeasibleProfile(DataError):
    pass


class EmptyWindow(DataError):
    pass
