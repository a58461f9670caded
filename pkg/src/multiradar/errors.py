"""Exception hierarchy shared by every module."""


class MultiRadarError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(MultiRadarError, ValueError):
    """An argument violates a documented precondition."""


class NoTarget(MultiRadarError):
    """The power map holds no energy, so there is no scatterer to track."""


class NoRespiratoryMode(MultiRadarError):
    """The mode closest to the expected breathing rate lies outside the respiratory band."""


class InsufficientPeaks(MultiRadarError):
    """Fewer than two peaks were found; no interval can be formed."""


class NoMatches(MultiRadarError):
    """No reference peak could be paired with an estimated peak."""


class InvalidScenario(MultiRadarError, ValueError):
    """A simulated scene cannot be synthesized with the given radar configuration."""


class ParseError(MultiRadarError):
    """A file does not follow its declared format.

    Attributes
    ----------
    offset : int or None
        Byte offset of the violation in binary files. Text-file errors name
        the line in the message instead.
    path : str or None
        File being parsed, when known.
    """

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"offset {offset}")
        prefix = f"{': '.join(where)}: " if where else ""
        super().__init__(prefix + message)
