"""Exception hierarchy shared by all modules."""


class SBSError(Exception):
    """Base class for numeric and contract failures in sbs_lab."""


class ChartPoleError(SBSError, ValueError):
    def __init__(self, msg: str = "pole of transition"):
        super().__init__(msg)


class DegenerateLoopError(SBSError, ValueError):
    pass


class NonEmbeddedLoopError(SBSError, ValueError):
    pass


class UndersampledLoopError(SBSError, ValueError):
    pass


class SectionZeroError(SBSError, ValueError):
    def __init__(self, msg: str = "section zero"):
        super().__init__(msg)


class NotBohrSommerfeldError(SBSError, ValueError):
    def __init__(self, msg: str = "no covariantly constant section"):
        super().__init__(msg)


class DegenerateSingularityError(SBSError, ValueError):
    def __init__(self, msg: str = "degenerate singularity"):
        super().__init__(msg)


class NoSeedsError(SBSError, RuntimeError):
    def __init__(self, msg: str = "tracer has no seeds"):
        super().__init__(msg)


class CorrectorDivergenceError(SBSError, RuntimeError):
    """Continuation corrector failed; ``arc`` holds the last valid points."""

    def __init__(self, msg: str, arc=None):
        super().__init__(msg)
        self.arc = arc


class NothingToCompareError(SBSError, ValueError):
    def __init__(self, msg: str = "nothing to compare"):
        super().__init__(msg)


class CertificationError(SBSError, ValueError):
    """A candidate loop failed one of the independent certification checks."""
