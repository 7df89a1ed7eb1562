"""Exception types raised across the package."""


class DflabError(Exception):
    """Base class for all package errors."""


class NonFinite(DflabError):
    pass


class DimensionMismatch(DflabError):
    pass


class NonHermitian(DflabError):
    pass


class RankDeficient(DflabError):
    pass


class NoConvergence(DflabError):
    pass


class AmbiguousFootPoint(DflabError):
    pass


class EmptyBoundary(DflabError):
    pass


class NoNullSpace(DflabError):
    pass


class BranchCut(DflabError):
    pass


class ParamBound(DflabError):
    pass


class LogDomain(DflabError):
    pass


class FamilyTooLarge(DflabError):
    pass


class DominationFailure(DflabError):
    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class EstimateFailure(DflabError):
    def __init__(self, msg, point=None, eigenvalue=None):
        super().__init__(msg)
        self.point = point
        self.eigenvalue = eigenvalue


class ThetaNotPositive(EstimateFailure):
    pass


class ShellOutsideTube(DflabError):
    pass


class NoFeasibleEta(DflabError):
    pass


class SignCondition(DflabError):
    pass


class OutsideBox(DflabError):
    pass


class BlendGap(DflabError):
    pass


class WrongStratum(DflabError):
    pass


class HypothesisFailure(DflabError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class NoCollarFound(DflabError):
    pass


class ConfigError(DflabError):
    pass
