"""Exception hierarchy shared by all privamp modules."""


class AccountingError(ValueError):
    """Base class for every error raised by privamp."""


class NegativeMass(AccountingError):
    pass


class NonPositiveAlpha(AccountingError):
    pass


class NotNormalized(AccountingError):
    pass


class EtaOutOfRange(AccountingError):
    pass


class MissingKernelEntry(AccountingError, KeyError):
    pass


class NonPositiveTheta(AccountingError):
    pass


class POutOfRange(AccountingError):
    pass


class EmptyPairList(AccountingError):
    pass


class BadK(AccountingError):
    pass


class UnsupportedFamily(AccountingError):
    pass


class NegativeEpsilon(AccountingError):
    pass


class BadParams(AccountingError):
    pass


class UnsupportedPairing(AccountingError):
    pass


class MissingGroupProfile(AccountingError, KeyError):
    def __init__(self, k):
        super().__init__(f"no group profile supplied for k={k}")
        self.k = k


class InstanceTooLarge(AccountingError):
    def __init__(self, what, cardinality, limit):
        super().__init__(f"{what}: {cardinality} exceeds enumeration limit {limit}")
        self.cardinality = cardinality
        self.limit = limit


class Unreachable(AccountingError):
    pass


class InfeasibleMarginals(AccountingError):
    pass


class DivergentIntegrand(AccountingError):
    pass


class BadLambda(AccountingError):
    pass
