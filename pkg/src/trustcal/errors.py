"""Exception hierarchy for the toolkit.

Two families matter to callers: ``InputError`` (bad files, bad categories,
bad shapes -- CLI exit code 2) and ``NumericalError`` (the math gave up --
CLI exit code 3).
"""


class TrustcalError(Exception):
    exit_code = 1


class InputError(TrustcalError):
    exit_code = 2


class NumericalError(TrustcalError):
    exit_code = 3


class EmptySequence(InputError):
    pass


class EmptyFixations(InputError):
    pass


class UnsortedFixations(InputError):
    pass


class NonFinite(InputError):
    pass


class EmptyWindow(InputError):
    pass


class EmptyDataset(InputError):
    pass


class EmptySpec(InputError):
    pass


class StratificationImpossible(InputError):
    pass


class HorizonTooLarge(InputError):
    pass


class SchemaMismatch(InputError):
    pass


class UnknownSession(InputError):
    pass


class ZeroLikelihood(NumericalError):
    """An observation has probability zero under the current model."""


class AmbiguousLabel(NumericalError):
    """The state-labeling statistic ties; latent states cannot be named."""


class AllRestartsFailed(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass
