"""Exception hierarchy shared by all dafte modules."""


class DafteError(Exception):
    """Base class for every error raised by this package."""


# -- prediction matrices and output mappings ---------------------------------

class NegativeEntry(DafteError):
    """A probability row contains a negative entry."""


class RowMassZero(DafteError):
    """A probability row sums to zero."""


class RowMassOutOfTolerance(DafteError):
    """A probability row's mass deviates from 1 by more than the repair band."""


class ArityMismatch(DafteError):
    """Row length does not match the label space (or rows are ragged)."""


class ZeroMassAfterMapping(DafteError):
    """An output mapping dropped all probability mass of some row."""


# -- ensembling ---------------------------------------------------------------

class ShapeMismatch(DafteError):
    """Inputs disagree on sample count, class arity, or feature arity."""


class EmptyEnsemble(DafteError):
    """An ensemble operation received zero prediction matrices."""


# -- learners -----------------------------------------------------------------

class EmptyShots(DafteError):
    """A learner was given an empty few-shot set."""


class NonFiniteWeights(DafteError):
    """Weight fitting diverged to non-finite values."""


class TooManyModels(DafteError):
    """The exhaustive weight grid is only tractable for small ensembles."""


# -- metrics ------------------------------------------------------------------

class LengthMismatch(DafteError):
    """Predictions and gold labels have different lengths."""


class NonPositiveBaseline(DafteError):
    """Relative improvement requires a strictly positive baseline."""


class EmptyInput(DafteError):
    """A metric received an empty input."""


# -- clients ------------------------------------------------------------------

class ParseError(DafteError):
    """A manifest or prediction file could not be parsed."""


class MappingArityMismatch(DafteError):
    """A manifest mapping's dimensions disagree with the declared classes."""


class DuplicateModelId(DafteError):
    """Two models in one registry share an id."""


class HeaderMismatch(DafteError):
    """A prediction file's header disagrees with the expected model classes."""


class Unreachable(DafteError):
    """An inference endpoint could not be reached after retries."""


class MalformedResponse(DafteError):
    """An inference endpoint returned a response violating the wire contract."""


class Timeout(DafteError):
    """A batch request timed out after retries."""


# -- synthlab -----------------------------------------------------------------

class BadConfig(DafteError):
    """A synthetic suite configuration violates its invariants."""


class DegenerateSample(DafteError):
    """A training sample could not be drawn with at least two classes present."""
