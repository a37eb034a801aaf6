"""Exception hierarchy shared across the toolkit."""


class RagscoreError(Exception):
    """Base class for all toolkit errors."""


# --- backend ---------------------------------------------------------------

class NetworkError(RagscoreError):
    """Endpoint unreachable after exhausting the retry budget."""


class BackendError(RagscoreError):
    """The backend answered with a non-success protocol status."""


class EmptyCompletion(RagscoreError):
    """The backend returned empty completion text."""


class SchemaViolation(RagscoreError):
    """No schema-conforming output within the repair limit."""


# --- prompting -------------------------------------------------------------

class MissingBinding(RagscoreError):
    """A template placeholder has no binding."""


class UnknownPlaceholder(RagscoreError):
    """A binding was supplied for a name absent from the template."""


class NoStatementsFound(RagscoreError):
    """The simplifier output contained no hyphen-list lines."""


# --- verdict parsing -------------------------------------------------------

class ZeroVerdicts(RagscoreError):
    """No verdict pattern matched the judge output."""


class UnsupportedSchema(RagscoreError):
    """The schema is not one of the recognized label-list shapes."""


class UnknownState(RagscoreError):
    """The queried automaton state is not reachable."""


class IndexCoverageError(RagscoreError):
    """A statement index is missing or duplicated across the output lists."""


# --- metrics ---------------------------------------------------------------

class UndefinedScore(RagscoreError):
    """The metric's denominator is empty; reported as null, never as 0."""


class LengthMismatch(RagscoreError):
    """Paired vectors differ in length."""


class EmptyInput(RagscoreError):
    """An aggregate was requested over zero items."""


class DegenerateInput(RagscoreError):
    """A rank correlation was requested on a constant vector."""


# --- datasets / runs -------------------------------------------------------

class DatasetError(RagscoreError):
    """The dataset cannot be loaded or is empty."""


class FileNotFound(DatasetError):
    """The dataset path does not exist."""


class RecordValidationError(DatasetError):
    """A dataset record is malformed; message names the offending line."""


class DuplicateId(DatasetError):
    """Two dataset records share an id."""
