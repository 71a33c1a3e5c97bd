"""
ctxrep Errors
One exception type per failure the engines can report
"""

from typing import List, Optional


class ContextRepError(Exception):
    """Base class for all toolkit errors"""


class MethodNotFound(ContextRepError):
    """The requested method does not exist at HEAD"""


class RepositoryUnreadable(ContextRepError):
    """The path is not a readable git repository with at least one commit"""


class ParseFailure(ContextRepError):
    """Java source could not be parsed cleanly; carries what was recovered"""

    def __init__(self, message: str, methods: Optional[list] = None, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.methods = methods or []
        self.diagnostics = diagnostics or []


class SchemaError(ContextRepError):
    """A JSONL record does not match its schema"""

    def __init__(self, message: str, line_number: int = 0):
        super().__init__(f"line {line_number}: {message}" if line_number else message)
        self.line_number = line_number


class UnresolvedMethod(ContextRepError):
    """A method locator matches nothing in the mined corpus"""

    def __init__(self, message: str, line_number: int = 0):
        super().__init__(f"line {line_number}: {message}" if line_number else message)
        self.line_number = line_number


class EmptyCorpus(ContextRepError):
    """An operation that needs at least one method got none"""


class DimensionMismatch(ContextRepError, ValueError):
    """Vectors or heads disagree on dimensionality"""


class TooFewExamples(ContextRepError):
    """Not enough examples to build an 80:10:10 split"""


class DegenerateLabels(ContextRepError):
    """The training partition holds a single class"""


class FixtureIoError(ContextRepError):
    """A synthetic repository could not be written"""
