from __future__ import annotations


class GTSError(Exception):
    """Base class for all errors raised by gtshape."""


class ParseError(GTSError):
    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = ""):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {message}")


class SignatureError(GTSError):
    """Unknown predicate, arity mismatch or name clash."""


class ModelError(GTSError):
    pass


class PreconditionError(GTSError):
    """An operation was called outside its documented precondition."""
