from dataclasses import dataclass
from typing import Optional, Tuple

__all__ = [
    "Span",
    "TreeforgeError",
    "ConfigError",
    "SpecError",
    "ParseError",
    "DuplicateNameError",
    "UnresolvedReferenceError",
    "QualifierWithoutBaseError",
    "BaseMismatchError",
    "IllegalOverrideError",
    "TreeError",
    "UnknownAlternativeError",
    "FieldShapeMismatchError",
    "DuplicateRegistrationError",
    "MissingAnalysisError",
    "UnhandledNodeError",
    "HandlerError",
    "EvaluationError",
    "ImplicitEvaluationError",
    "PreconditionFailure",
    "PostconditionFailure",
    "DivisionByZeroError",
    "IntegerOverflow",
    "UnboundNameError",
    "ArgumentError",
    "NoSolutionInBoundsError",
    "GuardEvaluationError",
    "TraceError",
    "BoundsError",
    "ExpansionBudgetExceeded",
    "CodegenError",
    "ImplicitNotGeneratable",
    "CosimError",
]


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    length: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class TreeforgeError(Exception):
    """Root of every error raised by treeforge."""

    kind = "Error"

    def __init__(self, message: str, span: Optional[Span] = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def __str__(self) -> str:
        if self.span is not None:
            return f"{self.span}: {self.message}"
        return self.message


class ConfigError(TreeforgeError):
    kind = "ConfigError"


# astspec


class SpecError(TreeforgeError):
    kind = "SpecError"


class ParseError(SpecError):
    kind = "SyntaxError"


class DuplicateNameError(SpecError):
    kind = "DuplicateName"

    def __init__(self, what: str, name: str, first: Optional[Span], second: Optional[Span]):
        where = f" (first declared at {first})" if first is not None else ""
        super().__init__(f"duplicate {what} '{name}'{where}", second)
        self.name = name
        self.locations: Tuple[Optional[Span], Optional[Span]] = (first, second)


class UnresolvedReferenceError(SpecError):
    kind = "UnresolvedReference"

    def __init__(self, category: str, span: Optional[Span] = None):
        super().__init__(f"unresolved reference to category '{category}'", span)
        self.category = category


class QualifierWithoutBaseError(SpecError):
    kind = "QualifierWithoutBase"


class BaseMismatchError(SpecError):
    kind = "BaseMismatch"


class IllegalOverrideError(SpecError):
    kind = "IllegalOverride"


# treekit


class TreeError(TreeforgeError):
    kind = "TreeError"


class UnknownAlternativeError(TreeError):
    kind = "UnknownAlternative"


class FieldShapeMismatchError(TreeError):
    kind = "FieldShapeMismatch"

    def __init__(self, field_name: str, expected: str, span: Optional[Span] = None):
        super().__init__(f"field '{field_name}' expects {expected}", span)
        self.field_name = field_name
        self.expected = expected


class DuplicateRegistrationError(TreeError):
    kind = "DuplicateRegistration"


class MissingAnalysisError(TreeError):
    kind = "MissingAnalysis"

    def __init__(self, tree_id: str, span: Optional[Span] = None):
        super().__init__(f"no analysis registered for tree '{tree_id}'", span)
        self.tree_id = tree_id


class UnhandledNodeError(TreeError):
    kind = "UnhandledNode"


class HandlerError(TreeError):
    kind = "HandlerError"


# runtime


class EvaluationError(TreeforgeError):
    kind = "RuntimeError"


class ImplicitEvaluationError(EvaluationError):
    kind = "ImplicitEvaluationError"


class PreconditionFailure(EvaluationError):
    kind = "PreconditionFailure"


class PostconditionFailure(EvaluationError):
    kind = "PostconditionFailure"


class DivisionByZeroError(EvaluationError):
    kind = "DivisionByZero"


class IntegerOverflow(EvaluationError):
    kind = "IntegerOverflow"


class UnboundNameError(EvaluationError):
    kind = "UnboundName"


class ArgumentError(EvaluationError):
    kind = "ArgumentError"


class NoSolutionInBoundsError(EvaluationError):
    kind = "NoSolutionInBounds"

    def __init__(self, lo: int, hi: int, span: Optional[Span] = None):
        super().__init__(f"no solution in bounds [{lo}, {hi}]", span)
        self.bounds = (lo, hi)


class GuardEvaluationError(EvaluationError):
    kind = "GuardEvaluationError"


# ctengine


class TraceError(TreeforgeError):
    kind = "TraceError"


class BoundsError(TraceError):
    kind = "BoundsError"


class ExpansionBudgetExceeded(TraceError):
    kind = "ExpansionBudgetExceeded"


# irgen


class CodegenError(TreeforgeError):
    kind = "CodegenError"


class ImplicitNotGeneratable(CodegenError):
    kind = "ImplicitNotGeneratable"

    def __init__(self, function_name: str, span: Optional[Span] = None):
        super().__init__(f"implicit function '{function_name}' cannot be generated", span)
        self.function_name = function_name


# cosim


class CosimError(TreeforgeError):
    kind = "CosimError"
