"""
Generic tree runtime and extension-aware analysis dispatch.

Nodes are immutable instances of a compiled Schema. Analyses are handler
tables keyed by (category, alternative); a Dispatcher routes every node to
the analysis registered for the node's origin tree. Handlers recurse by
calling back into the dispatcher, never into another analysis, so an
extension regains control as soon as the base analysis reaches one of its
nodes again.
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    Iterator,
    List,
    Mapping,
    Optional,
    Tuple,
    Union,
)

from .astspec import Alternative, FieldKind, Schema
from .errors import (
    DuplicateRegistrationError,
    FieldShapeMismatchError,
    HandlerError,
    MissingAnalysisError,
    Span,
    TreeError,
    TreeforgeError,
    UnhandledNodeError,
    UnknownAlternativeError,
)

__all__ = [
    "Node",
    "Diagnostic",
    "Order",
    "Analysis",
    "Dispatcher",
    "DispatchRecord",
    "make_node",
    "validate_tree",
    "traverse",
    "register_analysis",
    "run_analysis",
]

logger = logging.getLogger(__name__)

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

FieldValue = Union[int, float, bool, str, "Node", Tuple["Node", ...], None]
Handler = Callable[["Node", Any, "Dispatcher"], Any]


def _tagged(value: Any) -> Any:
    # 1, 1.0 and True are equal in Python but are distinct literals here
    if isinstance(value, tuple):
        return tuple(_tagged(item) for item in value)
    if isinstance(value, Node):
        return value
    return type(value).__name__, value


@dataclass(frozen=True, eq=False)
class Node:
    """A tree node; equality is structural and ignores schema and span."""

    schema: Schema = field(repr=False)
    origin: str
    category: str
    alternative: str
    fields: Mapping[str, FieldValue]
    span: Optional[Span] = None

    def __post_init__(self):
        object.__setattr__(self, "fields", MappingProxyType(dict(self.fields)))

    def __getitem__(self, name: str) -> FieldValue:
        return self.fields[name]

    def get(self, name: str, default: FieldValue = None) -> FieldValue:
        return self.fields.get(name, default)

    @property
    def kind(self) -> Tuple[str, str]:
        return self.category, self.alternative

    def is_a(self, alternative: str, category: Optional[str] = None) -> bool:
        return self.alternative == alternative and (category is None or self.category == category)

    def children(self) -> Iterator[Tuple[str, "Node"]]:
        for name, value in self.fields.items():
            if isinstance(value, Node):
                yield name, value
            elif isinstance(value, tuple):
                for item in value:
                    if isinstance(item, Node):
                        yield name, item

    def _key(self):
        fields = tuple((name, _tagged(value)) for name, value in sorted(self.fields.items(), key=lambda kv: kv[0]))
        return (self.origin, self.category, self.alternative, fields)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Node):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        cached = self.__dict__.get("_hash")
        if cached is None:
            cached = hash(self._key())
            object.__setattr__(self, "_hash", cached)
        return cached

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.fields.items())
        return f"{self.alternative}({inner})"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: Optional[Span] = None
    source: str = ""

    def render(self, filename: str = "") -> str:
        where = f"{self.span.line}:{self.span.column}" if self.span else "?:?"
        prefix = f"{filename}:{where}" if filename else where
        tag = f" [{self.source}]" if self.source else ""
        return f"{prefix}:{tag} {self.message}"

    def __str__(self) -> str:
        return self.render()


def _scalar_ok(kind: str, value: Any) -> bool:
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "real":
        return isinstance(value, float)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "string":
        return isinstance(value, str)
    if kind == "ident":
        return isinstance(value, str) and bool(_IDENT.match(value))
    if kind == "literal":
        return isinstance(value, (int, float, bool))
    return False


def _child_ok(schema: Schema, kind: FieldKind, value: Any) -> bool:
    return (
        isinstance(value, Node)
        and value.category == kind.name
        and schema.has(value.category, value.alternative)
    )


def _field_problems(
    schema: Schema, alt: Alternative, values: Mapping[str, Any]
) -> List[Tuple[str, str]]:
    """(field, expected) pairs for every field whose value does not fit the schema."""
    problems: List[Tuple[str, str]] = []
    for f in alt.fields:
        kind = f.kind
        present = f.name in values
        value = values.get(f.name)
        if kind.is_scalar:
            if not present or not _scalar_ok(kind.name, value):
                problems.append((f.name, str(kind)))
        elif kind.shape == "node":
            if not present or not _child_ok(schema, kind, value):
                problems.append((f.name, str(kind)))
        elif kind.shape == "opt":
            if value is not None and not _child_ok(schema, kind, value):
                problems.append((f.name, str(kind)))
        elif kind.shape == "list":
            if not isinstance(value, (list, tuple)) or not all(
                _child_ok(schema, kind, item) for item in value
            ):
                problems.append((f.name, str(kind)))
    for name in values:
        if alt.field(name) is None:
            problems.append((name, f"no such field in {alt.category}.{alt.name}"))
    return problems


def make_node(
    schema: Schema,
    category: str,
    alternative: str,
    field_values: Optional[Mapping[str, Any]] = None,
    *,
    span: Optional[Span] = None,
    **kwargs: Any,
) -> Node:
    """
    Build a validated node. Field values may be given as a mapping, as keyword
    arguments, or both. Lists are stored as tuples; absent opt fields as None.

    :raises UnknownAlternativeError: If (category, alternative) is not declared.
    :raises FieldShapeMismatchError: On the first field that does not fit.
    """
    alt = schema.alternative(category, alternative)
    values: Dict[str, Any] = dict(field_values or {})
    values.update(kwargs)
    problems = _field_problems(schema, alt, values)
    if problems:
        name, expected = problems[0]
        raise FieldShapeMismatchError(name, expected, span)
    ordered: Dict[str, FieldValue] = {}
    for f in alt.fields:
        value = values.get(f.name)
        if f.kind.shape == "list":
            value = tuple(value)
        ordered[f.name] = value
    return Node(schema, alt.origin_tree_id, category, alternative, ordered, span)


def validate_tree(schema: Schema, root: Node) -> List[Diagnostic]:
    """Check every node of a tree against the schema; returns diagnostics, never raises."""
    diagnostics: List[Diagnostic] = []
    for node in traverse(root, Order.PRE):
        if not schema.has(node.category, node.alternative):
            diagnostics.append(
                Diagnostic(
                    f"unknown alternative {node.category}.{node.alternative} in schema {schema.tree_id}",
                    node.span,
                    "treekit",
                )
            )
            continue
        alt = schema.alternative(node.category, node.alternative)
        if node.origin != alt.origin_tree_id:
            diagnostics.append(
                Diagnostic(
                    f"{node.alternative} carries origin '{node.origin}', schema says '{alt.origin_tree_id}'",
                    node.span,
                    "treekit",
                )
            )
        for name, expected in _field_problems(schema, alt, node.fields):
            diagnostics.append(
                Diagnostic(f"{node.alternative}.{name}: expected {expected}", node.span, "treekit")
            )
    return diagnostics


class Order(str, Enum):
    PRE = "pre"
    POST = "post"


def traverse(root: Node, order: Union[Order, str] = Order.PRE) -> List[Node]:
    """All nodes of the tree, children in field-declaration order, list fields in element order."""
    order = Order(order)
    result: List[Node] = []
    if order is Order.PRE:
        stack = [root]
        while stack:
            node = stack.pop()
            result.append(node)
            stack.extend(reversed([child for _, child in node.children()]))
        return result

    pending: List[Tuple[Node, bool]] = [(root, False)]
    while pending:
        node, expanded = pending.pop()
        if expanded:
            result.append(node)
            continue
        pending.append((node, True))
        pending.extend((child, False) for _, child in reversed(list(node.children())))
    return result


class Analysis:
    """
    Handler table for one tree. Lookup order: exact (category, alternative)
    pair, then the category default, then the global default.
    """

    def __init__(self, tree_id: str, name: str = ""):
        self.tree_id = tree_id
        self.name = name or tree_id
        self.handlers: Dict[Tuple[str, str], Handler] = {}
        self.category_defaults: Dict[str, Handler] = {}
        self.global_default: Optional[Handler] = None

    def handles(self, category: str, *alternatives: str) -> Callable[[Handler], Handler]:
        def register(fn: Handler) -> Handler:
            for alternative in alternatives:
                self.handlers[(category, alternative)] = fn
            return fn

        return register

    def handles_category(self, category: str) -> Callable[[Handler], Handler]:
        def register(fn: Handler) -> Handler:
            self.category_defaults[category] = fn
            return fn

        return register

    def default(self, fn: Handler) -> Handler:
        self.global_default = fn
        return fn

    def lookup(self, node: Node) -> Handler:
        handler = self.handlers.get((node.category, node.alternative))
        if handler is None:
            handler = self.category_defaults.get(node.category, self.global_default)
        if handler is None:
            raise UnhandledNodeError(
                f"analysis '{self.name}' has no handler for {node.category}.{node.alternative}",
                node.span,
            )
        return handler

    def exact_pairs(self) -> FrozenSet[Tuple[str, str]]:
        return frozenset(self.handlers)

    def __repr__(self) -> str:
        return f"Analysis({self.name!r}, tree={self.tree_id!r}, pairs={len(self.handlers)})"


@dataclass(frozen=True)
class DispatchRecord:
    category: str
    alternative: str
    origin: str
    owner: str

    def __str__(self) -> str:
        return f"({self.category},{self.alternative},{self.origin},{self.owner})"


class Dispatcher:
    """
    Routes nodes to the analysis owning their origin tree. One analysis run
    at a time per dispatcher; counters are always kept, the per-node log
    only when ``record`` is set.
    """

    def __init__(self, record: bool = False):
        self.analyses: Dict[str, Analysis] = {}
        self.counters: Counter = Counter()
        self.record = record
        self.log: List[DispatchRecord] = []

    def register(self, tree_id: str, analysis: Analysis) -> "Dispatcher":
        if analysis.tree_id != tree_id:
            raise TreeError(f"analysis '{analysis.name}' serves '{analysis.tree_id}', not '{tree_id}'")
        if tree_id in self.analyses:
            raise DuplicateRegistrationError(f"an analysis is already registered for tree '{tree_id}'")
        self.analyses[tree_id] = analysis
        return self

    def dispatch(self, node: Node, context: Any = None) -> Any:
        analysis = self.analyses.get(node.origin)
        if analysis is None:
            raise MissingAnalysisError(node.origin, node.span)
        handler = analysis.lookup(node)
        self.counters[node.origin] += 1
        if self.record:
            self.log.append(DispatchRecord(node.category, node.alternative, node.origin, analysis.tree_id))
        try:
            return handler(node, context, self)
        except TreeforgeError as exc:
            if exc.span is None:
                exc.span = node.span
            raise
        except RecursionError as exc:
            raise HandlerError("evaluation nested too deeply", node.span) from exc
        except Exception as exc:
            raise HandlerError(
                f"{analysis.name} failed on {node.category}.{node.alternative}: {exc}", node.span
            ) from exc

    __call__ = dispatch

    def share(self, tree_id: str) -> float:
        total = sum(self.counters.values())
        return self.counters[tree_id] / total if total else 0.0

    def export_log(self) -> str:
        return "".join(f"{record}\n" for record in self.log)

    def reset(self) -> None:
        self.counters.clear()
        self.log.clear()


def register_analysis(dispatcher: Dispatcher, tree_id: str, analysis: Analysis) -> Dispatcher:
    return dispatcher.register(tree_id, analysis)


def run_analysis(root: Node, context: Any, *analyses: Analysis, record: bool = False) -> Any:
    """Dispatch a root node through a fresh dispatcher holding the given analyses."""
    dispatcher = Dispatcher(record=record)
    for analysis in analyses:
        dispatcher.register(analysis.tree_id, analysis)
    result = dispatcher.dispatch(root, context)
    logger.debug("analysis run counters: %s", dict(dispatcher.counters))
    return result
