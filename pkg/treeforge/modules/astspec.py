"""
Tree specification files and the schemas compiled from them.

Spec grammar (line comments start with ``#``)::

    file        = "tree" Id ["extends" Id] { category }
    category    = "node" Id "=" alternative { alternative }
    alternative = "|" Id ["(" [field { "," field }] ")"]
    field       = Id ":" kind
    kind        = scalar | "list" ref | "opt" ref | ref
    scalar      = "int" | "real" | "bool" | "string" | "ident" | "literal"
    ref         = [Id "::"] Id
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from treeforge import BUNDLED_SPECS
from .errors import (
    BaseMismatchError,
    DuplicateNameError,
    IllegalOverrideError,
    QualifierWithoutBaseError,
    Span,
    UnknownAlternativeError,
    UnresolvedReferenceError,
)
from .lexer import TokenStream

__all__ = [
    "FieldKind",
    "FieldDecl",
    "AlternativeDecl",
    "CategoryDecl",
    "SpecAst",
    "Field",
    "Alternative",
    "Category",
    "Schema",
    "SCALAR_KINDS",
    "parse_spec",
    "build_schema",
    "extend_schema",
    "compile_spec",
    "bundled_schema",
    "describe_schema",
]

logger = logging.getLogger(__name__)

SCALAR_KINDS = ("int", "real", "bool", "string", "ident", "literal")
BASE_QUALIFIER = "base"
_KEYWORDS = ("tree", "extends", "node")


@dataclass(frozen=True)
class FieldKind:
    """Shape of a field: a scalar, or a (possibly list/opt) reference to a category."""

    shape: str  # scalar | node | list | opt
    name: str  # scalar type name or category name
    qualifier: Optional[str] = None
    target_tree: Optional[str] = field(default=None, compare=False)

    @property
    def is_scalar(self) -> bool:
        return self.shape == "scalar"

    def resolved(self, tree_id: str) -> "FieldKind":
        return FieldKind(self.shape, self.name, self.qualifier, tree_id)

    def __str__(self) -> str:
        if self.is_scalar:
            return self.name
        ref = f"{self.qualifier}::{self.name}" if self.qualifier else self.name
        return ref if self.shape == "node" else f"{self.shape} {ref}"


@dataclass(frozen=True)
class FieldDecl:
    name: str
    kind: FieldKind
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class AlternativeDecl:
    name: str
    fields: Tuple[FieldDecl, ...]
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class CategoryDecl:
    name: str
    alternatives: Tuple[AlternativeDecl, ...]
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class SpecAst:
    tree_id: str
    extends_id: Optional[str]
    categories: Tuple[CategoryDecl, ...]
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Field:
    name: str
    kind: FieldKind


@dataclass(frozen=True)
class Alternative:
    name: str
    category: str
    origin_tree_id: str
    fields: Tuple[Field, ...]

    def field(self, name: str) -> Optional[Field]:
        for candidate in self.fields:
            if candidate.name == name:
                return candidate
        return None

    @property
    def field_names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in self.fields)


@dataclass(frozen=True)
class Category:
    name: str
    origin_tree_id: str
    alternatives: Mapping[str, Alternative]

    def __post_init__(self):
        object.__setattr__(self, "alternatives", MappingProxyType(dict(self.alternatives)))


@dataclass(frozen=True)
class Schema:
    """Compiled, immutable metamodel of a tree specification."""

    tree_id: str
    base_tree_id: Optional[str]
    categories: Mapping[str, Category]

    def __post_init__(self):
        object.__setattr__(self, "categories", MappingProxyType(dict(self.categories)))

    @property
    def is_extension(self) -> bool:
        return self.base_tree_id is not None

    def has(self, category: str, alternative: str) -> bool:
        cat = self.categories.get(category)
        return cat is not None and alternative in cat.alternatives

    def alternative(self, category: str, alternative: str) -> Alternative:
        cat = self.categories.get(category)
        if cat is None or alternative not in cat.alternatives:
            raise UnknownAlternativeError(
                f"schema '{self.tree_id}' declares no alternative {category}.{alternative}"
            )
        return cat.alternatives[alternative]

    def pairs(self) -> Iterator[Alternative]:
        for cat in self.categories.values():
            yield from cat.alternatives.values()

    def origin_trees(self) -> Tuple[str, ...]:
        if self.base_tree_id is None:
            return (self.tree_id,)
        return (self.base_tree_id, self.tree_id)


def _check_unique(items, what: str) -> None:
    seen: Dict[str, Optional[Span]] = {}
    for item in items:
        if item.name in seen:
            raise DuplicateNameError(what, item.name, seen[item.name], item.span)
        seen[item.name] = item.span


class _SpecParser:
    def __init__(self, text: str):
        self.stream = TokenStream.from_source(text, comment="#")

    def parse(self) -> SpecAst:
        s = self.stream
        start = s.expect("tree")
        tree_id = s.expect_ident("tree identifier", _KEYWORDS).text
        extends_id = None
        if s.accept("extends"):
            extends_id = s.expect_ident("base tree identifier", _KEYWORDS).text
        categories: List[CategoryDecl] = []
        while not s.at_eof():
            categories.append(self.category())
        _check_unique(categories, "category")
        return SpecAst(tree_id, extends_id, tuple(categories), start.span)

    def category(self) -> CategoryDecl:
        s = self.stream
        start = s.expect("node")
        name = s.expect_ident("category name", _KEYWORDS).text
        s.expect("=")
        if not s.at("|"):
            raise s.error("expected '|' starting an alternative")
        alternatives: List[AlternativeDecl] = []
        while s.at("|"):
            alternatives.append(self.alternative())
        _check_unique(alternatives, f"alternative in category '{name}'")
        return CategoryDecl(name, tuple(alternatives), start.span)

    def alternative(self) -> AlternativeDecl:
        s = self.stream
        s.expect("|")
        token = s.expect_ident("alternative name", _KEYWORDS)
        fields: List[FieldDecl] = []
        if s.accept("("):
            if not s.at(")"):
                fields.append(self.field())
                while s.accept(","):
                    fields.append(self.field())
            s.expect(")")
        _check_unique(fields, f"field in alternative '{token.text}'")
        return AlternativeDecl(token.text, tuple(fields), token.span)

    def field(self) -> FieldDecl:
        s = self.stream
        token = s.expect_ident("field name", _KEYWORDS)
        s.expect(":")
        return FieldDecl(token.text, self.kind(), token.span)

    def kind(self) -> FieldKind:
        s = self.stream
        if s.peek().text in SCALAR_KINDS and not s.peek(1).text == "::":
            return FieldKind("scalar", s.advance().text)
        shape = "node"
        if s.at("list", "opt") and s.peek(1).text != "::":
            shape = s.advance().text
        first = s.expect_ident("category reference", _KEYWORDS).text
        if s.accept("::"):
            return FieldKind(shape, s.expect_ident("category name", _KEYWORDS).text, first)
        return FieldKind(shape, first)


def parse_spec(text: str) -> SpecAst:
    """
    Parse a tree specification into its SpecAst, keeping source order.

    :raises ParseError: On malformed input, with line/column.
    :raises DuplicateNameError: On a repeated category, alternative or field.
    """
    return _SpecParser(text).parse()


def _field_spans(spec_ast: SpecAst) -> Iterator[Tuple[CategoryDecl, AlternativeDecl, FieldDecl]]:
    for cat in spec_ast.categories:
        for alt in cat.alternatives:
            for fdecl in alt.fields:
                yield cat, alt, fdecl


def _compile_category(
    cat: CategoryDecl, tree_id: str, resolve
) -> Category:
    alternatives = {}
    for alt in cat.alternatives:
        fields = []
        for fdecl in alt.fields:
            kind = fdecl.kind
            if not kind.is_scalar:
                kind = kind.resolved(resolve(kind, fdecl.span))
            fields.append(Field(fdecl.name, kind))
        alternatives[alt.name] = Alternative(alt.name, cat.name, tree_id, tuple(fields))
    return Category(cat.name, tree_id, alternatives)


def build_schema(spec_ast: SpecAst) -> Schema:
    """
    Compile a base specification (no ``extends`` header) into a Schema.

    :raises BaseMismatchError: If the spec declares a base tree.
    :raises QualifierWithoutBaseError: If any reference is tree-qualified.
    :raises UnresolvedReferenceError: If a reference names no declared category.
    """
    if spec_ast.extends_id is not None:
        raise BaseMismatchError(
            f"tree '{spec_ast.tree_id}' extends '{spec_ast.extends_id}'; compile it against its base",
            spec_ast.span,
        )
    declared = {cat.name for cat in spec_ast.categories}
    for _, _, fdecl in _field_spans(spec_ast):
        if fdecl.kind.qualifier is not None:
            raise QualifierWithoutBaseError(
                f"qualified reference '{fdecl.kind}' in a tree without a base", fdecl.span
            )

    def resolve(kind: FieldKind, span: Optional[Span]) -> str:
        if kind.name not in declared:
            raise UnresolvedReferenceError(kind.name, span)
        return spec_ast.tree_id

    categories = {
        cat.name: _compile_category(cat, spec_ast.tree_id, resolve)
        for cat in spec_ast.categories
    }
    schema = Schema(spec_ast.tree_id, None, categories)
    logger.debug("compiled schema %s with %d categories", schema.tree_id, len(categories))
    return schema


def extend_schema(base: Schema, ext_ast: SpecAst) -> Schema:
    """
    Merge an extension specification over a base schema.

    Base elements keep their origin; extension elements carry the
    extension's tree id. The base schema is never mutated.

    :raises BaseMismatchError: If the extension does not name this base.
    :raises IllegalOverrideError: If the extension redeclares a base category.
    :raises UnresolvedReferenceError: If a reference resolves nowhere.
    """
    if ext_ast.extends_id != base.tree_id:
        raise BaseMismatchError(
            f"tree '{ext_ast.tree_id}' extends '{ext_ast.extends_id}', not '{base.tree_id}'",
            ext_ast.span,
        )
    if base.is_extension:
        raise BaseMismatchError(
            f"'{base.tree_id}' is itself an extension and cannot serve as a base", ext_ast.span
        )
    if ext_ast.tree_id == base.tree_id:
        raise BaseMismatchError(
            f"extension reuses the base tree id '{base.tree_id}'", ext_ast.span
        )
    for cat in ext_ast.categories:
        if cat.name in base.categories:
            raise IllegalOverrideError(
                f"extension '{ext_ast.tree_id}' redeclares base category '{cat.name}'", cat.span
            )

    own = {cat.name for cat in ext_ast.categories}

    def resolve(kind: FieldKind, span: Optional[Span]) -> str:
        if kind.qualifier is not None:
            if kind.qualifier not in (BASE_QUALIFIER, base.tree_id):
                raise UnresolvedReferenceError(f"{kind.qualifier}::{kind.name}", span)
            if kind.name not in base.categories:
                raise UnresolvedReferenceError(kind.name, span)
            return base.tree_id
        if kind.name in own:
            return ext_ast.tree_id
        if kind.name in base.categories:
            return base.tree_id
        raise UnresolvedReferenceError(kind.name, span)

    categories: Dict[str, Category] = dict(base.categories)
    for cat in ext_ast.categories:
        categories[cat.name] = _compile_category(cat, ext_ast.tree_id, resolve)
    schema = Schema(ext_ast.tree_id, base.tree_id, categories)
    logger.debug(
        "extended %s with %s: %d new categories", base.tree_id, schema.tree_id, len(own)
    )
    return schema


def compile_spec(text: str, base: Optional[Schema] = None) -> Schema:
    """Parse and compile a spec, choosing build or extend from its header."""
    spec_ast = parse_spec(text)
    if spec_ast.extends_id is None:
        return build_schema(spec_ast)
    if base is None:
        raise BaseMismatchError(
            f"tree '{spec_ast.tree_id}' extends '{spec_ast.extends_id}' but no base schema was given",
            spec_ast.span,
        )
    return extend_schema(base, spec_ast)


def bundled_spec_text(name: str) -> str:
    return (
        resources.files("treeforge")
        .joinpath("specs")
        .joinpath(BUNDLED_SPECS[name])
        .read_text(encoding="utf-8")
    )


@lru_cache(maxsize=None)
def bundled_schema(name: str) -> Schema:
    """
    Compile one of the packaged specifications: ``base_l``, ``proc_l`` or ``ir``.
    Extension specs are compiled against their bundled base.
    """
    if name == "proc_l":
        return compile_spec(bundled_spec_text(name), bundled_schema("base_l"))
    return compile_spec(bundled_spec_text(name))


def describe_schema(schema: Schema) -> List[Tuple[str, str, str, str]]:
    """Rows of (category, alternative, origin, field signature) in declaration order."""
    rows = []
    for alt in schema.pairs():
        signature = ", ".join(f"{f.name}: {f.kind}" for f in alt.fields)
        rows.append((alt.category, alt.name, alt.origin_tree_id, f"({signature})"))
    return rows
