"""
Base-L: the base demonstration notation.

Surface syntax::

    module M
    values
      limit = 10
    state
      shared level : real := 2.5
      count : int := 0
    functions
      f: int -> int
      f(x) == x + 1
      isqrt(x: int) r: int
      pre x >= 0
      post r * r <= x and (r + 1) * (r + 1) > x
    operations
      inc() == count := count + 1
      dec() == count := count - 1
      pre count > 0
    traces
      T1: inc(){1,3} ; dec()

Comments run from ``--`` to the end of the line.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from treeforge import BASE_TREE
from .astspec import Schema, bundled_schema
from .errors import ParseError, Span
from .lexer import EOF, IDENT, INT, REAL, Token, TokenStream
from .treekit import Node, make_node

__all__ = [
    "Value",
    "TYPES",
    "BaseModule",
    "BaseParser",
    "parse_module",
    "parse_expression",
    "render_exp",
    "format_value",
    "format_real",
    "value_type",
    "base_schema",
]

Value = Union[int, float, bool]

TYPES = ("int", "real", "bool")
SECTIONS = ("values", "state", "functions", "operations", "traces")
KEYWORDS = frozenset(
    {
        "module", "values", "state", "functions", "operations", "traces",
        "if", "then", "else", "let", "in", "and", "or", "not", "div", "mod",
        "true", "false", "pre", "post", "return", "skip", "shared",
        "int", "real", "bool", "processes", "process", "plant", "cosim",
    }
)
COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")


def base_schema() -> Schema:
    return bundled_schema("base_l")


def value_type(value: Value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    return "real"


def format_real(value: float) -> str:
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        return text
    mantissa, _, exponent = text.partition("e")
    if "." not in mantissa:
        mantissa += ".0"
    return f"{mantissa}e{exponent}" if exponent else mantissa


def format_value(value: Optional[Value]) -> str:
    if value is None:
        return "()"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return format_real(value)


@dataclass(frozen=True)
class BaseModule:
    """A parsed Base-L document: the Module node plus indexed definitions."""

    root: Node
    source: str = field(default="", repr=False, compare=False)

    @property
    def name(self) -> str:
        return self.root["name"]

    @property
    def defs(self) -> Tuple[Node, ...]:
        return self.root["defs"]

    def _of(self, *alternatives: str) -> List[Node]:
        return [d for d in self.defs if d.alternative in alternatives]

    @property
    def value_defs(self) -> List[Node]:
        return self._of("ValueDef")

    @property
    def state_defs(self) -> List[Node]:
        return self._of("StateDef")

    @property
    def function_defs(self) -> List[Node]:
        return self._of("ExplicitFn", "ImplicitFn")

    @property
    def operation_defs(self) -> List[Node]:
        return self._of("Operation")

    @property
    def trace_defs(self) -> List[Node]:
        return self._of("TraceDef")

    def function(self, name: str) -> Optional[Node]:
        for fn in self.function_defs:
            if fn["name"] == name:
                return fn
        return None

    def operation(self, name: str) -> Optional[Node]:
        for op in self.operation_defs:
            if op["name"] == name:
                return op
        return None

    def trace(self, name: str) -> Optional[Node]:
        for trace in self.trace_defs:
            if trace["name"] == name:
                return trace
        return None

    @property
    def state_types(self) -> Dict[str, str]:
        return {s["name"]: s["type"] for s in self.state_defs}

    @property
    def shared_names(self) -> Tuple[str, ...]:
        return tuple(s["name"] for s in self.state_defs if s["shared"])


def params_of(definition: Node) -> List[Tuple[str, str]]:
    """(name, type) pairs of a function or operation."""
    return [(p["name"], p["type"]) for p in definition["params"]]


def is_implicit(fn: Node) -> bool:
    return fn.alternative == "ImplicitFn"


class BaseParser:
    """
    Recursive-descent parser for Base-L. Extension notations subclass it and
    add sections; the expression and statement grammar is shared.
    """

    sections: Sequence[str] = SECTIONS

    def __init__(self, text: str, schema: Optional[Schema] = None):
        self.text = text
        self.stream = TokenStream.from_source(text, comment="--")
        self.schema = schema or base_schema()
        self.base = base_schema()

    # helpers

    def node(self, category: str, alternative: str, token: Optional[Token] = None, **values) -> Node:
        return make_node(self.base, category, alternative, values, span=token.span if token else None)

    def name(self, what: str) -> Token:
        return self.stream.expect_ident(what, KEYWORDS)

    def type_name(self) -> str:
        s = self.stream
        token = s.peek()
        if token.kind != IDENT or token.text not in TYPES:
            raise s.error("expected a type (int, real or bool)")
        return s.advance().text

    # module

    def parse_module(self) -> Node:
        s = self.stream
        start = s.peek()
        name = "Main"
        if s.accept("module"):
            name = self.name("module name").text
        defs: List[Node] = []
        while s.at(*self.sections):
            defs.extend(self.section(s.advance()))
        return self.node("Def", "Module", start, name=name, defs=defs)

    def expect_end(self) -> None:
        if not self.stream.at_eof():
            raise self.stream.error("expected a section keyword or end of input")

    def section(self, keyword: Token) -> List[Node]:
        parse_entry = {
            "values": self.value_def,
            "state": self.state_def,
            "functions": None,
            "operations": self.operation_def,
            "traces": self.trace_def,
        }[keyword.text]
        if parse_entry is None:
            return self.functions_section()
        entries: List[Node] = []
        while self.at_entry():
            entries.append(parse_entry())
        return entries

    def at_entry(self) -> bool:
        token = self.stream.peek()
        return token.kind == IDENT and (token.text not in KEYWORDS or token.text == "shared")

    def value_def(self) -> Node:
        token = self.name("value name")
        self.stream.expect("=")
        return self.node("Def", "ValueDef", token, name=token.text, value=self.expression())

    def state_def(self) -> Node:
        s = self.stream
        shared = s.accept("shared") is not None
        token = self.name("state variable name")
        s.expect(":")
        type_name = self.type_name()
        s.expect(":=")
        init = self.expression()
        return self.node(
            "Def", "StateDef", token, name=token.text, type=type_name, init=init, shared=shared
        )

    def trace_def(self) -> Node:
        token = self.name("trace name")
        self.stream.expect(":")
        text = self.stream.rest_of_line()
        if not text:
            raise self.stream.error("expected a trace expression")
        return self.node("Def", "TraceDef", token, name=token.text, text=text)

    def typed_params(self) -> List[Node]:
        s = self.stream
        s.expect("(")
        params: List[Node] = []
        if not s.at(")"):
            while True:
                token = self.name("parameter name")
                s.expect(":")
                params.append(self.node("Def", "Param", token, name=token.text, type=self.type_name()))
                if not s.accept(","):
                    break
        s.expect(")")
        return params

    def conditions(self) -> Tuple[Optional[Node], Optional[Node]]:
        s = self.stream
        pre = self.expression() if s.accept("pre") else None
        post = self.expression() if s.accept("post") else None
        return pre, post

    def functions_section(self) -> List[Node]:
        s = self.stream
        signatures: Dict[str, Tuple[Token, List[str], str]] = {}
        functions: List[Node] = []
        while self.at_entry():
            token = self.name("function name")
            if s.accept(":"):
                signatures[token.text] = (token, *self.signature())
                continue
            if s.peek(1).text == ")" or s.peek(2).text == ":":
                # f() ... or f(a: T ...: decide on what follows the parameter list
                functions.append(self.function_after_name(token, signatures))
            else:
                functions.append(self.explicit_function(token, signatures))
        for name, (token, _, _) in signatures.items():
            raise ParseError(f"signature of '{name}' has no defining equation", token.span)
        return functions

    def signature(self) -> Tuple[List[str], str]:
        s = self.stream
        arg_types: List[str] = []
        if s.accept("("):
            s.expect(")")
        else:
            arg_types.append(self.type_name())
            while s.accept("*"):
                arg_types.append(self.type_name())
        s.expect("->")
        return arg_types, self.type_name()

    def function_after_name(self, token: Token, signatures) -> Node:
        s = self.stream
        if s.peek(1).text == ")" and s.peek(2).text == "==":
            return self.explicit_function(token, signatures)
        params = self.typed_params()
        result = self.name("result name")
        s.expect(":")
        result_type = self.type_name()
        pre, post = self.conditions()
        if post is None:
            raise s.error(f"implicit function '{token.text}' needs a post-condition")
        return self.node(
            "Def",
            "ImplicitFn",
            token,
            name=token.text,
            params=params,
            result=result.text,
            resultType=result_type,
            pre=pre,
            post=post,
        )

    def explicit_function(self, token: Token, signatures) -> Node:
        s = self.stream
        if token.text not in signatures:
            raise ParseError(f"function '{token.text}' has no signature", token.span)
        _, arg_types, result_type = signatures.pop(token.text)
        s.expect("(")
        names: List[Token] = []
        if not s.at(")"):
            names.append(self.name("parameter name"))
            while s.accept(","):
                names.append(self.name("parameter name"))
        s.expect(")")
        if len(names) != len(arg_types):
            raise ParseError(
                f"'{token.text}' takes {len(arg_types)} parameter(s) by its signature, {len(names)} given",
                token.span,
            )
        s.expect("==")
        body = self.expression()
        pre, post = self.conditions()
        params = [
            self.node("Def", "Param", p, name=p.text, type=t) for p, t in zip(names, arg_types)
        ]
        return self.node(
            "Def",
            "ExplicitFn",
            token,
            name=token.text,
            params=params,
            resultType=result_type,
            body=body,
            pre=pre,
            post=post,
        )

    def operation_def(self) -> Node:
        token = self.name("operation name")
        params = self.typed_params()
        self.stream.expect("==")
        body = self.statements()
        pre, post = self.conditions()
        return self.node(
            "Def", "Operation", token, name=token.text, params=params, body=body, pre=pre, post=post
        )

    # statements

    def statements(self) -> Node:
        first = self.statement()
        token = self.stream.accept(";")
        if token is None:
            return first
        return self.node("Stmt", "Block", token, first=first, second=self.statements())

    def statement(self) -> Node:
        s = self.stream
        token = s.peek()
        if s.accept("("):
            inner = self.statements()
            s.expect(")")
            return inner
        if s.accept("skip"):
            return self.node("Stmt", "Skip", token)
        if s.accept("return"):
            return self.node("Stmt", "Return", token, value=self.expression())
        if s.accept("if"):
            cond = self.expression()
            s.expect("then")
            then = self.statement()
            s.expect("else")
            return self.node("Stmt", "IfStmt", token, cond=cond, then=then, orelse=self.statement())
        target = self.name("statement")
        s.expect(":=")
        return self.node("Stmt", "Assign", token, target=target.text, value=self.expression())

    # expressions

    def expression(self) -> Node:
        return self.or_expr()

    def binary_level(self, operators: Sequence[str], operand) -> Node:
        left = operand()
        while self.stream.at(*operators):
            token = self.stream.advance()
            left = self.node("Exp", "Binary", token, op=token.text, left=left, right=operand())
        return left

    def or_expr(self) -> Node:
        return self.binary_level(("or",), self.and_expr)

    def and_expr(self) -> Node:
        return self.binary_level(("and",), self.not_expr)

    def not_expr(self) -> Node:
        token = self.stream.accept("not")
        if token is not None:
            return self.node("Exp", "Unary", token, op="not", operand=self.not_expr())
        return self.comparison()

    def comparison(self) -> Node:
        left = self.additive()
        if self.stream.at(*COMPARISONS):
            token = self.stream.advance()
            left = self.node("Exp", "Binary", token, op=token.text, left=left, right=self.additive())
        return left

    def additive(self) -> Node:
        return self.binary_level(("+", "-"), self.multiplicative)

    def multiplicative(self) -> Node:
        return self.binary_level(("*", "/", "div", "mod"), self.unary)

    def unary(self) -> Node:
        token = self.stream.accept("-")
        if token is not None:
            return self.node("Exp", "Unary", token, op="-", operand=self.unary())
        return self.primary()

    def primary(self) -> Node:
        s = self.stream
        token = s.peek()
        if token.kind == INT:
            s.advance()
            return self.node("Exp", "IntLit", token, value=int(token.text))
        if token.kind == REAL:
            s.advance()
            return self.node("Exp", "RealLit", token, value=float(token.text))
        if s.accept("true", "false"):
            return self.node("Exp", "BoolLit", token, value=token.text == "true")
        if s.accept("("):
            inner = self.expression()
            s.expect(")")
            return inner
        if s.accept("if"):
            cond = self.expression()
            s.expect("then")
            then = self.expression()
            s.expect("else")
            return self.node("Exp", "If", token, cond=cond, then=then, orelse=self.expression())
        if s.accept("let"):
            name = self.name("let-bound name")
            s.expect("=")
            bound = self.expression()
            s.expect("in")
            return self.node("Exp", "Let", token, name=name.text, bound=bound, body=self.expression())
        if token.kind == IDENT and token.text not in KEYWORDS:
            s.advance()
            if s.accept("("):
                args: List[Node] = []
                if not s.at(")"):
                    args.append(self.expression())
                    while s.accept(","):
                        args.append(self.expression())
                s.expect(")")
                return self.node("Exp", "Apply", token, fn=token.text, args=args)
            return self.node("Exp", "Var", token, name=token.text)
        raise s.error("expected an expression")


def parse_module(text: str) -> BaseModule:
    """
    Parse Base-L source into a BaseModule.

    :raises ParseError: With the location of the first syntax error.
    """
    parser = BaseParser(text)
    root = parser.parse_module()
    parser.expect_end()
    return BaseModule(root, text)


def parse_expression(text: str) -> Node:
    """Parse a standalone Base-L expression."""
    parser = BaseParser(text)
    exp = parser.expression()
    if not parser.stream.at_eof():
        raise parser.stream.error("unexpected input after expression")
    return exp


_PRECEDENCE: Mapping[str, int] = {
    "or": 1, "and": 2, "=": 4, "<>": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6, "div": 6, "mod": 6,
}


def _precedence(exp: Node) -> int:
    if exp.alternative == "Binary":
        return _PRECEDENCE[exp["op"]]
    if exp.alternative == "Unary":
        return 3 if exp["op"] == "not" else 7
    if exp.alternative in ("If", "Let"):
        return 0
    return 8


def render_exp(exp: Node) -> str:
    """Print an expression back to Base-L source with minimal parentheses."""
    alt = exp.alternative
    if alt in ("IntLit", "RealLit", "BoolLit"):
        return format_value(exp["value"])
    if alt == "Var":
        return exp["name"]
    if alt == "Apply":
        return f"{exp['fn']}({', '.join(render_exp(a) for a in exp['args'])})"
    if alt == "If":
        return f"if {render_exp(exp['cond'])} then {render_exp(exp['then'])} else {render_exp(exp['orelse'])}"
    if alt == "Let":
        return f"let {exp['name']} = {render_exp(exp['bound'])} in {render_exp(exp['body'])}"

    def wrap(child: Node, minimum: int) -> str:
        text = render_exp(child)
        return f"({text})" if _precedence(child) < minimum else text

    own = _precedence(exp)
    if alt == "Unary":
        if exp["op"] == "not":
            return f"not {wrap(exp['operand'], own)}"
        operand = wrap(exp["operand"], own)
        # "--" opens a comment
        return f"-({operand})" if operand.startswith("-") else f"-{operand}"
    left_min = own + 1 if own == 4 else own
    return f"{wrap(exp['left'], left_min)} {exp['op']} {wrap(exp['right'], own + 1)}"
