"""SansType programs as typed statement lists, their C++-style rendering, and a reference evaluator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

TYPES = ("int", "string", "bool")
VAR_NAMES = tuple(f"var_{i}" for i in range(10))
STRINGS = tuple(f"str_{i}" for i in range(10))
INT_MIN, INT_MAX = 0, 100


@dataclass(frozen=True)
class Lit:
    """A literal value of one of the three types."""

    ty: str
    value: Union[int, str, bool]

    def code(self) -> str:
        if self.ty == "string":
            return f'"{self.value}"'
        if self.ty == "bool":
            return "true" if self.value else "false"
        return str(self.value)


@dataclass(frozen=True)
class Stdin:
    """Marks a declaration whose value is read from standard input."""


STDIN = Stdin()


@dataclass(frozen=True)
class Ref:
    """A variable used as an operand."""

    name: str


@dataclass(frozen=True)
class DeclareInit:
    ty: str
    var: str
    init: Union[Lit, Stdin]


@dataclass(frozen=True)
class Read:
    var: str


@dataclass(frozen=True)
class Assign:
    var: str
    value: Lit


@dataclass(frozen=True)
class PrependOrConcat:
    var: str
    value: Lit
    prepend: bool


@dataclass(frozen=True)
class AddSub:
    var: str
    op: str  # "+" or "-"
    operand: Union[Lit, Ref]


@dataclass(frozen=True)
class LogicalAnd:
    var: str
    other: str


@dataclass(frozen=True)
class CondSwap:
    """``if (guard) { T temp = a; a = b; b = temp; }``"""

    guard: str
    a: str
    b: str
    ty: str


@dataclass(frozen=True)
class Print:
    var: str


Statement = Union[DeclareInit, Read, Assign, PrependOrConcat, AddSub, LogicalAnd, CondSwap, Print]


@dataclass(frozen=True)
class Program:
    statements: tuple

    def __iter__(self):
        return iter(self.statements)

    def __len__(self):
        return len(self.statements)


def _operand(x) -> str:
    return x.name if isinstance(x, Ref) else x.code()


def statement_lines(stmt: Statement) -> list[str]:
    """Code lines for one statement, without the outer indentation."""
    if isinstance(stmt, DeclareInit):
        if isinstance(stmt.init, Stdin):
            return [f"{stmt.ty} {stmt.var};", f"cin >> {stmt.var};"]
        return [f"{stmt.ty} {stmt.var} = {stmt.init.code()};"]
    if isinstance(stmt, Read):
        return [f"cin >> {stmt.var};"]
    if isinstance(stmt, Assign):
        return [f"{stmt.var} = {stmt.value.code()};"]
    if isinstance(stmt, PrependOrConcat):
        if stmt.prepend:
            return [f"{stmt.var} = {stmt.value.code()} + {stmt.var};"]
        return [f"{stmt.var} = {stmt.var} + {stmt.value.code()};"]
    if isinstance(stmt, AddSub):
        return [f"{stmt.var} = {stmt.var} {stmt.op} {_operand(stmt.operand)};"]
    if isinstance(stmt, LogicalAnd):
        return [f"{stmt.var} = {stmt.var} && {stmt.other};"]
    if isinstance(stmt, CondSwap):
        return [
            f"if ( {stmt.guard} ) {{",
            f"  {stmt.ty} temp = {stmt.a};",
            f"  {stmt.a} = {stmt.b};",
            f"  {stmt.b} = temp; }}",
        ]
    if isinstance(stmt, Print):
        return [f"cout << {stmt.var};"]
    raise TypeError(f"not a statement: {stmt!r}")


def render_code(program: Program) -> str:
    lines = ["int main () {"]
    for stmt in program:
        lines.extend("  " + line for line in statement_lines(stmt))
    lines.append("  return 0; }")
    return "\n".join(lines) + "\n"


def format_value(ty: str, value) -> str:
    """How cout prints a value: bools as 0/1, ints in decimal, strings verbatim."""
    if ty == "bool":
        return "1" if value else "0"
    return str(value)


def parse_token(ty: str, token: str):
    """Read one stdin token as a value of type ty; raises ValueError on a mismatch."""
    if ty == "int":
        if not token.lstrip("-").isdigit():
            raise ValueError(f"expected an int, got {token!r}")
        return int(token)
    if ty == "bool":
        if token not in ("0", "1"):
            raise ValueError(f"expected 0 or 1 for a bool, got {token!r}")
        return token == "1"
    return token


def stdin_types(program: Program) -> list[str]:
    """Types of the values the program reads, in reading order."""
    types = {}
    order = []
    for stmt in program:
        if isinstance(stmt, DeclareInit):
            types[stmt.var] = stmt.ty
            if isinstance(stmt.init, Stdin):
                order.append(stmt.ty)
        elif isinstance(stmt, Read):
            order.append(types[stmt.var])
    return order


def evaluate(program: Program, stdin_tokens: list[str]) -> str:
    """Run a well-formed program directly on its statements and return its stdout."""
    env: dict[str, tuple[str, object]] = {}
    tokens = iter(stdin_tokens)
    out = []
    for stmt in program:
        if isinstance(stmt, DeclareInit):
            value = parse_token(stmt.ty, next(tokens)) if isinstance(stmt.init, Stdin) else stmt.init.value
            env[stmt.var] = (stmt.ty, value)
        elif isinstance(stmt, Read):
            ty = env[stmt.var][0]
            env[stmt.var] = (ty, parse_token(ty, next(tokens)))
        elif isinstance(stmt, Assign):
            env[stmt.var] = (env[stmt.var][0], stmt.value.value)
        elif isinstance(stmt, PrependOrConcat):
            ty, cur = env[stmt.var]
            env[stmt.var] = (ty, stmt.value.value + cur if stmt.prepend else cur + stmt.value.value)
        elif isinstance(stmt, AddSub):
            ty, cur = env[stmt.var]
            rhs = env[stmt.operand.name][1] if isinstance(stmt.operand, Ref) else stmt.operand.value
            env[stmt.var] = (ty, cur + rhs if stmt.op == "+" else cur - rhs)
        elif isinstance(stmt, LogicalAnd):
            ty, cur = env[stmt.var]
            env[stmt.var] = (ty, bool(cur and env[stmt.other][1]))
        elif isinstance(stmt, CondSwap):
            if env[stmt.guard][1]:
                env[stmt.a], env[stmt.b] = (env[stmt.a][0], env[stmt.b][1]), (env[stmt.b][0], env[stmt.a][1])
        elif isinstance(stmt, Print):
            out.append(format_value(*env[stmt.var]))
    return "".join(out)
