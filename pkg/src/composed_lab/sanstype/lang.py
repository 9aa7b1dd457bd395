"""Tokenizer, parser, static checker, and interpreter for the SansType C++ subset.

The accepted shape is ``int main () { <statements> return 0; }`` where a
statement is a declaration (with or without initializer), an assignment,
``cin >> x;``, ``cout << expr;`` or ``if ( expr ) { <statements> }``.
Typing is strict: no implicit conversions between int, string and bool.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from . import program as P

KEYWORDS = {"int", "string", "bool", "cin", "cout", "if", "return", "main", "true", "false"}
_TOKEN = re.compile(r'\s*(?:(\d+)|("[^"\n]*")|([A-Za-z_]\w*)|(<<|>>|&&|[(){};=+\-]))')


class CompileError(Exception):
    pass


class ExecError(Exception):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "str", "name", "sym", "eof"
    text: str
    line: int


def tokenize(code: str) -> list[Token]:
    tokens = []
    pos = 0
    line = 1
    while True:
        m = _TOKEN.match(code, pos)
        if m is None or m.end() == pos:
            rest = code[pos:]
            if rest.strip() == "":
                break
            line += code.count("\n", 0, pos) - (line - 1)
            raise CompileError(f"line {line}: unexpected character {rest.strip()[0]!r}")
        line = code.count("\n", 0, m.start(m.lastindex)) + 1
        num, string, name, sym = m.groups()
        if num is not None:
            tokens.append(Token("int", num, line))
        elif string is not None:
            tokens.append(Token("str", string[1:-1], line))
        elif name is not None:
            tokens.append(Token("name", name, line))
        else:
            tokens.append(Token("sym", sym, line))
        pos = m.end()
    tokens.append(Token("eof", "", code.count("\n") + 1))
    return tokens


# --- syntax tree -----------------------------------------------------------


@dataclass(frozen=True)
class Name:
    name: str
    line: int


@dataclass(frozen=True)
class Const:
    ty: str
    value: Union[int, str, bool]


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expr"
    right: "Expr"
    line: int


Expr = Union[Name, Const, Bin]


@dataclass(frozen=True)
class VarDecl:
    ty: str
    name: str
    init: Union[Expr, None]
    line: int


@dataclass(frozen=True)
class AssignStmt:
    name: str
    expr: Expr
    line: int


@dataclass(frozen=True)
class Cin:
    name: str
    line: int


@dataclass(frozen=True)
class Cout:
    expr: Expr
    line: int


@dataclass(frozen=True)
class If:
    cond: Expr
    body: tuple
    line: int


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, what: str):
        t = self.tok
        got = "end of input" if t.kind == "eof" else repr(t.text)
        raise CompileError(f"line {t.line}: expected {what}, got {got}")

    def eat(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind in ("str", "eof"):
            self.fail(repr(text))
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.fail("a variable name")
        self.i += 1
        return t.text

    def program(self) -> tuple:
        for text in ("int", "main", "(", ")", "{"):
            self.eat(text)
        body = self.block(end="return")
        for text in ("return", "0", ";", "}"):
            self.eat(text)
        if self.tok.kind != "eof":
            self.fail("end of input")
        return body

    def block(self, end: str) -> tuple:
        stmts = []
        while not (self.tok.text == end and self.tok.kind in ("name", "sym")):
            if self.tok.kind == "eof":
                self.fail(repr(end))
            stmts.append(self.statement())
        return tuple(stmts)

    def statement(self):
        t = self.tok
        if t.kind == "name" and t.text in P.TYPES:
            self.i += 1
            name = self.ident()
            init = None
            if self.tok.text == "=":
                self.i += 1
                init = self.expr()
            self.eat(";")
            return VarDecl(t.text, name, init, t.line)
        if t.text == "cin" and t.kind == "name":
            self.i += 1
            self.eat(">>")
            name = self.ident()
            self.eat(";")
            return Cin(name, t.line)
        if t.text == "cout" and t.kind == "name":
            self.i += 1
            self.eat("<<")
            e = self.expr()
            self.eat(";")
            return Cout(e, t.line)
        if t.text == "if" and t.kind == "name":
            self.i += 1
            self.eat("(")
            cond = self.expr()
            self.eat(")")
            self.eat("{")
            body = self.block(end="}")
            self.eat("}")
            return If(cond, body, t.line)
        name = self.ident()
        self.eat("=")
        e = self.expr()
        self.eat(";")
        return AssignStmt(name, e, t.line)

    def expr(self) -> Expr:
        left = self.primary()
        while self.tok.kind == "sym" and self.tok.text in ("+", "-", "&&"):
            op = self.tok
            self.i += 1
            left = Bin(op.text, left, self.primary(), op.line)
        return left

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Const("int", int(t.text))
        if t.kind == "str":
            self.i += 1
            return Const("string", t.text)
        if t.kind == "name" and t.text in ("true", "false"):
            self.i += 1
            return Const("bool", t.text == "true")
        return Name(self.ident(), t.line)


def parse(code: str) -> tuple:
    """Parse a whole program into a tuple of syntax-tree statements."""
    return _Parser(tokenize(code)).program()


# --- static checking -------------------------------------------------------


def _lookup(scopes, name: str, line: int) -> str:
    for scope in reversed(scopes):
        if name in scope:
            return scope[name]
    raise CompileError(f"line {line}: '{name}' was not declared in this scope")


def _type_of(expr: Expr, scopes) -> str:
    if isinstance(expr, Const):
        return expr.ty
    if isinstance(expr, Name):
        return _lookup(scopes, expr.name, expr.line)
    lt, rt = _type_of(expr.left, scopes), _type_of(expr.right, scopes)
    allowed = {"+": ("int", "string"), "-": ("int",), "&&": ("bool",)}[expr.op]
    if lt != rt or lt not in allowed:
        raise CompileError(f"line {expr.line}: invalid operands of types {lt} and {rt} to '{expr.op}'")
    return lt


def _check_block(stmts, scopes) -> None:
    for s in stmts:
        if isinstance(s, VarDecl):
            if s.name in scopes[-1]:
                raise CompileError(f"line {s.line}: redeclaration of '{s.name}'")
            if s.init is not None:
                ty = _type_of(s.init, scopes)
                if ty != s.ty:
                    raise CompileError(f"line {s.line}: cannot initialise {s.ty} '{s.name}' with a {ty}")
            scopes[-1][s.name] = s.ty
        elif isinstance(s, AssignStmt):
            want = _lookup(scopes, s.name, s.line)
            ty = _type_of(s.expr, scopes)
            if ty != want:
                raise CompileError(f"line {s.line}: cannot assign a {ty} to {want} '{s.name}'")
        elif isinstance(s, Cin):
            _lookup(scopes, s.name, s.line)
        elif isinstance(s, Cout):
            _type_of(s.expr, scopes)
        elif isinstance(s, If):
            if _type_of(s.cond, scopes) != "bool":
                raise CompileError(f"line {s.line}: if condition must be a bool")
            scopes.append({})
            _check_block(s.body, scopes)
            scopes.pop()


def typecheck(stmts) -> None:
    _check_block(stmts, [{}])


# --- execution -------------------------------------------------------------

_UNSET = object()


class _Machine:
    def __init__(self, stdin: str):
        self.tokens = stdin.split()
        self.pos = 0
        self.out: list[str] = []
        self.scopes: list[dict] = [{}]

    def cell(self, name: str) -> list:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise ExecError(f"'{name}' is not declared")  # unreachable after typecheck

    def value(self, expr: Expr):
        if isinstance(expr, Const):
            return expr.value
        if isinstance(expr, Name):
            v = self.cell(expr.name)[1]
            if v is _UNSET:
                raise ExecError(f"line {expr.line}: '{expr.name}' is used before it has a value")
            return v
        a, b = self.value(expr.left), self.value(expr.right)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        return bool(a and b)

    def type_of(self, expr: Expr) -> str:
        if isinstance(expr, Const):
            return expr.ty
        if isinstance(expr, Name):
            return self.cell(expr.name)[0]
        return self.type_of(expr.left)

    def run(self, stmts) -> None:
        for s in stmts:
            if isinstance(s, VarDecl):
                v = _UNSET if s.init is None else self.value(s.init)
                self.scopes[-1][s.name] = [s.ty, v]
            elif isinstance(s, AssignStmt):
                v = self.value(s.expr)
                self.cell(s.name)[1] = v
            elif isinstance(s, Cin):
                c = self.cell(s.name)
                if self.pos >= len(self.tokens):
                    raise ExecError(f"line {s.line}: stdin is exhausted")
                try:
                    c[1] = P.parse_token(c[0], self.tokens[self.pos])
                except ValueError as e:
                    raise ExecError(f"line {s.line}: {e}") from None
                self.pos += 1
            elif isinstance(s, Cout):
                self.out.append(P.format_value(self.type_of(s.expr), self.value(s.expr)))
            elif isinstance(s, If):
                if self.value(s.cond):
                    self.scopes.append({})
                    self.run(s.body)
                    self.scopes.pop()


def execute(stmts, stdin: str) -> str:
    """Run a type-checked program on whitespace-separated stdin tokens and return its stdout."""
    m = _Machine(stdin)
    m.run(stmts)
    return "".join(m.out)


# --- outcome classification ------------------------------------------------

OUTCOMES = ("Correct", "ExecErr", "CompileErr")
EXIT_CODES = {"Correct": 0, "ExecErr": 1, "CompileErr": 2}


@dataclass(frozen=True)
class Outcome:
    kind: str
    message: str = ""

    def __post_init__(self):
        if self.kind not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.kind!r}")

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.kind]


def check(code: str, tests) -> Outcome:
    """Classify code against test cases as CompileErr, ExecErr or Correct.

    A run that finishes but prints the wrong output counts as ExecErr.
    """
    try:
        stmts = parse(code)
        typecheck(stmts)
    except CompileError as e:
        return Outcome("CompileErr", str(e))
    for i, test in enumerate(tests):
        try:
            got = execute(stmts, test.get("stdin", ""))
        except ExecError as e:
            return Outcome("ExecErr", f"test {i}: {e}")
        if got != test.get("stdout", ""):
            return Outcome("ExecErr", f"test {i}: expected {test.get('stdout', '')!r}, got {got!r}")
    return Outcome("Correct")


# --- lifting back to Program ----------------------------------------------


class NotLiftable(ValueError):
    pass


def _lit(c) -> P.Lit:
    if not isinstance(c, Const):
        raise NotLiftable("expected a literal")
    return P.Lit(c.ty, c.value)


def _lift_assign(s: AssignStmt, types: dict):
    e = s.expr
    if isinstance(e, Const):
        return P.Assign(s.name, _lit(e))
    if isinstance(e, Bin):
        left_self = isinstance(e.left, Name) and e.left.name == s.name
        right_self = isinstance(e.right, Name) and e.right.name == s.name
        ty = types.get(s.name)
        if e.op == "&&" and left_self and isinstance(e.right, Name):
            return P.LogicalAnd(s.name, e.right.name)
        if ty == "string" and e.op == "+":
            if right_self and isinstance(e.left, Const):
                return P.PrependOrConcat(s.name, _lit(e.left), True)
            if left_self and isinstance(e.right, Const):
                return P.PrependOrConcat(s.name, _lit(e.right), False)
        if ty == "int" and e.op in "+-" and left_self:
            operand = P.Ref(e.right.name) if isinstance(e.right, Name) else _lit(e.right)
            return P.AddSub(s.name, e.op, operand)
    raise NotLiftable(f"line {s.line}: assignment has no statement form")


def _lift_swap(s: If):
    body = s.body
    if not isinstance(s.cond, Name) or len(body) != 3:
        raise NotLiftable(f"line {s.line}: if-block is not a swap")
    d, a1, a2 = body
    ok = (
        isinstance(d, VarDecl)
        and d.name == "temp"
        and isinstance(d.init, Name)
        and isinstance(a1, AssignStmt)
        and a1.name == d.init.name
        and isinstance(a1.expr, Name)
        and isinstance(a2, AssignStmt)
        and a2.name == a1.expr.name
        and isinstance(a2.expr, Name)
        and a2.expr.name == "temp"
    )
    if not ok:
        raise NotLiftable(f"line {s.line}: if-block is not a swap")
    return P.CondSwap(s.cond.name, a1.name, a2.name, d.ty)


def lift(stmts) -> P.Program:
    """Turn parsed statements back into Program statements, if they have that shape."""
    out = []
    types: dict[str, str] = {}
    i = 0
    while i < len(stmts):
        s = stmts[i]
        if isinstance(s, VarDecl):
            types[s.name] = s.ty
            if s.init is None:
                nxt = stmts[i + 1] if i + 1 < len(stmts) else None
                if not (isinstance(nxt, Cin) and nxt.name == s.name):
                    raise NotLiftable(f"line {s.line}: declaration without a value")
                out.append(P.DeclareInit(s.ty, s.name, P.STDIN))
                i += 2
                continue
            out.append(P.DeclareInit(s.ty, s.name, _lit(s.init)))
        elif isinstance(s, Cin):
            out.append(P.Read(s.name))
        elif isinstance(s, Cout):
            if not isinstance(s.expr, Name):
                raise NotLiftable(f"line {s.line}: only variables are printed")
            out.append(P.Print(s.expr.name))
        elif isinstance(s, AssignStmt):
            out.append(_lift_assign(s, types))
        elif isinstance(s, If):
            out.append(_lift_swap(s))
        i += 1
    return P.Program(tuple(out))


def parse_program(code: str) -> P.Program:
    return lift(parse(code))
