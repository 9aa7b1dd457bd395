"""Random SansType programs, their pseudocode, and stdin/stdout test cases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParameter
from . import program as P

FRESH_PROB = 0.2
MAX_INITIAL_VARS = 4
MAX_EXTRA_LINES = 5
STDIN_PROB = 0.5

# Statement kinds as seen by the pseudocode templates.
KINDS = (
    "declare",
    "declare_stdin",
    "read",
    "assign",
    "prepend",
    "concat",
    "add",
    "sub",
    "and",
    "swap",
    "print",
)


@dataclass(frozen=True)
class TemplateSet:
    """Pseudocode templates per statement kind.

    Placeholders: {var}, {value}, {other}, {guard}, {a}, {b}.
    """

    name: str
    ood: bool
    templates: dict = field(hash=False)

    def __post_init__(self):
        missing = [k for k in KINDS if not self.templates.get(k)]
        if missing:
            raise InvalidParameter(f"template set {self.name!r} has no templates for {missing}")


IN_DISTRIBUTION = TemplateSet(
    "in_distribution",
    ood=False,
    templates={
        "declare": ["set {var} to {value};", "initialize {var} to {value};"],
        "declare_stdin": ["instantiate {var};\nread {var} from stdin;", "create {var};\nread {var} from stdin;"],
        "read": ["read {var} from stdin;", "read a value into {var};"],
        "assign": ["set {var} to {value};", "assign {value} to {var};"],
        "prepend": ["add {value} to the beginning of {var};", "prepend {value} to {var};"],
        "concat": ["add {value} to the end of {var};", "append {value} to {var};"],
        "add": ["add {value} to {var};", "increase {var} by {value};"],
        "sub": ["subtract {value} from {var};", "decrease {var} by {value};"],
        "and": ["set {var} to {var} and {other};", "and {var} with {other};"],
        "swap": [
            "if {guard} is true, swap the values of {a} and {b};",
            "if {guard} is true, set {a} to the value of {b} and {b} to the value of {a};",
        ],
        "print": ["print {var};", "output {var} to stdout;"],
    },
)

# Recombined phrasings: tokens from the in-distribution templates, mixed differently.
OUT_OF_DISTRIBUTION = TemplateSet(
    "out_of_distribution",
    ood=True,
    templates={
        "declare": ["let {var} be {value};"],
        "declare_stdin": ["instantiate {var} from stdin;"],
        "read": ["read a value into {var} from stdin;"],
        "assign": ["assign {var} to {value};"],
        "prepend": ["prepend {value} to the beginning of {var};"],
        "concat": ["append {value} to the end of {var};"],
        "add": ["increase {var} with {value};"],
        "sub": ["decrease {var} with {value};"],
        "and": ["set {var} to {other} and {var};"],
        "swap": ["if {guard} is true, swap {a} and {b};"],
        "print": ["print {var} to stdout;", "output {var};", "stdout {var};"],
    },
)


def _pseudo_value(x) -> str:
    return x.name if isinstance(x, P.Ref) else x.code()


def statement_kind(stmt: P.Statement) -> str:
    if isinstance(stmt, P.DeclareInit):
        return "declare_stdin" if isinstance(stmt.init, P.Stdin) else "declare"
    if isinstance(stmt, P.PrependOrConcat):
        return "prepend" if stmt.prepend else "concat"
    if isinstance(stmt, P.AddSub):
        return "add" if stmt.op == "+" else "sub"
    return {
        P.Read: "read",
        P.Assign: "assign",
        P.LogicalAnd: "and",
        P.CondSwap: "swap",
        P.Print: "print",
    }[type(stmt)]


def _fields(stmt: P.Statement) -> dict:
    if isinstance(stmt, P.CondSwap):
        return {"guard": stmt.guard, "a": stmt.a, "b": stmt.b}
    out = {"var": stmt.var}
    if isinstance(stmt, P.DeclareInit) and isinstance(stmt.init, P.Lit):
        out["value"] = stmt.init.code()
    elif isinstance(stmt, (P.Assign, P.PrependOrConcat)):
        out["value"] = stmt.value.code()
    elif isinstance(stmt, P.AddSub):
        out["value"] = _pseudo_value(stmt.operand)
    elif isinstance(stmt, P.LogicalAnd):
        out["other"] = stmt.other
    return out


def render_pseudocode(program: P.Program, templates: TemplateSet = IN_DISTRIBUTION, seed=0) -> str:
    """One uniformly chosen template per statement; the same seed gives the same text."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lines = []
    for stmt in program:
        options = templates.templates[statement_kind(stmt)]
        template = options[int(rng.integers(len(options)))]
        lines.append(template.format(**_fields(stmt)))
    return "\n".join(lines) + "\n"


# --- program generation ----------------------------------------------------


def random_literal(ty: str, rng: np.random.Generator) -> P.Lit:
    if ty == "int":
        return P.Lit("int", int(rng.integers(P.INT_MIN, P.INT_MAX + 1)))
    if ty == "string":
        return P.Lit("string", P.STRINGS[int(rng.integers(len(P.STRINGS)))])
    return P.Lit("bool", bool(rng.integers(2)))


def random_token(ty: str, rng: np.random.Generator) -> str:
    return P.format_value(ty, random_literal(ty, rng).value)


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _fresh_declaration(rng, types: dict) -> P.DeclareInit:
    free = [v for v in P.VAR_NAMES if v not in types]
    var = _pick(rng, free)
    ty = _pick(rng, P.TYPES)
    init = P.STDIN if rng.random() < STDIN_PROB else random_literal(ty, rng)
    types[var] = ty
    return P.DeclareInit(ty, var, init)


def _operation(rng, types: dict) -> P.Statement:
    """A type-preserving operation on existing variables, kind chosen uniformly among those that apply."""
    names = list(types)
    of = {ty: [v for v in names if types[v] == ty] for ty in P.TYPES}
    kinds = ["assign", "read"]
    if of["string"]:
        kinds += ["prepend", "concat"]
    if of["int"]:
        kinds += ["add_lit", "sub_lit", "add_var", "sub_var"]
    if of["bool"]:
        kinds.append("and")
        if any(len(of[ty]) >= 2 for ty in P.TYPES):
            kinds.append("swap")
    kind = _pick(rng, kinds)
    if kind == "assign":
        var = _pick(rng, names)
        return P.Assign(var, random_literal(types[var], rng))
    if kind == "read":
        return P.Read(_pick(rng, names))
    if kind in ("prepend", "concat"):
        return P.PrependOrConcat(_pick(rng, of["string"]), random_literal("string", rng), kind == "prepend")
    if kind in ("add_lit", "sub_lit", "add_var", "sub_var"):
        var = _pick(rng, of["int"])
        operand = random_literal("int", rng) if kind.endswith("lit") else P.Ref(_pick(rng, of["int"]))
        return P.AddSub(var, "+" if kind.startswith("add") else "-", operand)
    if kind == "and":
        return P.LogicalAnd(_pick(rng, of["bool"]), _pick(rng, of["bool"]))
    ty = _pick(rng, [t for t in P.TYPES if len(of[t]) >= 2])
    a, b = rng.choice(len(of[ty]), size=2, replace=False)
    return P.CondSwap(_pick(rng, of["bool"]), of[ty][int(a)], of[ty][int(b)], ty)


@dataclass(frozen=True)
class Example:
    program: P.Program
    pseudocode: str
    code: str
    tests: tuple
    fresh_flags: tuple  # one flag per phase-2 line: True for a fresh declaration

    def record(self, ident: str) -> dict:
        return {"id": ident, "pseudocode": self.pseudocode, "code": self.code, "tests": [dict(t) for t in self.tests]}


def generate_program(rng: np.random.Generator) -> tuple[P.Program, tuple]:
    """Phase 1 declares 1 to 4 variables; phase 2 adds up to 5 lines; every variable is printed at the end."""
    types: dict[str, str] = {}
    stmts = [_fresh_declaration(rng, types) for _ in range(int(rng.integers(1, MAX_INITIAL_VARS + 1)))]
    flags = []
    for _ in range(int(rng.integers(0, MAX_EXTRA_LINES + 1))):
        fresh = bool(rng.random() < FRESH_PROB)
        flags.append(fresh)
        stmts.append(_fresh_declaration(rng, types) if fresh else _operation(rng, types))
    stmts.extend(P.Print(v) for v in types)
    return P.Program(tuple(stmts)), tuple(flags)


def make_tests(program: P.Program, rng: np.random.Generator, n_tests: int = 2) -> tuple:
    """Random stdin for each test, with stdout from the reference evaluator.

    Programs that read nothing get a single test with empty stdin.
    """
    types = P.stdin_types(program)
    if not types:
        return ({"stdin": "", "stdout": P.evaluate(program, [])},)
    tests = []
    for _ in range(n_tests):
        tokens = [random_token(ty, rng) for ty in types]
        tests.append({"stdin": " ".join(tokens), "stdout": P.evaluate(program, tokens)})
    return tuple(tests)


def generate_example(seed: int, index: int, stream: int = 0, ood: bool = False) -> Example:
    rng = np.random.default_rng([seed, stream, index])
    program, flags = generate_program(rng)
    templates = OUT_OF_DISTRIBUTION if ood else IN_DISTRIBUTION
    return Example(
        program=program,
        pseudocode=render_pseudocode(program, templates, rng),
        code=P.render_code(program),
        tests=make_tests(program, rng),
        fresh_flags=flags,
    )


def generate(seed: int = 0, n_programs: int = 1, ood: bool = False, stream: int = 0) -> list[Example]:
    """n_programs examples; example i depends only on (seed, stream, i)."""
    if n_programs < 0:
        raise InvalidParameter(f"n_programs must be non-negative, got {n_programs}")
    if seed < 0:
        raise InvalidParameter(f"seed must be non-negative, got {seed}")
    return [generate_example(seed, i, stream, ood) for i in range(n_programs)]
