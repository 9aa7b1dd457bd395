"""SansType: a small typed language for studying pseudocode-to-code translation."""

from .corrupt import CORRUPTIONS, applicable, corrupt, corrupt_with_kind
from .dataset import DatasetConfig, emit_dataset, generation_stats, read_jsonl
from .generate import (
    IN_DISTRIBUTION,
    KINDS,
    OUT_OF_DISTRIBUTION,
    Example,
    TemplateSet,
    generate,
    generate_example,
    render_pseudocode,
)
from .lang import CompileError, ExecError, Outcome, check, parse, parse_program, typecheck
from .program import (
    AddSub,
    Assign,
    CondSwap,
    DeclareInit,
    Lit,
    LogicalAnd,
    PrependOrConcat,
    Print,
    Program,
    Read,
    Ref,
    STDIN,
    evaluate,
    render_code,
)

__all__ = [
    "AddSub", "Assign", "CORRUPTIONS", "CompileError", "CondSwap", "DatasetConfig", "DeclareInit",
    "ExecError", "Example", "IN_DISTRIBUTION", "KINDS", "Lit", "LogicalAnd", "OUT_OF_DISTRIBUTION",
    "Outcome", "PrependOrConcat", "Print", "Program", "Read", "Ref", "STDIN", "TemplateSet",
    "applicable", "check", "corrupt", "corrupt_with_kind", "emit_dataset", "evaluate", "generate",
    "generate_example", "generation_stats", "parse", "parse_program", "read_jsonl",
    "render_code", "render_pseudocode", "typecheck",
]
