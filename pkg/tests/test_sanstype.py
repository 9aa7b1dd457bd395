import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from composed_lab.errors import InvalidInput, InvalidParameter
from composed_lab.sanstype import (
    CORRUPTIONS,
    IN_DISTRIBUTION,
    KINDS,
    OUT_OF_DISTRIBUTION,
    DatasetConfig,
    DeclareInit,
    Lit,
    Print,
    Program,
    TemplateSet,
    applicable,
    check,
    corrupt,
    corrupt_with_kind,
    emit_dataset,
    evaluate,
    generate,
    generate_example,
    generation_stats,
    parse_program,
    read_jsonl,
    render_code,
    render_pseudocode,
)
from composed_lab.sanstype.lang import execute, parse

from .fixtures import CORRUPTION_FIXTURES, SWAP_MISSING_BOOL, SWAP_PSEUDOCODE, SWAP_PROGRAM, SWAP_TESTS


def main(*lines):
    return "int main () {\n" + "".join(f"  {line}\n" for line in lines) + "  return 0; }\n"


def kind_of(code, tests=({"stdin": "", "stdout": ""},)):
    return check(code, list(tests)).kind


# --- checker ---------------------------------------------------------------


def test_swap_example_outcomes():
    assert check(SWAP_PROGRAM, SWAP_TESTS).kind == "Correct"
    out = check(SWAP_MISSING_BOOL["code"], SWAP_MISSING_BOOL["tests"])
    assert out.kind == "CompileErr" and "var_5" in out.message


def test_swap_example_roundtrip():
    program = parse_program(SWAP_PROGRAM)
    assert render_code(program) == SWAP_PROGRAM
    assert evaluate(program, ["1", "0"]) == "str_4str_201"
    assert "instantiate var_2;\nread var_2 from stdin;" in SWAP_PSEUDOCODE


def test_bool_prints_as_zero():
    code = main("bool var_1 = true;", "var_1 = false;", "cout << var_1;")
    assert execute(parse(code), "") == "0"
    assert check(code, [{"stdin": "", "stdout": "0"}]).kind == "Correct"


@pytest.mark.parametrize(
    "code, stdin, want",
    [
        (main("int var_0;", "cin >> var_0;", "cout << var_0;"), "str_1", "ExecErr"),
        (main("bool var_0;", "cin >> var_0;", "cout << var_0;"), "2", "ExecErr"),
        (main("int var_0;", "cin >> var_0;", "cout << var_0;"), "", "ExecErr"),
        (main("int var_0;", "cout << var_0;"), "", "ExecErr"),
        (main("int var_0 = 1;", "int var_0 = 2;"), "", "CompileErr"),
        (main("int var_0 = 1;", "cout << var_1;"), "", "CompileErr"),
        (main('int var_0 = "str_1";'), "", "CompileErr"),
        (main("int var_0 = 1;", 'var_0 = var_0 + "str_1";'), "", "CompileErr"),
        (main("int var_0 = 1;", "if ( var_0 ) {", "  var_0 = 2; }"), "", "CompileErr"),
        (main("int var_0 = 1", "cout << var_0;"), "", "CompileErr"),
        ("int main () { cout << 1;", "", "CompileErr"),
        ("garbage $", "", "CompileErr"),
        ("", "", "CompileErr"),
    ],
)
def test_error_classification(code, stdin, want):
    assert check(code, [{"stdin": stdin, "stdout": ""}]).kind == want


def test_wrong_output_is_exec_error():
    code = main("int var_0 = 4;", "cout << var_0;")
    out = check(code, [{"stdin": "", "stdout": "5"}])
    assert out.kind == "ExecErr" and out.exit_code == 1


def test_block_scope():
    inner = main(
        "bool var_1 = true;",
        "if ( var_1 ) {",
        "  int temp = 3;",
        "  var_1 = false; }",
        "cout << temp;",
    )
    assert kind_of(inner) == "CompileErr"
    shadow = main("int var_0 = 1;", "bool var_1 = true;", "if ( var_1 ) {", "  int var_0 = 5; }", "cout << var_0;")
    assert check(shadow, [{"stdin": "", "stdout": "1"}]).kind == "Correct"


def test_check_is_pure():
    code = SWAP_PROGRAM
    assert [check(code, SWAP_TESTS) for _ in range(3)] == [check(code, SWAP_TESTS)] * 3


def test_arbitrary_text_never_raises():
    for text in ["", "}", "int main () {", "\x00\n", 'int main () { string x = "a\n"; return 0; }', "cout << << ;"]:
        assert kind_of(text) in ("CompileErr", "ExecErr", "Correct")


@settings(max_examples=200)
@given(st.text(alphabet="intmaobcuse_0123456789 (){};=+-<>&\"\n", max_size=80))
def test_fuzzed_text_gives_an_outcome(text):
    assert kind_of(text) in ("CompileErr", "ExecErr", "Correct")


# --- generator -------------------------------------------------------------


def test_generated_programs_are_sound_and_roundtrip():
    for ex in generate(seed=7, n_programs=500):
        assert check(ex.code, ex.tests).kind == "Correct"
        assert parse_program(ex.code) == ex.program
        for t in ex.tests:
            assert evaluate(ex.program, t["stdin"].split()) == t["stdout"]


def test_generator_invariants():
    names, ints, strs = set(), set(), set()
    for ex in generate(seed=1, n_programs=2000):
        n_decl = sum(isinstance(s, DeclareInit) for s in ex.program)
        phase1 = n_decl - sum(ex.fresh_flags)
        assert 1 <= phase1 <= 4 and len(ex.fresh_flags) <= 5
        for s in ex.program:
            names.add(getattr(s, "var", None) or s.guard)
            for v in vars(s).values():
                if isinstance(v, Lit):
                    (ints if v.ty == "int" else strs if v.ty == "string" else set()).add(v.value)
        assert len(ex.tests) >= 1
    assert names <= {f"var_{i}" for i in range(10)}
    assert ints <= set(range(0, 101)) and strs <= {f"str_{i}" for i in range(10)}


def test_fresh_declaration_fraction():
    flags = [f for ex in generate(seed=11, n_programs=4200) for f in ex.fresh_flags]
    assert len(flags) >= 10_000
    assert abs(np.mean(flags) - 0.2) <= 0.02


def test_generation_is_deterministic():
    a = [ex.record(str(i)) for i, ex in enumerate(generate(seed=5, n_programs=30))]
    b = [ex.record(str(i)) for i, ex in enumerate(generate(seed=5, n_programs=30))]
    assert json.dumps(a) == json.dumps(b)
    assert generate_example(5, 3).code != generate_example(6, 3).code or generate_example(5, 4).code != generate_example(
        6, 4
    ).code
    with pytest.raises(InvalidParameter):
        generate(seed=0, n_programs=-1)


def test_declaration_line_rendering():
    program = Program((DeclareInit("string", "var_8", Lit("string", "str_2")),))
    t = TemplateSet("forced", False, {**IN_DISTRIBUTION.templates, "declare": ["set {var} to {value};"]})
    assert render_pseudocode(program, t) == 'set var_8 to "str_2";\n'
    assert '  string var_8 = "str_2";\n' in render_code(program)


def test_print_templates():
    program = Program((DeclareInit("int", "var_2", Lit("int", 1)), Print("var_2")))
    t = TemplateSet("forced", False, {**IN_DISTRIBUTION.templates, "print": ["print {var};"]})
    assert render_pseudocode(program, t).endswith("print var_2;\n")
    assert {"print {var};", "output {var} to stdout;"} <= set(IN_DISTRIBUTION.templates["print"])
    seen = {render_pseudocode(program, OUT_OF_DISTRIBUTION, s).split("\n")[1] for s in range(40)}
    assert seen == {"print var_2 to stdout;", "output var_2;", "stdout var_2;"}


def test_template_sets_cover_every_kind_and_are_disjoint():
    for ts in (IN_DISTRIBUTION, OUT_OF_DISTRIBUTION):
        assert all(ts.templates[k] for k in KINDS)
    for k in KINDS:
        assert not set(IN_DISTRIBUTION.templates[k]) & set(OUT_OF_DISTRIBUTION.templates[k])
    with pytest.raises(InvalidParameter):
        TemplateSet("broken", False, {"print": ["print {var};"]})


def test_rendering_is_seeded():
    program = generate_example(0, 0).program
    assert render_pseudocode(program, IN_DISTRIBUTION, 9) == render_pseudocode(program, IN_DISTRIBUTION, 9)


# --- corruption ------------------------------------------------------------


@pytest.mark.parametrize("kind", sorted(CORRUPTION_FIXTURES))
def test_corruption_fixture(kind):
    clean, tests, want = CORRUPTION_FIXTURES[kind]
    assert check(clean, tests).kind == "Correct"
    for seed in range(5):
        noisy = corrupt(clean, np.random.default_rng(seed), kind)
        assert noisy != clean
        assert check(noisy, tests).kind == want


def test_swap_example_type_delete():
    lines = SWAP_PROGRAM.split("\n")
    i = lines.index("  bool var_5 = true;")
    lines[i] = "  var_5 = true;"
    assert check("\n".join(lines), SWAP_TESTS).kind == "CompileErr"
    # corrupt can produce exactly this text
    outs = {corrupt(SWAP_PROGRAM, np.random.default_rng(s), "type_delete") for s in range(60)}
    assert "\n".join(lines) in outs


def test_random_corruptions_differ_and_mostly_break():
    broken = 0
    examples = generate(seed=2, n_programs=300)
    for i, ex in enumerate(examples):
        noisy, kind = corrupt_with_kind(ex.code, np.random.default_rng(i))
        assert noisy != ex.code and kind in CORRUPTIONS
        broken += check(noisy, ex.tests).kind != "Correct"
    assert broken / len(examples) >= 0.5


def test_corrupt_rejects_impossible_requests():
    with pytest.raises(InvalidInput):
        corrupt("int main () {\n  return 0; }\n", np.random.default_rng(0))
    with pytest.raises(InvalidInput):
        corrupt(main("int var_0 = 1;"), np.random.default_rng(0), "drop_cout")
    with pytest.raises(InvalidInput):
        corrupt(main("int var_0 = 1;"), np.random.default_rng(0), "shuffle")
    assert applicable(main("int var_0 = 1;")) == ["type_replace", "type_delete"]


# --- dataset ---------------------------------------------------------------


def test_emit_dataset_sizes_and_determinism(tmp_path):
    cfg = DatasetConfig(seed=1, n_labeled=10, n_unlabeled=25, n_val=4, n_test=5, n_ood=6)
    counts = emit_dataset(tmp_path / "a", cfg)
    assert counts == {
        "labeled.jsonl": 10,
        "unlabeled.jsonl": 25,
        "denoise.jsonl": 25,
        "val.jsonl": 4,
        "test.jsonl": 5,
        "ood_test.jsonl": 6,
    }
    emit_dataset(tmp_path / "b", cfg)
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    rec = read_jsonl(tmp_path / "a" / "labeled.jsonl")[0]
    assert set(rec) == {"id", "pseudocode", "code", "tests"}
    assert check(rec["code"], rec["tests"]).kind == "Correct"
    pair = read_jsonl(tmp_path / "a" / "denoise.jsonl")[0]
    assert pair["corrupted"] != pair["code"]
    unl = read_jsonl(tmp_path / "a" / "unlabeled.jsonl")
    assert [r["code"] for r in read_jsonl(tmp_path / "a" / "denoise.jsonl")] == [r["code"] for r in unl]


def test_emit_dataset_empty(tmp_path):
    cfg = DatasetConfig(n_labeled=0, n_unlabeled=0, n_val=0, n_test=0, n_ood=0)
    emit_dataset(tmp_path, cfg)
    assert all(f.read_bytes() == b"" for f in tmp_path.iterdir())


def test_dataset_defaults_and_validation():
    cfg = DatasetConfig()
    assert (cfg.n_labeled, cfg.n_unlabeled, cfg.n_val, cfg.n_test, cfg.n_ood) == (1000, 20000, 500, 500, 500)
    with pytest.raises(InvalidParameter):
        DatasetConfig(n_val=-1)


def test_ood_split_uses_ood_templates(tmp_path):
    emit_dataset(tmp_path, DatasetConfig(n_labeled=0, n_unlabeled=0, n_val=0, n_test=0, n_ood=40))
    text = "".join(r["pseudocode"] for r in read_jsonl(tmp_path / "ood_test.jsonl"))
    assert "to stdout;" in text or "stdout var_" in text
    for templates in IN_DISTRIBUTION.templates["print"]:
        assert templates.replace("{var}", "var_0") not in text.replace("print var_0 to stdout;", "")


def test_generation_stats():
    s = generation_stats(seed=0, n=200)
    assert s["gold_correct_fraction"] == 1.0
    assert 0.1 < s["fresh_fraction"] < 0.3
    assert s["corruption_breaks_fraction"] >= 0.5
