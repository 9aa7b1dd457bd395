"""Hand-written SansType programs shared by the test modules."""

SWAP_PSEUDOCODE = """\
set var_8 to "str_2";
instantiate var_2;
read var_2 from stdin;
add "str_4" to the beginning of var_8;
set var_2 to false;
set var_5 to true;
if var_2 is true, swap the values of var_2 and var_5;
if var_2 is true, set var_2 to the value of var_5 and var_5 to the value of var_2;
output var_8 to stdout;
print var_2;
output var_5 to stdout;
"""

SWAP_PROGRAM = """\
int main () {
  string var_8 = "str_2";
  bool var_2;
  cin >> var_2;
  var_8 = "str_4" + var_8;
  var_2 = false;
  bool var_5 = true;
  if ( var_2 ) {
    bool temp = var_2;
    var_2 = var_5;
    var_5 = temp; }
  if ( var_2 ) {
    bool temp = var_2;
    var_2 = var_5;
    var_5 = temp; }
  cout << var_8;
  cout << var_2;
  cout << var_5;
  return 0; }
"""

SWAP_TESTS = [{"stdin": "1", "stdout": "str_4str_201"}, {"stdin": "0", "stdout": "str_4str_201"}]

SWAP_MISSING_BOOL = {
    "code": SWAP_PROGRAM.replace("  bool var_5 = true;", "  var_5 = true;").replace(
        "    bool temp = var_2;", "    string temp = var_2;", 1
    ),
    "tests": SWAP_TESTS,
}


def _main(*lines):
    return "int main () {\n" + "".join(f"  {line}\n" for line in lines) + "  return 0; }\n"


# kind -> (clean code with a single site for that kind, tests, expected outcome after corruption)
CORRUPTION_FIXTURES = {
    "type_replace": (
        _main('string var_1 = "str_0";', 'var_1 = var_1 + "str_3";', "cout << var_1;"),
        [{"stdin": "", "stdout": "str_0str_3"}],
        "CompileErr",
    ),
    "type_delete": (_main("bool var_5 = true;", "cout << var_5;"), [{"stdin": "", "stdout": "1"}], "CompileErr"),
    "type_insert": (
        _main("int var_0 = 5;", "var_0 = 7;", "cout << var_0;"),
        [{"stdin": "", "stdout": "7"}],
        "CompileErr",
    ),
    "drop_arrows": (_main("int var_0 = 5;", "cout << var_0;"), [{"stdin": "", "stdout": "5"}], "CompileErr"),
    "reverse_arrows": (_main("int var_0 = 5;", "cout << var_0;"), [{"stdin": "", "stdout": "5"}], "CompileErr"),
    "drop_cout": (_main("int var_0 = 5;", "cout << var_0;"), [{"stdin": "", "stdout": "5"}], "CompileErr"),
}
