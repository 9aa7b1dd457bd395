"""Walk through one SansType example: pseudocode, gold code, a corruption, and the checker.

    python demos/sanstype.py [seed]
"""

import sys

import numpy as np

from composed_lab.sanstype import check, corrupt_with_kind, generate_example, generation_stats

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
ex = generate_example(seed, 0)

print("pseudocode:")
print(ex.pseudocode)
print("gold code:")
print(ex.code)
print("tests:", ex.tests)
print("gold outcome:", check(ex.code, ex.tests).kind)
print()

noisy, kind = corrupt_with_kind(ex.code, np.random.default_rng(seed))
print(f"after a {kind} corruption:")
print(noisy)
outcome = check(noisy, ex.tests)
print("outcome:", outcome.kind, "-", outcome.message)
print()

stats = generation_stats(seed, 500)
print("over 500 generated programs:")
for key in ("gold_correct_fraction", "fresh_fraction", "reads_stdin_fraction", "corruption_breaks_fraction"):
    print(f"  {key:<28} {stats[key]:.3f}")
