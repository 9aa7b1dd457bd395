"""JSONL dataset files for SansType: labeled pairs, unlabeled code, denoising pairs, and held-out splits."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidParameter
from .corrupt import corrupt_with_kind
from .generate import generate_example
from .lang import check

# Each split draws from its own RNG stream so that resizing one leaves the others unchanged.
STREAMS = {"labeled": 0, "unlabeled": 1, "val": 2, "test": 3, "ood_test": 4, "denoise": 5}


@dataclass(frozen=True)
class DatasetConfig:
    seed: int = 0
    n_labeled: int = 1000
    n_unlabeled: int = 20000
    n_val: int = 500
    n_test: int = 500
    n_ood: int = 500

    def __post_init__(self):
        for name in ("seed", "n_labeled", "n_unlabeled", "n_val", "n_test", "n_ood"):
            if getattr(self, name) < 0:
                raise InvalidParameter(f"{name} must be non-negative, got {getattr(self, name)}")


def _write(path: Path, records) -> int:
    n = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            n += 1
    return n


def _labeled(seed: int, split: str, n: int, ood: bool = False):
    stream = STREAMS[split]
    for i in range(n):
        yield generate_example(seed, i, stream, ood).record(f"{split}-{i}")


def _unlabeled(seed: int, n: int):
    for i in range(n):
        yield {"id": f"unlabeled-{i}", "code": generate_example(seed, i, STREAMS["unlabeled"]).code}


def _denoise(seed: int, n: int):
    for i in range(n):
        code = generate_example(seed, i, STREAMS["unlabeled"]).code
        noisy, kind = corrupt_with_kind(code, np.random.default_rng([seed, STREAMS["denoise"], i]))
        yield {"id": f"denoise-{i}", "corrupted": noisy, "code": code, "kind": kind}


def emit_dataset(out_dir, config: DatasetConfig = DatasetConfig()) -> dict[str, int]:
    """Write every split under out_dir and return the record count per file name.

    Files are byte-identical for the same config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    s = config.seed
    return {
        "labeled.jsonl": _write(out / "labeled.jsonl", _labeled(s, "labeled", config.n_labeled)),
        "unlabeled.jsonl": _write(out / "unlabeled.jsonl", _unlabeled(s, config.n_unlabeled)),
        "denoise.jsonl": _write(out / "denoise.jsonl", _denoise(s, config.n_unlabeled)),
        "val.jsonl": _write(out / "val.jsonl", _labeled(s, "val", config.n_val)),
        "test.jsonl": _write(out / "test.jsonl", _labeled(s, "test", config.n_test)),
        "ood_test.jsonl": _write(out / "ood_test.jsonl", _labeled(s, "ood_test", config.n_ood, ood=True)),
    }


def read_jsonl(path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def generation_stats(seed: int = 0, n: int = 1000) -> dict:
    """Summary counts over n generated programs, plus how often a random corruption breaks them."""
    if n <= 0:
        raise InvalidParameter(f"n must be positive, got {n}")
    lines = fresh = n_vars = reads = 0
    broken = 0
    gold_correct = 0
    for i in range(n):
        ex = generate_example(seed, i)
        lines += len(ex.fresh_flags)
        fresh += sum(ex.fresh_flags)
        n_vars += sum(1 for st in ex.program if type(st).__name__ == "Print")
        reads += bool(ex.tests[0]["stdin"])
        gold_correct += check(ex.code, ex.tests).kind == "Correct"
        noisy = corrupt_with_kind(ex.code, np.random.default_rng([seed, STREAMS["denoise"], i]))[0]
        broken += check(noisy, ex.tests).kind != "Correct"
    return {
        "n_programs": n,
        "mean_variables": n_vars / n,
        "phase2_lines": lines,
        "fresh_fraction": fresh / lines if lines else 0.0,
        "reads_stdin_fraction": reads / n,
        "gold_correct_fraction": gold_correct / n,
        "corruption_breaks_fraction": broken / n,
    }
