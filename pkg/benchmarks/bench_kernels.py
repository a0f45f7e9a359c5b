"""Compare the compiled and pure-Python segmentation / n-gram kernels.

    python benchmarks/bench_kernels.py [--chars 200000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import random
import timeit

from censorscout import _pykernels

try:
    from censorscout import _ckernels
except ImportError:
    _ckernels = None


def make_text(n_chars: int, words: list[str], seed: int = 0) -> str:
    rng = random.Random(seed)
    parts, size = [], 0
    fillers = ["，", "。", " ", "Vimeo ", "2017 ", "\n", "、"]
    while size < n_chars:
        piece = rng.choice(words) if rng.random() < 0.8 else rng.choice(fillers)
        parts.append(piece)
        size += len(piece)
    return "".join(parts)


def make_words(n: int, seed: int = 1) -> list[str]:
    rng = random.Random(seed)
    return ["".join(chr(rng.randrange(0x4E00, 0x9FA5)) for _ in range(rng.randint(2, 4))) for _ in range(n)]


def bench(impl, text: str, words: frozenset, max_len: int, repeat: int) -> dict[str, float]:
    tokens = impl.scan(text, words, max_len)
    stream = [None if t is None else t[1] for t in tokens]
    out = {"scan": min(timeit.repeat(lambda: impl.scan(text, words, max_len), number=1, repeat=repeat))}
    for n in (1, 2, 3):
        out[f"ngrams n={n}"] = min(timeit.repeat(lambda: impl.count_ngrams(stream, n), number=1, repeat=repeat))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--chars", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    vocab = make_words(3000)
    words = frozenset(vocab)
    max_len = max(map(len, vocab))
    text = make_text(args.chars, vocab)

    py = bench(_pykernels, text, words, max_len, args.repeat)
    if _ckernels is None:
        print("compiled kernels not built; showing the pure-Python timings only")
        for name, t in py.items():
            print(f"{name:<12} python {t * 1e3:9.2f} ms")
        return
    assert _ckernels.scan(text, words, max_len) == _pykernels.scan(text, words, max_len)
    cy = bench(_ckernels, text, words, max_len, args.repeat)
    print(f"{args.chars} chars, best of {args.repeat}")
    print(f"{'kernel':<12} {'python':>12} {'cython':>12} {'speedup':>8}")
    for name in py:
        print(f"{name:<12} {py[name] * 1e3:9.2f} ms {cy[name] * 1e3:9.2f} ms {py[name] / cy[name]:7.1f}x")


if __name__ == "__main__":
    main()
