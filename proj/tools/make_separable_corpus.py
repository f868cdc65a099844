#!/usr/bin/env python3
"""Writes the constructed-separability corpus used by offline odd-scene-out checks.

Every keyword gets four scene types. Sentences of one scene type share three
invented words; each sentence also carries one invented word of its own.
Sentences of different scene types share only the keyword and filler words.
"""
import itertools
import sys

KEYWORDS = """bathroom beer chicken cigar cigarette coffee crow eagle elevator fire
knife microwave oven owl pistol raccoon rat raven rifle squirrel sword tea
turkey vulture water wine""".split()
TYPES = ["alpha", "beta", "gamma", "delta"]
ONSETS = "b d f g k l m n p r s t v z".split()
VOWELS = "a e i o u".split()


def words():
    for a, b, c in itertools.product(ONSETS, VOWELS, ONSETS):
        for d in VOWELS:
            yield a + b + c + d + "x"


def main(out):
    gen = words()
    rows = ["keyword\tscene_type\tsentence_id\tsentence"]
    for kw in KEYWORDS:
        for t in TYPES:
            shared = [next(gen) for _ in range(3)]
            for i in range(5):
                own = next(gen)
                sentence = f"The {kw} {shared[0]} {shared[1]} {shared[2]} over {own}."
                rows.append(f"{kw}\t{t}\t{kw}-{t}-{i + 1}\t{sentence}")
    with open(out, "w", encoding="utf-8") as f:
        f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/corpora/separable_26x4x5.tsv")
