#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the synthetic corpora under tests/data.

The files mimic the on-disk formats of the real datasets:
  ptb_char_tiny/ptb.char.{train,valid,test}.txt  space-separated symbols, '_' between words
  ptb_word_tiny/ptb.{train,valid,test}.txt       whitespace-separated words
  mnist_tiny/{train,t10k}-{images-idx3,labels-idx1}-ubyte

Output is a pure function of the seed.
"""
import argparse
import pathlib
import random
import struct

LETTERS = "abcdefghijklmnopqrstuvwxyz"
# 26 letters + '_' + 10 digits + 12 punctuation marks = 49 symbols; with
# <eos> the character vocabulary has 50 entries.
DIGITS = "0123456789"
PUNCT = ".,'-&$#*/\\<>"


def make_lexicon(rng, n, min_len=2, max_len=8):
    vowels = "aeiou"
    consonants = "".join(c for c in LETTERS if c not in vowels)
    words = set()
    while len(words) < n:
        length = rng.randint(min_len, max_len)
        w = "".join(
            rng.choice(consonants if k % 2 == 0 else vowels) for k in range(length)
        )
        words.add(w)
    return sorted(words)


def zipf_weights(n, s=1.1):
    return [1.0 / (k + 1) ** s for k in range(n)]


def char_sentence(rng, lexicon, weights):
    words = rng.choices(lexicon, weights=weights, k=rng.randint(5, 14))
    if rng.random() < 0.3:
        words.insert(rng.randrange(len(words)), "".join(rng.choices(DIGITS, k=rng.randint(1, 4))))
    if rng.random() < 0.3:
        words.insert(rng.randrange(len(words)), rng.choice(PUNCT))
    return words


def write_char_split(path, rng, lexicon, weights, target_chars, seed_all=False):
    lines = []
    total = 0
    if seed_all:
        # Guarantees every symbol appears in the training split.
        lines.append(" ".join(LETTERS))
        lines.append(" ".join(DIGITS + PUNCT))
        total += 2 * 49
    while total < target_chars:
        words = char_sentence(rng, lexicon, weights)
        symbols = " _ ".join(" ".join(w) for w in words)
        lines.append(symbols)
        total += len(symbols.split()) + 1
    path.write_text("\n".join(" " + l + " " for l in lines) + "\n")


def write_word_split(path, rng, lexicon, weights, n_tokens, oov=()):
    lines = []
    total = 0
    while total < n_tokens:
        words = rng.choices(lexicon, weights=weights, k=rng.randint(6, 18))
        if oov and rng.random() < 0.2:
            words[rng.randrange(len(words))] = rng.choice(oov)
        lines.append(" ".join(words))
        total += len(words) + 1
    path.write_text("\n".join(" " + l + " " for l in lines) + "\n")


def digit_template(rng, label):
    """28x28 template: a label-specific set of strokes."""
    img = [[0.0] * 28 for _ in range(28)]
    strokes = {
        0: [(6, 8, 6, 20), (6, 20, 22, 20), (22, 20, 22, 8), (22, 8, 6, 8)],
        1: [(5, 14, 23, 14)],
        2: [(6, 8, 6, 20), (6, 20, 14, 20), (14, 20, 14, 8), (14, 8, 22, 8), (22, 8, 22, 20)],
        3: [(6, 8, 6, 20), (14, 10, 14, 20), (22, 8, 22, 20), (6, 20, 22, 20)],
        4: [(5, 8, 14, 8), (14, 8, 14, 20), (5, 18, 23, 18)],
        5: [(6, 20, 6, 8), (6, 8, 14, 8), (14, 8, 14, 20), (14, 20, 22, 20), (22, 20, 22, 8)],
        6: [(6, 18, 6, 8), (6, 8, 22, 8), (22, 8, 22, 20), (22, 20, 14, 20), (14, 20, 14, 8)],
        7: [(6, 8, 6, 20), (6, 20, 23, 10)],
        8: [(6, 8, 6, 20), (14, 8, 14, 20), (22, 8, 22, 20), (6, 8, 22, 8), (6, 20, 22, 20)],
        9: [(6, 8, 6, 20), (6, 8, 14, 8), (14, 8, 14, 20), (6, 20, 22, 20)],
    }[label]
    dr, dc = rng.randint(-2, 2), rng.randint(-2, 2)
    for r0, c0, r1, c1 in strokes:
        steps = max(abs(r1 - r0), abs(c1 - c0), 1)
        for k in range(steps + 1):
            r = round(r0 + (r1 - r0) * k / steps) + dr
            c = round(c0 + (c1 - c0) * k / steps) + dc
            for rr in (r, r + 1):
                for cc in (c, c + 1):
                    if 0 <= rr < 28 and 0 <= cc < 28:
                        img[rr][cc] = 1.0
    pixels = bytearray()
    for row in img:
        for v in row:
            noisy = v * rng.uniform(0.7, 1.0) + rng.uniform(0.0, 0.1)
            pixels.append(max(0, min(255, int(round(noisy * 255)))))
    return bytes(pixels)


def write_idx(dir_, prefix, rng, count):
    labels = [k % 10 for k in range(count)]
    rng.shuffle(labels)
    images = b"".join(digit_template(rng, l) for l in labels)
    (dir_ / f"{prefix}-images-idx3-ubyte").write_bytes(
        struct.pack(">IIII", 0x803, count, 28, 28) + images
    )
    (dir_ / f"{prefix}-labels-idx1-ubyte").write_bytes(
        struct.pack(">II", 0x801, count) + bytes(labels)
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"))
    ap.add_argument("--seed", type=int, default=20180601)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    rng = random.Random(args.seed)

    char_dir = out / "ptb_char_tiny"
    char_dir.mkdir(parents=True, exist_ok=True)
    lexicon = make_lexicon(rng, 120)
    weights = zipf_weights(len(lexicon))
    write_char_split(char_dir / "ptb.char.train.txt", rng, lexicon, weights, 60000, seed_all=True)
    write_char_split(char_dir / "ptb.char.valid.txt", rng, lexicon, weights, 6000)
    write_char_split(char_dir / "ptb.char.test.txt", rng, lexicon, weights, 6000)

    word_dir = out / "ptb_word_tiny"
    word_dir.mkdir(parents=True, exist_ok=True)
    vocab = make_lexicon(rng, 400, 3, 9)
    wweights = zipf_weights(len(vocab))
    oov = make_lexicon(random.Random(args.seed + 1), 20, 10, 12)
    write_word_split(word_dir / "ptb.train.txt", rng, vocab, wweights, 30000)
    write_word_split(word_dir / "ptb.valid.txt", rng, vocab, wweights, 3000, oov)
    write_word_split(word_dir / "ptb.test.txt", rng, vocab, wweights, 3000, oov)

    mnist_dir = out / "mnist_tiny"
    mnist_dir.mkdir(parents=True, exist_ok=True)
    write_idx(mnist_dir, "train", rng, 600)
    write_idx(mnist_dir, "t10k", rng, 200)


if __name__ == "__main__":
    main()
