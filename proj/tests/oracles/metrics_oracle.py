#!/usr/bin/env python3
"""Independent reference values for the metric and embedder tests.

Run it and compare the printed numbers with the constants frozen in
tests/unit/test_metrics.cpp and tests/unit/test_embedder.cpp.
"""
import math
import re
from collections import Counter

EPS = 1e-9
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
SIGN_SEED = FNV_OFFSET ^ 0x9E3779B97F4A7C15
MASK = (1 << 64) - 1


def fnv1a(data, seed):
    h = seed
    for b in data.encode():
        h ^= b
        h = (h * FNV_PRIME) & MASK
    return h


def toks(s):
    return re.findall(r"[a-z0-9]+", s.lower())


def ngrams(t, n):
    return Counter(tuple(t[i:i + n]) for i in range(len(t) - n + 1))


def bleu(c, r, max_n=4):
    c, r = toks(c), toks(r)
    logs = []
    for n in range(1, max_n + 1):
        if len(c) < n:
            break
        cc, rc = ngrams(c, n), ngrams(r, n)
        m = sum(min(v, rc[g]) for g, v in cc.items())
        total = len(c) - n + 1
        p = m / total if m else EPS / (total + EPS)
        logs.append(math.log(p))
    bp = math.exp(1 - len(r) / len(c)) if len(c) < len(r) else 1.0
    return bp * math.exp(sum(logs) / len(logs))


def rouge_n(c, r, n):
    c, r = toks(c), toks(r)
    cc, rc = ngrams(c, n), ngrams(r, n)
    m = sum((cc & rc).values())
    rec = m / sum(rc.values())
    prec = m / sum(cc.values()) if cc else 0.0
    f = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return prec, rec, f


def lcs(a, b):
    t = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a)):
        for j in range(len(b)):
            t[i + 1][j + 1] = t[i][j] + 1 if a[i] == b[j] else max(t[i][j + 1], t[i + 1][j])
    return t[-1][-1]


def rouge_l(c, r):
    c, r = toks(c), toks(r)
    l = lcs(c, r)
    rec, prec = l / len(r), l / len(c)
    f = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return prec, rec, f


def hashed(text, dim):
    v = [0] * dim
    for t in toks(text):
        b = fnv1a(t, FNV_OFFSET) % dim
        v[b] += -1 if fnv1a(t, SIGN_SEED) >> 63 else 1
    norm = math.sqrt(sum(x * x for x in v))
    return [x / norm for x in v]


PAIRS = [
    ("the cat sat on the mat", "the cat is on the mat"),
    ("a b", "a c"),
    ("a x b y c", "a b c"),
    ("the quick brown fox jumps over the lazy dog today",
     "the quick red fox jumped over the lazy dog again today"),
    ("police killed the gunman", "the gunman was shot dead by police"),
    ("It is a guide to action which ensures that the military always obeys the commands of the party",
     "It is a guide to action that ensures that the military will forever heed Party commands"),
    ("the", "the cat"),
    ("the the the the the the the", "the cat is on the mat"),
]

if __name__ == "__main__":
    for c, r in PAIRS:
        print(repr(c), repr(r))
        print("  bleu   %.17g" % bleu(c, r))
        for n in (1, 2):
            print("  rouge%d %.17g %.17g %.17g" % ((n,) + rouge_n(c, r, n)))
        print("  rougeL %.17g %.17g %.17g" % rouge_l(c, r))
    for t in ("alpha", "beta"):
        print(t, fnv1a(t, FNV_OFFSET), fnv1a(t, FNV_OFFSET) % 8, fnv1a(t, SIGN_SEED) >> 63)
    print("alpha beta dim8", ["%.17g" % x for x in hashed("alpha beta", 8)])
    a, b = ("a", "b")
    print("a/b buckets dim384", fnv1a(a, FNV_OFFSET) % 384, fnv1a(b, FNV_OFFSET) % 384)
