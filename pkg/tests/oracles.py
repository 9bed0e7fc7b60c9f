"""Reference implementations written independently of the package code."""

import hashlib
from fractions import Fraction

from abeacs.policy import And, Leaf, Or


def eval_formula(formula, attrs):
    """Plain boolean evaluation of an AND/OR formula."""
    if isinstance(formula, Leaf):
        return formula.label in attrs
    results = [eval_formula(c, attrs) for c in formula.children]
    return all(results) if isinstance(formula, And) else any(results)


def interpolate_zero_mod(points, p):
    """Lagrange at 0 over the rationals, then reduced mod p."""
    total = Fraction(0)
    for i, (xi, yi) in enumerate(points):
        term = Fraction(yi)
        for j, (xj, _) in enumerate(points):
            if i != j:
                term *= Fraction(xj, xj - xi)
        total += term
    return total.numerator * pow(total.denominator, -1, p) % p


def min_be(v):
    return v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")


def lp(b):
    return len(b).to_bytes(4, "big") + b


def matrix_digest(rows, secret):
    data = lp(min_be(len(rows)))
    for row in rows:
        data += lp(min_be(len(row)))
        for v in row:
            data += lp(min_be(v))
    return hashlib.sha256(data + lp(min_be(secret))).digest()


def random_formula(rng, labels, depth=0):
    """Random nested AND/OR formula over ``labels`` (each used once)."""
    if len(labels) == 1:
        return Leaf(labels[0])
    k = rng.randint(2, min(4, len(labels)))
    cuts = sorted(rng.sample(range(1, len(labels)), k - 1))
    parts = [labels[a:b] for a, b in zip([0] + cuts, cuts + [len(labels)])]
    kids = tuple(random_formula(rng, part, depth + 1) for part in parts)
    return (And if rng.random() < 0.5 else Or)(kids)
