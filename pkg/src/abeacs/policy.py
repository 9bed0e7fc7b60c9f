"""AND/OR policies compiled into (t, n) threshold trees and share matrices.

Compilation pipeline::

    text --parse_policy--> formula --build_tree--> ThresholdTree
         --assign_shares--> (tree with secrets, PolicyMatrix, root secret)

Every gate ``(t, n)`` with secret ``s`` hands child ``x`` (1-based) the value
``f(x)`` of a random degree ``t-1`` polynomial with ``f(0) = s``. The matrix
stores one row per gate, ``[t, n, f(1), ..., f(n)]`` zero-padded to the
widest gate; row 0 is the root and the remaining rows follow a pre-order
walk, so for two-level policies rows 1..r are the root's child gates in
order. Share values are never 0, which keeps the padding unambiguous.
"""

from __future__ import annotations

import copy
import random
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Callable, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .encoding import int_bytes, length_prefixed, sha256
from .errors import InsufficientSharesError, PolicySyntaxError
from .field import FieldElement, PrimeField

# ---------------------------------------------------------------- formulas


@dataclass(frozen=True)
class Leaf:
    label: str


@dataclass(frozen=True)
class And:
    children: Tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    children: Tuple["Formula", ...]


Formula = Union[Leaf, And, Or]

_TOKEN = re.compile(r"(?P<lp>\()|(?P<rp>\))|(?P<word>[A-Za-z0-9_.:@#/-]+)")


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise PolicySyntaxError(f"unknown token {text[pos]!r}", pos)
        value = m.group()
        if m.lastgroup == "word":
            kind = value if value in ("AND", "OR") else "IDENT"
        else:
            kind = value
        tokens.append((kind, value, pos))
        pos = m.end()
    tokens.append(("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> Tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self, kind: str) -> Tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind:
            what = "end of input" if tok[0] == "EOF" else repr(tok[1])
            raise PolicySyntaxError(f"expected {kind}, found {what}", tok[2])
        self.i += 1
        return tok

    def expr(self) -> Formula:
        terms = [self.term()]
        while self.peek()[0] == "OR":
            self.i += 1
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else Or(tuple(terms))

    def term(self) -> Formula:
        factors = [self.factor()]
        while self.peek()[0] == "AND":
            self.i += 1
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else And(tuple(factors))

    def factor(self) -> Formula:
        kind, value, offset = self.peek()
        if kind == "IDENT":
            self.i += 1
            return Leaf(value)
        if kind == "(":
            self.i += 1
            inner = self.expr()
            self.take(")")
            return inner
        what = "end of input" if kind == "EOF" else repr(value)
        raise PolicySyntaxError(f"expected attribute or '(', found {what}", offset)


def parse_policy(text: str) -> Formula:
    """Parse ``expr := term (OR term)*; term := factor (AND factor)*``.

    AND binds tighter than OR. Offsets in errors are character offsets,
    which equal byte offsets for the ASCII grammar.
    """
    parser = _Parser(text)
    result = parser.expr()
    parser.take("EOF")
    return result


def formula_to_text(formula: Formula) -> str:
    if isinstance(formula, Leaf):
        return formula.label
    op = " AND " if isinstance(formula, And) else " OR "
    parts = []
    for child in formula.children:
        s = formula_to_text(child)
        parts.append(s if isinstance(child, Leaf) else f"({s})")
    return op.join(parts)


def formula_leaves(formula: Formula) -> List[str]:
    if isinstance(formula, Leaf):
        return [formula.label]
    return [label for child in formula.children for label in formula_leaves(child)]


# ---------------------------------------------------------- threshold tree


@dataclass
class LeafNode:
    attr: Hashable
    secret: Optional[int] = None


@dataclass
class Gate:
    t: int
    children: List["Node"]
    secret: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.children)

    def __post_init__(self) -> None:
        if not 1 <= self.t <= len(self.children):
            raise ValueError(f"invalid threshold ({self.t},{len(self.children)})")


Node = Union[LeafNode, Gate]


@dataclass
class ThresholdTree:
    root: Gate

    def gates(self) -> List[Gate]:
        """Gates in pre-order; index ``i`` is matrix row ``i``."""
        out: List[Gate] = []

        def walk(g: Gate) -> None:
            out.append(g)
            for c in g.children:
                if isinstance(c, Gate):
                    walk(c)

        walk(self.root)
        return out

    def leaves(self) -> List[LeafNode]:
        return [c for g in self.gates() for c in g.children if isinstance(c, LeafNode)]

    def map_leaves(self, fn: Callable[[Hashable], Hashable]) -> "ThresholdTree":
        def conv(node: Node) -> Node:
            if isinstance(node, LeafNode):
                return LeafNode(fn(node.attr), node.secret)
            return Gate(node.t, [conv(c) for c in node.children], node.secret)

        return ThresholdTree(conv(self.root))  # type: ignore[arg-type]

    def skeleton(self) -> "ThresholdTree":
        def strip(node: Node) -> Node:
            if isinstance(node, LeafNode):
                return LeafNode(node.attr)
            return Gate(node.t, [strip(c) for c in node.children])

        return ThresholdTree(strip(self.root))  # type: ignore[arg-type]


def build_tree(formula: Formula) -> ThresholdTree:
    """AND of k parts -> (k, k) gate, OR of n parts -> (1, n) gate.

    A bare attribute becomes a (1, 1) root over a single leaf.
    """

    def conv(f: Formula) -> Node:
        if isinstance(f, Leaf):
            return LeafNode(f.label)
        kids = [conv(c) for c in f.children]
        return Gate(len(kids) if isinstance(f, And) else 1, kids)

    root = conv(formula)
    if isinstance(root, LeafNode):
        root = Gate(1, [root])
    return ThresholdTree(root)


def satisfies(tree: ThresholdTree, attrs: Iterable[Hashable]) -> bool:
    """Recursive threshold evaluation of ``tree`` against an attribute set."""
    have = set(attrs)

    def ok(node: Node) -> bool:
        if isinstance(node, LeafNode):
            return node.attr in have
        return sum(1 for c in node.children if ok(c)) >= node.t

    return ok(tree.root)


# ------------------------------------------------------------------ matrix

Link = Tuple[str, Any]  # ("gate", row index) or ("leaf", attribute)


@dataclass
class PolicyMatrix:
    rows: List[List[int]]
    links: List[List[Link]]
    p: int

    @property
    def width(self) -> int:
        return max(row[1] for row in self.rows)

    def threshold(self, row: int) -> Tuple[int, int]:
        return self.rows[row][0], self.rows[row][1]

    def share(self, row: int, x: int) -> int:
        return self.rows[row][1 + x]

    @property
    def rho(self) -> Dict[Tuple[int, int], Any]:
        """(row, x) -> attribute for every share position that is a leaf."""
        return {
            (i, x): target
            for i, links in enumerate(self.links)
            for x, (kind, target) in enumerate(links, 1)
            if kind == "leaf"
        }

    def leaf_positions(self) -> List[Tuple[int, int, Any]]:
        return [(i, x, a) for (i, x), a in sorted(self.rho.items())]

    def shape(self) -> "PolicyMatrix":
        """Copy with every share replaced by 0, keeping (t, n) and links."""
        rows = [[r[0], r[1]] + [0] * (len(r) - 2) for r in self.rows]
        return PolicyMatrix(rows, [list(l) for l in self.links], self.p)

    def canonical_bytes(self) -> bytes:
        out = bytearray(length_prefixed(int_bytes(len(self.rows))))
        for row in self.rows:
            out += length_prefixed(int_bytes(len(row)))
            for v in row:
                out += length_prefixed(int_bytes(v))
        return bytes(out)

    def to_json(self, encode_attr: Callable[[Any], Any] = lambda a: a) -> Dict[str, Any]:
        return {
            "p": self.p,
            "rows": [list(r) for r in self.rows],
            "links": [
                [[kind, target if kind == "gate" else encode_attr(target)] for kind, target in links]
                for links in self.links
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any], decode_attr: Callable[[Any], Any] = lambda a: a) -> "PolicyMatrix":
        links = [
            [(kind, int(target) if kind == "gate" else decode_attr(target)) for kind, target in row]
            for row in data["links"]
        ]
        return cls([list(map(int, r)) for r in data["rows"]], links, int(data["p"]))

    def to_tree(self) -> ThresholdTree:
        """Rebuild the tree (leaf secrets included) described by the matrix."""

        def node(i: int) -> Gate:
            t, n = self.threshold(i)
            kids: List[Node] = []
            for x, (kind, target) in enumerate(self.links[i], 1):
                if kind == "gate":
                    child = node(target)
                    child.secret = self.share(i, x)
                    kids.append(child)
                else:
                    kids.append(LeafNode(target, self.share(i, x) or None))
            return Gate(t, kids)

        return ThresholdTree(node(0))


def _poly_eval(coeffs: Sequence[int], x: int, p: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def assign_shares(
    tree: ThresholdTree,
    rng: random.Random,
    field: PrimeField,
    secret: Optional[int] = None,
    coefficients: Optional[Mapping[int, Sequence[int]]] = None,
) -> Tuple[ThresholdTree, PolicyMatrix, FieldElement]:
    """Distribute a random root secret down the tree.

    ``secret`` forces the root secret and ``coefficients`` forces the
    non-constant polynomial coefficients ``[a_1, ..., a_{t-1}]`` for the gate
    at a given matrix row; both exist to reproduce worked examples.
    Randomly drawn polynomials are redrawn whenever a share would be 0.
    """
    p = field.p
    coefficients = coefficients or {}
    out = copy.deepcopy(tree)
    gates = out.gates()
    index = {id(g): i for i, g in enumerate(gates)}
    width = max(g.n for g in gates)

    phi = field.random(rng).value if secret is None else int(secret) % p
    if phi == 0:
        raise ValueError("root secret must be non-zero")
    out.root.secret = phi

    rows: List[List[int]] = []
    links: List[List[Link]] = []
    for i, gate in enumerate(gates):
        s = gate.secret
        assert s is not None
        while True:
            if i in coefficients:
                a = [int(c) % p for c in coefficients[i]]
                if len(a) != gate.t - 1:
                    raise ValueError(f"row {i} needs {gate.t - 1} coefficients")
            else:
                a = [rng.randrange(p) for _ in range(gate.t - 1)]
            shares = [_poly_eval([s] + a, x, p) for x in range(1, gate.n + 1)]
            if all(shares):
                break
            if i in coefficients:
                raise ValueError(f"forced polynomial for row {i} yields a zero share")
        row_links: List[Link] = []
        for child, value in zip(gate.children, shares):
            child.secret = value
            if isinstance(child, Gate):
                row_links.append(("gate", index[id(child)]))
            else:
                row_links.append(("leaf", child.attr))
        rows.append([gate.t, gate.n] + shares + [0] * (width - gate.n))
        links.append(row_links)
    return out, PolicyMatrix(rows, links, p), field(phi)


def policy_id(matrix: PolicyMatrix, phi_s: Union[int, FieldElement]) -> bytes:
    """SHA-256 over the canonical matrix bytes followed by the root secret."""
    return sha256(matrix.canonical_bytes(), length_prefixed(int_bytes(int(phi_s))))


def store_policy(matrix: PolicyMatrix, phi_s: Union[int, FieldElement], registry: Dict[bytes, Any], record: Any = None) -> Tuple[bytes, bool]:
    """Push the policy id into ``registry`` if absent.

    Returns ``(policy_id, added)``; a duplicate leaves the registry untouched.
    The root secret is only used for hashing and is not retained.
    """
    pid = policy_id(matrix, phi_s)
    if pid in registry:
        return pid, False
    registry[pid] = record if record is not None else matrix
    return pid, True


# ----------------------------------------------------------- reconstruction


def lagrange_at_zero(xs: Sequence[int], p: int) -> List[int]:
    """Lagrange basis coefficients lambda_x(0) for distinct ``xs`` mod ``p``."""
    lams = []
    for i, xi in enumerate(xs):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if i != j:
                num = num * xj % p
                den = den * (xj - xi) % p
        lams.append(num * pow(den, -1, p) % p)
    return lams


def reconstruct_secret(
    shares: Sequence[Tuple[int, Union[int, FieldElement]]],
    t: int,
    p: Optional[int] = None,
) -> FieldElement:
    """Interpolate the first ``t`` shares at x = 0."""
    if p is None:
        fes = [y for _, y in shares if isinstance(y, FieldElement)]
        if not fes:
            raise ValueError("modulus unknown: pass p or FieldElement shares")
        p = fes[0].field.p
    xs = [int(x) for x, _ in shares]
    if len(set(xs)) != len(xs):
        raise ValueError("duplicate x-coordinates among shares")
    if len(shares) < t:
        raise InsufficientSharesError(f"need {t} shares, got {len(shares)}")
    use = list(shares)[:t]
    lams = lagrange_at_zero([int(x) for x, _ in use], p)
    total = sum(lam * int(y) for lam, (_, y) in zip(lams, use)) % p
    return PrimeField(p)(total) if not isinstance(use[0][1], FieldElement) else use[0][1].field(total)


def recover_root_secret(matrix: PolicyMatrix, attrs: Iterable[Hashable]) -> Optional[int]:
    """Rebuild the root secret from the leaf shares matched by ``attrs``.

    Each gate's secret is interpolated from the first ``t`` children that
    could be resolved (matched leaves or recovered child gates); returns
    ``None`` when the root cannot be reached.
    """
    have = set(attrs)
    p = matrix.p

    def gate_secret(i: int) -> Optional[int]:
        t, _ = matrix.threshold(i)
        pts: List[Tuple[int, int]] = []
        for x, (kind, target) in enumerate(matrix.links[i], 1):
            if kind == "leaf":
                if target in have:
                    pts.append((x, matrix.share(i, x)))
            else:
                s = gate_secret(target)
                if s is not None:
                    pts.append((x, s))
            if len(pts) == t:
                return reconstruct_secret(pts, t, p).value
        return None

    return gate_secret(0)


def all_subsets(labels: Sequence[Hashable]) -> Iterable[Tuple[Hashable, ...]]:
    for r in range(len(labels) + 1):
        yield from combinations(labels, r)
