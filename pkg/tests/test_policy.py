import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abeacs.errors import InsufficientSharesError, PolicySyntaxError
from abeacs.field import PrimeField
from abeacs.policy import (
    And,
    Leaf,
    Or,
    PolicyMatrix,
    all_subsets,
    assign_shares,
    build_tree,
    formula_leaves,
    formula_to_text,
    parse_policy,
    policy_id,
    reconstruct_secret,
    recover_root_secret,
    satisfies,
    store_policy,
)

from conftest import GOLDEN_POLICY, GOLDEN_ROWS
from oracles import eval_formula, interpolate_zero_mod, matrix_digest, random_formula

P = 1009
F = PrimeField(P)
# frozen from the independent digest oracle
GOLDEN_POLICY_ID = "b190e4bc67da58caeeafb8905eb9d2c4d4810cea9f8c0c6820622d03b45dbd42"


def golden_matrix():
    tree = build_tree(parse_policy(GOLDEN_POLICY))
    return assign_shares(tree, random.Random(0), F, secret=7, coefficients={0: [1, 1]})


class TestParse:
    def test_three_clause_policy(self):
        f = parse_policy(GOLDEN_POLICY)
        assert f == And(
            (
                Or((Leaf("SA_1"), Leaf("ObA_1"))),
                Or((Leaf("SA_2"), Leaf("ObA_2"))),
                Or((Leaf("SA_3"), Leaf("ObA_3"))),
            )
        )

    def test_single_attribute(self):
        assert parse_policy("A") == Leaf("A")

    def test_and_binds_tighter(self):
        assert parse_policy("A OR B AND C") == Or((Leaf("A"), And((Leaf("B"), Leaf("C")))))

    @pytest.mark.parametrize(
        "text,offset",
        [
            ("A AND (B OR", 11),
            ("A AND", 5),
            ("(A", 2),
            ("A B", 2),
            ("A AND $", 6),
            ("", 0),
            ("A)", 1),
            ("OR A", 0),
        ],
    )
    def test_syntax_errors_carry_offset(self, text, offset):
        with pytest.raises(PolicySyntaxError) as info:
            parse_policy(text)
        assert info.value.offset == offset

    def test_text_roundtrip_random(self):
        r = random.Random(5)
        for _ in range(100):
            labels = [f"a{i}" for i in range(r.randint(1, 10))]
            f = random_formula(r, labels)
            assert formula_leaves(parse_policy(formula_to_text(f))) == labels
            g = parse_policy(formula_to_text(f))
            for attrs in (set(), set(labels), set(labels[::2])):
                assert eval_formula(g, attrs) == eval_formula(f, attrs)


class TestTree:
    def test_golden_shape(self):
        tree = build_tree(parse_policy(GOLDEN_POLICY))
        assert (tree.root.t, tree.root.n) == (3, 3)
        assert [(g.t, g.n) for g in tree.gates()[1:]] == [(1, 2)] * 3
        assert len(tree.leaves()) == 6

    def test_all_and(self):
        tree = build_tree(parse_policy("A AND B AND C AND D"))
        assert (tree.root.t, tree.root.n) == (4, 4)
        assert len(tree.gates()) == 1

    def test_or(self):
        tree = build_tree(parse_policy("A OR B"))
        assert (tree.root.t, tree.root.n) == (1, 2)

    def test_single_attribute_clause_is_direct_leaf(self):
        tree = build_tree(parse_policy("A AND (B OR C)"))
        kinds = [type(c).__name__ for c in tree.root.children]
        assert kinds == ["LeafNode", "Gate"]

    def test_four_clause_root(self):
        tree = build_tree(parse_policy("(S1 OR S2) AND O1 AND Op AND En"))
        assert (tree.root.t, tree.root.n) == (4, 4)


class TestShares:
    def test_golden_matrix(self):
        _, matrix, phi = golden_matrix()
        assert matrix.rows == GOLDEN_ROWS
        assert phi.value == 7
        assert matrix.rho[(1, 1)] == "SA_1" and matrix.rho[(1, 2)] == "ObA_1"
        assert matrix.rho[(3, 2)] == "ObA_3"
        assert len(matrix.rho) == 6

    def test_single_leaf_matrix(self):
        _, matrix, phi = assign_shares(build_tree(parse_policy("A")), random.Random(1), F)
        assert matrix.rows == [[1, 1, phi.value]]

    def test_random_shares_interpolate_at_every_gate(self):
        r = random.Random(11)
        for _ in range(50):
            labels = [f"x{i}" for i in range(r.randint(1, 9))]
            tree = build_tree(random_formula(r, labels))
            filled, matrix, phi = assign_shares(tree, r, F)
            assert filled.root.secret == phi.value
            for i, gate in enumerate(filled.gates()):
                pts = [(x, matrix.share(i, x)) for x in range(1, gate.n + 1)]
                assert all(y != 0 for _, y in pts)
                assert matrix.rows[i][2 + gate.n :] == [0] * (len(matrix.rows[i]) - 2 - gate.n)
                for subset in itertools.combinations(pts, gate.t):
                    assert interpolate_zero_mod(subset, P) == gate.secret

    def test_forced_coefficients_length_checked(self):
        tree = build_tree(parse_policy(GOLDEN_POLICY))
        with pytest.raises(ValueError):
            assign_shares(tree, random.Random(0), F, secret=7, coefficients={0: [1]})

    def test_tree_from_matrix(self):
        filled, matrix, _ = golden_matrix()
        rebuilt = matrix.to_tree()
        assert [(g.t, g.n) for g in rebuilt.gates()] == [(g.t, g.n) for g in filled.gates()]
        assert [(l.attr, l.secret) for l in rebuilt.leaves()] == [(l.attr, l.secret) for l in filled.leaves()]

    def test_json_roundtrip(self):
        _, matrix, _ = golden_matrix()
        assert PolicyMatrix.from_json(matrix.to_json()) == matrix

    def test_one_forged_share_rarely_hits_secret(self):
        # t-1 true shares plus a forged one recover the secret only when the forgery is the true share
        r = random.Random(3)
        tree = build_tree(parse_policy("A AND B AND C"))
        _, matrix, phi = assign_shares(tree, r, F)
        true = [(1, matrix.share(0, 1)), (2, matrix.share(0, 2))]
        hits = [y for y in range(1, P) if reconstruct_secret(true + [(3, y)], 3, P).value == phi.value]
        assert hits == [matrix.share(0, 3)]


class TestPolicyId:
    def test_golden_digest(self):
        _, matrix, phi = golden_matrix()
        assert policy_id(matrix, phi).hex() == GOLDEN_POLICY_ID
        assert matrix_digest(GOLDEN_ROWS, 7).hex() == GOLDEN_POLICY_ID

    def test_secret_changes_digest(self):
        _, matrix, _ = golden_matrix()
        assert policy_id(matrix, 7) != policy_id(matrix, 8)

    def test_store_is_idempotent(self):
        _, matrix, phi = golden_matrix()
        registry = {}
        pid, added = store_policy(matrix, phi, registry)
        assert added and len(registry) == 1
        pid2, added2 = store_policy(matrix, phi, registry)
        assert pid2 == pid and not added2 and len(registry) == 1


class TestReconstruct:
    def test_golden_three_shares(self):
        assert reconstruct_secret([(1, 9), (2, 13), (3, 19)], 3, P).value == 7

    def test_two_shares_insufficient(self):
        with pytest.raises(InsufficientSharesError):
            reconstruct_secret([(1, 9), (2, 13)], 3, P)

    def test_duplicate_x(self):
        with pytest.raises(ValueError):
            reconstruct_secret([(1, 9), (1, 9), (3, 19)], 3, P)

    def test_field_element_shares(self):
        assert reconstruct_secret([(1, F(9)), (2, F(13)), (3, F(19))], 3).value == 7

    @given(st.lists(st.integers(0, P - 1), min_size=1, max_size=8), st.data())
    def test_polynomial_property(self, coeffs, data):
        t = len(coeffs)
        xs = data.draw(st.lists(st.integers(1, 40), min_size=t, max_size=t, unique=True))
        ys = [sum(c * x**k for k, c in enumerate(coeffs)) % P for x in xs]
        assert reconstruct_secret(list(zip(xs, ys)), t, P).value == coeffs[0]


class TestSatisfies:
    def test_golden_cases(self):
        tree = build_tree(parse_policy(GOLDEN_POLICY))
        assert satisfies(tree, {"SA_1", "SA_2", "SA_3"})
        assert not satisfies(tree, {"SA_1", "SA_2"})
        assert satisfies(tree, {l.attr for l in tree.leaves()})

    def test_root_recovery_golden(self):
        _, matrix, _ = golden_matrix()
        assert recover_root_secret(matrix, {"SA_1", "SA_2", "SA_3"}) == 7
        assert recover_root_secret(matrix, {"ObA_1", "SA_2", "ObA_3"}) == 7
        assert recover_root_secret(matrix, {"SA_1", "SA_2"}) is None

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32), st.integers(1, 8))
    def test_agrees_with_boolean_oracle(self, seed, n):
        r = random.Random(seed)
        labels = [f"L{i}" for i in range(n)]
        formula = random_formula(r, labels)
        tree = build_tree(formula)
        _, matrix, phi = assign_shares(tree, r, F)
        for subset in all_subsets(labels):
            expected = eval_formula(formula, set(subset))
            assert satisfies(tree, subset) == expected
            assert (recover_root_secret(matrix, subset) == phi.value) == expected
