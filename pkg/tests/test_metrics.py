import numpy as np
import pytest

from dodr.diffusion import diffuse
from dodr.errors import UndefinedMetricError
from dodr.graph import GraphConfig, build_graph
from dodr.loss import odr_loss
from dodr.metrics import (
    EpochMetrics,
    discretize,
    forward_inversion_rate,
    macro_f1,
    qwk,
    select_checkpoint,
)


def brute_qwk(t, p, C=5):
    O = [[0.0] * C for _ in range(C)]
    for a, b in zip(t, p):
        O[a][b] += 1
    m = len(t)
    rows = [sum(O[i]) for i in range(C)]
    cols = [sum(O[i][j] for i in range(C)) for j in range(C)]
    num = den = 0.0
    for i in range(C):
        for j in range(C):
            w = (i - j) ** 2 / (C - 1) ** 2
            num += w * O[i][j]
            den += w * rows[i] * cols[j] / m
    return 1 - num / den


def brute_macro_f1(t, p, C=5):
    total = 0.0
    for c in range(C):
        tp = sum(1 for a, b in zip(t, p) if a == c and b == c)
        fp = sum(1 for a, b in zip(t, p) if a != c and b == c)
        fn = sum(1 for a, b in zip(t, p) if a == c and b != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        total += 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return total / C


def random_pairs(rng, count):
    out = []
    while len(out) < count:
        m = int(rng.integers(2, 60))
        t = rng.integers(0, 5, m)
        if len(set(t)) < 2:
            continue
        p = np.where(rng.random(m) < 0.5, t, rng.integers(0, 5, m))
        out.append((t, p))
    return out


class TestDiscretize:
    def test_round_and_clamp(self):
        np.testing.assert_array_equal(discretize([-0.4, 0.5, 4.9]), [0, 1, 4])

    def test_integers_fixed(self):
        np.testing.assert_array_equal(discretize([0.0, 1.0, 2.0, 3.0, 4.0]), [0, 1, 2, 3, 4])

    def test_half_up(self):
        assert discretize([1.5, 2.5, -7.0, 9.0]).tolist() == [2, 3, 0, 4]


class TestQwk:
    def test_perfect(self):
        assert qwk([0, 1, 2, 3, 4, 2], [0, 1, 2, 3, 4, 2]) == 1.0

    def test_fully_swapped(self):
        assert qwk([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(-1.0, abs=1e-12)

    def test_chance_level(self):
        rng = np.random.default_rng(0)
        t, p = rng.integers(0, 5, 200_000), rng.integers(0, 5, 200_000)
        assert abs(qwk(t, p)) < 0.01

    def test_degenerate(self):
        with pytest.raises(UndefinedMetricError):
            qwk([2, 2, 2], [2, 2, 2])

    def test_farther_error_scores_lower(self):
        t = [0, 1, 2, 3, 4, 2]
        near = qwk(t, [0, 1, 3, 3, 4, 2])
        far = qwk(t, [0, 1, 4, 3, 4, 2])
        assert far < near < 1.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        t, p = rng.integers(0, 5, 50), rng.integers(0, 5, 50)
        perm = rng.permutation(50)
        assert qwk(t[perm], p[perm]) == pytest.approx(qwk(t, p), abs=1e-15)
        assert macro_f1(t[perm], p[perm]) == macro_f1(t, p)

    def test_matches_brute_force(self):
        for t, p in random_pairs(np.random.default_rng(2), 200):
            assert qwk(t, p) == pytest.approx(brute_qwk(t.tolist(), p.tolist()), abs=1e-12)
            assert qwk(t, p) <= 1.0


class TestMacroF1:
    def test_perfect(self):
        assert macro_f1([0, 1, 2, 3, 4], [0, 1, 2, 3, 4]) == 1.0

    def test_single_predicted_class(self):
        t = np.repeat(np.arange(5), 10)
        assert macro_f1(t, np.zeros(50, dtype=int)) == pytest.approx((2 * 0.2 / 1.2) / 5)

    def test_absent_classes_count_as_zero(self):
        assert macro_f1([0, 3, 3, 0], [0, 3, 3, 0]) == pytest.approx(0.4)

    def test_matches_brute_force(self):
        for t, p in random_pairs(np.random.default_rng(3), 200):
            value = macro_f1(t, p)
            assert value == pytest.approx(brute_macro_f1(t.tolist(), p.tolist()), abs=1e-12)
            assert 0.0 <= value <= 1.0


class TestInversionRate:
    def test_monotone(self, chain):
        assert forward_inversion_rate(diffuse(chain["P"]), [0.0, 1.0, 2.0], chain["y"]) == 0.0

    def test_fully_inverted_chain(self, chain):
        stack = diffuse(chain["P"], (1,))
        assert forward_inversion_rate(stack, [2.0, 1.0, 0.0], chain["y"]) == 1.0

    def test_identity(self):
        assert forward_inversion_rate(diffuse(np.eye(3)), [3.0, 2.0, 1.0]) == 0.0

    def test_zero_iff_odr_zero(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n = int(rng.integers(1, 25))
            z, y = rng.normal(size=(n, 2)), rng.integers(0, 5, n)
            stack = diffuse(build_graph(z, y, GraphConfig(k=6)).transition)
            s = y + rng.normal(scale=0.4, size=n) * rng.integers(0, 2)
            rate = forward_inversion_rate(stack, s, y)
            assert 0.0 <= rate <= 1.0
            assert (rate == 0.0) == (odr_loss(stack, s)[0] == 0.0)


def _history(qwks, f1s):
    return [EpochMetrics(i, q, f, 0.0) for i, (q, f) in enumerate(zip(qwks, f1s))]


class TestSelectCheckpoint:
    def test_single(self):
        assert select_checkpoint(_history([0.3], [0.2])) == 0

    def test_tie_goes_to_earliest(self):
        assert select_checkpoint(_history([0.5, 0.9], [0.9, 0.5])) == 0

    def test_constant_metric(self):
        assert select_checkpoint(_history([0.2, 0.8, 0.5], [0.1, 0.1, 0.1])) == 1

    def test_composite(self):
        assert select_checkpoint(_history([0.1, 0.6, 0.7], [0.0, 0.9, 0.4])) == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            select_checkpoint([])
