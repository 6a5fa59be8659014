import numpy as np
import pytest

from dodr.diffusion import diffuse
from dodr.errors import InvalidInputError
from dodr.graph import GraphConfig, build_graph

from conftest import random_batch


def test_identity_is_fixed():
    stack = diffuse(np.eye(4), (1, 2, 3))
    assert stack.ts == [1, 2, 3]
    for step in stack:
        np.testing.assert_array_equal(step.matrix, np.eye(4))


def test_weights_are_reciprocal_steps():
    stack = diffuse(np.eye(2), {3, 1, 2})
    assert [s.weight for s in stack] == [1.0, 0.5, 1.0 / 3.0]


def test_chain_second_power(chain):
    P2 = diffuse(chain["P"], (2,)).steps[0].matrix
    # oracle: explicit triple loop over the hand-derived P
    P = chain["P"].tolist()
    expected = [[sum(P[i][m] * P[m][j] for m in range(3)) for j in range(3)] for i in range(3)]
    np.testing.assert_allclose(P2, expected, atol=1e-15)
    assert P2[0, 1] == pytest.approx(0.3468, abs=1e-4)
    assert P2[0, 2] == pytest.approx(0.3966, abs=1e-4)
    assert P2[1, 2] == pytest.approx(0.6125, abs=1e-4)


def test_absorbing_row(chain):
    for step in diffuse(chain["P"], (1, 2, 3, 5)):
        np.testing.assert_array_equal(step.matrix[2], [0, 0, 1])


def test_sparse_steps_match_matrix_power(chain):
    stack = diffuse(chain["P"], (4, 2))
    assert stack.ts == [2, 4]
    np.testing.assert_allclose(stack.steps[1].matrix,
                               np.linalg.matrix_power(chain["P"], 4), atol=1e-15)


@pytest.mark.parametrize("steps", [(), (0, 1), (-1,)])
def test_invalid_steps(steps):
    with pytest.raises(InvalidInputError):
        diffuse(np.eye(2), steps)


def test_random_batches_invariants():
    rng = np.random.default_rng(21)
    for _ in range(200):
        z, y, k = random_batch(rng)
        P = build_graph(z, y, GraphConfig(k=k, sigma_rank=min(7, k))).transition
        stack = diffuse(P)
        off = ~np.eye(len(y), dtype=bool)
        previous = None
        for step in stack:
            M = step.matrix
            assert np.all(np.abs(M.sum(axis=1) - 1) < 1e-8)
            assert np.all((M >= 0) & (M <= 1))
            assert np.all(y[:, None] <= y[None, :], where=(M > 0) & off)
            if previous is not None:
                assert np.all(M[previous > 0] > 0)
            previous = M
