import numpy as np
import pytest

from ifipm import (
    Iterate,
    LinearProgram,
    binary_length,
    canonical_reformulate,
    errors,
    in_neighborhood,
    preprocess,
    residuals,
    validate,
)


def test_validate_identity():
    lp = LinearProgram(np.eye(2), np.ones(2), np.ones(2))
    report = validate(lp)
    assert report.ok
    assert report.rank == 2


def test_rank_deficient_rejected():
    with pytest.raises(errors.RankDeficient):
        LinearProgram(np.array([[1.0, 1.0], [2.0, 2.0]]), np.ones(2), np.ones(2))


def test_dimension_order_rejected():
    with pytest.raises(errors.DimensionOrder):
        LinearProgram(np.array([[1.0, 0], [0, 1.0], [1.0, 1.0]]), np.ones(3), np.ones(2))


def test_non_finite_rejected():
    with pytest.raises(errors.NonFinite):
        LinearProgram(np.array([[1.0, np.nan]]), np.ones(1), np.ones(2))


def test_residuals_identity_case():
    n = 4
    lp = LinearProgram(np.eye(n), np.ones(n), np.ones(n))
    it = Iterate(np.ones(n), np.zeros(n), np.ones(n))
    rep = residuals(lp, it)
    assert rep.primal_inf == 0.0
    assert rep.dual_inf == 0.0
    assert rep.gap == float(n)
    assert rep.mu == 1.0
    # gap and mu come from the same dot product
    assert rep.mu == rep.gap / n


def test_residuals_null_space_perturbation():
    # shifting x along null(A) cannot change the primal residual
    A = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    lp = LinearProgram(A, np.array([2.0, 2.0]), np.ones(3))
    x = np.array([1.0, 1.0, 1.0])
    v = np.array([1.0, -1.0, 1.0])  # A v = 0
    assert np.allclose(A @ v, 0.0)
    base = residuals(lp, Iterate(x, np.zeros(2), np.ones(3)))
    moved = residuals(lp, Iterate(x + 0.3 * v, np.zeros(2), np.ones(3)))
    assert base.primal_inf == pytest.approx(0.0, abs=1e-15)
    assert moved.primal_inf == pytest.approx(0.0, abs=1e-14)


def test_neighborhood_central_point():
    it = Iterate(np.ones(5), np.zeros(2), np.ones(5))
    for theta in (0.0, 0.3, 0.99):
        assert in_neighborhood(it, theta)


def test_neighborhood_rejects_detuned_products():
    # products (1.4, 1), mu = 1.2, deviation ||(0.2, -0.2)|| = 0.2828 > 0.2*1.2
    it = Iterate(np.array([1.0, 1.0]), np.zeros(1), np.array([1.4, 1.0]))
    assert not in_neighborhood(it, 0.2)
    assert in_neighborhood(it, 0.3)  # 0.2828 <= 0.36


def test_neighborhood_requires_interior():
    it = Iterate(np.array([1.0, -0.1]), np.zeros(1), np.array([1.0, 1.0]))
    assert not in_neighborhood(it, 0.9)
    zero = Iterate(np.array([1.0, 0.0]), np.zeros(1), np.array([1.0, 1.0]))
    assert not in_neighborhood(zero, 0.9)


def test_neighborhood_componentwise_bound():
    # 2-norm membership implies (1-theta) mu <= x_i s_i <= (1+theta) mu
    rng = np.random.default_rng(3)
    theta = 0.6
    for _ in range(200):
        n = int(rng.integers(2, 9))
        x = rng.uniform(0.1, 3.0, n)
        s = rng.uniform(0.1, 3.0, n)
        it = Iterate(x, np.zeros(1), s)
        if in_neighborhood(it, theta):
            mu = it.mu
            assert np.all(x * s >= (1 - theta) * mu - 1e-12)
            assert np.all(x * s <= (1 + theta) * mu + 1e-12)


def test_binary_length_unit_instance():
    lp = LinearProgram(np.array([[1.0]]), np.array([1.0]), np.array([1.0]))
    # mn + m + n = 3 plus three ceil(log2(2)) = 1 terms
    assert binary_length(lp) == 6


def test_binary_length_zero_data():
    lp = LinearProgram(np.array([[0.0, 1e-300]]), np.array([0.0]), np.array([0.0, 0.0]))
    # log2(0 + 1) terms all vanish: m n + m + n = 2 + 1 + 2
    assert binary_length(lp) == 5


def test_binary_length_power_of_two_crossings():
    def term(v):
        lp = LinearProgram(np.array([[v]]), np.array([0.0]), np.array([0.0]))
        return binary_length(lp)

    # doubling a magnitude adds exactly one bit when crossing a power of 2
    assert term(4.0) - term(2.0) == 1
    assert term(8.0) - term(4.0) == 1
    # within the same power-of-two bracket the term is unchanged
    assert term(6.0) == term(7.0)


def test_preprocess_identity_prefix():
    rng = np.random.default_rng(0)
    N = rng.standard_normal((3, 4))
    A = np.hstack([np.eye(3), N])
    lp = LinearProgram(A, np.arange(1.0, 4.0), np.ones(7))
    prep = preprocess(lp, basis=[0, 1, 2])
    np.testing.assert_allclose(prep.A_hat, A, atol=1e-14)
    np.testing.assert_allclose(prep.b_hat, lp.b, atol=1e-14)


def test_preprocess_duplicate_columns_rejected():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0]])
    lp = LinearProgram(A, np.ones(2), np.ones(3))
    with pytest.raises(errors.SingularBasis):
        preprocess(lp, basis=[0, 1])


def test_preprocess_identity_block_postcondition():
    rng = np.random.default_rng(5)
    lp = LinearProgram(rng.standard_normal((3, 5)), rng.standard_normal(3),
                       rng.standard_normal(5))
    prep = preprocess(lp)
    block = prep.A_hat[:, list(prep.basis)]
    np.testing.assert_allclose(block, np.eye(3), atol=1e-10)


def test_preprocess_idempotent_in_effect():
    rng = np.random.default_rng(6)
    lp = LinearProgram(rng.standard_normal((4, 9)), rng.standard_normal(4),
                       rng.standard_normal(9))
    prep = preprocess(lp)
    again = preprocess(lp, basis=prep.basis)
    np.testing.assert_allclose(again.A_hat, prep.A_hat, atol=1e-12)


def test_canonical_reformulate_shapes_and_flag():
    rng = np.random.default_rng(1)
    lp = LinearProgram(rng.standard_normal((2, 4)), rng.standard_normal(2),
                       rng.standard_normal(4))
    doubled = canonical_reformulate(lp)
    assert doubled.A.shape == (4, 8)
    assert doubled.empty_interior
    assert not lp.empty_interior


def test_canonical_reformulate_feasibility_map():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((2, 4))
    x = rng.uniform(0.5, 1.5, 4)
    lp = LinearProgram(A, A @ x, rng.standard_normal(4))
    doubled = canonical_reformulate(lp)
    lifted = np.concatenate([x, np.zeros(4)])  # (x, b - Ax, Ax - b) = (x, 0, 0)
    np.testing.assert_allclose(doubled.A @ lifted, doubled.b, atol=1e-12)
    # the lifted point sits on the boundary: no neighborhood admits it
    it = Iterate(lifted, np.zeros(4), np.ones(8))
    assert not in_neighborhood(it, 0.99)
