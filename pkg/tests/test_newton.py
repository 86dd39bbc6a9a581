import numpy as np
import pytest

from ifipm import (
    GeneratorSpec,
    Iterate,
    LinearProgram,
    SystemKind,
    assemble,
    chi_bar,
    condition_number,
    errors,
    generate,
    null_space_basis,
    preprocess,
    recover_direction_mnes,
    recover_direction_nes_procA,
    recover_direction_oss,
    select_basis_mwb,
    verify_direction,
)
from ifipm.newton import proc_a_residual_bound, system_size
from ifipm.solvers import solve_exact

from conftest import dense_newton_direction, feasible_iterate, interior_iterate

ALL_KINDS = list(SystemKind)


def test_system_sizes_match_table():
    inst = generate(GeneratorSpec(m=3, n=7, seed=1))
    prep = preprocess(inst.lp)
    expected = {SystemKind.FNS: 17, SystemKind.AS: 10, SystemKind.NES: 3,
                SystemKind.OSS: 7, SystemKind.MNES: 3, SystemKind.PNES: 3}
    for kind, size in expected.items():
        assert system_size(kind, 3, 7) == size
        sys = assemble(kind, inst.start, prep, beta=0.9)
        assert sys.matrix.shape == (size, size)
        assert sys.rhs.shape == (size,)


def test_table_flags_verified_numerically(central_instance):
    prep = preprocess(central_instance.lp)
    rng = np.random.default_rng(0)
    it = feasible_iterate(rng, central_instance)
    for kind in ALL_KINDS:
        sys = assemble(kind, it, prep, beta=0.9)
        is_sym = np.allclose(sys.matrix, sys.matrix.T, atol=1e-12)
        assert is_sym == sys.symmetric, kind
        if sys.symmetric:
            eigs = np.linalg.eigvalsh(sys.matrix)
            assert (eigs.min() > 0) == sys.positive_definite, kind
        else:
            assert not sys.positive_definite


def test_nes_identity_instance():
    n = 3
    lp = LinearProgram(np.eye(n), np.ones(n), 2 * np.ones(n))
    prep = preprocess(lp)
    it = Iterate(np.ones(n), np.zeros(n), np.ones(n))
    beta = 0.75
    sys = assemble(SystemKind.NES, it, prep, beta)
    np.testing.assert_allclose(sys.matrix, np.eye(n), atol=1e-14)
    # rhs evaluated literally: A x - beta mu A S^{-1} e with mu = 1
    np.testing.assert_allclose(sys.rhs, np.ones(n) - beta * np.ones(n), atol=1e-14)


def test_centered_iterate_zeroes_rhs(central_instance):
    prep = preprocess(central_instance.lp)
    for kind in (SystemKind.NES, SystemKind.MNES):
        sys = assemble(kind, central_instance.start, prep, beta=1.0)
        assert np.linalg.norm(sys.rhs, np.inf) <= 1e-10


def test_mnes_matrix_is_factor_product(central_instance):
    prep = preprocess(central_instance.lp)
    rng = np.random.default_rng(1)
    it = interior_iterate(rng, central_instance.lp)
    for kind in (SystemKind.MNES, SystemKind.PNES):
        sys = assemble(kind, it, prep, beta=0.9)
        np.testing.assert_allclose(sys.matrix, sys.factor_E @ sys.factor_E.T,
                                   atol=1e-10)
        assert sys.basis_used is not None


def test_boundary_iterate_rejected(central_instance):
    prep = preprocess(central_instance.lp)
    bad = Iterate(np.zeros(central_instance.lp.n), np.zeros(central_instance.lp.m),
                  np.ones(central_instance.lp.n))
    with pytest.raises(errors.SingularDiagonal):
        assemble(SystemKind.NES, bad, prep, beta=0.9)


def test_null_space_basis_line():
    V = null_space_basis(np.array([[1.0, 1.0]]))
    assert V.shape == (2, 1)
    np.testing.assert_allclose(np.abs(V[:, 0]), np.full(2, np.sqrt(0.5)), atol=1e-12)


def test_null_space_basis_properties():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((3, 6))
    V = null_space_basis(A)
    assert V.shape == (6, 3)
    assert np.linalg.norm(A @ V, np.inf) <= 1e-10
    np.testing.assert_allclose(V.T @ V, np.eye(3), atol=1e-10)


def test_mwb_identity_matrix():
    n = 5
    rng = np.random.default_rng(3)
    x = rng.uniform(0.5, 2.0, n)
    s = rng.uniform(0.5, 2.0, n)
    it = Iterate(x, np.zeros(n), s)
    basis = select_basis_mwb(it, np.eye(n))
    assert set(basis) == set(np.argsort(x / s)[-n:])  # m = n here: all columns
    # acceptance order follows decreasing ratio
    ratios = x / s
    assert list(basis) == sorted(range(n), key=lambda j: -ratios[j])


def test_mwb_duplicate_column_takes_one():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0]])  # columns 0 and 1 identical
    it = Iterate(np.array([3.0, 2.9, 0.1]), np.zeros(2), np.ones(3))
    basis = select_basis_mwb(it, A)
    assert len(basis) == 2
    assert basis[0] == 0  # highest ratio
    assert basis[1] == 2  # duplicate rejected by the rank check


def test_mwb_tie_breaks_to_lower_index():
    A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    it = Iterate(np.ones(3), np.zeros(2), np.ones(3))  # all ratios tie
    assert select_basis_mwb(it, A) == [0, 1]


def test_mwb_recovers_optimal_partition(optimal_instance):
    inst = optimal_instance
    B, N = inst.partition
    mu = 1e-6
    x = inst.optimal.x.copy()
    s = inst.optimal.s.copy()
    x[list(N)] = mu / s[list(N)]
    s[list(B)] = mu / x[list(B)]
    it = Iterate(x, inst.optimal.y, s)
    assert sorted(select_basis_mwb(it, inst.lp.A)) == sorted(B)


def test_mnes_exact_matches_dense_full_system(central_instance):
    lp = central_instance.lp
    prep = preprocess(lp)
    rng = np.random.default_rng(4)
    beta = 0.9
    for _ in range(10):
        it = feasible_iterate(rng, central_instance)
        sys = assemble(SystemKind.MNES, it, prep, beta)
        z = solve_exact(sys.matrix, sys.rhs).solution
        r_hat = sys.matrix @ z - sys.rhs
        direction = recover_direction_mnes(z, r_hat, it, prep, beta)
        dx, dy, ds = dense_newton_direction(lp, it, beta)
        scale = 1.0 + np.linalg.norm(dx)
        assert np.linalg.norm(direction.dx - dx) <= 1e-8 * scale
        assert np.linalg.norm(direction.dy - dy) <= 1e-8 * scale
        assert np.linalg.norm(direction.ds - ds) <= 1e-8 * scale


def test_mnes_centered_zero_direction(central_instance):
    prep = preprocess(central_instance.lp)
    it = central_instance.start
    m = central_instance.lp.m
    direction = recover_direction_mnes(np.zeros(m), np.zeros(m), it, prep, beta=1.0)
    assert np.linalg.norm(direction.dx, np.inf) <= 1e-10
    assert np.linalg.norm(direction.dy, np.inf) <= 1e-10
    assert np.linalg.norm(direction.ds, np.inf) <= 1e-10


def test_mnes_residual_mismatch_detected(central_instance):
    prep = preprocess(central_instance.lp)
    it = central_instance.start
    m = central_instance.lp.m
    with pytest.raises(errors.ResidualMismatch):
        recover_direction_mnes(np.zeros(m), np.ones(m), it, prep, beta=1.0)


def test_residual_correction_bound(central_instance):
    # injected residual at the admissible level keeps ||S v||_inf <= eta mu
    lp = central_instance.lp
    prep = preprocess(lp)
    rng = np.random.default_rng(5)
    eta, theta = 0.1, 0.7
    for _ in range(100):
        x = rng.uniform(0.2, 3.0, lp.n)
        mu = 10.0 ** rng.uniform(-6, 0)
        deviation = rng.standard_normal(lp.n)
        deviation -= deviation.mean()  # keep the measure at exactly mu
        deviation *= theta * mu * rng.uniform(0, 1) / np.linalg.norm(deviation)
        s = (mu + deviation) / x
        it = Iterate(x, rng.standard_normal(lp.m), s)
        assert abs(it.mu - mu) <= 1e-12 * mu

        bound = eta / np.sqrt(1 + theta) * np.sqrt(it.mu)
        r_hat = rng.standard_normal(lp.m)
        r_hat *= bound / np.linalg.norm(r_hat, np.inf)
        sys = assemble(SystemKind.MNES, it, prep, beta=0.9)
        z = solve_exact(sys.matrix, sys.rhs + r_hat).solution
        direction = recover_direction_mnes(z, sys.matrix @ z - sys.rhs, it, prep, 0.9)
        sv = np.linalg.norm(it.s * direction.correction_v, np.inf)
        assert sv <= eta * it.mu * (1 + 1e-9)
        # the correction lives on the basis positions only
        off_basis = np.setdiff1d(np.arange(lp.n), prep.basis)
        assert np.all(direction.correction_v[off_basis] == 0.0)


def test_proc_a_zero_residual_matches_exact(central_instance):
    lp = central_instance.lp
    prep = preprocess(lp)
    rng = np.random.default_rng(6)
    it = feasible_iterate(rng, central_instance)
    beta = 0.9
    sys = assemble(SystemKind.NES, it, prep, beta)
    dy = solve_exact(sys.matrix, sys.rhs).solution
    direction = recover_direction_nes_procA(dy, np.zeros(lp.m), it, lp, beta)
    dx, dy_ref, ds = dense_newton_direction(lp, it, beta)
    assert np.linalg.norm(direction.dx - dx) <= 1e-8 * (1 + np.linalg.norm(dx))
    assert np.linalg.norm(direction.dy - dy_ref) <= 1e-8
    assert np.linalg.norm(direction.ds - ds) <= 1e-8


def test_proc_a_correction_solves_av_equals_r(central_instance):
    lp = central_instance.lp
    prep = preprocess(lp)
    rng = np.random.default_rng(7)
    it = feasible_iterate(rng, central_instance)
    sys = assemble(SystemKind.NES, it, prep, 0.9)
    for _ in range(5):
        # A v = r holds for any r; A dx = 0 needs r consistent with dy
        dy = rng.standard_normal(lp.m)
        r = sys.matrix @ dy - sys.rhs
        direction = recover_direction_nes_procA(dy, r, it, lp, 0.9)
        assert np.linalg.norm(lp.A @ direction.correction_v - r, np.inf) <= 1e-10
        assert np.linalg.norm(lp.A @ direction.dx, np.inf) <= 1e-9


def test_proc_a_admissibility_formula():
    # ||s||_inf * sigma_max = 1e6, mu = 1, eta = 0.1 -> threshold 1e-7
    A = np.array([[1e3, 0.0], [0.0, 1.0]])
    lp = LinearProgram(A, np.ones(2), 2e3 * np.ones(2))
    it = Iterate(np.array([1e-3, 1e3]), np.zeros(2), np.array([1e3, 1e-3]))
    assert it.mu == pytest.approx(1.0)
    assert proc_a_residual_bound(it, lp, 0.1) == pytest.approx(1e-7, rel=1e-12)


def test_oss_zero_solution_zero_direction(central_instance):
    lp = central_instance.lp
    V = null_space_basis(lp.A)
    it = central_instance.start
    d = recover_direction_oss(np.zeros(lp.m), np.zeros(lp.n - lp.m), it, lp, V)
    assert np.linalg.norm(d.dx) == 0.0
    assert np.linalg.norm(d.ds) == 0.0


def test_oss_feasibility_unconditional(central_instance):
    lp = central_instance.lp
    V = null_space_basis(lp.A)
    rng = np.random.default_rng(8)
    it = feasible_iterate(rng, central_instance)
    for _ in range(10):
        d = recover_direction_oss(rng.standard_normal(lp.m),
                                  rng.standard_normal(lp.n - lp.m), it, lp, V)
        assert np.linalg.norm(lp.A @ d.dx, np.inf) <= 1e-10
        assert np.linalg.norm(lp.A.T @ d.dy + d.ds, np.inf) <= 1e-10


def test_oss_exact_matches_dense_full_system(central_instance):
    lp = central_instance.lp
    prep = preprocess(lp)
    rng = np.random.default_rng(9)
    it = feasible_iterate(rng, central_instance)
    beta = 0.9
    sys = assemble(SystemKind.OSS, it, prep, beta)
    sol = solve_exact(sys.matrix, sys.rhs).solution
    d = recover_direction_oss(sol[:lp.m], sol[lp.m:], it, lp, sys.null_basis)
    dx, dy, ds = dense_newton_direction(lp, it, beta)
    assert np.linalg.norm(d.dx - dx) <= 1e-8 * (1 + np.linalg.norm(dx))
    assert np.linalg.norm(d.dy - dy) <= 1e-8
    assert np.linalg.norm(d.ds - ds) <= 1e-8


def test_verify_direction_exact_step(central_instance):
    lp = central_instance.lp
    prep = preprocess(lp)
    rng = np.random.default_rng(10)
    it = feasible_iterate(rng, central_instance)
    beta = 0.9
    sys = assemble(SystemKind.MNES, it, prep, beta)
    z = solve_exact(sys.matrix, sys.rhs).solution
    d = recover_direction_mnes(z, sys.matrix @ z - sys.rhs, it, prep, beta)
    report = verify_direction(d, it, lp, beta, eta=0.1, theta=0.4)
    assert report.primal_residual <= 1e-8
    assert report.dual_residual <= 1e-8
    assert report.third_row_residual <= 1e-8
    assert abs(report.dx_dot_ds) <= 1e-10 * (1 + np.linalg.norm(d.dx) * np.linalg.norm(d.ds))
    assert report.sv_ok


def test_verify_direction_flags_missing_correction(central_instance):
    from dataclasses import replace

    lp = central_instance.lp
    prep = preprocess(lp)
    it = central_instance.start
    rng = np.random.default_rng(11)
    beta = 0.9
    sys = assemble(SystemKind.MNES, it, prep, beta)
    r_hat = 1e-2 * rng.standard_normal(lp.m)
    z = solve_exact(sys.matrix, sys.rhs + r_hat).solution
    d = recover_direction_mnes(z, sys.matrix @ z - sys.rhs, it, prep, beta)
    broken = replace(d, dx=d.dx + d.correction_v, correction_v=np.zeros(lp.n))
    report = verify_direction(broken, it, lp, beta, eta=0.1, theta=0.4)
    assert report.primal_residual > 1e-6  # drift is visible without v


def test_condition_number_basics():
    assert condition_number(np.eye(4)) == pytest.approx(1.0)
    assert condition_number(np.diag([1.0, 10.0])) == pytest.approx(10.0)
    with pytest.raises(errors.SingularMatrix):
        condition_number(np.diag([1.0, 0.0]))


def test_chi_bar_identity():
    assert chi_bar(np.eye(3)) == pytest.approx(np.sqrt(3.0))


def test_chi_bar_enumeration_double_identity():
    A = np.hstack([np.eye(2), np.eye(2)])
    # every nonsingular basis maps A to a column permutation of [I | I]
    assert chi_bar(A) == pytest.approx(2.0)


def test_chi_bar_too_large():
    with pytest.raises(errors.TooLarge):
        chi_bar(np.ones((1, 13)))


def test_pnes_condition_bounded_by_chi_bar_squared():
    rng = np.random.default_rng(12)
    for seed in range(4):
        inst = generate(GeneratorSpec(m=2, n=5, kappa_target=10.0, seed=seed))
        prep = preprocess(inst.lp)
        bound = chi_bar(inst.lp.A) ** 2
        for _ in range(10):
            it = interior_iterate(rng, inst.lp)
            sys = assemble(SystemKind.PNES, it, prep, beta=0.9)
            assert condition_number(sys) <= bound * (1 + 1e-6)


def test_preconditioned_stays_bounded_where_plain_normal_eqs_blow_up():
    # near the optimum of an ill-conditioned nondegenerate instance the
    # per-iteration basis keeps the scaled system's condition number tiny
    # while the plain normal equations sit at ~kappa(A)^2. (The *fixed*
    # preprocessing basis gives no such bound: unless it happens to be
    # the optimal support, its scaled system degrades like the plain one.)
    from ifipm import generate

    inst = generate(GeneratorSpec(m=4, n=9, kappa_target=1e6,
                                  mode="known-optimal", seed=4))
    B, N = inst.partition
    prep = preprocess(inst.lp)
    mu = 1e-6
    x = inst.optimal.x.copy()
    s = inst.optimal.s.copy()
    x[list(N)] = mu / s[list(N)]
    s[list(B)] = mu / x[list(B)]
    it = Iterate(x, inst.optimal.y, s)
    kappa_nes = condition_number(assemble(SystemKind.NES, it, prep, 0.9))
    kappa_pnes = condition_number(assemble(SystemKind.PNES, it, prep, 0.9))
    assert kappa_nes >= 1e10
    assert kappa_pnes <= 1e3
    assert kappa_pnes <= kappa_nes / 10.0


def test_pnes_condition_settles_on_nondegenerate_runs():
    # once the iterates approach the optimal face, the per-iteration basis
    # stabilizes and the preconditioned matrix tends to the identity, so
    # its condition number stops growing (5% noise allowance)
    from ifipm import IpmParams, generate, if_ipm

    inst = generate(GeneratorSpec(m=4, n=9, kappa_target=100.0,
                                  mode="known-optimal", seed=21))
    prep = preprocess(inst.lp)
    params = IpmParams(zeta=1e-7)
    beta = params.resolve_beta(inst.lp.n)
    kappas = []

    def observer(k, it, system, direction, new_it):
        if it.mu <= 1e-4:
            kappas.append(condition_number(assemble(SystemKind.PNES, it, prep, beta)))

    if_ipm(prep, inst.start, params, observer=observer)
    assert len(kappas) > 10
    for before, after in zip(kappas, kappas[1:]):
        assert after <= before * 1.05
    assert kappas[-1] <= kappas[0]


def test_assembly_is_parallel_safe(central_instance):
    from concurrent.futures import ThreadPoolExecutor

    prep = preprocess(central_instance.lp)
    it = central_instance.start

    def build(kind):
        return assemble(kind, it, prep, 0.9)

    with ThreadPoolExecutor(max_workers=6) as pool:
        parallel = list(pool.map(build, ALL_KINDS))
    for sys, kind in zip(parallel, ALL_KINDS):
        ref = assemble(kind, it, prep, 0.9)
        np.testing.assert_array_equal(sys.matrix, ref.matrix)
        np.testing.assert_array_equal(sys.rhs, ref.rhs)


def test_mnes_equals_pnes_on_matching_basis(central_instance):
    lp = central_instance.lp
    prep = preprocess(lp)
    x = np.ones(lp.n)
    s = np.ones(lp.n)
    x[list(prep.basis)] = 2.0  # ratios favor exactly the fixed basis
    it = Iterate(x, np.zeros(lp.m), s)
    assert sorted(select_basis_mwb(it, lp.A)) == sorted(prep.basis)
    mnes = assemble(SystemKind.MNES, it, prep, beta=0.9)
    pnes = assemble(SystemKind.PNES, it, prep, beta=0.9)
    perm = [list(pnes.basis_used).index(j) for j in prep.basis]
    np.testing.assert_allclose(pnes.matrix[np.ix_(perm, perm)], mnes.matrix,
                               atol=1e-10)
