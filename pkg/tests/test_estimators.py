"""Monte Carlo TCF estimators across all method families."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpsmap.cps import GammaWeight, StiefelPoint, cmm_signature, gamma_wigner
from cpsmap.estimators import (
    MethodSpec,
    TCFRequest,
    estimate_tcf,
    eval_window,
    hill_exponent,
    intra_electron_check,
)
from cpsmap.models import ModelSpec, build_hamiltonian
from cpsmap.qcore import exact_tcf

RABI = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def random_h(F, seed=42):
    return build_hamiltonian(ModelSpec.random(F, seed=seed))


def two_delta_comb(F=2):
    """Weight solving both the quadratic and the cubic moment conditions.

    One node at gamma = 0 (quadratic term vanishes there) plus a second
    node fixed by the pair of linear equations in (w1, w2).
    """
    a2 = (3.0 + math.sqrt(33.0)) / 4.0  # 1 + F*gamma2 for F = 2
    g2 = (a2 - 1.0) / 2.0
    w2 = 2.0 / (a2**2 - 1.0)
    return GammaWeight.delta_comb([(0.0, 1.0 - w2), (g2, w2)])


def request(H, method, nmkl=(1, 1, 1, 1), n_traj=40000, seed=5, t_grid=None, **kw):
    if t_grid is None:
        t_grid = np.linspace(0.0, 3.0, 4)
    n, m, k, l = nmkl
    return TCFRequest(H, (n, m), (k, l), t_grid, n_traj, seed, method, **kw)


def exact_series(H, nmkl, t_grid):
    F = H.shape[0]
    n, m, k, l = [i - 1 for i in nmkl]
    rho = np.zeros((F, F), dtype=complex)
    rho[n, m] = 1.0
    A = np.zeros((F, F), dtype=complex)
    A[k, l] = 1.0
    return exact_tcf(rho, A, H, t_grid)


def assert_matches_exact(res, ref, slack=1e-3):
    err = np.abs(res.estimates - ref)
    bound = 5.0 * res.standard_errors + slack
    assert np.all(err <= bound), (err, bound)


def test_hill_exponent_values():
    assert hill_exponent(2) == pytest.approx(1.0)
    assert hill_exponent(3) == pytest.approx(0.75)


# -- constructor / request validation --------------------------------


def test_wmm_needs_weight_object():
    with pytest.raises(ValueError, match="GammaWeight"):
        MethodSpec.wmm(0.5)


def test_cornered_needs_positive_gamma():
    with pytest.raises(ValueError, match="gamma > 0"):
        MethodSpec.cornered_simplex(0.0)


def test_lambda_needs_positive_gamma():
    with pytest.raises(ValueError, match="gamma > 0"):
        MethodSpec.lambda_point(-0.1)


def test_cmmcv_rejects_non_hermitian_component():
    with pytest.raises(ValueError):
        MethodSpec.cmmcv([(1.0, [[0.0, 1.0], [0.0, 0.0]])])


def test_triangle_sqc_obs_gamma_choices():
    MethodSpec.triangle_sqc("third")
    with pytest.raises(ValueError, match="obs_gamma"):
        MethodSpec.triangle_sqc("half")


def test_index_validation():
    with pytest.raises(ValueError, match="outside 1..2"):
        estimate_tcf(request(RABI, MethodSpec.cmm(0.0), nmkl=(0, 1, 1, 1)))
    with pytest.raises(ValueError, match="outside 1..2"):
        estimate_tcf(request(RABI, MethodSpec.cmm(0.0), nmkl=(1, 1, 3, 1)))


def test_t_grid_validation():
    with pytest.raises(ValueError, match="increasing"):
        estimate_tcf(request(RABI, MethodSpec.cmm(0.0), t_grid=[0.0, 2.0, 1.0]))
    with pytest.raises(ValueError, match="increasing"):
        estimate_tcf(request(RABI, MethodSpec.cmm(0.0), t_grid=[-1.0, 0.0]))


def test_backend_validation():
    with pytest.raises(ValueError, match="backend"):
        estimate_tcf(request(RABI, MethodSpec.cmm(0.0), backend="verlet"))
    with pytest.raises(ValueError, match="dt"):
        estimate_tcf(request(RABI, MethodSpec.cmm(0.0), backend="rk4", dt=0.0))


def test_n_traj_validation():
    with pytest.raises(ValueError, match="n_traj"):
        estimate_tcf(request(RABI, MethodSpec.cmm(0.0), n_traj=0))


def test_dtwa_needs_two_levels():
    with pytest.raises(ValueError, match="gdtwa"):
        estimate_tcf(request(random_h(3), MethodSpec.dtwa()))


def test_f2_transform_needs_two_levels():
    with pytest.raises(ValueError, match="F = 2"):
        estimate_tcf(request(random_h(3), MethodSpec.triangle_f2_single()))


def test_cornered_rejects_offdiagonal_observable():
    with pytest.raises(ValueError, match="population"):
        estimate_tcf(request(RABI, MethodSpec.cornered_simplex(1.0), nmkl=(1, 1, 1, 2)))


def test_ww_rejects_offdiagonal_indices():
    with pytest.raises(ValueError, match="population-population"):
        estimate_tcf(request(RABI, MethodSpec.triangle_ww(), nmkl=(1, 2, 1, 1)))


def test_wmm_rejects_weight_violating_mapping_condition():
    bad = GammaWeight.delta_comb([(0.25, 1.0)])  # normalized but wrong moment
    with pytest.raises(ValueError, match="exact mapping condition"):
        estimate_tcf(request(RABI, MethodSpec.wmm(bad)))


def test_unknown_family_dispatch():
    with pytest.raises(ValueError, match="unknown method family"):
        estimate_tcf(request(RABI, MethodSpec("bogus")))


def test_cmm_gamma_domain():
    with pytest.raises(ValueError, match="exceed"):
        estimate_tcf(request(RABI, MethodSpec.cmm(-0.5)))


# -- t = 0 identity and frozen-nuclei exactness (light versions) -----


def test_t0_kronecker_identity_subset():
    # estimate(0) = delta_mk delta_nl for representative families
    H = random_h(2, seed=3)
    t_grid = np.array([0.0, 1.0])
    methods = [
        MethodSpec.cmm(gamma_wigner(2)),
        MethodSpec.cornered_simplex(1.0),
        MethodSpec.triangle_sqc(),
        MethodSpec.ehrenfest(),
        MethodSpec.dtwa(),
    ]
    for method in methods:
        res = estimate_tcf(request(H, method, nmkl=(1, 1, 1, 1), t_grid=t_grid, n_traj=60000))
        err = abs(res.estimates[0] - 1.0)
        assert err <= 5.0 * res.standard_errors[0] + 1e-3, (method.family, err)


def test_t0_offdiagonal_pairs():
    # rho = |1><2| pairs with A = |2><1| and annihilates A = |1><2|
    H = random_h(2, seed=3)
    t_grid = np.array([0.0])
    for method in [MethodSpec.cmm(0.0), MethodSpec.ehrenfest(), MethodSpec.gdtwa()]:
        hit = estimate_tcf(request(H, method, nmkl=(1, 2, 2, 1), t_grid=t_grid, n_traj=60000))
        miss = estimate_tcf(request(H, method, nmkl=(1, 2, 1, 2), t_grid=t_grid, n_traj=60000))
        assert abs(hit.estimates[0] - 1.0) <= 5.0 * hit.standard_errors[0] + 1e-3
        assert abs(miss.estimates[0]) <= 5.0 * miss.standard_errors[0] + 1e-3


def test_cmm_tracks_exact_dynamics():
    H = random_h(2, seed=9)
    t_grid = np.linspace(0.0, 5.0, 6)
    nmkl = (1, 1, 2, 2)
    res = estimate_tcf(request(H, MethodSpec.cmm(1.0), nmkl=nmkl, t_grid=t_grid, n_traj=200000))
    assert_matches_exact(res, exact_series(H, nmkl, t_grid))


def test_gdtwa_tracks_exact_dynamics_three_levels():
    H = random_h(3, seed=9)
    t_grid = np.linspace(0.0, 5.0, 6)
    nmkl = (1, 1, 2, 2)
    res = estimate_tcf(request(H, MethodSpec.gdtwa(), nmkl=nmkl, t_grid=t_grid, n_traj=200000))
    assert_matches_exact(res, exact_series(H, nmkl, t_grid))


def test_hill_tracks_exact_rabi():
    t_grid = np.linspace(0.0, 5.0, 6)
    res = estimate_tcf(
        request(RABI, MethodSpec.hill_ww(0.0), nmkl=(1, 1, 2, 2), t_grid=t_grid, n_traj=200000)
    )
    ref = 0.5 * (1.0 - np.cos(2.0 * t_grid))  # sin^2(t) transfer probability
    assert_matches_exact(res, ref)


def test_zero_hamiltonian_freezes_estimates():
    H = np.zeros((2, 2))
    t_grid = np.linspace(0.0, 4.0, 5)
    res = estimate_tcf(request(H, MethodSpec.cmm(0.5), t_grid=t_grid, n_traj=20000))
    assert np.max(np.abs(res.estimates - res.estimates[0])) < 1e-12


# -- backend agreement and determinism -------------------------------


def test_rk4_backend_matches_exact_backend():
    H = random_h(2, seed=13)
    t_grid = np.linspace(0.0, 2.0, 3)
    a = estimate_tcf(request(H, MethodSpec.cmm(0.0), t_grid=t_grid, n_traj=5000))
    b = estimate_tcf(request(H, MethodSpec.cmm(0.0), t_grid=t_grid, n_traj=5000, backend="rk4"))
    assert np.max(np.abs(a.estimates - b.estimates)) < 1e-9


def test_rk4_backend_multiframe_gdtwa():
    H = random_h(3, seed=13)
    t_grid = np.linspace(0.0, 2.0, 3)
    a = estimate_tcf(request(H, MethodSpec.gdtwa(), t_grid=t_grid, n_traj=5000))
    b = estimate_tcf(request(H, MethodSpec.gdtwa(), t_grid=t_grid, n_traj=5000, backend="rk4"))
    assert np.max(np.abs(a.estimates - b.estimates)) < 1e-9


def test_same_seed_is_bitwise_reproducible():
    H = random_h(2, seed=21)
    a = estimate_tcf(request(H, MethodSpec.triangle_sqc(), n_traj=8000))
    b = estimate_tcf(request(H, MethodSpec.triangle_sqc(), n_traj=8000))
    assert np.array_equal(a.estimates, b.estimates)
    assert np.array_equal(a.standard_errors, b.standard_errors)


def test_thread_count_does_not_change_results():
    H = random_h(2, seed=21)
    a = estimate_tcf(request(H, MethodSpec.hill_ww(0.0), n_traj=8000))
    b = estimate_tcf(request(H, MethodSpec.hill_ww(0.0), n_traj=8000, n_threads=4))
    assert np.array_equal(a.estimates, b.estimates)
    assert np.array_equal(a.normalization, b.normalization)


def test_single_trajectory_has_nan_se():
    res = estimate_tcf(request(RABI, MethodSpec.cmm(0.0), n_traj=1, t_grid=[0.0]))
    assert np.isnan(res.standard_errors).all()
    assert np.isfinite(res.estimates).all()


# -- estimator-level physics properties -------------------------------


def test_hermiticity_conjugate_pairs():
    H = random_h(2, seed=33)
    t_grid = np.linspace(0.0, 3.0, 4)
    a = estimate_tcf(request(H, MethodSpec.cmm(0.0), nmkl=(1, 2, 2, 1), t_grid=t_grid, n_traj=50000))
    b = estimate_tcf(request(H, MethodSpec.cmm(0.0), nmkl=(2, 1, 1, 2), t_grid=t_grid, n_traj=50000))
    err = np.abs(a.estimates - np.conj(b.estimates))
    bound = 5.0 * np.sqrt(a.standard_errors**2 + b.standard_errors**2) + 1e-12
    assert np.all(err <= bound)


def test_cmm_gamma_invariance():
    H = random_h(2, seed=35)
    t_grid = np.linspace(0.0, 4.0, 5)
    ref = exact_series(H, (1, 1, 1, 1), t_grid)
    for i, gamma in enumerate((0.0, gamma_wigner(2), 1.0)):
        res = estimate_tcf(
            request(H, MethodSpec.cmm(gamma), t_grid=t_grid, n_traj=100000, seed=10 + i)
        )
        assert_matches_exact(res, ref)


def test_population_conservation_xc():
    # sum over final states is 1 within 5 SE at every time
    H = random_h(3, seed=37)
    t_grid = np.linspace(0.0, 4.0, 5)
    total = np.zeros(t_grid.size, dtype=complex)
    var = np.zeros(t_grid.size)
    for k in (1, 2, 3):
        res = estimate_tcf(
            request(H, MethodSpec.triangle_sqc(), nmkl=(1, 1, k, k), t_grid=t_grid, n_traj=60000)
        )
        total += res.estimates
        var += res.standard_errors**2
    assert np.all(np.abs(total.real - 1.0) <= 5.0 * np.sqrt(var) + 1e-3)
    assert np.all(np.abs(total.imag) <= 5.0 * np.sqrt(var) + 1e-3)


def test_ww_population_sum_is_exact():
    H = random_h(3, seed=39)
    t_grid = np.linspace(0.0, 4.0, 5)
    total = np.zeros(t_grid.size, dtype=complex)
    for k in (1, 2, 3):
        res = estimate_tcf(
            request(H, MethodSpec.triangle_ww(), nmkl=(1, 1, k, k), t_grid=t_grid, n_traj=30000)
        )
        total += res.estimates
    assert np.max(np.abs(total - 1.0)) < 1e-12


def test_ww_positivity_and_normalization_at_t0():
    H = random_h(2, seed=41)
    t_grid = np.array([0.0, 1.0, 2.0])
    ww = {
        "triangle_ww": MethodSpec.triangle_ww(),
        "triangle_f2_single": MethodSpec.triangle_f2_single(0.0),
        "hill_ww": MethodSpec.hill_ww(0.0),
    }
    for name, method in ww.items():
        res = estimate_tcf(request(H, method, n_traj=50000, t_grid=t_grid))
        assert res.min_numerator >= 0.0, name
        assert np.all(res.normalization > 0.0), name
    # the triangle constructions are normalized at t = 0, the hill pair is not
    tri = estimate_tcf(request(H, ww["triangle_ww"], n_traj=50000, t_grid=t_grid))
    assert tri.normalization[0] == pytest.approx(1.0, abs=1e-12)
    f2 = estimate_tcf(request(H, ww["triangle_f2_single"], n_traj=50000, t_grid=t_grid))
    assert abs(f2.normalization[0] - 1.0) < 0.05
    hill = estimate_tcf(request(H, ww["hill_ww"], n_traj=50000, t_grid=t_grid))
    assert abs(hill.normalization[0] - 0.5) < 0.05


def test_f2_transform_gamma_choice_changes_nothing():
    # the transformed estimator is algebraically gamma-free, so the same
    # seed gives bitwise identical output at different gamma
    H = random_h(2, seed=43)
    a = estimate_tcf(request(H, MethodSpec.triangle_f2_single(0.0), n_traj=20000))
    b = estimate_tcf(request(H, MethodSpec.triangle_f2_single(0.5), n_traj=20000))
    assert np.array_equal(a.estimates, b.estimates)


def test_cmmcv_single_component_wigner():
    # the self-dual pair is exact exactly when the scalar comb satisfies
    # the quadratic moment condition; one sphere does so at the Wigner-
    # like gamma
    H = random_h(2, seed=45)
    t_grid = np.linspace(0.0, 4.0, 5)
    comps = [(1.0, gamma_wigner(2) * np.eye(2))]
    res = estimate_tcf(
        request(H, MethodSpec.cmmcv(comps), nmkl=(1, 1, 2, 2), t_grid=t_grid, n_traj=200000)
    )
    assert_matches_exact(res, exact_series(H, (1, 1, 2, 2), t_grid))


def test_cmmcv_two_component_comb():
    # the two-delta solution of the moment conditions, realized as
    # commutator matrices gamma_j * I
    H = random_h(2, seed=45)
    t_grid = np.linspace(0.0, 4.0, 5)
    a2 = (3.0 + math.sqrt(33.0)) / 4.0
    w2 = 2.0 / (a2**2 - 1.0)
    comps = [
        (1.0 - w2, np.zeros((2, 2))),
        (w2, ((a2 - 1.0) / 2.0) * np.eye(2)),
    ]
    res = estimate_tcf(
        request(H, MethodSpec.cmmcv(comps), nmkl=(1, 1, 2, 2), t_grid=t_grid, n_traj=200000)
    )
    assert_matches_exact(res, exact_series(H, (1, 1, 2, 2), t_grid))


def test_cmmcv_rk4_backend_agrees():
    H = random_h(2, seed=45)
    t_grid = np.linspace(0.0, 2.0, 3)
    comps = [(1.0, np.diag([0.3, 0.1]))]
    a = estimate_tcf(request(H, MethodSpec.cmmcv(comps), t_grid=t_grid, n_traj=5000))
    b = estimate_tcf(request(H, MethodSpec.cmmcv(comps), t_grid=t_grid, n_traj=5000, backend="rk4"))
    assert np.max(np.abs(a.estimates - b.estimates)) < 1e-8


def test_cmmcv_gamma_trace_domain():
    with pytest.raises(ValueError, match="Tr Gamma"):
        estimate_tcf(request(RABI, MethodSpec.cmmcv([(1.0, -0.6 * np.eye(2))])))


# -- window functions -------------------------------------------------


def point_with_actions(actions, gamma=None):
    actions = np.asarray(actions, dtype=float)
    F = actions.size
    if gamma is None:
        gamma = (np.sum(actions) - 1.0) / F
    z = np.sqrt(2.0 * actions).astype(complex)
    return StiefelPoint(z.real[None, :], z.imag[None, :], cmm_signature(F, gamma))


def test_triangle_window_examples():
    assert eval_window("triangle", point_with_actions([1.5, 0.2]), 1) == 1.0
    assert eval_window("triangle", point_with_actions([1.5, 0.6]), 1) == 0.0
    assert eval_window("triangle", point_with_actions([0.9, 0.2]), 1) == 0.0


def test_hill_window_examples():
    assert eval_window("hill_obs", point_with_actions([0.8, 0.2]), 1) == pytest.approx(0.6)
    assert eval_window("hill_obs", point_with_actions([0.2, 0.8]), 1) == 0.0
    assert eval_window("hill_rho", point_with_actions([0.8, 0.2]), 1) == 1.0
    assert eval_window("hill_rho", point_with_actions([0.2, 0.8]), 1) == 0.0


def test_hill_obs_uses_fractional_exponent():
    e = [0.7, 0.2, 0.1]
    val = eval_window("hill_obs", point_with_actions(e), 1)
    assert val == pytest.approx((0.5**0.75) * (0.6**0.75))


def test_cornered_window_normalization():
    # gamma = 1, F = 2: N = F (F/(1+F))^(F-1) evaluated at F*gamma/(1+F*gamma)
    pt = point_with_actions([2.0, 1.0], gamma=1.0)
    assert eval_window("cornered", pt, 1) == pytest.approx(0.75)
    assert eval_window("cornered", pt, 2) == pytest.approx(0.75)
    below = point_with_actions([0.5, 2.5], gamma=1.0)
    assert eval_window("cornered", below, 1) == 0.0


def test_cornered_window_needs_positive_gamma():
    with pytest.raises(ValueError, match="gamma > 0"):
        eval_window("cornered", point_with_actions([0.6, 0.4], gamma=0.0), 1)


def test_window_rejects_unknown_kind_and_bad_state():
    pt = point_with_actions([0.6, 0.4])
    with pytest.raises(ValueError, match="unknown window kind"):
        eval_window("gauss", pt, 1)
    with pytest.raises(ValueError, match="outside"):
        eval_window("triangle", pt, 3)


@settings(max_examples=60, deadline=None)
@given(
    e1=st.floats(min_value=0.0, max_value=3.0),
    e2=st.floats(min_value=0.0, max_value=3.0),
)
def test_window_values_stay_in_range(e1, e2):
    if e1 + e2 < 0.6:
        e1 += 0.6  # keep the sphere parameter admissible
    pt = point_with_actions([e1, e2])
    for kind in ("triangle", "hill_rho"):
        v = eval_window(kind, pt, 1)
        assert 0.0 <= v <= 1.0
    assert eval_window("hill_obs", pt, 1) >= 0.0


# -- intra-electron correlation ---------------------------------------


def test_intra_electron_single_gamma_cubic_root():
    g = (6.0 ** (1.0 / 3.0) - 1.0) / 2.0
    rep = intra_electron_check(
        GammaWeight.single(g), RABI, np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), 20000, 1
    )
    assert rep.cubic_satisfied
    assert rep.cubic_target == pytest.approx(6.0)
    # a single sphere cannot satisfy the quadratic condition at this
    # gamma, so the sides are not asserted equal here
    off = intra_electron_check(
        GammaWeight.single(0.9), RABI, np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), 100, 1
    )
    assert not off.cubic_satisfied


def test_intra_electron_two_delta_comb_agrees():
    w = two_delta_comb()
    # the comb satisfies both moment conditions by construction
    assert abs(w.moment(lambda g: 2 * g * g + 2 * g) - 1.0) < 1e-12
    assert abs(w.moment(lambda g: (1 + 2 * g) ** 3) - 6.0) < 1e-12
    H = random_h(2, seed=47)
    rho = np.diag([0.7, 0.3]).astype(complex)
    A = random_h(2, seed=48)
    rep = intra_electron_check(w, H, rho, A, 400000, 3)
    assert rep.cubic_satisfied
    assert abs(rep.lhs - rep.rhs) <= 5.0 * rep.rhs_se


def test_intra_electron_identity_hamiltonian():
    # H = I makes Tr[H K] = 1 exactly; only the quadratic condition is
    # exercised and the sides must agree
    w = two_delta_comb()
    rho = np.diag([1.0, 0.0]).astype(complex)
    A = np.array([[0.2, 0.4], [0.4, 0.8]], dtype=complex)
    rep = intra_electron_check(w, np.eye(2), rho, A, 400000, 5)
    assert rep.lhs == pytest.approx(np.trace(rho @ A).real)
    assert abs(rep.lhs - rep.rhs) <= 5.0 * rep.rhs_se


# -- wmm end to end ----------------------------------------------------


def test_wmm_comb_tracks_exact_dynamics():
    H = random_h(2, seed=49)
    t_grid = np.linspace(0.0, 4.0, 5)
    res = estimate_tcf(
        request(H, MethodSpec.wmm(two_delta_comb()), nmkl=(1, 1, 2, 2), t_grid=t_grid, n_traj=200000)
    )
    assert_matches_exact(res, exact_series(H, (1, 1, 2, 2), t_grid))


def test_wmm_rejects_triangle_weight():
    # the window-family triangle weight is normalized but does not solve
    # the covariant-pair quadratic condition (its moment is 3/4 at F=2),
    # so the wmm runner must refuse it
    w = GammaWeight.triangle(2)
    assert abs(w.moment(lambda g: 2 * g * g + 2 * g) - 0.75) < 1e-10
    with pytest.raises(ValueError, match="exact mapping condition"):
        estimate_tcf(request(RABI, MethodSpec.wmm(w), n_traj=100))
