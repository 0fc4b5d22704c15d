import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tcpks.discretization import build_grid, d_dr
from tcpks.elliptic import (LEMMA_SLACK, EllipticSolver, TridiagonalSystem, chemo_system, lowest_eigenprofile,
                            mode_operator, random_smooth_profiles, solve_chemo_mode, solve_stream_mode,
                            verify_lemma_c0, verify_lemma_ck, verify_lemma_phi0, verify_lemma_phik)
from tcpks.errors import BadValue, SingularSystem


def _sine_manufactured(k, grid):
    a = np.pi / (grid.R - 1.0)
    r = grid.nodes
    f = np.sin(a * (r - 1.0))
    lf = -a * a * f + a * np.cos(a * (r - 1.0)) / r - k * k * f / r ** 2
    return f, lf


@pytest.mark.parametrize("k", [0, 1, 3, 8])
def test_zero_rhs_gives_zero(k):
    g = build_grid(33, 2.0)
    assert np.all(solve_chemo_mode(k, np.zeros(33), g) == 0)
    assert np.all(solve_stream_mode(k, np.zeros(33), g) == 0)


@pytest.mark.parametrize("k", [0, 1, 5])
def test_manufactured_second_order(k):
    orders = {"chemo": [], "stream": []}
    for N in (65, 129):
        g = build_grid(N, 2.0)
        f, lf = _sine_manufactured(k, g)
        orders["chemo"].append(np.max(np.abs(solve_chemo_mode(k, f - lf, g) - f)))
        orders["stream"].append(np.max(np.abs(solve_stream_mode(k, lf, g) - f)))
    for e in orders.values():
        assert 1.8 <= np.log2(e[0] / e[1]) <= 2.2


def test_quadratic_stream_solution_reproduced_exactly():
    # the centred stencils are exact on quadratics, so the error is rounding only
    for R in (2.0, 4.0):
        g = build_grid(65, R)
        r = g.nodes
        phi = (r - 1.0) * (R - r)
        w = -2.0 + (1.0 + R - 2.0 * r) / r
        assert np.max(np.abs(solve_stream_mode(0, w, g) - phi)) < 1e-12


def test_residual_machine_precision(rng):
    g = build_grid(129, 3.0)
    for k in (0, 2, 9):
        n = rng.standard_normal(129) + 1j * rng.standard_normal(129)
        n[[0, -1]] = 0
        c = solve_chemo_mode(k, n, g)
        s = chemo_system(k, g)
        res = s.matvec(c[1:-1]) + n[1:-1]
        assert np.max(np.abs(res)) < 1e-10 * np.max(np.abs(n)) * (1 / g.h ** 2)


@settings(max_examples=25)
@given(seed=st.integers(0, 2 ** 31), k=st.integers(0, 20), alpha=st.floats(-5, 5), beta=st.floats(-5, 5))
def test_linearity(seed, k, alpha, beta):
    rng = np.random.default_rng(seed)
    g = build_grid(33, 2.5)
    f, h = rng.standard_normal((2, 33))
    for solve in (solve_chemo_mode, solve_stream_mode):
        lhs = solve(k, alpha * f + beta * h, g)
        rhs = alpha * solve(k, f, g) + beta * solve(k, h, g)
        np.testing.assert_allclose(lhs, rhs, atol=1e-11 * (1 + np.max(np.abs(rhs))))


@settings(max_examples=25)
@given(seed=st.integers(0, 2 ** 31))
def test_maximum_principle(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(65, 3.0)
    n0 = rng.random(65)
    assert solve_chemo_mode(0, n0, g).min() >= 0.0


def test_chemo_diagonally_dominant():
    g = build_grid(65, 2.0)
    for k in (0, 1, 10):
        s = chemo_system(k, g)
        off = np.abs(np.concatenate([[0], s.sub])) + np.abs(np.concatenate([s.super, [0]]))
        assert np.all(np.abs(s.diag) > off)


def test_singular_system_detected():
    with pytest.raises(SingularSystem):
        TridiagonalSystem(np.zeros(2), np.zeros(3), np.zeros(2)).factor()


def test_elliptic_solver_matches_per_mode(rng):
    g = build_grid(33, 2.0)
    solver = EllipticSolver(g, 4)
    n = rng.standard_normal((5, 33)) + 1j * rng.standard_normal((5, 33))
    c = solver.chemo(n)
    for k in range(5):
        np.testing.assert_allclose(c[k], solve_chemo_mode(k, n[k], g), atol=1e-13)
    assert solver.chemo_residual(c, n) < 1e-12


def test_lowest_eigenprofile_is_eigenvector():
    g = build_grid(65, 2.0)
    v = lowest_eigenprofile(3, g)
    s = mode_operator(3, g)
    lv = s.matvec(v[1:-1])
    lam = np.dot(lv, v[1:-1]) / np.dot(v[1:-1], v[1:-1])
    np.testing.assert_allclose(lv, lam * v[1:-1], atol=1e-8 * abs(lam))


@pytest.mark.parametrize("R", [2.0, 4.0])
def test_ck_inequality_with_eigenprofiles(R):
    rep = verify_lemma_ck(50, [1, 2, 4, 8, 16], R, 129, seed=1, eigen=True)
    assert rep.max_margin("ck") <= LEMMA_SLACK
    assert not rep.failures()


def test_ck_ratios_stable_under_refinement():
    a = verify_lemma_ck(40, [1, 4, 16], 2.0, 129, seed=3)
    b = verify_lemma_ck(40, [1, 4, 16], 2.0, 257, seed=3)
    assert abs(b.max_ratio() / a.max_ratio() - 1) < 0.10
    second_a = max(r.extra for r in a.rows)
    second_b = max(r.extra for r in b.rows)
    assert abs(second_b / second_a - 1) < 0.10


@pytest.mark.parametrize("R", [2.0, 4.0])
def test_c0_inequality(R):
    rep = verify_lemma_c0(100, R, 129, seed=2)
    assert rep.max_margin("c0") <= LEMMA_SLACK
    assert np.isfinite(rep.max_ratio("c0"))


def test_zero_mode_chemo_of_zero():
    g = build_grid(33, 2.0)
    c0 = solve_chemo_mode(0, np.zeros(33), g)
    assert np.all(c0 == 0) and np.all(d_dr(c0, g) == 0)


def test_samples_must_be_positive():
    with pytest.raises(BadValue):
        verify_lemma_ck(0, [1], 2.0, 33, seed=0)
    with pytest.raises(BadValue):
        verify_lemma_c0(0, 2.0, 33, seed=0)


def test_coarse_grid_failures_are_flagged():
    rep = verify_lemma_ck(20, [1, 8, 16], 4.0, 9, seed=1, eigen=True)
    flagged = rep.failures()
    assert all(r.margin > LEMMA_SLACK for r in flagged)
    assert len(flagged) == sum(1 for r in rep.rows if r.margin > LEMMA_SLACK)


def test_phik_skips_zero_profiles():
    g = build_grid(33, 2.0)
    profiles = np.vstack([np.zeros(33), random_smooth_profiles(np.random.default_rng(0), g, 1)])
    rep = verify_lemma_phik(0, [1, 2, 4], 2.0, 33, seed=0, profiles=profiles)
    assert {r.sample for r in rep.rows} == {1}


def test_phik_ratio_stable_under_refinement():
    a = verify_lemma_phik(30, [1, 2, 4, 8, 16], 2.0, 129, seed=4)
    b = verify_lemma_phik(30, [1, 2, 4, 8, 16], 2.0, 257, seed=4)
    assert np.isfinite(a.max_ratio())
    assert abs(b.max_ratio() / a.max_ratio() - 1) < 0.10


def test_phi0_ratio_bounded():
    rep = verify_lemma_phi0(100, 2.0, 129, seed=5)
    ratios = np.array([r.ratio for r in rep.rows])
    assert len(ratios) == 100 and np.all(np.isfinite(ratios))
    ref = verify_lemma_phi0(100, 2.0, 257, seed=5)
    assert abs(ref.max_ratio() / rep.max_ratio() - 1) < 0.05


def test_csv_report_header():
    rep = verify_lemma_c0(3, 2.0, 33, seed=0)
    lines = rep.csv_lines()
    assert lines[0] == "lemma,R,k,sample,ratio,margin,extra"
    assert len(lines) == 4
