from dataclasses import replace

import numpy as np
import pytest
from rhs_oracle import relative_error, tendencies

from tcpks.baseflow import SimParams
from tcpks.discretization import ModeField, build_grid, theta_inverse
from tcpks.dynamics import (Simulation, flat_mass, get_stepper, initial_gaussian, initial_vorticity, make_state,
                            measure_decay_rate, physical_mass, random_modes, rhs_nonlinear, run, run_linear_model,
                            step_imex)
from tcpks.elliptic import random_smooth_profiles
from tcpks.errors import BadCenter, InconsistentState


def small(**kw):
    base = dict(A=3.0, K_max=8, N_r=33, dt=1e-3, t_end=0.05)
    base.update(kw)
    return SimParams(**base)


def _random_state(p, rng):
    g = get_stepper(p).grid
    return make_state(p, random_modes(rng, g, p.K_max), random_modes(rng, g, p.K_max))


def test_zero_state_stays_zero():
    p = small()
    s = make_state(p, np.zeros((9, 33)))
    dn, dw = rhs_nonlinear(s, p)
    assert not np.any(dn) and not np.any(dw)
    new, rep = step_imex(s, p)
    assert not np.any(new.n_hat.coeffs) and not np.any(new.w_hat.coeffs)
    assert rep.mass == 0.0 and not rep.blown_up


@pytest.mark.parametrize("mode", ["tc-coupled", "pks-only"])
def test_rhs_matches_real_space_oracle(mode):
    p = SimParams(A=7.0, K_max=8, N_r=65, dealias=False, run_mode=mode)
    rng = np.random.default_rng(99)
    for _ in range(5):
        s = _random_state(p, rng)
        dn, dw = rhs_nonlinear(s, p)
        on, ow = tendencies(s, p, get_stepper(p).grid)
        assert relative_error(dn, on) < 1e-6
        if mode == "tc-coupled":
            assert relative_error(dw, ow) < 1e-6
        else:
            assert not np.any(dw)


def test_linear_model_has_no_explicit_terms(rng):
    p = small(run_mode="linear-model")
    dn, dw = rhs_nonlinear(_random_state(p, rng), p)
    assert not np.any(dn) and not np.any(dw)


def test_convolution_support():
    p = small()
    g = get_stepper(p).grid
    bump = np.sin(np.pi * (g.nodes - 1.0))
    n = np.zeros((9, 33), dtype=complex)
    w = np.zeros((9, 33), dtype=complex)
    n[1] = (1 + 2j) * bump
    w[1] = (0.5 - 1j) * bump ** 2
    s = make_state(p, n, w)
    dn, dw = rhs_nonlinear(s, p)
    # subtract the linear source in dw, which lives on mode 1
    dw[1] = 0.0
    allowed = np.zeros(9, bool)
    allowed[[0, 2]] = True
    for f in (dn, dw):
        assert np.max(np.abs(f[~allowed])) < 1e-12 * np.max(np.abs(f[allowed]))


def test_dealias_mask_is_noop_for_band_limited_fields(rng):
    p = small()
    s = _random_state(p, rng)
    a = rhs_nonlinear(s, p)
    b = rhs_nonlinear(s, replace(p, dealias=False))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_stale_state_rejected(rng):
    p = small()
    s = _random_state(p, rng)
    stale = replace(s, n_hat=ModeField(s.n_hat.coeffs * 2.0))
    with pytest.raises(InconsistentState):
        rhs_nonlinear(stale, p)


def test_step_keeps_walls_reality_and_consistency(rng):
    p = small()
    s = _random_state(p, rng)
    for _ in range(3):
        s, rep = step_imex(s, p)
    for f in (s.n_hat, s.c_hat, s.w_hat, s.phi_hat):
        assert not np.any(f.coeffs[:, [0, -1]])
        assert np.all(f.coeffs[0].imag == 0)
    stepper = get_stepper(p)
    c_again = stepper.elliptic.chemo(s.n_hat.coeffs)
    assert np.max(np.abs(c_again - s.c_hat.coeffs)) < 1e-12
    assert s.history is not None


def test_first_step_uses_euler_then_ab2(rng):
    p = small()
    s0 = _random_state(p, rng)
    assert s0.history is None
    s1, _ = step_imex(s0, p)
    dn0, dw0 = rhs_nonlinear(s0, p)
    np.testing.assert_array_equal(s1.history[0], dn0)
    np.testing.assert_array_equal(s1.history[1], dw0)


def _linear_mode_solution(dt, k=2, t_end=0.2):
    p = SimParams(A=50.0, K_max=4, N_r=33, dt=dt, t_end=t_end, run_mode="linear-model")
    g = build_grid(33, 2.0)
    n = np.zeros((5, 33), dtype=complex)
    n[k] = np.sin(np.pi * (g.nodes - 1.0))
    sim = Simulation(p, n, n.copy(), diag_interval=10 ** 9)
    sim.advance()
    return sim.state.n_hat.coeffs[k]


def test_linear_mode_second_order_in_time():
    ref = _linear_mode_solution(1e-3)
    e1 = np.max(np.abs(_linear_mode_solution(1e-2) - ref))
    e2 = np.max(np.abs(_linear_mode_solution(5e-3) - ref))
    assert 1.7 <= np.log2(e1 / e2) <= 2.3


def test_physical_mass_non_increasing():
    p = small(A=5.0, N_r=65, dt=1e-3, t_end=0.05)
    g = get_stepper(p).grid
    n0 = initial_gaussian(6.0, 1.5, 0.0, 0.15, g, p.K_max)
    s = make_state(p, n0, initial_vorticity(1.0, 1, g, p.K_max))
    prev = physical_mass(s, g)
    for _ in range(50):
        s, rep = step_imex(s, p)
        m = physical_mass(s, g)
        assert m <= prev * (1 + 1e-12)
        prev = m


def test_initial_gaussian_mass_and_sign():
    g = build_grid(129, 2.0)
    for r0, theta0 in [(1.5, 0.0), (1.3, 2.0), (1.8, -1.0)]:
        n0 = initial_gaussian(4 * np.pi, r0, theta0, 0.1, g, 32)
        s = make_state(SimParams(A=1.0), n0)
        assert flat_mass(s, g) == pytest.approx(4 * np.pi, rel=1e-3)
    wide = theta_inverse(initial_gaussian(4 * np.pi, 1.5, 0.0, 5.0, g, 32))
    assert wide.min() >= 0.0


def test_initial_gaussian_peak_sanity_bound():
    g = build_grid(129, 2.0)
    n0 = theta_inverse(initial_gaussian(10 * np.pi, 1.5, 0.0, 0.1, g, 32))
    assert n0.max() > 10 * np.pi / (2 * np.pi * 0.1 ** 2) * 0.1


def test_initial_gaussian_bad_center():
    g = build_grid(33, 2.0)
    with pytest.raises(BadCenter):
        initial_gaussian(1.0, 2.0, 0.0, 0.1, g, 8)


def test_run_without_density_is_bounded_and_vorticity_decays(rng):
    p = small(A=2.0, t_end=0.5, dt=5e-3)
    g = get_stepper(p).grid
    res = run(p, np.zeros((9, 33)), random_modes(rng, g, 8), diag_interval=10)
    assert res.classification == "bounded"
    first, last = res.records[0].w_modes[1:], res.records[-1].w_modes[1:]
    assert np.all(last < first)


def test_blowup_threshold_trips():
    p = SimParams(K_max=8, N_r=33, dt=1e-3, t_end=1.0, run_mode="pks-only", blowup_threshold=1.5, pos_tol=1.0)
    g = get_stepper(p).grid
    res = run(p, initial_gaussian(40.0, 1.5, 0.0, 0.1, g, 8))
    assert res.classification == "blown-up"
    assert res.sup_max_n > 1.5 * res.initial_max_n


def test_non_finite_values_reported():
    p = small()
    s = make_state(p, np.full((9, 33), np.nan))
    rep = get_stepper(p).report(s, 1.0)
    assert rep.blown_up and not rep.accepted


def test_positivity_monitor_aborts():
    p = small(t_end=0.01)
    g = get_stepper(p).grid
    n = np.zeros((9, 33), dtype=complex)
    n[1] = np.sin(np.pi * (g.nodes - 1.0))
    res = run(p, n)
    assert res.classification == "undecided"
    assert "positivity" in res.reason


def test_undecided_when_growing_at_end():
    p = small(t_end=0.01)
    sim = Simulation(p, diag_interval=1)
    sim.initial_max_n = 1.0
    sim.max_history = [5.0, 8.0, 12.0, 20.0, 40.0]
    assert sim.classify_completed()[0] == "undecided"
    sim.max_history = [5.0, 4.0, 4.5, 4.0, 4.2]
    assert sim.classify_completed()[0] == "bounded"


def test_linear_model_zero_and_monotone():
    p = SimParams(A=1e4, K_max=1, N_r=129, dt=0.05, t_end=50.0, run_mode="linear-model")
    g = build_grid(129, 2.0)
    t, norms = run_linear_model(p, 1, np.zeros(129))
    assert not np.any(norms)
    h0 = random_smooth_profiles(np.random.default_rng(2), g, 1)[0]
    t, norms = run_linear_model(p, 1, h0)
    assert np.all(np.diff(norms) <= 1e-14 * norms[0])


def test_linear_model_slower_for_larger_A():
    lam1 = measure_decay_rate(1e3, 2, efolds=10)[0]
    lam2 = measure_decay_rate(2e3, 2, efolds=10)[0]
    assert 0 < lam2 < lam1
