"""Mode-wise time stepping of the perturbed PKS-NS system around Taylor-Couette flow.

Unknowns are the angular Fourier modes of the cell density n and vorticity
perturbation w; the chemoattractant c and stream function phi are re-solved
from them after every step. In rescaled time the per-mode linear part is

    L f_k = (1/A)(f'' + f'/r - k^2 f/r^2) - i k (1 + 1/r^2) f,

treated by Crank-Nicolson, while chemotaxis, perturbation transport and the
buoyancy-like source -(1/(A r)) d_theta n are advanced with second-order
Adams-Bashforth (explicit Euler on the first step).
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .baseflow import SimParams
from .diagnostics import DiagRecord, XakAccumulator, energy_E, mode_norms, weighted_modes, zero_mode_report
from .discretization import ModeField, build_grid, d_dr, integrate_r, theta_forward, theta_nodes, theta_points
from .elliptic import EllipticSolver, mode_operator, weighted_mode_operator
from .errors import BadCenter, BadValue, InconsistentState

CONSISTENCY_TOL = 1e-8
EXPLICIT_DT_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class State:
    """Fields at one time. ``history`` holds the previous explicit tendencies (AB2)."""

    t: float
    n_hat: ModeField
    c_hat: ModeField
    w_hat: ModeField
    phi_hat: ModeField
    history: tuple | None = None


@dataclass(frozen=True)
class StepReport:
    accepted: bool
    max_n: float
    min_n: float
    mass: float
    dt_used: float
    blown_up: bool
    dt_required: float = np.inf
    reason: str = ""


class Stepper:
    """Operators for one parameter set: grid, elliptic factors and CN factors per mode."""

    def __init__(self, params):
        self.params = params
        self.grid = build_grid(params.N_r, params.R)
        self.K = params.K_max
        self.N_theta = theta_points(self.K)
        self.dtheta = 2.0 * np.pi / self.N_theta
        self.ks = np.arange(self.K + 1)
        self.ik = 1j * self.ks[:, None]
        self.r = self.grid.nodes
        self.nu = params.inv_A
        self.elliptic = EllipticSolver(self.grid, self.K)
        self.dealias_keep = self.ks <= self.N_theta // 3
        self._build_linear()

    def _linear_shift(self, k):
        # CN matrices are I -/+ (dt/2) L; only the advection part is a pointwise shift
        if self.params.run_mode == "pks-only":
            return 0.0
        return 1j * k * (1.0 + 1.0 / self.grid.interior ** 2)

    def _build_linear(self):
        dt = self.params.dt
        nu = self.nu
        self._implicit, self._explicit = [], []
        for k in range(self.K + 1):
            adv = self._linear_shift(k)
            lhs = mode_operator(k, self.grid, scale=-0.5 * dt * nu, shift=-(1.0 + 0.5 * dt * adv))
            rhs = mode_operator(k, self.grid, scale=0.5 * dt * nu, shift=-(1.0 - 0.5 * dt * adv))
            self._implicit.append(lhs.factor())
            self._explicit.append(rhs)

    # -- state construction -------------------------------------------------

    def make_state(self, n_coeffs, w_coeffs, t=0.0, history=None):
        n = np.array(n_coeffs, dtype=complex)
        w = np.array(w_coeffs, dtype=complex)
        n[:, [0, -1]] = 0.0
        w[:, [0, -1]] = 0.0
        if self.params.run_mode == "pks-only":
            w[:] = 0.0
        c = self.elliptic.chemo(n)
        phi = self.elliptic.stream(w)
        return State(t=float(t), n_hat=ModeField(n), c_hat=ModeField(c), w_hat=ModeField(w),
                     phi_hat=ModeField(phi), history=history)

    def check_consistency(self, state):
        n, w = state.n_hat.coeffs, state.w_hat.coeffs
        if self.elliptic.chemo_residual(state.c_hat.coeffs, n) > CONSISTENCY_TOL:
            raise InconsistentState("c_hat does not solve the chemoattractant equation for n_hat")
        if self.elliptic.stream_residual(state.phi_hat.coeffs, w) > CONSISTENCY_TOL:
            raise InconsistentState("phi_hat does not solve the stream-function equation for w_hat")

    # -- transforms ------------------------------------------------------------

    def to_real(self, coeffs):
        """Inverse theta transform of (..., K+1, N_r) coefficients to (..., N_theta, N_r)."""
        coeffs = np.asarray(coeffs)
        spectrum = np.zeros(coeffs.shape[:-2] + (self.N_theta // 2 + 1, coeffs.shape[-1]), dtype=complex)
        spectrum[..., : self.K + 1, :] = coeffs
        return np.fft.irfft(spectrum * self.N_theta, n=self.N_theta, axis=-2)

    def to_modes(self, samples):
        spectrum = np.fft.rfft(samples, axis=-2) / self.N_theta
        return spectrum[..., : self.K + 1, :]

    def _mask(self, coeffs):
        if self.params.dealias:
            return coeffs * self.dealias_keep[:, None]
        return coeffs

    # -- explicit terms --------------------------------------------------------

    def nonlinear(self, state):
        """Explicit tendencies (dn, dw) in mode space plus the real-space drift speeds."""
        mode = self.params.run_mode
        zeros = np.zeros((self.K + 1, self.grid.N_r), dtype=complex)
        if mode == "linear-model":
            return zeros, zeros.copy(), (0.0, 0.0)
        g = self.grid
        r = self.r
        nu = self.nu
        n = self._mask(state.n_hat.coeffs)
        c = self._mask(state.c_hat.coeffs)
        ik = self.ik
        fields = [n, d_dr(c, g), ik * c]
        coupled = mode == "tc-coupled"
        if coupled:
            w = self._mask(state.w_hat.coeffs)
            phi = self._mask(state.phi_hat.coeffs)
            fields += [d_dr(n, g), ik * n, d_dr(phi, g), ik * phi, d_dr(w, g), ik * w]
        real = self.to_real(np.stack(fields))
        n_x, cr_x, ct_x = real[0], real[1], real[2]
        products = [r * n_x * cr_x, n_x * ct_x]
        if coupled:
            nr_x, nt_x, pr_x, pt_x, wr_x, wt_x = real[3:]
            products += [pr_x * nt_x - pt_x * nr_x, pr_x * wt_x - pt_x * wr_x]
        pm = self.to_modes(np.stack(products))
        dn = -nu / r * d_dr(pm[0], g) - nu / r ** 2 * (ik * pm[1])
        dw = zeros.copy()
        vr = nu * np.abs(cr_x)
        vt = nu * np.abs(ct_x) / r ** 2
        if coupled:
            dn -= nu / r * pm[2]
            dw = -nu / r * pm[3] - nu / r * (ik * n)
            vr = nu * np.abs(cr_x - pt_x / r)
            vt = nu * np.abs(pr_x / r + ct_x / r ** 2)
        dn[:, [0, -1]] = 0.0
        dw[:, [0, -1]] = 0.0
        return dn, dw, (float(np.max(vr)), float(np.max(vt)))

    def explicit_dt_limit(self, speeds):
        vr, vt = speeds
        rate = vr / self.grid.h + vt / self.dtheta
        return np.inf if rate == 0 else 1.0 / rate

    # -- time step -------------------------------------------------------------

    def step(self, state, ref_max_n=None):
        p = self.params
        dt = p.dt
        dn, dw, speeds = self.nonlinear(state)
        if state.history is None:
            fn, fw = dn, dw
        else:
            pn, pw = state.history
            fn, fw = 1.5 * dn - 0.5 * pn, 1.5 * dw - 0.5 * pw
        n_old, w_old = state.n_hat.coeffs, state.w_hat.coeffs
        n_new = np.zeros_like(n_old)
        w_new = np.zeros_like(w_old)
        evolve_w = p.run_mode != "pks-only"
        for k in range(self.K + 1):
            ex = self._explicit[k]
            b_n = ex.matvec(n_old[k, 1:-1]) + dt * fn[k, 1:-1]
            if evolve_w:
                b_w = ex.matvec(w_old[k, 1:-1]) + dt * fw[k, 1:-1]
                sol = self._implicit[k].solve(np.stack([b_n, b_w], axis=1))
                n_new[k, 1:-1] = sol[:, 0]
                w_new[k, 1:-1] = sol[:, 1]
            else:
                n_new[k, 1:-1] = self._implicit[k].solve(b_n)
        n_new[0] = n_new[0].real
        w_new[0] = w_new[0].real
        new = self.make_state(n_new, w_new, t=state.t + dt, history=(dn, dw))
        report = self.report(new, ref_max_n, dt, self.explicit_dt_limit(speeds))
        return new, report

    def report(self, state, ref_max_n, dt_used=0.0, dt_required=np.inf):
        n_x = self.to_real(state.n_hat.coeffs)
        finite = bool(np.all(np.isfinite(n_x)) and np.all(np.isfinite(state.w_hat.coeffs)))
        max_n = float(np.max(n_x)) if finite else np.inf
        min_n = float(np.min(n_x)) if finite else -np.inf
        mass = flat_mass(state, self.grid)
        blown, reason = False, ""
        if not finite:
            blown, reason = True, "non-finite values"
        elif ref_max_n is not None and ref_max_n > 0 and max_n > self.params.blowup_threshold * ref_max_n:
            blown, reason = True, f"max n exceeded {self.params.blowup_threshold:g} x initial"
        elif dt_required < EXPLICIT_DT_FLOOR:
            blown, reason = True, f"explicit stability limit {dt_required:.3g} below {EXPLICIT_DT_FLOOR:g}"
        return StepReport(accepted=finite, max_n=max_n, min_n=min_n, mass=mass, dt_used=dt_used,
                          blown_up=blown, dt_required=dt_required, reason=reason)


@lru_cache(maxsize=8)
def get_stepper(params):
    return Stepper(params)


def flat_mass(state, grid):
    """int int n dr dtheta = 2 pi int n_0 dr."""
    return float(2.0 * np.pi * integrate_r(state.n_hat.coeffs[0].real, grid))


def physical_mass(state, grid):
    """int int n r dr dtheta, the area integral in the annulus."""
    return float(2.0 * np.pi * integrate_r(grid.nodes * state.n_hat.coeffs[0].real, grid))


def rhs_nonlinear(state, params):
    """Explicit tendencies (dn_k, dw_k) as (K+1, N_r) arrays; validates c and phi first."""
    stepper = get_stepper(params)
    stepper.check_consistency(state)
    dn, dw, _ = stepper.nonlinear(state)
    return dn, dw


def step_imex(state, params, ref_max_n=None):
    """One CN/AB2 step. Returns the new state (carrying its AB2 history) and a report."""
    return get_stepper(params).step(state, ref_max_n)


def make_state(params, n0, w0=None, t=0.0):
    stepper = get_stepper(params)
    n = n0.coeffs if isinstance(n0, ModeField) else np.asarray(n0)
    if w0 is None:
        w = np.zeros_like(n, dtype=complex)
    else:
        w = w0.coeffs if isinstance(w0, ModeField) else np.asarray(w0)
    return stepper.make_state(n, w, t=t)


# -- initial data ------------------------------------------------------------

def boundary_cutoff(r, R, width=None):
    """Smooth factor equal to 0 at both walls and close to 1 away from them."""
    width = 0.05 * (R - 1.0) if width is None else width
    return np.tanh((r - 1.0) / width) * np.tanh((R - r) / width)


def initial_gaussian(M, r0, theta0, sigma, grid, K_max, oversample=8):
    """Gaussian bump of flat-measure mass M centred at (r0, theta0).

    The bump exp(-|x - x0|^2 / (2 sigma^2)) is multiplied by a wall cutoff,
    projected onto |k| <= K_max and mollified in theta with the Fejer kernel
    (weights 1 - k/(K_max+1)), which keeps the truncated field nonnegative.
    """
    R = grid.R
    if not 1.0 < r0 < R:
        raise BadCenter(f"centre radius {r0} must lie strictly inside (1, {R})")
    if not sigma > 0 or not M > 0:
        raise BadValue("sigma and M must be positive")
    n_fine = max(oversample * theta_points(K_max), 512)
    th = theta_nodes(n_fine)[:, None]
    r = grid.nodes[None, :]
    dist2 = r ** 2 + r0 ** 2 - 2.0 * r * r0 * np.cos(th - theta0)
    bump = np.exp(-dist2 / (2.0 * sigma ** 2)) * boundary_cutoff(r, R)
    coeffs = theta_forward(bump, K_max).coeffs
    fejer = 1.0 - np.arange(K_max + 1) / (K_max + 1.0)
    coeffs = coeffs * fejer[:, None]
    coeffs[:, [0, -1]] = 0.0
    mass = 2.0 * np.pi * integrate_r(coeffs[0].real, grid)
    return ModeField(coeffs * (M / mass))


def initial_vorticity(amplitude, mode, grid, K_max):
    """w = amplitude * sin(pi (r-1)/(R-1)) * cos(mode * theta)."""
    coeffs = np.zeros((K_max + 1, grid.N_r), dtype=complex)
    if amplitude == 0:
        return ModeField(coeffs)
    if not 0 <= mode <= K_max:
        raise BadValue(f"vorticity mode {mode} outside 0..{K_max}")
    profile = amplitude * np.sin(np.pi * (grid.nodes - 1.0) / (grid.R - 1.0))
    coeffs[mode] = profile if mode == 0 else 0.5 * profile
    coeffs[:, [0, -1]] = 0.0
    return ModeField(coeffs)


def random_modes(rng, grid, K_max, amplitude=1.0, n_terms=8, decay=1.0):
    """Random Hermitian smooth field: sine series in r with decaying mode amplitudes."""
    R = grid.R
    x = (grid.nodes - 1.0) / (R - 1.0)
    basis = np.sin(np.pi * np.outer(np.arange(1, n_terms + 1), x))
    coeffs = np.zeros((K_max + 1, grid.N_r), dtype=complex)
    for k in range(K_max + 1):
        xi = rng.standard_normal(n_terms) + (1j * rng.standard_normal(n_terms) if k else 0.0)
        coeffs[k] = amplitude * (xi @ basis) / (1.0 + k) ** decay
    coeffs[0] = coeffs[0].real
    return ModeField(coeffs)


# -- full runs ---------------------------------------------------------------

CLASSES = ("bounded", "blown-up", "undecided")


@dataclass
class RunRecord:
    records: list
    final_state: State
    classification: str
    reason: str
    initial_max_n: float
    sup_max_n: float
    sup_n0_norm: float
    sup_w0_norm: float
    steps: int
    mass_increase: float = 0.0
    E_final: float = 0.0
    worst_negativity: float = 0.0


class Simulation:
    """Mutable run driver: owns the state, accumulators and monitors of one run."""

    def __init__(self, params, n0=None, w0=None, diag_interval=10):
        self.params = params
        self.stepper = get_stepper(params)
        self.grid = self.stepper.grid
        self.diag_interval = max(int(diag_interval), 1)
        ks = np.arange(1, params.K_max + 1)
        self.acc_n = XakAccumulator(ks, params.A_eff, params.R, params.a_weight)
        self.acc_w = XakAccumulator(ks, params.A_eff, params.R, params.a_weight)
        self.step_index = 0
        self.records = []
        self.status = None
        self.reason = ""
        self.sup_n0_norm = 0.0
        self.sup_w0_norm = 0.0
        self.max_history = []
        self.worst_mass_increase = 0.0
        self.worst_negativity = 0.0
        self.initial_max_n = 0.0
        self.sup_max_n = 0.0
        self.last_mass = 0.0
        self.state = None
        if n0 is not None:
            self.start(n0, w0)

    @property
    def n_steps(self):
        return int(round(self.params.t_end / self.params.dt))

    def start(self, n0, w0=None):
        self.state = make_state(self.params, n0, w0)
        first = self.stepper.report(self.state, None)
        self.initial_max_n = first.max_n
        self.sup_max_n = first.max_n
        self.last_mass = first.mass
        self._accumulate(self.state)
        self._record(first)

    def _accumulate(self, state):
        g = self.grid
        self.acc_n.update(state.t, weighted_modes(state.n_hat.coeffs[1:], g), g)
        self.acc_w.update(state.t, weighted_modes(state.w_hat.coeffs[1:], g), g)
        n0, w0 = zero_mode_report(state, g)
        self.sup_n0_norm = max(self.sup_n0_norm, n0)
        self.sup_w0_norm = max(self.sup_w0_norm, w0)
        return n0, w0

    def diag_record(self, report):
        s, g = self.state, self.grid
        n0, w0 = zero_mode_report(s, g)
        phi = s.phi_hat.coeffs
        ur = self.stepper.to_real(np.stack([d_dr(phi, g), self.stepper.ik * phi]))
        max_u = float(np.sqrt(np.max(ur[0] ** 2 + (ur[1] / g.nodes) ** 2)))
        return DiagRecord(
            step=self.step_index, t=s.t, mass=report.mass, mass_physical=physical_mass(s, g),
            max_n=report.max_n, min_n=report.min_n, max_u=max_u, E=energy_E(self.acc_n, self.acc_w),
            n0_norm=n0, w0_norm=w0, n_modes=mode_norms(s.n_hat.coeffs, g), w_modes=mode_norms(s.w_hat.coeffs, g),
        )

    def _record(self, report):
        rec = self.diag_record(report)
        self.records.append(rec)
        self.max_history.append(rec.max_n)
        if self.on_record is not None:
            self.on_record(rec)

    on_record = None

    def advance(self, n_steps=None, on_checkpoint=None, checkpoint_interval=0):
        """Step until t_end (or ``n_steps`` more steps) unless the run terminates."""
        p = self.params
        target = self.n_steps if n_steps is None else min(self.n_steps, self.step_index + n_steps)
        while self.status is None and self.step_index < target:
            new, rep = self.stepper.step(self.state, self.initial_max_n)
            self.state = replace(new, t=(self.step_index + 1) * p.dt)
            self.step_index += 1
            if rep.accepted:
                self.sup_max_n = max(self.sup_max_n, rep.max_n)
                if self.last_mass > 0:
                    self.worst_mass_increase = max(self.worst_mass_increase,
                                                   (rep.mass - self.last_mass) / self.last_mass)
                self.last_mass = rep.mass
                if rep.max_n > 0:
                    self.worst_negativity = min(self.worst_negativity, rep.min_n / rep.max_n)
                self._accumulate(self.state)
            else:
                self.sup_max_n = np.inf
            done = self.step_index == self.n_steps
            if rep.blown_up:
                self.status, self.reason = "blown-up", rep.reason
            elif p.run_mode != "linear-model" and rep.min_n < -p.pos_tol * max(rep.max_n, 0.0):
                self.status = "undecided"
                self.reason = (f"positivity monitor: min n = {rep.min_n:.3e} below "
                               f"-{p.pos_tol:g} x max n at t = {self.state.t:.6g}")
            if self.status is not None or done or self.step_index % self.diag_interval == 0:
                if rep.accepted:
                    self._record(rep)
            if on_checkpoint is not None and checkpoint_interval and self.step_index % checkpoint_interval == 0:
                on_checkpoint(self)
        if self.status is None and self.step_index >= self.n_steps:
            self.status, self.reason = self.classify_completed()
        return self.status

    def classify_completed(self):
        p = self.params
        hist = self.max_history[-5:]
        growing = len(hist) >= 3 and all(b > a for a, b in zip(hist, hist[1:]))
        if growing and hist[-1] > 10.0 * self.initial_max_n:
            return "undecided", "max n still growing at t_end"
        return "bounded", f"reached t_end with sup max n = {self.sup_max_n:.6g} (<= {p.blowup_threshold:g} x initial)"

    def result(self):
        return RunRecord(
            records=self.records, final_state=self.state, classification=self.status or "undecided",
            reason=self.reason, initial_max_n=self.initial_max_n, sup_max_n=self.sup_max_n,
            sup_n0_norm=self.sup_n0_norm, sup_w0_norm=self.sup_w0_norm, steps=self.step_index,
            mass_increase=self.worst_mass_increase, E_final=energy_E(self.acc_n, self.acc_w),
            worst_negativity=self.worst_negativity,
        )


def run(params, n0, w0=None, diag_interval=10, on_record=None):
    """Integrate to t_end (or blow-up) and classify the outcome."""
    sim = Simulation(params, diag_interval=diag_interval)
    sim.on_record = on_record
    sim.start(n0, w0)
    sim.advance()
    return sim.result()


# -- linear model ------------------------------------------------------------

def run_linear_model(params, k, h0, sample_every=1, stop_below=0.0):
    """Evolve d_t h + L_k h = 0 for the weighted single-mode operator.

    L_k h = -(1/A)(h'' - (k^2 - 1/4) h / r^2) + i k h / r^2 with h(1) = h(R) = 0,
    stepped with Crank-Nicolson up to ``params.t_end``, or earlier once
    ||h|| drops below ``stop_below * ||h(0)||``. Returns (times, ||h(t)||_{L^2}).
    """
    if k == 0:
        raise BadValue("run_linear_model requires k != 0")
    grid = build_grid(params.N_r, params.R)
    dt = params.dt
    nu = 1.0 / params.A
    adv = 1j * k / grid.interior ** 2
    lhs = weighted_mode_operator(k, grid, scale=-0.5 * dt * nu, shift=-(1.0 + 0.5 * dt * adv)).factor()
    rhs = weighted_mode_operator(k, grid, scale=0.5 * dt * nu, shift=-(1.0 - 0.5 * dt * adv))
    h = np.asarray(h0, dtype=complex)[1:-1].copy()
    w = grid.trapezoid_weights[1:-1]
    n_steps = int(round(params.t_end / dt))
    times = [0.0]
    norms = [float(np.sqrt(np.sum(w * np.abs(h) ** 2)))]
    floor = stop_below * norms[0]
    for i in range(1, n_steps + 1):
        h = lhs.solve(rhs.matvec(h))
        if i % sample_every == 0 or i == n_steps:
            times.append(i * dt)
            norms.append(float(np.sqrt(np.sum(w * np.abs(h) ** 2))))
            if norms[-1] < floor:
                break
    return np.array(times), np.array(norms)


def measure_decay_rate(A, k, R=2.0, N_r=129, dt=0.02, efolds=30.0, t_max=1e5, window=0.6, seed=0):
    """Asymptotic decay rate of mode k under the linear model, fitted from ||h(t)||.

    Starts from a random smooth profile and runs until the norm has decayed
    by ``efolds`` e-folds; the rate is the slope of -log||h|| over the last
    ``window`` fraction of samples.
    """
    from .diagnostics import fit_decay_rate
    from .elliptic import random_smooth_profiles

    grid = build_grid(N_r, R)
    h0 = random_smooth_profiles(np.random.default_rng(seed), grid, 1)[0]
    params = SimParams(A=A, R=R, K_max=max(abs(int(k)), 1), N_r=N_r, dt=dt, t_end=t_max, run_mode="linear-model")
    sample_every = max(1, int(round(0.1 / dt)))
    t, norms = run_linear_model(params, k, h0, sample_every=sample_every, stop_below=np.exp(-efolds))
    return fit_decay_rate(t, norms, window), t, norms
