"""Norms, the X_a^k / E(t) energy functional, and decay-rate fitting."""

from dataclasses import dataclass, field

import numpy as np

from .discretization import d_dr, integrate_r
from .errors import InsufficientData, NonPositiveValues


def weighted_modes(coeffs, grid):
    """r^(1/2) f_k(r): the weighting that removes the first-order term of L_k."""
    return np.sqrt(grid.nodes) * coeffs


def mode_norms(coeffs, grid):
    """Flat radial L^2 norm of each weighted mode, shape (K+1,)."""
    w = weighted_modes(coeffs, grid)
    return np.sqrt(integrate_r(np.abs(w) ** 2, grid))


def ed_exponent(a_weight, A, k, R):
    """Exponent a A^(-1/3) |k|^(2/3) R^(-2) of the enhanced-dissipation weight."""
    return a_weight * A ** (-1.0 / 3.0) * np.abs(k) ** (2.0 / 3.0) / R ** 2


class XakAccumulator:
    """Running value of ||f_k||_{X_a^k} for modes k = 1..K (vectorized over k).

    Keeps the running sup of the weighted L^2 norm and trapezoid-in-time
    integrals of the squared integrands of the three L^2 L^2 terms.
    """

    def __init__(self, ks, A, R, a_weight=0.0):
        self.ks = np.asarray(ks, dtype=float)
        self.A = float(A)
        self.R = float(R)
        self.a_weight = float(a_weight)
        self.rate = ed_exponent(self.a_weight, self.A, self.ks, self.R)
        n = self.ks.size
        self.sup = np.zeros(n)
        self.integrals = np.zeros((3, n))
        self._last_t = None
        self._last = np.zeros((3, n))

    def integrands(self, t, profiles, grid):
        """e^{2a't} times (||f||^2, ||d_r f||^2, ||f/r||^2) for weighted profiles (K, N_r)."""
        weight = np.exp(2.0 * self.rate * t)
        f2 = integrate_r(np.abs(profiles) ** 2, grid)
        dr2 = integrate_r(np.abs(d_dr(profiles, grid)) ** 2, grid)
        fr2 = integrate_r(np.abs(profiles / grid.nodes) ** 2, grid)
        return weight * np.stack([f2, dr2, fr2]), np.sqrt(weight * f2)

    def update(self, t, profiles, grid):
        cur, sup_now = self.integrands(t, profiles, grid)
        if self._last_t is not None:
            self.integrals += 0.5 * (t - self._last_t) * (cur + self._last)
        self.sup = np.maximum(self.sup, sup_now)
        self._last = cur
        self._last_t = float(t)
        return self

    def terms(self):
        """The four X_a^k terms, shape (4, K)."""
        A, R, k = self.A, self.R, self.ks
        return np.stack([
            self.sup,
            A ** (-1.0 / 6.0) * k ** (1.0 / 3.0) / R * np.sqrt(self.integrals[0]),
            A ** -0.5 * np.sqrt(self.integrals[1]),
            A ** -0.5 * k * np.sqrt(self.integrals[2]),
        ])

    def values(self):
        return self.terms().sum(axis=0)

    def state_arrays(self):
        last_t = np.nan if self._last_t is None else self._last_t
        return np.concatenate([self.sup, self.integrals.ravel(), self._last.ravel(), [last_t]])

    def load_arrays(self, arr):
        n = self.ks.size
        arr = np.asarray(arr, dtype=float)
        self.sup = arr[:n].copy()
        self.integrals = arr[n:4 * n].reshape(3, n).copy()
        self._last = arr[4 * n:7 * n].reshape(3, n).copy()
        self._last_t = None if np.isnan(arr[7 * n]) else float(arr[7 * n])


def xak_update(acc, profile, k, params, dt, grid, t=None):
    """Advance a single-mode accumulator by one sample taken ``dt`` after the last one.

    Convenience wrapper over :class:`XakAccumulator` for one mode; ``profile``
    is the weighted radial profile r^(1/2) f_k at the new time.
    """
    if acc is None:
        acc = XakAccumulator([abs(k)], params.A_eff, params.R, params.a_weight)
        t = 0.0 if t is None else t
    elif t is None:
        t = acc._last_t + dt
    acc.update(t, np.asarray(profile)[None, :], grid)
    return acc


def energy_E(acc_n, acc_w):
    """E(t) = ||n||_{Y_a} + ||w||_{Y_a}; the sum over k != 0 counts +k and -k."""
    total = 0.0
    for acc in (acc_n, acc_w):
        if acc is not None:
            total += 2.0 * float(acc.values().sum())
    return total


def fit_decay_rate(t, values, window=0.6):
    """Least-squares slope of -log(value) against t over the last ``window`` of samples."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    n = t.size
    start = int(np.floor((1.0 - window) * n))
    start = min(start, max(n - 2, 0))
    tw, vw = t[start:], values[start:]
    if tw.size < 2:
        raise InsufficientData("need at least two samples in the fit window")
    if np.any(~(vw > 0)):
        raise NonPositiveValues("decay fit needs strictly positive values in the window")
    slope = np.polyfit(tw, -np.log(vw), 1)[0]
    return float(slope)


def _loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class ScalingFit:
    p_A: float
    p_k: float
    p_A_groups: dict = field(default_factory=dict)
    p_k_groups: dict = field(default_factory=dict)


def scaling_exponents(rates):
    """Log-log slopes of decay rate against A (at fixed k) and against k (at fixed A).

    ``rates`` is an iterable of (A, k, rate). Every fixed-k group with at
    least three distinct A contributes a slope to p_A (the reported value is
    their mean); likewise for p_k.
    """
    rows = [(float(A), abs(int(k)), float(lam)) for A, k, lam in rates]
    by_k, by_A = {}, {}
    for A, k, lam in rows:
        by_k.setdefault(k, {})[A] = lam
        by_A.setdefault(A, {})[k] = lam
    pa = {k: g for k, g in by_k.items() if len(g) >= 3}
    pk = {A: g for A, g in by_A.items() if len(g) >= 3}
    if not pa or not pk:
        raise InsufficientData("need >= 3 distinct A at some fixed k and >= 3 distinct k at some fixed A")
    for g in list(pa.values()) + list(pk.values()):
        if any(v <= 0 for v in g.values()):
            raise NonPositiveValues("rates must be positive for a log-log fit")
    pa_slopes = {k: _loglog_slope(list(g), list(g.values())) for k, g in sorted(pa.items())}
    pk_slopes = {A: _loglog_slope(list(g), list(g.values())) for A, g in sorted(pk.items())}
    return ScalingFit(
        p_A=float(np.mean(list(pa_slopes.values()))),
        p_k=float(np.mean(list(pk_slopes.values()))),
        p_A_groups=pa_slopes,
        p_k_groups=pk_slopes,
    )


def zero_mode_report(state, grid):
    """(||r^(1/2) n_0||, ||r^(1/2) w_0||) on [1, R]."""
    sr = np.sqrt(grid.nodes)
    n0 = state.n_hat.coeffs[0]
    w0 = state.w_hat.coeffs[0]
    return (
        float(np.sqrt(integrate_r(np.abs(sr * n0) ** 2, grid))),
        float(np.sqrt(integrate_r(np.abs(sr * w0) ** 2, grid))),
    )


@dataclass
class DiagRecord:
    step: int
    t: float
    mass: float
    mass_physical: float
    max_n: float
    min_n: float
    max_u: float
    E: float
    n0_norm: float
    w0_norm: float
    n_modes: np.ndarray
    w_modes: np.ndarray

    def header(self):
        K = self.n_modes.size - 1
        cols = ["step", "t", "mass", "mass_physical", "max_n", "min_n", "max_u", "E", "n0_norm", "w0_norm"]
        cols += [f"n_k{k}" for k in range(1, K + 1)] + [f"w_k{k}" for k in range(1, K + 1)]
        return cols

    def row(self):
        vals = [self.t, self.mass, self.mass_physical, self.max_n, self.min_n, self.max_u, self.E,
                self.n0_norm, self.w0_norm, *self.n_modes[1:], *self.w_modes[1:]]
        return [str(self.step)] + [repr(float(v)) for v in vals]
