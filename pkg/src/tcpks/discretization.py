"""Radial grid on [1, R], theta-Fourier transforms and flat-measure quadrature.

All norms use the flat measure dr dtheta, without the polar Jacobian.
Fields are stored mode-first: a ``ModeField`` has ``coeffs`` of shape
``(K_max + 1, N_r)`` holding f_k(r_i) for k = 0..K_max; negative modes are
implied by Hermitian symmetry. Real samples have shape ``(N_theta, N_r)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadDomain, ResolutionTooLow, TooFewPoints


@dataclass(frozen=True, eq=False)
class RadialGrid:
    N_r: int
    R: float
    nodes: np.ndarray
    h: float
    trapezoid_weights: np.ndarray

    @property
    def interior(self):
        return self.nodes[1:-1]


def build_grid(N_r, R):
    """Uniform grid on [1, R] including both walls, with trapezoid weights."""
    if N_r < 3:
        raise TooFewPoints(f"need at least 3 radial nodes, got {N_r}")
    if not R > 1:
        raise BadDomain(f"outer radius must exceed 1, got {R}")
    N_r = int(N_r)
    nodes = np.linspace(1.0, R, N_r)
    nodes[-1] = R
    h = (R - 1.0) / (N_r - 1)
    weights = np.full(N_r, h)
    weights[0] = weights[-1] = 0.5 * h
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return RadialGrid(N_r=N_r, R=float(R), nodes=nodes, h=h, trapezoid_weights=weights)


def theta_points(K_max):
    """Number of angular samples: 4*K_max rounded up to a power of two.

    With this many points products of two fields band-limited to K_max are
    resolved without aliasing onto |k| <= K_max, which is the 2/3 rule.
    """
    n = 1
    while n < 4 * K_max:
        n *= 2
    return n


def theta_nodes(N_theta):
    return 2.0 * np.pi * np.arange(N_theta) / N_theta


@dataclass(frozen=True, eq=False)
class ModeField:
    """Complex radial profiles f_k(r) for k = 0..K_max."""

    coeffs: np.ndarray
    hermitian: bool = True

    @property
    def K_max(self):
        return self.coeffs.shape[0] - 1

    @property
    def N_r(self):
        return self.coeffs.shape[1]

    @classmethod
    def zeros(cls, K_max, N_r):
        return cls(np.zeros((K_max + 1, N_r), dtype=complex))

    def mode(self, k):
        """Profile of mode k, negative k via conjugation."""
        if k < 0:
            return np.conj(self.coeffs[-k])
        return self.coeffs[k]


def theta_forward(samples, K_max):
    """Angular Fourier coefficients f_k = (1/N) sum_j f(theta_j) exp(-i k theta_j).

    ``samples`` has shape ``(N_theta, N_r)`` (or ``(N_theta,)``).
    """
    samples = np.asarray(samples, dtype=float)
    n_theta = samples.shape[0]
    if n_theta < 2 * K_max + 1:
        raise ResolutionTooLow(f"N_theta={n_theta} cannot carry K_max={K_max} (need >= {2 * K_max + 1})")
    spectrum = np.fft.rfft(samples, axis=0) / n_theta
    coeffs = spectrum[: K_max + 1].copy()
    coeffs[0] = coeffs[0].real
    if coeffs.ndim == 1:
        coeffs = coeffs[:, None]
    return ModeField(coeffs)


def theta_inverse(modes, N_theta=None):
    """Real samples f(theta_j, r_i) = f_0 + 2 Re sum_{k>=1} f_k exp(i k theta_j)."""
    coeffs = modes.coeffs if isinstance(modes, ModeField) else np.asarray(modes)
    K_max = coeffs.shape[0] - 1
    if N_theta is None:
        N_theta = theta_points(K_max)
    if N_theta < 2 * K_max + 1:
        raise ResolutionTooLow(f"N_theta={N_theta} cannot carry K_max={K_max}")
    spectrum = np.zeros((N_theta // 2 + 1,) + coeffs.shape[1:], dtype=complex)
    spectrum[: K_max + 1] = coeffs
    spectrum[0] = spectrum[0].real
    return np.fft.irfft(spectrum * N_theta, n=N_theta, axis=0)


def d_dr(f, grid):
    """First radial derivative along the last axis.

    Second-order central differences inside, second-order one-sided at the
    walls. Works on real or complex arrays of shape ``(..., N_r)``.
    """
    f = np.asarray(f)
    h = grid.h
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    # written as differences so that constants give exactly zero
    out[..., 0] = (4.0 * (f[..., 1] - f[..., 0]) - (f[..., 2] - f[..., 0])) / (2.0 * h)
    out[..., -1] = (-4.0 * (f[..., -2] - f[..., -1]) + (f[..., -3] - f[..., -1])) / (2.0 * h)
    return out


def d2_dr2(f, grid):
    """Second radial derivative; three-point centred inside, four-point one-sided at walls."""
    f = np.asarray(f)
    h2 = grid.h ** 2
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / h2
    if f.shape[-1] >= 4:
        out[..., 0] = (2.0 * f[..., 0] - 5.0 * f[..., 1] + 4.0 * f[..., 2] - f[..., 3]) / h2
        out[..., -1] = (2.0 * f[..., -1] - 5.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]) / h2
    else:
        out[..., 0] = out[..., 1]
        out[..., -1] = out[..., -2]
    return out


def integrate_r(f, grid):
    """Trapezoid rule for int_1^R f dr along the last axis."""
    return np.sum(np.asarray(f) * grid.trapezoid_weights, axis=-1)


def norm_l2_flat(f, grid, weight=None):
    """Flat-measure L^2 norm.

    For a 1-D radial profile this is (int_1^R |w f|^2 dr)^(1/2). For a
    ``ModeField`` (or a ``(K+1, N_r)`` coefficient array) it is the norm of
    the real field it represents over [1,R] x S^1, via Parseval:
    2 pi sum_{k in Z} int |w f_k|^2 dr.
    """
    w = 1.0 if weight is None else weight
    if isinstance(f, ModeField):
        c = np.abs(w * f.coeffs) ** 2
        per_mode = integrate_r(c, grid)
        total = per_mode[0] + 2.0 * per_mode[1:].sum()
        return float(np.sqrt(2.0 * np.pi * total))
    f = np.asarray(f)
    return float(np.sqrt(integrate_r(np.abs(w * f) ** 2, grid)))


def norm_l2_real(samples, grid, weight=None):
    """Flat-measure L^2 norm of real samples of shape (N_theta, N_r)."""
    w = 1.0 if weight is None else weight
    n_theta = samples.shape[0]
    per_r = np.sum((w * samples) ** 2, axis=0) * (2.0 * np.pi / n_theta)
    return float(np.sqrt(integrate_r(per_r, grid)))


def norm_inf(f):
    return float(np.max(np.abs(f))) if np.size(f) else 0.0
