"""Independent real-space evaluation of the explicit tendencies.

Fields are synthesized on a fine angular grid by a direct Fourier sum,
angular derivatives use an eighth-order centred finite-difference stencil,
products and derivatives are formed pointwise, and the result is projected
back onto modes with a direct (non-FFT) Fourier sum. Only the radial
derivative stencil is shared with the package.
"""

import numpy as np

from tcpks.discretization import d_dr

# eighth-order central first-derivative weights for offsets 1..4
_FD8 = np.array([4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0])


def synthesize(coeffs, theta):
    k = np.arange(coeffs.shape[0])
    phase = np.exp(1j * np.outer(theta, k))
    return coeffs[0].real[None, :] + 2.0 * np.real(phase[:, 1:] @ coeffs[1:])


def d_theta(f, dtheta):
    out = np.zeros_like(f)
    for m, c in enumerate(_FD8, start=1):
        out += c * (np.roll(f, -m, axis=0) - np.roll(f, m, axis=0))
    return out / dtheta


def project(f, theta, K):
    k = np.arange(K + 1)
    phase = np.exp(-1j * np.outer(k, theta))
    return phase @ f / theta.size


def tendencies(state, params, grid, n_theta=1024):
    K = state.n_hat.K_max
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    dth = theta[1]
    r = grid.nodes
    coupled = params.run_mode == "tc-coupled"
    nu = 1.0 if params.run_mode == "pks-only" else 1.0 / params.A
    n = synthesize(state.n_hat.coeffs, theta)
    c = synthesize(state.c_hat.coeffs, theta)
    n_r, n_t = d_dr(n, grid), d_theta(n, dth)
    c_r, c_t = d_dr(c, grid), d_theta(c, dth)
    dn = -nu / r * d_dr(r * n * c_r, grid) - nu / r ** 2 * d_theta(n * c_t, dth)
    dw = np.zeros_like(dn)
    if coupled:
        w = synthesize(state.w_hat.coeffs, theta)
        phi = synthesize(state.phi_hat.coeffs, theta)
        p_r, p_t = d_dr(phi, grid), d_theta(phi, dth)
        w_r, w_t = d_dr(w, grid), d_theta(w, dth)
        dn += -nu / r * (p_r * n_t - p_t * n_r)
        dw = -nu / r * (p_r * w_t - p_t * w_r) - nu / r * n_t
    dn_k, dw_k = project(dn, theta, K), project(dw, theta, K)
    for f in (dn_k, dw_k):
        f[:, [0, -1]] = 0.0
    return dn_k, dw_k


def relative_error(a, b):
    scale = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)
