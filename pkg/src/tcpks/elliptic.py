"""Per-mode radial elliptic problems with homogeneous Dirichlet walls.

For angular mode k the radial operator is

    L_k f = f'' + f'/r - k^2 f / r^2,

discretized with centred second-order differences on the interior nodes of
a uniform grid (wall values are zero and eliminated). The chemoattractant
solves ``(L_k - 1) c_k = -n_k`` and the stream function ``L_k phi_k = w_k``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .discretization import build_grid, d2_dr2, d_dr, integrate_r
from .errors import BadValue, SingularSystem


@dataclass(frozen=True, eq=False)
class TridiagonalSystem:
    """Interior-node tridiagonal matrix; ``sub[i]`` couples row i+1 to column i."""

    sub: np.ndarray
    diag: np.ndarray
    super: np.ndarray
    rhs: np.ndarray | None = None

    def matvec(self, x):
        x = np.asarray(x)
        y = self.diag * x
        y[..., 1:] += self.sub * x[..., :-1]
        y[..., :-1] += self.super * x[..., 1:]
        return y

    def factor(self):
        return FactoredTridiagonal(self)

    def solve(self, rhs=None):
        rhs = self.rhs if rhs is None else rhs
        return self.factor().solve(rhs)


class FactoredTridiagonal:
    """LU factors (partial pivoting, LAPACK gttrf) reusable across right-hand sides."""

    def __init__(self, system):
        dl = np.asarray(system.sub, dtype=complex)
        d = np.asarray(system.diag, dtype=complex)
        du = np.asarray(system.super, dtype=complex)
        self.n = d.size
        dl, d, du, du2, ipiv, info = lapack.zgttrf(dl, d, du)
        if info != 0 or not np.all(np.isfinite(d)):
            raise SingularSystem(f"tridiagonal factorization failed (info={info})")
        self._factors = (dl, d, du, du2, ipiv)

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=complex)
        vector = rhs.ndim == 1
        b = rhs.reshape(self.n, -1) if vector else rhs
        x, info = lapack.zgttrs(*self._factors, b)
        if info != 0:
            raise SingularSystem(f"tridiagonal solve failed (info={info})")
        return x[:, 0] if vector else x


def mode_operator(k, grid, shift=0.0, scale=1.0):
    """Bands of ``scale * L_k - shift`` on interior nodes.

    ``shift`` may be a scalar or an array over interior nodes (complex allowed).
    """
    r = grid.interior
    h = grid.h
    a = scale / h ** 2
    b = scale / (2.0 * h * r)
    sub = (a - b)[1:]
    sup = (a + b)[:-1]
    diag = -2.0 * a - scale * k * k / r ** 2 - shift
    diag = np.asarray(diag, dtype=complex) if np.iscomplexobj(diag) else diag
    return TridiagonalSystem(sub=sub, diag=diag, super=sup)


def weighted_mode_operator(k, grid, shift=0.0, scale=1.0):
    """Bands of ``scale * (d_r^2 - (k^2 - 1/4)/r^2) - shift`` on interior nodes.

    This is the radial operator acting on r^(1/2) f_k; it is symmetric on a
    uniform grid.
    """
    r = grid.interior
    a = scale / grid.h ** 2
    off = np.full(r.size - 1, a)
    diag = -2.0 * a - scale * (k * k - 0.25) / r ** 2 - shift
    return TridiagonalSystem(sub=off, diag=diag, super=off.copy())


def chemo_system(k, grid):
    return mode_operator(k, grid, shift=1.0)


def stream_system(k, grid):
    return mode_operator(k, grid)


def _with_walls(interior):
    out = np.zeros(interior.shape[:-1] + (interior.shape[-1] + 2,), dtype=interior.dtype)
    out[..., 1:-1] = interior
    return out


def solve_chemo_mode(k, n_hat_k, grid):
    """Solve (L_k - 1) c = -n with c(1) = c(R) = 0; returns c on all nodes."""
    n_hat_k = np.asarray(n_hat_k)
    c = chemo_system(k, grid).solve(-n_hat_k[1:-1])
    return _real_if_input_real(_with_walls(c), n_hat_k)


def solve_stream_mode(k, w_hat_k, grid):
    """Solve L_k phi = w with phi(1) = phi(R) = 0; returns phi on all nodes."""
    w_hat_k = np.asarray(w_hat_k)
    phi = stream_system(k, grid).solve(w_hat_k[1:-1])
    return _real_if_input_real(_with_walls(phi), w_hat_k)


def _real_if_input_real(out, ref):
    return out.real.copy() if not np.iscomplexobj(ref) else out


class EllipticSolver:
    """Cached factorizations of the chemo and stream operators for k = 0..K_max."""

    def __init__(self, grid, K_max):
        self.grid = grid
        self.K_max = K_max
        self._chemo = [chemo_system(k, grid) for k in range(K_max + 1)]
        self._stream = [stream_system(k, grid) for k in range(K_max + 1)]
        self._chemo_lu = [s.factor() for s in self._chemo]
        self._stream_lu = [s.factor() for s in self._stream]

    def chemo(self, n_coeffs):
        out = np.zeros_like(n_coeffs, dtype=complex)
        for k, lu in enumerate(self._chemo_lu):
            out[k, 1:-1] = lu.solve(-n_coeffs[k, 1:-1])
        return out

    def stream(self, w_coeffs):
        out = np.zeros_like(w_coeffs, dtype=complex)
        for k, lu in enumerate(self._stream_lu):
            out[k, 1:-1] = lu.solve(w_coeffs[k, 1:-1])
        return out

    def chemo_residual(self, c_coeffs, n_coeffs):
        """Max interior residual of (L_k - 1) c + n, relative to max |n|."""
        res = 0.0
        for k, s in enumerate(self._chemo):
            res = max(res, float(np.max(np.abs(s.matvec(c_coeffs[k, 1:-1]) + n_coeffs[k, 1:-1]), initial=0.0)))
        scale = float(np.max(np.abs(n_coeffs), initial=0.0))
        return res / scale if scale > 0 else res

    def stream_residual(self, phi_coeffs, w_coeffs):
        res = 0.0
        for k, s in enumerate(self._stream):
            res = max(res, float(np.max(np.abs(s.matvec(phi_coeffs[k, 1:-1]) - w_coeffs[k, 1:-1]), initial=0.0)))
        scale = float(np.max(np.abs(w_coeffs), initial=0.0))
        return res / scale if scale > 0 else res


# -- numerical checks of the elliptic estimates ------------------------------

LEMMA_SLACK = 1.05


def random_smooth_profiles(rng, grid, samples, n_terms=8):
    """Rows sum_{m=1}^{n_terms} xi_m sin(m pi (r-1)/(R-1)) with xi_m ~ N(0, 1)."""
    x = (grid.nodes - 1.0) / (grid.R - 1.0)
    basis = np.sin(np.pi * np.outer(np.arange(1, n_terms + 1), x))
    return rng.standard_normal((samples, n_terms)) @ basis


def _l2(f, grid):
    return float(np.sqrt(integrate_r(np.abs(f) ** 2, grid)))


def _linf(f):
    return float(np.max(np.abs(f)))


def lowest_eigenprofile(k, grid):
    """Eigenvector of the discrete -(L_k) with the smallest eigenvalue (walls included)."""
    s = mode_operator(k, grid)
    mat = np.diag(s.diag) + np.diag(s.sub, -1) + np.diag(s.super, 1)
    vals, vecs = np.linalg.eig(-mat)
    v = vecs[:, np.argmin(vals.real)].real
    return _with_walls(v / np.max(np.abs(v)))


@dataclass
class LemmaRow:
    lemma: str
    R: float
    k: int
    sample: int
    ratio: float
    margin: float
    extra: float = float("nan")


@dataclass
class LemmaReport:
    rows: list

    def max_margin(self, lemma=None):
        vals = [r.margin for r in self.rows if lemma in (None, r.lemma) and np.isfinite(r.margin)]
        return max(vals) if vals else float("nan")

    def max_ratio(self, lemma=None):
        vals = [r.ratio for r in self.rows if lemma in (None, r.lemma) and np.isfinite(r.ratio)]
        return max(vals) if vals else float("nan")

    def failures(self, slack=LEMMA_SLACK):
        return [r for r in self.rows if np.isfinite(r.margin) and r.margin > slack]

    def csv_lines(self):
        lines = ["lemma,R,k,sample,ratio,margin,extra"]
        for r in self.rows:
            lines.append(f"{r.lemma},{r.R!r},{r.k},{r.sample},{r.ratio!r},{r.margin!r},{r.extra!r}")
        return lines


def ck_quantities(k, n_hat, grid):
    """Weighted c_k, n_k for one mode and the three chemo estimate ratios.

    Returns (margin, sup_ratio, second_order_ratio) where margin is
    (4|c'|^2 + 4k^2 |c/r|^2 + |c|^2) / (2 |n|^2) in weighted variables.
    """
    r = grid.nodes
    c_hat = solve_chemo_mode(k, n_hat, grid)
    sr = np.sqrt(r)
    ck, nk = sr * c_hat, sr * n_hat
    dck = d_dr(ck, grid)
    n2 = _l2(nk, grid) ** 2
    lhs = 4.0 * _l2(dck, grid) ** 2 + 4.0 * k * k * _l2(ck / r, grid) ** 2 + _l2(ck, grid) ** 2
    nn = np.sqrt(n2)
    second = (_l2(r ** 2 * d2_dr2(ck, grid), grid) + k * k * _l2(ck, grid) + k * _l2(r * dck, grid)) / nn
    return lhs / (2.0 * n2), _linf(ck) / nn, second


def verify_lemma_ck(samples, k_list, R, N_r, seed, eigen=False):
    """Check the explicit-constant chemo estimate for random smooth n_k (k >= 1)."""
    if samples < 1:
        raise BadValue("samples must be >= 1")
    grid = build_grid(N_r, R)
    rng = np.random.default_rng(seed)
    rows = []
    for k in k_list:
        profiles = random_smooth_profiles(rng, grid, samples)
        if eigen:
            profiles = np.vstack([profiles, lowest_eigenprofile(k, grid)])
        for i, n_hat in enumerate(profiles):
            if not np.any(n_hat):
                continue
            margin, sup_ratio, second = ck_quantities(k, n_hat, grid)
            rows.append(LemmaRow("ck", R, k, i, sup_ratio, margin, second))
    return LemmaReport(rows)


def c0_quantities(n_hat, grid):
    """(margin, sup_ratio) for the zero-mode chemo estimate with weight r^(1/2)."""
    r = grid.nodes
    sr = np.sqrt(r)
    c0 = solve_chemo_mode(0, n_hat, grid)
    dc0 = d_dr(c0, grid)
    n2 = _l2(sr * n_hat, grid) ** 2
    lhs = _l2(sr * c0, grid) ** 2 + 2.0 * _l2(sr * dc0, grid) ** 2
    return lhs / n2, (_linf(c0) + _linf(dc0)) / np.sqrt(n2)


def verify_lemma_c0(samples, R, N_r, seed):
    """Zero-mode chemo estimate over nonnegative smooth n_0 (squared sine series)."""
    if samples < 1:
        raise BadValue("samples must be >= 1")
    grid = build_grid(N_r, R)
    rng = np.random.default_rng(seed)
    rows = []
    for i, p in enumerate(random_smooth_profiles(rng, grid, samples)):
        n_hat = p * p
        if not np.any(n_hat):
            continue
        margin, sup_ratio = c0_quantities(n_hat, grid)
        rows.append(LemmaRow("c0", R, 0, i, sup_ratio, margin))
    return LemmaReport(rows)


def phik_ratio(k, w_hat, grid):
    """(|r^(1/2) phi_k'|_inf + |k| |r^(-1/2) phi_k|_inf) |k|^(1/2) / |r w_k|, weighted variables.

    Returns nan for a zero profile.
    """
    r = grid.nodes
    sr = np.sqrt(r)
    wk = sr * w_hat
    denom = _l2(r * wk, grid)
    if denom == 0:
        return float("nan")
    phik = sr * solve_stream_mode(k, w_hat, grid)
    lhs = _linf(sr * d_dr(phik, grid)) + abs(k) * _linf(phik / sr)
    return lhs * np.sqrt(abs(k)) / denom


def phi0_ratios(w_hat, grid):
    """(|phi_0|_inf / |r w_0|, |phi_0'|_inf / |r^(3/2) w_0|) for the zero mode."""
    r = grid.nodes
    phi0 = solve_stream_mode(0, w_hat, grid)
    return _linf(phi0) / _l2(r * w_hat, grid), _linf(d_dr(phi0, grid)) / _l2(r ** 1.5 * w_hat, grid)


def loglog_slope(x, y):
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def verify_lemma_phik(samples, k_list, R, N_r, seed, profiles=None):
    """Normalized stream-function ratios for random (or given) w profiles.

    Each profile is reused for every k, so per-profile rows trace the ratio
    as a function of k; ``extra`` carries the log-log slope of that trace.
    """
    grid = build_grid(N_r, R)
    if profiles is None:
        if samples < 1:
            raise BadValue("samples must be >= 1")
        profiles = random_smooth_profiles(np.random.default_rng(seed), grid, samples)
    rows = []
    for i, w_hat in enumerate(profiles):
        ratios = [phik_ratio(k, w_hat, grid) for k in k_list]
        if not np.all(np.isfinite(ratios)):
            continue
        slope = loglog_slope(k_list, ratios) if len(k_list) > 1 else float("nan")
        for k, ratio in zip(k_list, ratios):
            rows.append(LemmaRow("phik", R, k, i, ratio, float("nan"), slope))
    return LemmaReport(rows)


def verify_lemma_phi0(samples, R, N_r, seed):
    grid = build_grid(N_r, R)
    rows = []
    for i, w_hat in enumerate(random_smooth_profiles(np.random.default_rng(seed), grid, samples)):
        if not np.any(w_hat):
            continue
        sup_ratio, grad_ratio = phi0_ratios(w_hat, grid)
        rows.append(LemmaRow("phi0", R, 0, i, sup_ratio, float("nan"), grad_ratio))
    return LemmaReport(rows)
