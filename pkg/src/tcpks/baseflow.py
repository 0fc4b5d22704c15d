"""Run parameters and the Taylor-Couette base flow U = (A r + B/r) e_theta."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import BadValue, DomainError

RUN_MODES = ("tc-coupled", "pks-only", "linear-model")


@dataclass(frozen=True)
class SimParams:
    """Physical and numerical parameters of one run.

    Times are in the rescaled units t -> t/A of the perturbation system,
    except in ``pks-only`` mode where there is no flow and A plays no role.
    """

    A: float = 1.0
    R: float = 2.0
    K_max: int = 32
    N_r: int = 129
    dt: float = 1e-3
    t_end: float = 1.0
    a_weight: float = 0.0
    run_mode: str = "tc-coupled"
    dealias: bool = True
    blowup_threshold: float = 1e3
    seed: int = 0
    pos_tol: float = 1e-8

    def __post_init__(self):
        if self.run_mode not in RUN_MODES:
            raise BadValue(f"run_mode must be one of {RUN_MODES}, got {self.run_mode!r}")
        if not self.R > 1:
            raise BadValue(f"R must exceed 1, got {self.R}")
        if self.run_mode != "pks-only" and not self.A > 0:
            raise BadValue(f"A must be positive in {self.run_mode} mode, got {self.A}")
        if int(self.N_r) != self.N_r or self.N_r < 3:
            raise BadValue(f"N_r must be an integer >= 3, got {self.N_r}")
        if int(self.K_max) != self.K_max or self.K_max < 1:
            raise BadValue(f"K_max must be an integer >= 1, got {self.K_max}")
        if not self.dt > 0:
            raise BadValue(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise BadValue(f"t_end must be >= dt, got t_end={self.t_end}, dt={self.dt}")
        if self.a_weight < 0:
            raise BadValue(f"a_weight must be >= 0, got {self.a_weight}")
        if not self.blowup_threshold > 1:
            raise BadValue(f"blowup_threshold must exceed 1, got {self.blowup_threshold}")
        if self.pos_tol < 0:
            raise BadValue(f"pos_tol must be >= 0, got {self.pos_tol}")

    @property
    def inv_A(self):
        """Coefficient of diffusion and nonlinear terms (1 when there is no flow)."""
        return 1.0 if self.run_mode == "pks-only" else 1.0 / self.A

    @property
    def A_eff(self):
        return 1.0 if self.run_mode == "pks-only" else float(self.A)

    def as_dict(self):
        return asdict(self)


def tc_velocity(r, theta, A, B):
    """Cartesian components of the Taylor-Couette velocity at (r, theta).

    >>> tc_velocity(2.0, 0.0, 3.0, 3.0)
    (0.0, 7.5)
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 1):
        raise DomainError("tc_velocity requires r >= 1")
    speed = A * r + B / r
    vx = -np.sin(theta) * speed
    vy = np.cos(theta) * speed
    if vx.ndim == 0 and np.ndim(vy) == 0:
        return float(vx), float(vy)
    return vx, vy


def tc_vorticity(A):
    """Vorticity of the base flow; constant in r."""
    return 2.0 * A


def shear_rate(A, R):
    """Wall shear rate G = 2A (3 + R^2)/(R^2 - 1) for cylinders at r = 1 and r = R."""
    if not R > 1:
        raise DomainError(f"shear_rate requires R > 1, got {R}")
    return 2.0 * A * (3.0 + R * R) / (R * R - 1.0)
