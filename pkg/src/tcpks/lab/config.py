"""Plain ``key=value`` run configuration.

One setting per line, ``#`` starts a comment, keys are case-sensitive and
lists are comma-separated (``A_list=2e3,2e4,2e5``).
"""

from dataclasses import dataclass, field, fields

from ..baseflow import RUN_MODES, SimParams
from ..errors import BadValue, ConfigError, MissingRequired, UnknownKey

IC_TYPES = ("gaussian", "zero", "random")


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text):
    return [_int(x) for x in text.split(",") if x.strip()]


@dataclass
class RunConfig:
    # SimParams fields
    A: float | None = None
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
    # initial data
    ic_type: str = "gaussian"
    M: float | None = None
    r0: float | None = None
    theta0: float = 0.0
    sigma: float = 0.1
    w_amp: float = 0.0
    w_mode: int = 1
    # output and cadence
    out: str = "out"
    diag_interval: int = 100
    checkpoint_interval: int = 0
    # sweeps
    A_list: list = field(default_factory=list)
    k_list: list = field(default_factory=list)
    M_list: list = field(default_factory=list)
    fit_window: float = 0.6
    lm_dt: float = 0.02
    lm_efolds: float = 30.0
    lm_t_max: float = 1e5
    # lemma checks
    samples: int = 200
    lemma_k_list: list = field(default_factory=lambda: list(range(1, 17)))
    lemma_R_list: list = field(default_factory=lambda: [2.0, 4.0])
    phik_k_list: list = field(default_factory=lambda: [1, 2, 4, 8, 16])

    def sim_params(self, **overrides):
        values = {f.name: getattr(self, f.name) for f in fields(SimParams)}
        if values["A"] is None:
            values["A"] = self.A_list[0] if self.A_list else 1.0
        values.update(overrides)
        return SimParams(**values)

    @property
    def center_radius(self):
        return self.r0 if self.r0 is not None else 0.5 * (1.0 + self.R)


_PARSERS = {
    "A": float, "R": float, "K_max": _int, "N_r": _int, "dt": float, "t_end": float,
    "a_weight": float, "run_mode": str, "dealias": _bool, "blowup_threshold": float,
    "seed": _int, "pos_tol": float, "ic_type": str, "M": float, "r0": float, "theta0": float,
    "sigma": float, "w_amp": float, "w_mode": _int, "out": str, "diag_interval": _int,
    "checkpoint_interval": _int, "A_list": _float_list, "k_list": _int_list, "M_list": _float_list,
    "fit_window": float, "lm_dt": float, "lm_efolds": float, "lm_t_max": float, "samples": _int,
    "lemma_k_list": _int_list, "lemma_R_list": _float_list, "phik_k_list": _int_list,
}


def parse_config(text, command="simulate"):
    """Parse and validate configuration text; omitted keys take their defaults.

    ``command`` selects which keys are required: ``simulate`` needs ``A``
    for tc-coupled runs and ``M`` for Gaussian density data; ``sweep`` needs
    the sweep lists; ``verify-lemmas`` needs nothing.
    """
    cfg = RunConfig()
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadValue(f"expected key=value, got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise UnknownKey(f"unknown key {key!r}", line=lineno)
        try:
            parsed = _PARSERS[key](value)
        except ValueError as exc:
            raise BadValue(f"{key}: {exc}", line=lineno) from None
        setattr(cfg, key, parsed)
        lines[key] = lineno
    _validate(cfg, lines, command)
    return cfg


def _validate(cfg, lines, command):
    def bad(key, msg):
        raise BadValue(msg, line=lines.get(key))

    if cfg.run_mode not in RUN_MODES:
        bad("run_mode", f"run_mode must be one of {', '.join(RUN_MODES)}")
    if cfg.ic_type not in IC_TYPES:
        bad("ic_type", f"ic_type must be one of {', '.join(IC_TYPES)}")
    if cfg.M is not None and not cfg.M > 0:
        bad("M", "M must be positive")
    if not cfg.sigma > 0:
        bad("sigma", "sigma must be positive")
    if cfg.r0 is not None and not 1.0 < cfg.r0 < cfg.R:
        bad("r0", "r0 must lie strictly between 1 and R")
    if cfg.diag_interval < 1:
        bad("diag_interval", "diag_interval must be >= 1")
    if cfg.checkpoint_interval < 0:
        bad("checkpoint_interval", "checkpoint_interval must be >= 0")
    if cfg.samples < 1:
        bad("samples", "samples must be >= 1")
    if not 0 < cfg.fit_window <= 1:
        bad("fit_window", "fit_window must lie in (0, 1]")
    if any(a <= 0 for a in cfg.A_list):
        bad("A_list", "A values must be positive")
    if any(k == 0 for k in cfg.k_list):
        bad("k_list", "k values must be nonzero")
    if any(m <= 0 for m in cfg.M_list):
        bad("M_list", "M values must be positive")
    try:
        cfg.sim_params()
    except ConfigError as exc:
        first_word = str(exc).split(" ", 1)[0]
        raise BadValue(str(exc), line=lines.get(first_word)) from None
    if command == "simulate":
        if cfg.run_mode == "tc-coupled" and cfg.A is None:
            raise MissingRequired("A is required for tc-coupled runs")
        if cfg.ic_type == "gaussian" and cfg.run_mode != "linear-model" and cfg.M is None:
            raise MissingRequired("M is required for Gaussian density initial data")
    if command == "sweep":
        if not cfg.A_list:
            raise MissingRequired("A_list is required for sweeps")
        if cfg.run_mode == "linear-model" and not cfg.k_list:
            raise MissingRequired("k_list is required for rate sweeps")
        if cfg.run_mode != "linear-model" and not cfg.M_list:
            raise MissingRequired("M_list is required for classification sweeps")
