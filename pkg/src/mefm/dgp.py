"""Simulation data-generating process and the named experimental settings.

Every generator is a pure function of its configuration and seed. A dataset
is assembled as

    Y_t = mu_t 11' + alpha_t 1' + 1 beta_t' + Ar F_t Ac' + E_t,
    E_t = Aer Fe_t Aec' + SigmaEps * eps_t,

where all latent series are AR processes rescaled to unit stationary
variance, loadings are column-centred Gaussian matrices with strength
controlled by ``zeta`` and ``SigmaEps`` has i.i.d. ``|N(0, 1)|`` entries.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg as sla
from scipy.signal import lfilter

from .model import MeanEffects

__all__ = [
    "AR5_EPS",
    "AR5_E",
    "AR5_F",
    "DGPConfig",
    "GroundTruth",
    "PRESETS",
    "ar_burn_in",
    "ar_spectral_radius",
    "ar_stationary_sd",
    "child_seed",
    "gen_dataset",
    "gen_effects",
    "gen_factors",
    "gen_loadings",
    "gen_noise",
    "gen_standardized_ar",
    "preset",
]

AR5_F = (0.7, 0.3, -0.4, 0.2, -0.1)
AR5_E = (-0.7, -0.3, -0.4, 0.2, 0.1)
AR5_EPS = (0.8, 0.4, -0.4, 0.2, -0.1)

LOCAL_PATTERNS = ((1.0, 1.0, -2.0), (1.0, 2.0, -3.0), (2.0, -5.0, 3.0))

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_seed(master_seed: int, index: int) -> int:
    """Deterministic 64-bit seed for replication ``index`` of a run."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# -- AR processes ----------------------------------------------------------


def _companion(coeffs: Sequence[float]) -> np.ndarray:
    k = len(coeffs)
    A = np.zeros((k, k))
    A[0] = coeffs
    A[1:, :-1] = np.eye(k - 1)
    return A


def ar_spectral_radius(coeffs: Sequence[float]) -> float:
    if len(coeffs) == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(_companion(coeffs)))))


def ar_stationary_sd(coeffs: Sequence[float]) -> float:
    """Stationary standard deviation of an AR process with unit innovations.

    Solves the discrete Lyapunov equation ``P = A P A' + e1 e1'`` of the
    companion form.
    """
    coeffs = tuple(float(c) for c in coeffs)
    if not coeffs:
        return 1.0
    if ar_spectral_radius(coeffs) >= 1.0:
        raise ValueError(f"AR coefficients {coeffs} are not stationary")
    A = _companion(coeffs)
    Qm = np.zeros_like(A)
    Qm[0, 0] = 1.0
    P = sla.solve_discrete_lyapunov(A, Qm)
    return float(math.sqrt(P[0, 0]))


def ar_burn_in(coeffs: Sequence[float]) -> int:
    """``200 + 10 * order`` steps, extended so ``rho**burn < 1e-9``."""
    base = 200 + 10 * len(coeffs)
    rho = ar_spectral_radius(coeffs)
    if rho <= 0.0:
        return base
    return max(base, int(math.ceil(math.log(1e-9) / math.log(rho))))


def _innovations(rng: np.random.Generator, innovation: str, shape) -> np.ndarray:
    if innovation == "normal":
        return rng.standard_normal(shape)
    if innovation == "student_t3":
        # t_3 has variance 3
        return rng.standard_t(3, size=shape) / math.sqrt(3.0)
    raise ValueError(f"unknown innovation law {innovation!r}")


def gen_standardized_ar(
    coeffs: Sequence[float],
    innovation: str,
    T: int,
    n_series: int,
    seed: SeedLike = None,
) -> np.ndarray:
    """Independent AR series with unit stationary variance, shape ``(T, n_series)``."""
    coeffs = tuple(float(c) for c in coeffs)
    sd = ar_stationary_sd(coeffs)
    rng = _rng(seed)
    if not coeffs:
        return _innovations(rng, innovation, (T, n_series))
    burn = ar_burn_in(coeffs)
    x = _innovations(rng, innovation, (burn + T, n_series))
    y = lfilter([1.0], np.r_[1.0, -np.asarray(coeffs)], x, axis=0)
    return y[burn:] / sd


# -- configuration -----------------------------------------------------------


def _tuple(v) -> tuple:
    if v is None:
        return ()
    if isinstance(v, (int, float)):
        return (float(v),)
    return tuple(float(x) for x in v)


@dataclass(frozen=True)
class DGPConfig:
    """All knobs of the simulation design.

    ``effect_law`` is ``"gaussian"`` (``m_*``/``sigma_*`` used),
    ``"rademacher"`` (``u_*`` used; ``u_local`` keeps only the first entries
    of the row-effect draw) or ``"local_pattern"`` (row effects cycle through
    three fixed sparse patterns scaled by ``u_local_scale``).
    """

    T: int = 100
    p: int = 40
    q: int = 40
    kr: int = 1
    kc: int = 2
    zeta_r: tuple = (0.0,)
    zeta_c: tuple = (0.0, 0.0)
    ar_f: tuple = AR5_F
    ar_e: tuple = AR5_E
    ar_eps: tuple = AR5_EPS
    innovation: str = "normal"
    ker: int = 2
    kec: int = 2
    sparse_prob: float = 0.95
    sigma_eps_scale: float = 1.0
    effect_law: str = "gaussian"
    m_mu: float = 0.0
    sigma_mu: float = 1.0
    m_alpha: float = 0.0
    sigma_alpha: float = 1.0
    m_beta: float = 0.0
    sigma_beta: float = 1.0
    u_mu: float = 0.0
    u_alpha: float = 0.0
    u_beta: float = 0.0
    u_local: Optional[int] = None
    u_local_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("zeta_r", "zeta_c", "ar_f", "ar_e", "ar_eps"):
            object.__setattr__(self, name, _tuple(getattr(self, name)))
        if min(self.T, self.p, self.q) < 1:
            raise ValueError("T, p and q must be positive")
        if self.kr < 1 or self.kc < 1:
            raise ValueError("kr and kc must be at least 1")
        if len(self.zeta_r) != self.kr or len(self.zeta_c) != self.kc:
            raise ValueError("zeta_r/zeta_c lengths must equal kr/kc")
        for z in self.zeta_r + self.zeta_c:
            if not 0.0 <= z <= 0.5:
                raise ValueError(f"zeta values must lie in [0, 0.5], got {z}")
        for name in ("ar_f", "ar_e", "ar_eps"):
            if ar_spectral_radius(getattr(self, name)) >= 1.0:
                raise ValueError(f"{name} is not stationary")
        if self.innovation not in ("normal", "student_t3"):
            raise ValueError(f"unknown innovation law {self.innovation!r}")
        if self.effect_law not in ("gaussian", "rademacher", "local_pattern"):
            raise ValueError(f"unknown effect law {self.effect_law!r}")
        if not 0.0 <= self.sparse_prob <= 1.0:
            raise ValueError("sparse_prob must lie in [0, 1]")
        if self.ker < 0 or self.kec < 0:
            raise ValueError("ker and kec must be non-negative")
        if self.u_local is not None and not 0 <= self.u_local <= self.p:
            raise ValueError("u_local must lie in [0, p]")
        if self.effect_law == "local_pattern" and self.p < 3:
            raise ValueError("local_pattern needs p >= 3")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> "DGPConfig":
        return dataclasses.replace(self, **changes)

    # key=value text ---------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                s = ",".join(repr(float(x)) for x in v)
            elif v is None:
                s = "none"
            else:
                s = str(v)
            lines.append(f"{f.name}={s}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DGPConfig":
        types = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            kwargs[key] = _parse_value(key, value, types[key].default)
        return cls(**kwargs)


def _parse_value(key: str, value: str, default):
    if isinstance(default, tuple):
        return tuple(float(x) for x in value.split(",") if x.strip())
    if key == "u_local":
        return None if value.lower() in ("none", "") else int(value)
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


# -- ground truth ------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruth:
    effects: MeanEffects
    Ar: np.ndarray
    Ac: np.ndarray
    F: np.ndarray
    C: np.ndarray
    E: np.ndarray
    SigmaEps: np.ndarray
    Aer: np.ndarray = field(repr=False, default=None)
    Aec: np.ndarray = field(repr=False, default=None)

    @property
    def Zr(self) -> np.ndarray:
        return np.sum(self.Ar**2, axis=0)

    @property
    def Zc(self) -> np.ndarray:
        return np.sum(self.Ac**2, axis=0)

    @property
    def Qr(self) -> np.ndarray:
        """Row loadings with unit-norm columns, ``Ar Zr^{-1/2}``."""
        return self.Ar / np.sqrt(self.Zr)

    @property
    def Qc(self) -> np.ndarray:
        return self.Ac / np.sqrt(self.Zc)

    @property
    def FZ(self) -> np.ndarray:
        """Factors in the normalised basis, ``Zr^{1/2} F_t Zc^{1/2}``."""
        return np.sqrt(self.Zr)[:, None] * self.F * np.sqrt(self.Zc)[None, :]


# -- generators --------------------------------------------------------------


def gen_loadings(n: int, k: int, zeta: Sequence[float], seed: SeedLike = None, centered: bool = True) -> np.ndarray:
    """``M_n U B`` with ``U`` standard normal and ``B = diag(n^{-zeta_j})``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    zeta = np.asarray(_tuple(zeta))
    if zeta.shape != (k,):
        raise ValueError("need one zeta per column")
    U = _rng(seed).standard_normal((n, k))
    if centered:
        U = U - U.mean(axis=0)
    return U * n ** (-zeta)


def gen_factors(config: DGPConfig, seed: SeedLike = None) -> np.ndarray:
    c = config
    F = gen_standardized_ar(c.ar_f, c.innovation, c.T, c.kr * c.kc, seed)
    return F.reshape(c.T, c.kr, c.kc)


def _sparse_gaussian(rng, shape, sparse_prob):
    A = rng.standard_normal(shape)
    A[rng.random(shape) < sparse_prob] = 0.0
    return A


def gen_noise(config: DGPConfig, seed: SeedLike = None):
    """Noise series with a sparse factor part and heteroscedastic idiosyncratic part.

    Returns ``(E, SigmaEps, Aer, Aec)``.
    """
    c = config
    root = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    s_load, s_fe, s_sig, s_eps = root.spawn(4)
    rng_load = _rng(s_load)
    Aer = _sparse_gaussian(rng_load, (c.p, c.ker), c.sparse_prob)
    Aec = _sparse_gaussian(rng_load, (c.q, c.kec), c.sparse_prob)
    SigmaEps = c.sigma_eps_scale * np.abs(_rng(s_sig).standard_normal((c.p, c.q)))

    E = np.zeros((c.T, c.p, c.q))
    if c.ker > 0 and c.kec > 0 and np.any(Aer) and np.any(Aec):
        Fe = gen_standardized_ar(c.ar_e, c.innovation, c.T, c.ker * c.kec, s_fe)
        Fe = Fe.reshape(c.T, c.ker, c.kec)
        E += Aer @ Fe @ Aec.T
    if c.sigma_eps_scale != 0.0:
        eps = gen_standardized_ar(c.ar_eps, c.innovation, c.T, c.p * c.q, s_eps)
        E += SigmaEps * eps.reshape(c.T, c.p, c.q)
    return E, SigmaEps, Aer, Aec


def _center_rows(v: np.ndarray) -> np.ndarray:
    return v - v.mean(axis=1, keepdims=True)


def gen_effects(config: DGPConfig, seed: SeedLike = None) -> MeanEffects:
    """Time-varying grand mean and centred row/column effects."""
    c = config
    rng = _rng(seed)
    if c.effect_law == "gaussian":
        mu = c.m_mu + c.sigma_mu * rng.standard_normal(c.T)
        v_alpha = c.m_alpha + c.sigma_alpha * rng.standard_normal((c.T, c.p))
        v_beta = c.m_beta + c.sigma_beta * rng.standard_normal((c.T, c.q))
    else:
        def rademacher(shape):
            return rng.choice(np.array([-1.0, 1.0]), size=shape)

        mu = c.u_mu * rademacher(c.T)
        v_alpha = c.u_alpha * rademacher((c.T, c.p))
        v_beta = c.u_beta * rademacher((c.T, c.q))
        if c.effect_law == "rademacher" and c.u_local is not None:
            v_alpha[:, c.u_local:] = 0.0
        elif c.effect_law == "local_pattern":
            v_alpha = np.zeros((c.T, c.p))
            for t in range(c.T):
                v_alpha[t, :3] = c.u_local_scale * np.asarray(LOCAL_PATTERNS[t % 3])
    return MeanEffects(mu=mu, alpha=_center_rows(v_alpha), beta=_center_rows(v_beta))


def gen_dataset(config: DGPConfig):
    """Draw one dataset; returns ``(Y, truth)`` with ``Y`` of shape ``(T, p, q)``."""
    c = config
    s_load, s_fac, s_noise, s_eff = np.random.SeedSequence(int(c.seed)).spawn(4)
    rng_load = _rng(s_load)
    Ar = gen_loadings(c.p, c.kr, c.zeta_r, rng_load)
    Ac = gen_loadings(c.q, c.kc, c.zeta_c, rng_load)
    F = gen_factors(c, s_fac)
    C = Ar @ F @ Ac.T
    E, SigmaEps, Aer, Aec = gen_noise(c, s_noise)
    effects = gen_effects(c, s_eff)
    Y = effects.additive() + C + E
    truth = GroundTruth(effects=effects, Ar=Ar, Ac=Ac, F=F, C=C, E=E, SigmaEps=SigmaEps, Aer=Aer, Aec=Aec)
    return Y, truth


# -- named settings ------------------------------------------------------------

_WHITE = dict(ar_f=(), ar_e=(), ar_eps=())
_AR1 = (-0.2,)

_BASE_I = dict(T=100, p=40, q=40, kr=1, kc=2, zeta_r=(0.0,), zeta_c=(0.0, 0.0))
_I = {
    "Ia": dict(_BASE_I),
    "Ib": dict(_BASE_I, zeta_r=(0.2,), zeta_c=(0.2, 0.0), m_alpha=-2.0),
    "Ic": dict(_BASE_I, innovation="student_t3"),
    "Id": dict(_BASE_I, zeta_r=(0.2,), zeta_c=(0.2, 0.0), m_alpha=-2.0, p=80, q=80, sigma_alpha=2.0),
    "Ie": dict(_BASE_I, zeta_r=(0.2,), zeta_c=(0.2, 0.0), m_alpha=-2.0, p=80, q=80, sigma_alpha=2.0, T=200),
}

_BASE_III = dict(T=400, p=20, q=20, kr=3, kc=3, zeta_r=(0.0,) * 3, zeta_c=(0.0,) * 3)
_BASE_IV = dict(
    T=40, p=40, q=40, kr=2, kc=2, zeta_r=(0.0, 0.0), zeta_c=(0.0, 0.0),
    effect_law="rademacher", u_mu=0.0, u_beta=0.0,
)
_ASYMP = dict(_I["Ic"], ar_f=_AR1, ar_e=_AR1, ar_eps=_AR1)

PRESETS: dict[str, dict] = {
    **_I,
    **{"II" + k[1:]: dict(v, **_WHITE) for k, v in _I.items()},
    "IIIa": dict(_BASE_III),
    "IIIb": dict(_BASE_III, zeta_r=(0.2, 0.0, 0.0), zeta_c=(0.2, 0.2, 0.0)),
    "IIIc": dict(_BASE_III, zeta_r=(0.2,) * 3, zeta_c=(0.2,) * 3),
    "IVa": dict(_BASE_IV, u_alpha=0.1),
    "IVb": dict(_BASE_IV, u_alpha=0.1, u_beta=0.1),
    "IVc": dict(_BASE_IV, u_alpha=1.0, u_local=2),
    # normality study: (T, p, q) differs per statistic
    "asymp_mu": dict(_ASYMP, T=80, p=100, q=100),
    "asymp_alpha": dict(_ASYMP, T=60, p=60, q=300),
    "asymp_beta": dict(_ASYMP, T=60, p=300, q=60),
    "asymp_Qc": dict(_ASYMP, T=60, p=60, q=300),
    # power curves
    "power_global": dict(_BASE_IV, T=60, p=80, q=80, u_alpha=0.0),
    "power_local": dict(_BASE_IV, T=60, p=80, q=80, u_alpha=1.0, effect_law="local_pattern", u_local_scale=0.0),
}


def preset(name: str, *, tfactor: Optional[float] = None, **overrides) -> DGPConfig:
    """Configuration of a named setting, optionally with overridden fields.

    ``tfactor`` sets ``T = round(tfactor * p * q)`` after the overrides, the
    way the rank-selection settings specify their sample sizes.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown setting {name!r}; choose from {sorted(PRESETS)}")
    kwargs = dict(PRESETS[name])
    kwargs.update(overrides)
    if tfactor is not None:
        kwargs["T"] = int(round(tfactor * kwargs["p"] * kwargs["q"]))
    return DGPConfig(**kwargs)
