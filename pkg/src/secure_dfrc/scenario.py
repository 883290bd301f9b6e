"""Physical model of one trial: array steering, Rician channels and the
effective user / eavesdropper / radar channels as functions of the IRS phases.

Conventions
-----------
All channels are stored so that the received baseband sample is a plain
transpose product, e.g. ``c_u @ w`` is the user's scalar gain for precoder
``w``.  ``phi`` always denotes the diagonal of the IRS matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** (x_dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class ArrayGeometry:
    n_tx: int = 16
    n_rx: int = 16
    irs_rows: int = 5
    irs_cols: int = 5
    spacing: float = 0.5  # in wavelengths

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "irs_rows", "irs_cols"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @property
    def n_irs(self) -> int:
        return self.irs_rows * self.irs_cols


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical parameters of a trial, in linear units.

    Defaults reproduce the system configuration table: 16 transmit and 16
    receive antennas, a 5x5 IRS, half-wavelength spacing, Rician K of 0 dB,
    0 dBm noise everywhere and a target coefficient with ``|beta|^2`` of
    -40 dB.
    """

    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    rician_k: float = 1.0
    beta_abs: float = 1e-2
    beta_h: float = 1.0
    sigma2_r: float = 1e-3
    sigma2_u: float = 1e-3
    sigma2_te: float = 1e-3

    def __post_init__(self):
        if self.rician_k < 0:
            raise ValueError("rician_k must be nonnegative")
        if not self.beta_abs > 0:
            raise ValueError("|beta| must be positive")
        if self.beta_h < 0:
            raise ValueError("beta_h must be nonnegative")
        for name in ("sigma2_r", "sigma2_u", "sigma2_te"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class Scenario:
    geometry: ArrayGeometry
    g: np.ndarray        # (n_tx,)      DFRC -> user
    f: np.ndarray        # (N,)         IRS -> user
    H_dl: np.ndarray     # (N, n_tx)    DFRC -> IRS
    H_ul: np.ndarray     # (n_rx, N)    IRS -> DFRC
    beta: complex
    beta_h: float
    psi_a: float
    psi_e: float
    sigma2_r: float
    sigma2_u: float
    sigma2_te: float

    def __post_init__(self):
        geo = self.geometry
        n = geo.n_irs
        shapes = {
            "g": (geo.n_tx,),
            "f": (n,),
            "H_dl": (n, geo.n_tx),
            "H_ul": (geo.n_rx, n),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "beta", complex(self.beta))
        if self.beta_h < 0:
            raise ValueError("beta_h must be nonnegative")
        if min(self.sigma2_r, self.sigma2_u, self.sigma2_te) <= 0:
            raise ValueError("noise powers must be positive")

    @property
    def a_irs(self) -> np.ndarray:
        """IRS steering vector towards the target."""
        return upa_steering(self.psi_a, self.psi_e, self.geometry)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        for fld in fields(self):
            a, b = getattr(self, fld.name), getattr(other, fld.name)
            if isinstance(a, np.ndarray):
                if not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True


def ula_steering(angle: float, n: int, spacing: float = 0.5) -> np.ndarray:
    """Entry k is ``exp(j 2 pi spacing k sin(angle))``, k = 0..n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n)
    return np.exp(2j * np.pi * spacing * k * np.sin(angle))


def upa_steering(psi_a: float, psi_e: float, geometry: ArrayGeometry) -> np.ndarray:
    """Steering vector of the IRS grid, vectorized row-major.

    Element (p, q) carries phase ``2 pi d (p sin(psi_e) + q cos(psi_e) sin(psi_a))``,
    so the vector is the Kronecker product of a row-direction and a
    column-direction ULA factor.
    """
    p = np.arange(geometry.irs_rows)[:, None]
    q = np.arange(geometry.irs_cols)[None, :]
    phase = 2 * np.pi * geometry.spacing * (
        p * np.sin(psi_e) + q * np.cos(psi_e) * np.sin(psi_a)
    )
    return np.exp(1j * phase).ravel()


def sample_rician(rng: np.random.Generator, rows: int, cols: int, k_factor: float,
                  los: np.ndarray) -> np.ndarray:
    """Unit-power Rician matrix ``sqrt(K/(1+K)) los + sqrt(1/(1+K)) G``."""
    if k_factor < 0:
        raise ValueError("k_factor must be nonnegative")
    los = np.broadcast_to(np.asarray(los, dtype=complex), (rows, cols))
    nlos = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)
    if np.isinf(k_factor):
        return np.array(los)
    return np.sqrt(k_factor / (1 + k_factor)) * los + np.sqrt(1 / (1 + k_factor)) * nlos


def build_scenario(rng: np.random.Generator, config: ScenarioConfig | None = None) -> Scenario:
    config = config or ScenarioConfig()
    geo = config.geometry
    n, d = geo.n_irs, geo.spacing
    k = config.rician_k

    def angle():
        return rng.uniform(-np.pi / 2, np.pi / 2)

    # Draw order is part of the reproducibility contract; do not reorder.
    los_g = ula_steering(angle(), geo.n_tx, d)
    los_f = upa_steering(angle(), angle(), geo)
    los_dl = np.outer(upa_steering(angle(), angle(), geo), ula_steering(angle(), geo.n_tx, d))
    los_ul = np.outer(ula_steering(angle(), geo.n_rx, d), upa_steering(angle(), angle(), geo))
    psi_a, psi_e = angle(), angle()
    beta = config.beta_abs * np.exp(1j * rng.uniform(0, 2 * np.pi))

    g = sample_rician(rng, 1, geo.n_tx, k, los_g[None, :])[0]
    f = sample_rician(rng, 1, n, k, los_f[None, :])[0]
    H_dl = sample_rician(rng, n, geo.n_tx, k, los_dl)
    H_ul = sample_rician(rng, geo.n_rx, n, k, los_ul)
    return Scenario(
        geometry=geo, g=g, f=f, H_dl=H_dl, H_ul=H_ul, beta=beta, beta_h=config.beta_h,
        psi_a=float(psi_a), psi_e=float(psi_e), sigma2_r=config.sigma2_r,
        sigma2_u=config.sigma2_u, sigma2_te=config.sigma2_te,
    )


def user_factor(s: Scenario) -> np.ndarray:
    """``D = sqrt(beta_H) diag(f) H_dl`` so that ``c_u = g + phi @ D``."""
    return np.sqrt(s.beta_h) * s.f[:, None] * s.H_dl


def ed_factor(s: Scenario) -> np.ndarray:
    """``E = sqrt(beta) diag(a_I) H_dl`` so that ``c_te = phi @ E``."""
    return np.sqrt(s.beta) * s.a_irs[:, None] * s.H_dl


def effective_user_channel(phi: np.ndarray, s: Scenario) -> np.ndarray:
    return s.g + np.sqrt(s.beta_h) * (s.f * phi) @ s.H_dl


def effective_ed_channel(phi: np.ndarray, s: Scenario) -> np.ndarray:
    return np.sqrt(s.beta) * (s.a_irs * phi) @ s.H_dl


def radar_cascade_channel(phi: np.ndarray, s: Scenario) -> np.ndarray:
    """``C_T = beta H_ul Phi a a^T Phi H_dl`` as an (n_rx, n_tx) matrix."""
    pa = phi * s.a_irs
    return s.beta * np.outer(s.H_ul @ pa, pa @ s.H_dl)


def random_phases(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


def check_unit_modulus(phi: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex)
    if phi.ndim != 1 or not np.allclose(np.abs(phi), 1.0, atol=atol, rtol=0):
        raise ValueError("phase vector entries must have unit modulus")
    return phi


# -- flat text snapshots ----------------------------------------------------

_SCALAR_KEYS = ("beta_h", "psi_a", "psi_e", "sigma2_r", "sigma2_u", "sigma2_te")
_ARRAY_KEYS = ("g", "f", "H_dl", "H_ul")


def _fmt_complex(z: complex) -> str:
    return f"{float(z.real)!r},{float(z.imag)!r}"


def _parse_complex(tok: str) -> complex:
    re_, im_ = tok.split(",")
    return complex(float(re_), float(im_))


def dump_scenario(s: Scenario) -> str:
    """Serialize to ``key = value`` lines; complex entries as ``re,im``."""
    geo = s.geometry
    lines = [
        f"n_tx = {geo.n_tx}",
        f"n_rx = {geo.n_rx}",
        f"irs_rows = {geo.irs_rows}",
        f"irs_cols = {geo.irs_cols}",
        f"spacing = {geo.spacing!r}",
        f"beta = {_fmt_complex(s.beta)}",
    ]
    lines += [f"{k} = {float(getattr(s, k))!r}" for k in _SCALAR_KEYS]
    for k in _ARRAY_KEYS:
        arr = getattr(s, k).ravel()  # row-major
        lines.append(f"{k} = " + " ".join(_fmt_complex(z) for z in arr))
    return "\n".join(lines) + "\n"


def parse_key_values(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_scenario(text: str) -> Scenario:
    kv = parse_key_values(text)
    geo = ArrayGeometry(
        n_tx=int(kv["n_tx"]), n_rx=int(kv["n_rx"]), irs_rows=int(kv["irs_rows"]),
        irs_cols=int(kv["irs_cols"]), spacing=float(kv["spacing"]),
    )
    n = geo.n_irs
    shapes = {"g": (geo.n_tx,), "f": (n,), "H_dl": (n, geo.n_tx), "H_ul": (geo.n_rx, n)}
    arrays = {
        k: np.array([_parse_complex(t) for t in kv[k].split()], dtype=complex).reshape(shape)
        for k, shape in shapes.items()
    }
    return Scenario(
        geometry=geo, beta=_parse_complex(kv["beta"]),
        **{k: float(kv[k]) for k in _SCALAR_KEYS}, **arrays,
    )
