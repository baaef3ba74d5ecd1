"""Synthetic spatially and temporally correlated fading traces.

Every link P-Q carries a complex Gaussian field

    h_PQ(t) = sqrt(1 - w_PQ) s_PQ(t) + sqrt(w_PQ) m(t),

where ``s_PQ`` is link-specific diffuse fading and ``m`` is a motion process
shared by all links. Both are sum-of-sinusoids Jakes processes with temporal
kernel J0(2 pi f_D tau), f_D = v / lambda. The three link processes s_AB,
s_AE, s_BE are mixed with the spatial kernel J0(2 pi d / lambda) evaluated
at the distance between the endpoints the two links do not share.

Motion-proximity weight (a modeling choice of this package, not a measured
law): ``w_PQ = r_c^2 / (r_c^2 + d^2)`` with ``d`` the distance from the link
midpoint to the scatterer cluster and ``r_c`` the cluster radius. Links that
pass near the moving objects are dominated by the common motion process,
which makes an eavesdropper close to the motion source learn more about the
legitimate gain than plain Jakes decorrelation predicts.

Each radio adds independent circularly-symmetric white noise of power
``noise_floor`` to the complex field before the magnitude is taken.
"""

from __future__ import annotations

import math
import struct
import sys
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import j0

from .errors import ValidationError
from .traces import GainTraceSet

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SPEED_OF_LIGHT = 299_792_458.0
N_SINUSOIDS = 64


@dataclass(frozen=True)
class EnvironmentConfig:
    room: tuple = (8.0, 5.0)
    alice: tuple = (3.0, 2.5)
    bob: tuple = (5.0, 2.5)
    eve: tuple = (4.0, 1.0)
    scatterer_center: tuple = (1.5, 4.0)
    scatterer_radius: float = 1.5
    scatterer_speed: float = 0.5
    wavelength: float = SPEED_OF_LIGHT / 2.484e9
    sample_rate_hz: float = 1000.0
    duration: float = 50.0
    noise_floor: float = 0.01
    seed: int = 42

    def __post_init__(self):
        for name in ("room", "alice", "bob", "eve", "scatterer_center"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 2 or not all(math.isfinite(x) for x in v):
                raise ValidationError(f"{name} must be a pair of finite numbers")
            object.__setattr__(self, name, v)
        if not (self.room[0] > 0 and self.room[1] > 0):
            raise ValidationError("room dimensions must be positive")
        for name in ("alice", "bob", "eve"):
            if not _inside(getattr(self, name), self.room):
                raise ValidationError(f"{name} position {getattr(self, name)} is outside the room")
        if not self.wavelength > 0:
            raise ValidationError("wavelength must be positive")
        if not self.scatterer_speed >= 0:
            raise ValidationError("scatterer_speed must be >= 0")
        if not self.scatterer_radius > 0:
            raise ValidationError("scatterer_radius must be positive")
        if not self.sample_rate_hz > 0:
            raise ValidationError("sample_rate_hz must be positive")
        if not self.noise_floor >= 0:
            raise ValidationError("noise_floor must be >= 0")
        if not self.duration * self.sample_rate_hz >= 16:
            raise ValidationError("duration * sample_rate_hz must be at least 16 samples")
        seed = int(self.seed)
        if not 0 <= seed < 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", seed)

    @property
    def n_samples(self):
        return int(round(self.duration * self.sample_rate_hz))

    @property
    def doppler_hz(self):
        return self.scatterer_speed / self.wavelength

    def to_dict(self):
        return asdict(self)


def _inside(p, room):
    return 0.0 <= p[0] <= room[0] and 0.0 <= p[1] <= room[1]


def load_config(path):
    """Read an :class:`EnvironmentConfig` from a TOML file; unset keys keep defaults."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    known = EnvironmentConfig.__dataclass_fields__
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {unknown}")
    try:
        return EnvironmentConfig(**data)
    except TypeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def spatial_correlation(d, wavelength):
    """Jakes spatial kernel ``J0(2 pi d / lambda)``."""
    if not wavelength > 0:
        raise ValidationError("wavelength must be positive")
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValidationError("distance must be >= 0")
    out = j0(2.0 * np.pi * d / wavelength)
    return float(out) if out.ndim == 0 else out


def _jakes(rng, n_proc, t, doppler):
    """``n_proc`` unit-power sum-of-sinusoids processes, shape (n_proc, len(t))."""
    angle = rng.uniform(0.0, 2.0 * np.pi, (n_proc, N_SINUSOIDS))
    phase = rng.uniform(0.0, 2.0 * np.pi, (n_proc, N_SINUSOIDS))
    freq = doppler * np.cos(angle)
    out = np.empty((n_proc, t.size), dtype=complex)
    for k in range(n_proc):
        out[k] = np.exp(1j * (2.0 * np.pi * np.outer(t, freq[k]) + phase[k])).sum(axis=1)
    return out / np.sqrt(N_SINUSOIDS)


def _mixing(c_ab_ae, c_ab_be, c_ae_be):
    """Rows expressing (s_AB, s_AE, s_BE) in three independent processes.

    Cholesky-style factor of the 3x3 correlation matrix; a row that would
    need negative variance (non-PSD kernel matrix) is clipped and rescaled
    to unit norm. The first row is exactly (1, 0, 0).
    """
    L = np.zeros((3, 3))
    L[0, 0] = 1.0
    L[1, 0] = c_ab_ae
    L[1, 1] = math.sqrt(max(0.0, 1.0 - c_ab_ae ** 2))
    L[2, 0] = c_ab_be
    L[2, 1] = (c_ae_be - c_ab_ae * c_ab_be) / L[1, 1] if L[1, 1] > 1e-12 else 0.0
    rest = 1.0 - L[2, 0] ** 2 - L[2, 1] ** 2
    if rest >= 0:
        L[2, 2] = math.sqrt(rest)
    else:
        L[2, :2] /= math.hypot(L[2, 0], L[2, 1])
    return L


def _dist(p, q):
    return math.hypot(p[0] - q[0], p[1] - q[1])


def motion_weight(p, q, cfg):
    mid = (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]))
    d = _dist(mid, cfg.scatterer_center)
    r2 = cfg.scatterer_radius ** 2
    return r2 / (r2 + d * d)


def _position_key(p):
    return list(struct.unpack("<4I", struct.pack("<2d", *p)))


class _Field:
    """Processes shared by every Eve position for one configuration."""

    def __init__(self, cfg):
        self.cfg = cfg
        n = cfg.n_samples
        self.t = np.arange(n) / cfg.sample_rate_hz
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
        self.base = _jakes(rng, 3, self.t, cfg.doppler_hz)
        self.motion = _jakes(rng, 1, self.t, cfg.doppler_hz)[0]
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
        self.noise_a = _cn(rng, n)
        self.noise_b = _cn(rng, n)

    def link(self, s, p, q):
        w = motion_weight(p, q, self.cfg)
        return math.sqrt(1.0 - w) * s + math.sqrt(w) * self.motion

    def traces(self, eve):
        cfg = self.cfg
        a, b = cfg.alice, cfg.bob
        lam = cfg.wavelength
        L = _mixing(
            spatial_correlation(_dist(b, eve), lam),  # AB vs AE share A
            spatial_correlation(_dist(a, eve), lam),  # AB vs BE share B
            spatial_correlation(_dist(a, b), lam),  # AE vs BE share E
        )
        s_ab, s_ae, s_be = L @ self.base
        h_ab = self.link(s_ab, a, b)
        h_ae = self.link(s_ae, a, eve)
        h_be = self.link(s_be, b, eve)
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2] + _position_key(eve)))
        sigma = math.sqrt(cfg.noise_floor)
        n = self.t.size
        meta = {"source": "finkey.sim", "seed": str(cfg.seed), "eve": f"{eve[0]!r} {eve[1]!r}"}
        return GainTraceSet(
            cfg.sample_rate_hz,
            self.t.copy(),
            g_ab=np.abs(h_ab + sigma * self.noise_b),  # Bob receives from Alice
            g_ba=np.abs(h_ab + sigma * self.noise_a),  # Alice receives from Bob
            g_ae=np.abs(h_ae + sigma * _cn(rng, n)),
            g_be=np.abs(h_be + sigma * _cn(rng, n)),
            meta=meta,
        )


def _cn(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)


def simulate(cfg):
    """Gain traces for one configuration; a pure function of ``cfg``."""
    return _Field(cfg).traces(cfg.eve)


def position_sweep(cfg, eve_grid):
    """One trace set per Eve position, sharing the Alice/Bob field realization.

    Entry ``i`` equals ``simulate(replace(cfg, eve=eve_grid[i]))``.
    """
    grid = [tuple(float(x) for x in p) for p in eve_grid]
    if not grid:
        raise ValidationError("eve grid is empty")
    for i, p in enumerate(grid):
        if len(p) != 2 or not _inside(p, cfg.room):
            raise ValidationError(f"eve grid position {i} {p} is outside the room")
    field_ = _Field(cfg)
    return [(p, field_.traces(p)) for p in grid]


def default_grid(cfg, nx=10, ny=6):
    """Regular ``nx`` x ``ny`` grid of cell centres covering the room."""
    xs = (np.arange(nx) + 0.5) * cfg.room[0] / nx
    ys = (np.arange(ny) + 0.5) * cfg.room[1] / ny
    return [(float(x), float(y)) for y in ys for x in xs]


def with_eve(cfg, eve):
    return replace(cfg, eve=tuple(eve))
