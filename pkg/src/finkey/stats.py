"""Source statistics: plug-in information estimates and the hybrid joint model.

All sample-based estimates use the quantized plug-in estimator with the
Miller-Madow bias correction. Quantities computed from a fitted
:class:`HybridJointModel` are exact functionals of the model (discrete sums
for X_Q, Y_Q and closed-form integrals of the piecewise-linear Z density).
Information quantities are in bits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .density import LN2, GridDensity
from .errors import ValidationError
from .traces import QuantizationScheme, quantize

ESTIMATOR_ID = "plugin-miller-madow"


@dataclass(frozen=True)
class MiEstimate:
    value: float
    n_samples: int
    estimator: dict = field(default_factory=lambda: {"method": ESTIMATOR_ID})

    def __float__(self):
        return float(self.value)


def _entropy_mm(counts, n):
    """Miller-Madow corrected plug-in entropy in nats."""
    c = counts[counts > 0]
    p = c / n
    return float(-(p * np.log(p)).sum() + (c.size - 1) / (2.0 * n))


def entropy_bits(symbols, levels=None):
    """Miller-Madow corrected entropy of an integer sequence."""
    s = np.asarray(symbols, dtype=np.int64)
    counts = np.bincount(s, minlength=levels or 0)
    return _entropy_mm(counts, s.size) / LN2 if s.size else 0.0


def discrete_mutual_information(a, b, levels_a=None, levels_b=None):
    """Miller-Madow corrected plug-in MI (bits) between two integer sequences.

    Clamped to ``[0, log2(min alphabet)]`` with alphabets taken as the number
    of observed symbols.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n = a.size
    if n == 0:
        return 0.0
    ka = int(levels_a or a.max() + 1)
    kb = int(levels_b or b.max() + 1)
    joint = np.bincount(a * kb + b, minlength=ka * kb)
    ha = _entropy_mm(np.bincount(a, minlength=ka), n)
    hb = _entropy_mm(np.bincount(b, minlength=kb), n)
    hab = _entropy_mm(joint, n)
    mi = (ha + hb - hab) / LN2
    cap = np.log2(max(1, min(np.unique(a).size, np.unique(b).size)))
    return float(min(max(mi, 0.0), cap))


def lag_mutual_information(series, lag, scheme):
    """MI between the quantized series and its ``lag``-step shift.

    All pairs ``(q[t], q[t + lag])`` are pooled, which assumes stationarity.
    """
    lag = int(lag)
    s = np.asarray(series, dtype=float)
    if lag < 1:
        raise ValidationError(f"lag must be >= 1, got {lag}")
    if s.size <= lag + 30:
        raise ValidationError(f"series of length {s.size} is too short for lag {lag}")
    q = quantize(s, scheme)
    value = discrete_mutual_information(q[:-lag], q[lag:], scheme.levels, scheme.levels)
    return MiEstimate(value, s.size - lag, {"method": ESTIMATOR_ID, "levels": scheme.levels, "lag": lag})


@dataclass(frozen=True)
class LagSelection:
    lag: int
    threshold: float
    curve: tuple  # (lag, MI in bits) pairs


def decorrelation_lag(series, scheme, threshold=0.05):
    """Smallest lag whose MI and the next lag's MI are both below ``threshold``."""
    if not threshold > 0:
        raise ValidationError("threshold must be positive")
    s = np.asarray(series, dtype=float)
    max_lag = s.size // 4
    curve = []
    below_prev = False
    for nu in range(1, max_lag + 2):
        if s.size <= nu + 30:
            break
        mi = lag_mutual_information(s, nu, scheme).value
        curve.append((nu, mi))
        below = mi < threshold
        if below and below_prev and nu - 1 <= max_lag:
            return LagSelection(nu - 1, threshold, tuple(curve))
        below_prev = below
    raise ValidationError(
        f"lag MI did not fall below {threshold} bits within {max_lag} samples; capture a longer series"
    )


def stationarity_check(series, scheme, lag, n_origins):
    """Spread (max - min) of the lag MI across ``n_origins`` disjoint windows."""
    s = np.asarray(series, dtype=float)
    n_origins = int(n_origins)
    if n_origins < 1:
        raise ValidationError("n_origins must be >= 1")
    win = s.size // n_origins
    if win <= lag + 30:
        raise ValidationError(
            f"{s.size} samples cannot be split into {n_origins} windows for lag {lag}"
        )
    values = [lag_mutual_information(s[k * win:(k + 1) * win], lag, scheme).value for k in range(n_origins)]
    return float(max(values) - min(values))


def normalized_secrecy_rate(g_ab, g_ae, scheme):
    """``1 - I(G_AB; G_AE) / H(G_AB)`` from quantized plug-in estimates, in [0, 1]."""
    a = quantize(g_ab, scheme)
    e = quantize(g_ae, scheme)
    if a.shape != e.shape:
        raise ValidationError("g_ab and g_ae must be aligned")
    h = entropy_bits(a, scheme.levels)
    if h <= 0:
        raise ValidationError("g_ab has zero entropy; the normalized secrecy rate is undefined")
    mi = discrete_mutual_information(a, e, scheme.levels, scheme.levels)
    return float(np.clip(1.0 - mi / h, 0.0, 1.0))


# ----------------------------------------------------------------------
# hybrid joint model


@dataclass
class HybridJointModel:
    """Joint law of discrete X_Q, Y_Q and continuous Z.

    ``mass[x, y, z1(, z2)]`` holds cell probabilities summing to one; Z's
    density within each (x, y) slice is the piecewise-linear interpolation of
    the cell masses (see :mod:`finkey.density`).
    """

    mass: np.ndarray
    x_scheme: QuantizationScheme
    y_scheme: QuantizationScheme
    z_lo: tuple
    z_hi: tuple
    estimator: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=float)
        if self.mass.ndim not in (3, 4):
            raise ValidationError("mass must have shape (x, y, z1[, z2])")
        if self.mass.shape[:2] != (self.x_scheme.levels, self.y_scheme.levels):
            raise ValidationError("mass shape does not match the X/Y schemes")
        if np.any(self.mass < 0) or abs(self.mass.sum() - 1.0) > 1e-9:
            raise ValidationError("mass must be nonnegative and sum to 1")
        self.z_lo = tuple(float(v) for v in self.z_lo)
        self.z_hi = tuple(float(v) for v in self.z_hi)
        if len(self.z_lo) != self.z_dims or len(self.z_hi) != self.z_dims:
            raise ValidationError("z bounds do not match the number of Z dimensions")

    @property
    def z_dims(self):
        return self.mass.ndim - 2

    @property
    def z_bins(self):
        return self.mass.shape[2:]

    def pxy(self):
        return self.mass.reshape(self.mass.shape[0], self.mass.shape[1], -1).sum(axis=2)

    def px(self):
        return self.pxy().sum(axis=1)

    def xz_density(self, component=None):
        """Joint density of (X_Q, Z) as a stack of X_Q slices.

        ``component`` selects a single Z dimension (0 for g_ae, 1 for g_be).
        """
        m = self.mass.sum(axis=1)
        lo, hi = list(self.z_lo), list(self.z_hi)
        if component is not None and self.z_dims == 2:
            m = m.sum(axis=2 - component)
            lo, hi = [lo[component]], [hi[component]]
        return GridDensity(m, lo, hi)

    def z_density(self, component=None):
        return self.xz_density(component).marginal()

    def to_dict(self):
        return {
            "format": "finkey.hybrid-joint-model/1",
            "x_levels": self.x_scheme.levels,
            "y_levels": self.y_scheme.levels,
            "z_bins": list(self.z_bins),
            "x_scheme": self.x_scheme.to_dict(),
            "y_scheme": self.y_scheme.to_dict(),
            "z_edges": [
                np.linspace(lo, hi, k + 1).tolist()
                for lo, hi, k in zip(self.z_lo, self.z_hi, self.z_bins)
            ],
            "mass": self.mass.ravel(order="C").tolist(),
            "estimator": self.estimator,
        }

    @classmethod
    def from_dict(cls, d):
        shape = (int(d["x_levels"]), int(d["y_levels"]), *map(int, d["z_bins"]))
        mass = np.asarray(d["mass"], dtype=float)
        if mass.size != int(np.prod(shape)):
            raise ValidationError("mass array length does not match the model dimensions")
        edges = d["z_edges"]
        return cls(
            mass.reshape(shape, order="C"),
            QuantizationScheme.from_dict(d["x_scheme"]),
            QuantizationScheme.from_dict(d["y_scheme"]),
            tuple(e[0] for e in edges),
            tuple(e[-1] for e in edges),
            dict(d.get("estimator", {})),
        )

    def dumps(self):
        return json.dumps(self.to_dict())


def fit_joint_model(table, z_bins, pseudo_count=0.5):
    """Histogram of (x_q, y_q, Z cell) with add-half smoothing of occupied slices.

    ``z_bins`` is the number of cells per Z dimension (int or sequence). The Z
    grid spans the empirical range of each Z column. Pseudo-counts are added
    to every Z cell of each (x_q, y_q) pair that occurs in the table, and
    only there.
    """
    n = len(table)
    if n == 0:
        raise ValidationError("cannot fit a joint model to an empty table")
    d = table.z_dims
    bins = (int(z_bins),) * d if np.ndim(z_bins) == 0 else tuple(int(b) for b in z_bins)
    if len(bins) != d or min(bins) < 2:
        raise ValidationError(f"z_bins must be >= 2 per dimension, got {z_bins}")
    z_schemes = [QuantizationScheme.from_data(table.z[:, k], bins[k]) for k in range(d)]
    zi = [quantize(table.z[:, k], z_schemes[k]) for k in range(d)]
    shape = (table.x_scheme.levels, table.y_scheme.levels, *bins)
    flat = np.ravel_multi_index((table.x_q, table.y_q, *zi), shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape).astype(float)
    if pseudo_count > 0:
        occupied = counts.reshape(shape[0], shape[1], -1).sum(axis=2) > 0
        counts[occupied] += pseudo_count
    mass = counts / counts.sum()
    return HybridJointModel(
        mass,
        table.x_scheme,
        table.y_scheme,
        tuple(s.lo for s in z_schemes),
        tuple(s.hi for s in z_schemes),
        {"method": "histogram-jeffreys-piecewise-linear", "pseudo_count": pseudo_count,
         "n_samples": n, "z_bins": list(bins)},
    )


def _discrete_entropy_bits(p):
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def mutual_information(model, pair="xz"):
    """Mutual information (bits) of a fitted model.

    ``pair`` is one of ``"xy"`` (I(X_Q;Y_Q)), ``"xz"`` (I(X_Q;Z), all Z
    dimensions), ``"xz_ae"`` or ``"xz_be"`` (a single Z component), or
    ``"xy|z"`` (I(X_Q;Y_Q|Z), an upper bound on the key capacity).
    """
    if pair == "xy|z":
        shape = model.mass.shape
        xyz = GridDensity(model.mass.reshape(shape[0] * shape[1], *shape[2:]), model.z_lo, model.z_hi)
        xz = model.xz_density()
        yz = GridDensity(model.mass.sum(axis=0), model.z_lo, model.z_hi)
        mi = xz.entropy_bits() + yz.entropy_bits() - xyz.entropy_bits() - xz.marginal().entropy_bits()
        return max(float(mi), 0.0)
    if pair == "xy":
        pxy = model.pxy()
        mi = (_discrete_entropy_bits(pxy.sum(axis=1)) + _discrete_entropy_bits(pxy.sum(axis=0))
              - _discrete_entropy_bits(pxy))
        return max(float(mi), 0.0)
    component = {"xz": None, "xz_ae": 0, "xz_be": 1}.get(pair, -1)
    if component == -1:
        raise ValueError(f"unknown pair {pair!r}")
    if component == 1 and model.z_dims < 2:
        raise ValueError("model has a scalar Z; no g_be component")
    joint = model.xz_density(component)
    mi = _discrete_entropy_bits(model.px()) + joint.marginal().entropy_bits() - joint.entropy_bits()
    return max(float(mi), 0.0)


def conditional_entropy_x_given_z(model):
    """``H(X_Q | Z) = H(X_Q) - I(X_Q; Z)`` in bits."""
    return max(_discrete_entropy_bits(model.px()) - mutual_information(model, "xz"), 0.0)


@dataclass(frozen=True)
class SourceSummary:
    """The source quantities the key-length bound consumes."""

    h_x: float
    h_x_given_z: float
    i_xy: float
    i_xz: float

    @property
    def r_low(self):
        return self.i_xy - self.i_xz

    @classmethod
    def from_model(cls, model):
        h_x = _discrete_entropy_bits(model.px())
        i_xz = mutual_information(model, "xz")
        return cls(h_x, max(h_x - i_xz, 0.0), mutual_information(model, "xy"), i_xz)
