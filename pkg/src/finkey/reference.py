"""Reference synthetic source used by the tests, the acceptance suite and the CLI.

Memoryless by construction (one draw per coherence interval): a Rayleigh
legitimate gain observed by Alice and Bob with independent receiver noise,
and an eavesdropper whose two gains are partially correlated with it.
The constants give an asymptotic rate I(X_Q;Y_Q) - I(X_Q;Z) of about 1.2
bits per sample, the same order as rates seen on indoor measurements.
"""

from __future__ import annotations

import numpy as np

from .traces import QuantizationScheme, SampleTable

REFERENCE_SEED = 20140601
REFERENCE_ROWS = 200_000

# latent-model constants of the fixture
RHO_EVE = (0.8, 0.64)  # complex correlation of h_ae, h_be with h_ab
NOISE_LEGIT = 0.10
NOISE_EVE = 0.05
GAIN_RANGE = (0.0, 2.4)
X_LEVELS = 16
Z_BINS = (10, 10)


def _cn(rng, size):
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def reference_gains(rows=REFERENCE_ROWS, seed=REFERENCE_SEED):
    """Draw ``rows`` i.i.d. (g_ba, g_ab, g_ae, g_be) samples."""
    rng = np.random.default_rng(seed)
    h = _cn(rng, rows)
    g = np.abs(h)
    g_ba = np.abs(g + NOISE_LEGIT * rng.standard_normal(rows))
    g_ab = np.abs(g + NOISE_LEGIT * rng.standard_normal(rows))
    eve = []
    for rho in RHO_EVE:
        h_e = rho * h + np.sqrt(1.0 - rho ** 2) * _cn(rng, rows)
        eve.append(np.abs(np.abs(h_e) + NOISE_EVE * rng.standard_normal(rows)))
    return g_ba, g_ab, eve[0], eve[1]


def reference_table(rows=REFERENCE_ROWS, seed=REFERENCE_SEED, z_dims=2):
    from .traces import quantize

    g_ba, g_ab, g_ae, g_be = reference_gains(rows, seed)
    scheme = QuantizationScheme(X_LEVELS, *GAIN_RANGE)
    z = np.column_stack([g_ae, g_be][:z_dims])
    return SampleTable(quantize(g_ba, scheme), quantize(g_ab, scheme), z, scheme, scheme)


def reference_model(rows=REFERENCE_ROWS, seed=REFERENCE_SEED, z_dims=2):
    from .stats import fit_joint_model

    return fit_joint_model(reference_table(rows, seed, z_dims), Z_BINS[:z_dims])
