"""Sequential key generation on sample tables.

Alice's key material is the fixed-width big-endian binary expansion of her
quantized symbols. Reconciliation is modeled, not coded: Bob adopts Alice's
bits and the public discussion is charged ``l_rec`` bits. Both parties then
compress with the same seeded Toeplitz hash down to the certified length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ValidationError
from .finlen import ReconciliationModel, optimize
from .stats import SourceSummary
from .typicality import ExponentCache

DIAGNOSTIC_CAVEAT = (
    "Statistical diagnostics are not a secrecy certificate; secrecy rests only on the "
    "finite-length bound (delta5) under the stated source model."
)


def _bits(a):
    a = np.asarray(a, dtype=np.uint8).ravel()
    if a.size and a.max() > 1:
        raise ValidationError("bit strings must contain only 0 and 1")
    return a


@dataclass(frozen=True)
class ToeplitzHash:
    """Binary Toeplitz matrix ``T[j, i] = seed[j - i + input_len - 1]``."""

    seed_bits: np.ndarray
    input_len: int
    output_len: int

    def __post_init__(self):
        object.__setattr__(self, "seed_bits", _bits(self.seed_bits))
        if self.input_len < 1 or self.output_len < 0:
            raise ValidationError("input_len must be >= 1 and output_len >= 0")
        if self.output_len > self.input_len:
            raise ValidationError("output_len must not exceed input_len")
        need = self.input_len + self.output_len - 1
        if self.seed_bits.size != need:
            raise ValidationError(f"seed needs {need} bits, got {self.seed_bits.size}")

    @classmethod
    def random(cls, input_len, output_len, rng):
        n = input_len + output_len - 1
        return cls(rng.integers(0, 2, max(n, 0), dtype=np.uint8), input_len, output_len)

    def matrix(self):
        """Dense matrix, for small sizes and tests."""
        j = np.arange(self.output_len)[:, None]
        i = np.arange(self.input_len)[None, :]
        return self.seed_bits[j - i + self.input_len - 1]


def toeplitz_hash(bits, h):
    """``T @ bits`` over GF(2), computed as an exact integer convolution."""
    x = _bits(bits)
    if x.size != h.input_len:
        raise ValidationError(f"input has {x.size} bits, hash expects {h.input_len}")
    if h.output_len == 0:
        return np.zeros(0, dtype=np.uint8)
    n = h.input_len
    conv = fftconvolve(h.seed_bits.astype(float), x.astype(float))[n - 1:n - 1 + h.output_len]
    # entries are integer counts <= n; rounding is exact while n << 2**52
    return (np.rint(conv).astype(np.int64) & 1).astype(np.uint8)


def symbols_to_bits(symbols, levels):
    """Fixed-width big-endian binary expansion of bin indices."""
    width = max(1, math.ceil(math.log2(levels)))
    s = np.asarray(symbols, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1)
    return ((s[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def bits_to_hex(bits):
    return np.packbits(_bits(bits)).tobytes().hex()


@dataclass
class KeyPair:
    alice_key: np.ndarray
    bob_key: np.ndarray
    public_transcript_bits: int
    hash_seed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    l_rec: float = 0.0

    def __post_init__(self):
        if len(self.alice_key) != len(self.bob_key):
            raise ValidationError("keys must have identical length")

    @property
    def agreed(self):
        return bool(np.array_equal(self.alice_key, self.bob_key))

    def to_dict(self):
        return {
            "key_bits": int(len(self.alice_key)),
            "alice_key_hex": bits_to_hex(self.alice_key),
            "bob_key_hex": bits_to_hex(self.bob_key),
            "agreed": self.agreed,
            "public_transcript_bits": self.public_transcript_bits,
            "l_rec_bits": self.l_rec,
            "hash_seed_bits": int(len(self.hash_seed)),
            "hash_seed_hex": bits_to_hex(self.hash_seed),
        }


def run_skg(table, n, model, beta, targets, seed, grid=None, cache=None):
    """Generate a key pair from the first ``n`` rows of ``table``.

    ``model`` is the :class:`HybridJointModel` fitted upstream; the key
    length is the optimized bound at ``n``. Returns ``(KeyPair, report)``;
    an infeasible bound yields empty keys and ``report.feasible = False``.
    """
    n = int(n)
    if n < 1:
        raise ValidationError("n must be positive")
    if n > len(table):
        raise ValidationError(f"n = {n} exceeds the {len(table)} rows of the sample table")
    summary = SourceSummary.from_model(model)
    rec = ReconciliationModel(beta, summary.h_x, summary.i_xy)
    cache = cache or ExponentCache.from_model(model)
    report = optimize(n, targets, summary, rec, cache, grid)

    alice_bits = symbols_to_bits(table.x_q[:n], table.x_scheme.levels)
    bob_bits = alice_bits.copy()  # modeled reconciliation: Bob recovers Alice's bits
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 3]))
    k = report.k_bar if report.feasible else 0
    h = ToeplitzHash.random(alice_bits.size, k, rng)
    l_rec = rec.l_rec(n)
    pair = KeyPair(
        alice_key=toeplitz_hash(alice_bits, h),
        bob_key=toeplitz_hash(bob_bits, h),
        public_transcript_bits=int(math.ceil(l_rec)) + int(h.seed_bits.size),
        hash_seed=h.seed_bits,
        l_rec=l_rec,
    )
    return pair, report


def key_diagnostics(key):
    """Bit bias and lag-1 serial correlation (non-certifying)."""
    b = _bits(key).astype(float)
    out = {"length": int(b.size), "sufficient": b.size >= 64, "caveat": DIAGNOSTIC_CAVEAT}
    out["bias"] = float(b.mean()) if b.size else None
    if b.size >= 2:
        x, y = b[:-1] - b[:-1].mean(), b[1:] - b[1:].mean()
        den = math.sqrt(float((x * x).sum() * (y * y).sum()))
        out["serial_correlation"] = float((x * y).sum() / den) if den > 0 else 0.0
    else:
        out["serial_correlation"] = None
    return out
