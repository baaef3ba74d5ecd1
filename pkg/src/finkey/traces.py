"""Channel-gain traces: ingestion, calibration, quantization and file formats.

Two CSV formats are defined here and shared by every CLI stage:

* trace files, header ``t,g_ab,g_ba,g_ae,g_be`` (one row per gain sample);
* sample tables, header ``x_q,y_q,z_ae,z_be`` (one row per retained,
  downsampled observation; ``z_be`` is left empty for scalar-Z tables).

Lines starting with ``#`` are comments. A comment of the form
``# key: value`` is read back as metadata. Floats are written with
``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TraceFormatError, ValidationError

TRACE_HEADER = ("t", "g_ab", "g_ba", "g_ae", "g_be")
TABLE_HEADER = ("x_q", "y_q", "z_ae", "z_be")
GAIN_COLUMNS = TRACE_HEADER[1:]

# metadata key marking a file whose gains were already mean-normalized
CALIBRATED_KEY = "calibrated"


@dataclass(frozen=True)
class QuantizationScheme:
    """Uniform-width binning of ``[lo, hi]`` into ``levels`` bins.

    Values outside the range are clamped to the edge bins.
    """

    levels: int
    lo: float
    hi: float

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise ValidationError(f"levels must be an integer >= 2, got {self.levels}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValidationError(f"need finite lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def from_data(cls, samples, levels):
        """Scheme spanning the empirical ``[min, max]`` of ``samples``.

        A degenerate (constant) sample set gets a unit-width range centred on
        the constant, so that every value falls in a middle bin.
        """
        a = np.asarray(samples, dtype=float)
        if a.size == 0:
            raise ValidationError("cannot build a quantizer from an empty sample set")
        lo, hi = float(np.min(a)), float(np.max(a))
        if not lo < hi:
            lo, hi = lo - 0.5, hi + 0.5
        return cls(int(levels), lo, hi)

    @property
    def width(self):
        return (self.hi - self.lo) / self.levels

    def centers(self):
        return self.lo + (np.arange(self.levels) + 0.5) * self.width

    def edges(self):
        return np.linspace(self.lo, self.hi, self.levels + 1)

    def to_dict(self):
        return {"levels": self.levels, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["levels"]), float(d["lo"]), float(d["hi"]))


def quantize(samples, scheme):
    """Bin index of every sample under ``scheme`` (int64 array)."""
    a = np.asarray(samples, dtype=float)
    idx = np.floor((a - scheme.lo) / (scheme.hi - scheme.lo) * scheme.levels)
    return np.clip(idx, 0, scheme.levels - 1).astype(np.int64)


def dequantize(bins, scheme):
    """Bin centres for an index sequence."""
    return scheme.lo + (np.asarray(bins, dtype=float) + 0.5) * scheme.width


@dataclass
class GainTraceSet:
    """Aligned gain sequences of one experiment (linear amplitude units)."""

    sample_rate_hz: float
    timestamps: np.ndarray
    g_ab: np.ndarray
    g_ba: np.ndarray
    g_ae: np.ndarray
    g_be: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        for name in GAIN_COLUMNS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.validate()

    def __len__(self):
        return len(self.timestamps)

    def columns(self):
        return {name: getattr(self, name) for name in GAIN_COLUMNS}

    def validate(self):
        n = len(self.timestamps)
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValidationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if n < 2:
            raise ValidationError(f"a trace needs at least 2 samples, got {n}")
        for name, col in self.columns().items():
            if col.shape != (n,):
                raise ValidationError(f"column {name} has length {col.size}, expected {n}")
            bad = np.flatnonzero(~np.isfinite(col) | (col < 0))
            if bad.size:
                raise ValidationError(
                    f"row {bad[0] + 1}: {name} = {col[bad[0]]!r} is not a finite non-negative gain"
                )
        dt = np.diff(self.timestamps)
        bad = np.flatnonzero(~(dt > 0))
        if bad.size:
            raise ValidationError(f"row {bad[0] + 2}: timestamps are not strictly increasing")
        expected = 1.0 / self.sample_rate_hz
        bad = np.flatnonzero(np.abs(dt - expected) > 0.01 * expected)
        if bad.size:
            raise ValidationError(
                f"row {bad[0] + 2}: timestamp spacing {dt[bad[0]]!r} deviates more than 1% "
                f"from 1/sample_rate_hz = {expected!r}"
            )

    def calibrated(self):
        """Copy with every gain column divided by its mean.

        Columns with zero mean are left untouched. Already-calibrated traces
        are returned unchanged so calibration is applied exactly once.
        """
        if self.meta.get(CALIBRATED_KEY) == "true":
            return self
        cols = {}
        for name, col in self.columns().items():
            m = col.mean()
            cols[name] = col / m if m > 0 else col.copy()
        meta = dict(self.meta)
        meta[CALIBRATED_KEY] = "true"
        return GainTraceSet(self.sample_rate_hz, self.timestamps.copy(), meta=meta, **cols)


def _parse_float(text, line):
    try:
        return float(text)
    except ValueError:
        raise TraceFormatError(f"cannot parse {text!r} as a number", line) from None


def _read_csv(path, header):
    """Return (meta, rows, line_numbers) for a comment-aware CSV file."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    meta = {}
    rows = []
    lines = []
    seen_header = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            if text.startswith("#"):
                body = text[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    meta[key.strip()] = value.strip()
                continue
            fields = [f.strip() for f in text.split(",")]
            if not seen_header:
                if tuple(fields) != header:
                    raise TraceFormatError(
                        f"expected header {','.join(header)!r}, got {text!r}", lineno
                    )
                seen_header = True
                continue
            if len(fields) != len(header):
                raise TraceFormatError(
                    f"expected {len(header)} fields, got {len(fields)}", lineno
                )
            rows.append(fields)
            lines.append(lineno)
    if not seen_header:
        raise TraceFormatError(f"missing header {','.join(header)!r} in {path}")
    return meta, rows, lines


def write_atomic(path, text):
    path = Path(path)
    if not path.parent.is_dir():
        raise ValidationError(f"output directory does not exist: {path.parent}")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    tmp.replace(path)


def read_traces(path):
    """Parse and validate a trace file without calibrating it."""
    meta, rows, lines = _read_csv(path, TRACE_HEADER)
    if len(rows) < 2:
        raise ValidationError(f"{path}: a trace needs at least 2 data rows, got {len(rows)}")
    data = np.empty((len(rows), len(TRACE_HEADER)))
    for i, (fields, lineno) in enumerate(zip(rows, lines)):
        for j, text in enumerate(fields):
            data[i, j] = _parse_float(text, lineno)
    t = data[:, 0]
    for j, name in enumerate(GAIN_COLUMNS, start=1):
        col = data[:, j]
        bad = np.flatnonzero(~np.isfinite(col) | (col < 0))
        if bad.size:
            i = bad[0]
            raise ValidationError(
                f"row {i + 1} (line {lines[i]}): {name} = {rows[i][j]} is not a finite non-negative gain"
            )
    dt = np.diff(t)
    bad = np.flatnonzero(~(dt > 0))
    if bad.size:
        i = bad[0] + 1
        raise ValidationError(f"row {i + 1} (line {lines[i]}): timestamps are not strictly increasing")
    if "sample_rate_hz" in meta:
        rate = _parse_float(meta["sample_rate_hz"], None)
    else:
        rate = (len(t) - 1) / (t[-1] - t[0])
    return GainTraceSet(rate, t, *(data[:, j] for j in range(1, 5)), meta=meta)


def load_traces(path):
    """Load a trace CSV, validate it and apply mean-normalizing calibration once."""
    return read_traces(path).calibrated()


def write_traces(traces, path):
    """Write ``traces`` in the trace CSV format (atomic, LF endings)."""
    meta = dict(traces.meta)
    meta["sample_rate_hz"] = repr(float(traces.sample_rate_hz))
    out = [f"# {k}: {v}" for k, v in sorted(meta.items())]
    out.append(",".join(TRACE_HEADER))
    cols = [traces.timestamps] + [getattr(traces, name) for name in GAIN_COLUMNS]
    for row in zip(*(c.tolist() for c in cols)):
        out.append(",".join(repr(v) for v in row))
    write_atomic(path, "\n".join(out) + "\n")


@dataclass
class SampleTable:
    """Downsampled observations: quantized X and Y, continuous Z.

    ``z`` has shape ``(rows, d)`` with ``d`` = 1 (g_ae only) or 2 (g_ae, g_be).
    """

    x_q: np.ndarray
    y_q: np.ndarray
    z: np.ndarray
    x_scheme: QuantizationScheme
    y_scheme: QuantizationScheme

    def __post_init__(self):
        self.x_q = np.asarray(self.x_q, dtype=np.int64)
        self.y_q = np.asarray(self.y_q, dtype=np.int64)
        z = np.asarray(self.z, dtype=float)
        self.z = z.reshape(-1, 1) if z.ndim == 1 else z
        n = len(self.x_q)
        if self.y_q.shape != (n,) or self.z.shape[0] != n or self.z.shape[1] not in (1, 2):
            raise ValidationError("sample table columns are misaligned")
        for name, col, scheme in (("x_q", self.x_q, self.x_scheme), ("y_q", self.y_q, self.y_scheme)):
            if n and (col.min() < 0 or col.max() >= scheme.levels):
                raise ValidationError(f"{name} outside [0, {scheme.levels - 1}]")
        if not np.all(np.isfinite(self.z)):
            raise ValidationError("z contains non-finite values")

    def __len__(self):
        return len(self.x_q)

    @property
    def z_dims(self):
        return self.z.shape[1]

    def head(self, n):
        return SampleTable(self.x_q[:n], self.y_q[:n], self.z[:n], self.x_scheme, self.y_scheme)


def make_sample_table(traces, lag, x_scheme, y_scheme, z_dims=2):
    """Keep every ``lag``-th aligned sample and quantize X (g_ba) and Y (g_ab)."""
    lag = int(lag)
    if lag < 1:
        raise ValidationError(f"lag must be >= 1, got {lag}")
    if lag >= len(traces):
        raise ValidationError(f"lag {lag} leaves fewer than 2 samples of a {len(traces)}-sample trace")
    sl = slice(None, None, lag)
    z_cols = [traces.g_ae[sl]] + ([traces.g_be[sl]] if z_dims == 2 else [])
    return SampleTable(
        quantize(traces.g_ba[sl], x_scheme),
        quantize(traces.g_ab[sl], y_scheme),
        np.column_stack(z_cols),
        x_scheme,
        y_scheme,
    )


def write_sample_table(table, path):
    out = [
        f"# x_scheme: {table.x_scheme.levels} {table.x_scheme.lo!r} {table.x_scheme.hi!r}",
        f"# y_scheme: {table.y_scheme.levels} {table.y_scheme.lo!r} {table.y_scheme.hi!r}",
        ",".join(TABLE_HEADER),
    ]
    zs = table.z.tolist()
    for x, y, z in zip(table.x_q.tolist(), table.y_q.tolist(), zs):
        z_be = repr(z[1]) if len(z) == 2 else ""
        out.append(f"{x},{y},{z[0]!r},{z_be}")
    write_atomic(path, "\n".join(out) + "\n")


def _scheme_from_meta(meta, key):
    if key not in meta:
        raise TraceFormatError(f"sample table lacks the '# {key}:' comment")
    parts = meta[key].split()
    if len(parts) != 3:
        raise TraceFormatError(f"malformed {key} comment {meta[key]!r}")
    return QuantizationScheme(int(parts[0]), float(parts[1]), float(parts[2]))


def read_sample_table(path):
    meta, rows, lines = _read_csv(path, TABLE_HEADER)
    if not rows:
        raise ValidationError(f"{path}: sample table has no rows")
    scalar = rows[0][3] == ""
    x, y, z = [], [], []
    for fields, lineno in zip(rows, lines):
        try:
            x.append(int(fields[0]))
            y.append(int(fields[1]))
        except ValueError:
            raise TraceFormatError("bin indices must be integers", lineno) from None
        if (fields[3] == "") != scalar:
            raise TraceFormatError("z_be must be present on every row or on none", lineno)
        zz = [_parse_float(fields[2], lineno)]
        if not scalar:
            zz.append(_parse_float(fields[3], lineno))
        z.append(zz)
    return SampleTable(
        np.array(x), np.array(y), np.array(z),
        _scheme_from_meta(meta, "x_scheme"), _scheme_from_meta(meta, "y_scheme"),
    )
