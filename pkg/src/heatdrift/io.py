"""Trace container, CSV writers and the flat key=value config format."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
import math
from pathlib import Path
import typing

import numpy as np

from heatdrift.errors import ParameterError
from heatdrift.spectral import ModelConfig

BASE_COLUMNS = ("k", "t", "ubar", "fbar", "sigma_u", "sigma_uf", "sigma_f", "k_u", "k_f")
FREQ_COLUMNS = ("mu", "m_u", "m_f", "p_u", "p_uf", "p_f", "V")
TRACE_COLUMNS = BASE_COLUMNS + FREQ_COLUMNS
PATH_COLUMNS = ("k", "t", "u", "dy")
ENSEMBLE_COLUMNS = ("k", "t", "N", "mean_u", "mean_f", "var_u", "cov_uf", "var_f")
CONTRACTION_COLUMNS = ("t", "phi_sq_total", "K_used", "tail_bound", "slope_running")
COMPONENT_COLUMNS = ("t", "sigma_sum", "p_sum", "bias_sq_sum")
VARIANTS = ("dynamic", "stationary", "reduced", "filter")


@dataclass
class ModeTrace:
    """Time series of one mode.

    ``columns`` maps a column name to an array aligned with ``t``. Columns that
    a variant does not define are simply absent and are written as ``nan``.
    """

    k: int
    t: np.ndarray
    variant: str
    columns: dict = field(default_factory=dict)

    def __getitem__(self, name):
        if name == "t":
            return self.t
        return self.columns[name]

    def __contains__(self, name):
        return name == "t" or name in self.columns

    def __len__(self):
        return len(self.t)

    def rows(self, schema=TRACE_COLUMNS):
        n = len(self.t)
        nan = np.full(n, np.nan)
        cols = []
        for name in schema:
            if name == "k":
                cols.append(np.full(n, self.k))
            elif name == "t":
                cols.append(self.t)
            else:
                cols.append(self.columns.get(name, nan))
        for i in range(n):
            yield [c[i] for c in cols]

    def to_csv(self, path, schema=TRACE_COLUMNS):
        write_csv(path, schema, self.rows(schema))


def format_value(x):
    """Round-trip text form of a number; integers stay integers."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def read_csv(path):
    """Read a numeric CSV into ``{column: float array}``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def _coerce(name, text, kind):
    base = typing.get_origin(kind) or kind
    try:
        if kind in (int, "int") or base is int:
            value = float(text)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind in (float, "float") or base is float:
            return float(text)
        return text.strip().strip('"').strip("'")
    except ValueError:
        raise ParameterError(f"config key {name!r}: cannot parse {text!r} as {kind}") from None


def parse_config_text(text):
    """Parse ``key = value`` lines. ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_config(values=None, base=None):
    """Build a ``ModelConfig`` from string or typed values layered on ``base``."""
    base = base or ModelConfig()
    types = ModelConfig.field_types()
    changes = {}
    for key, value in (values or {}).items():
        if key not in types:
            raise ParameterError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, value, types[key]) if isinstance(value, str) else value
    return base.with_(**changes)


def load_config(path=None, overrides=None):
    values = {}
    if path is not None:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ParameterError(f"cannot read config {path}: {exc}") from None
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)


def log_times(t_end, per_decade=50, t_start=None):
    """Log-spaced output times up to ``t_end``, ``per_decade`` points per decade.

    The first point is ``t_start`` (default: three decades below 1 or below
    ``t_end``, whichever is smaller); ``t_end`` is always included.
    """
    if not t_end > 0:
        raise ParameterError(f"t_end must be > 0, got {t_end}")
    if t_start is None:
        t_start = min(1e-3, t_end * 1e-3)
    lo, hi = math.log10(t_start), math.log10(t_end)
    n = max(2, int(round((hi - lo) * per_decade)) + 1)
    t = np.logspace(lo, hi, n)
    t[-1] = t_end
    return t
