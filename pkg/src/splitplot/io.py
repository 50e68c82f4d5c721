"""CSV datasets, JSON reports and simulation configs.

Datasets use a wide layout: a header ``group,t1,...,td`` and one row per
subject. Groups are ordered by first appearance. Reports are JSON with
floats written to 17 significant digits; non-finite floats are written as
the strings ``"Infinity"``, ``"-Infinity"`` and ``"NaN"``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .design import DataSet
from .exceptions import SplitPlotError
from .kron import CovarianceModel
from .simulation import SimConfig, SimResult, reference_sample_sizes


class ParseError(SplitPlotError):
    """Malformed dataset file; carries the 1-based row and column."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        where = ""
        if row is not None:
            where = f"row {row}" + (f", column {col}" if col is not None else "")
            where += ": "
        super().__init__(where + message)
        self.row = row
        self.col = col


def parse_dataset(text: str) -> DataSet:
    """Parse wide-format CSV text into a :class:`DataSet`."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", 1)
    width = len(header)
    if width < 2:
        raise ParseError("header needs a group column and at least one time column", 1)
    rows: dict[str, list] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", lineno)
        label = row[0].strip()
        if not label:
            raise ParseError("missing group label", lineno, 1)
        values = []
        for col, cell in enumerate(row[1:], start=2):
            cell = cell.strip()
            if not cell:
                raise ParseError("missing value", lineno, col)
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r}", lineno, col)
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r}", lineno, col)
            values.append(v)
        rows.setdefault(label, []).append(values)
    if not rows:
        raise ParseError("no data rows")
    labels = list(rows)
    return DataSet.from_groups([np.array(rows[k]) for k in labels], labels)


def read_dataset(path) -> DataSet:
    return parse_dataset(Path(path).read_text(encoding="utf-8"))


def format_dataset(dataset: DataSet) -> str:
    """Wide-format CSV text; values use the shortest round-trip repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group"] + [f"t{t + 1}" for t in range(dataset.design.d)])
    for label, g in zip(dataset.labels, dataset.groups):
        for row in g:
            writer.writerow([label] + [repr(float(v)) for v in row])
    return buf.getvalue()


# --- JSON -----------------------------------------------------------------


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"NaN"'
        if math.isinf(x):
            return '"Infinity"' if x > 0 else '"-Infinity"'
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with 17-significant-digit floats and a trailing newline."""
    return _encode(obj, indent, 0) + "\n"


_SPECIAL = {"Infinity": math.inf, "-Infinity": -math.inf, "NaN": math.nan}


def _revive(value):
    if isinstance(value, str) and value in _SPECIAL:
        return _SPECIAL[value]
    if isinstance(value, list):
        return [_revive(v) for v in value]
    if isinstance(value, dict):
        return {k: _revive(v) for k, v in value.items()}
    return value


def loads_json(text: str):
    return _revive(json.loads(text))


def report_dict(result, dataset: DataSet, upsilon: float) -> dict:
    """Structured report of a :class:`~splitplot.engine.TestResult`."""
    tr = result.traces
    return {
        "tool": "splitplot",
        "version": __version__,
        "design": {
            "a": dataset.design.a,
            "d": dataset.design.d,
            "N": dataset.design.N,
            "n": list(dataset.design.n),
            "labels": list(dataset.labels),
        },
        "hypothesis": result.hypothesis,
        "alpha": result.alpha,
        "upsilon": float(upsilon),
        "seed": result.seed,
        "statistic": {"Q": result.q, "W": result.w},
        "traces": {
            "A1": tr.a1,
            "A2": tr.a2,
            "C1": tr.c1,
            "c1_mode": tr.c1_mode,
            "subsample_sizes": list(tr.subsample_sizes),
            "groups_used": {k: list(v) for k, v in tr.groups_used.items()},
        },
        "eta": result.eta,
        "f_hat": result.f_hat,
        "tau_hat": result.tau_hat,
        "critical_values": dict(result.critical),
        "p_value": result.p_value,
        "p_value_note": "P(K_f > W) at the estimated f; decisions use the critical values",
        "decisions": dict(result.decisions),
    }


# --- simulation configs and tables --------------------------------------


def parse_covariance(text: str, d: int) -> CovarianceModel:
    """``ar:<rho>``, ``cs:<rho>`` or ``identity``."""
    text = text.strip().lower()
    if text in ("identity", "id", "i"):
        return CovarianceModel.identity(d)
    kind, _, value = text.partition(":")
    try:
        rho = float(value)
    except ValueError:
        raise SplitPlotError(f"bad covariance spec {text!r}; use ar:<rho>, cs:<rho> or identity")
    if kind == "ar":
        return CovarianceModel.ar(d, rho)
    if kind == "cs":
        return CovarianceModel.compound_symmetry(d, rho)
    raise SplitPlotError(f"bad covariance spec {text!r}; use ar:<rho>, cs:<rho> or identity")


_CONFIG_KEYS = {
    "a", "n", "d", "covariance", "hypothesis", "alternative", "deltas",
    "alpha", "reps", "upsilon", "seed", "workers",
}


def sim_config_from_dict(raw: dict) -> SimConfig:
    """Build a :class:`SimConfig` from decoded JSON.

    Keys: ``d``, ``covariance`` (e.g. ``"ar:0.6"``), and either ``n`` or
    ``a`` (reference sample sizes); optional ``hypothesis``, ``alternative``,
    ``deltas``, ``alpha``, ``reps``, ``upsilon``, ``seed``, ``workers``.
    """
    if not isinstance(raw, dict):
        raise SplitPlotError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise SplitPlotError(f"unknown config keys: {sorted(unknown)}")
    try:
        d = int(raw["d"])
        if "n" in raw:
            n = tuple(int(x) for x in raw["n"])
            if "a" in raw and int(raw["a"]) != len(n):
                raise SplitPlotError("config a does not match length of n")
        else:
            n = reference_sample_sizes(int(raw["a"]))
        cov = parse_covariance(str(raw.get("covariance", "ar:0.6")), d)
        return SimConfig(
            n=n,
            d=d,
            covariance=cov,
            hypothesis=str(raw.get("hypothesis", "interaction")),
            alternative=str(raw.get("alternative", "null")),
            deltas=tuple(float(x) for x in raw.get("deltas", [0.0])),
            alpha=float(raw.get("alpha", 0.05)),
            reps=int(raw.get("reps", 2000)),
            upsilon=float(raw.get("upsilon", 0.05)),
            seed=int(raw.get("seed", 0)),
            workers=int(raw["workers"]) if raw.get("workers") is not None else None,
        )
    except KeyError as exc:
        raise SplitPlotError(f"config is missing key {exc.args[0]!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SplitPlotError):
            raise
        raise SplitPlotError(f"malformed config value: {exc}")


def load_sim_config(path) -> SimConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SplitPlotError(f"config is not valid JSON: {exc}")
    return sim_config_from_dict(raw)


def sim_table_csv(results: list[SimResult], with_a: bool = False) -> str:
    """CSV with columns ``delta,test,rate,se,reps`` (``a`` first if ``with_a``)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow((["a"] if with_a else []) + ["delta", "test", "rate", "se", "reps"])
    for res in results:
        for delta, test, rate, se, reps in res.rows():
            row = [repr(delta), test, repr(rate), repr(se), str(reps)]
            writer.writerow(([str(res.config.a)] if with_a else []) + row)
    return buf.getvalue()
