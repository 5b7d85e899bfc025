"""Model JSON and dataset CSV formats.

Model files hold every float with 17 significant digits, so a load/save
cycle reproduces the file byte for byte.
"""
import csv
import json
import math

import numpy as np

from . import transforms as tf
from .data import Dataset
from .errors import SchemaError
from .moe import CATEGORICAL, NUMERIC, Column, CovariateSchema, PhMoeModel

__all__ = [
    "FORMAT_VERSION",
    "dumps",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "parse_schema_spec",
    "read_dataset",
    "write_dataset",
    "write_csv",
]

FORMAT_VERSION = 1
RESPONSE_COLUMNS = ("y", "y_low", "y_high", "weight")


# ---------------------------------------------------------------- JSON


def _fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = format(x, ".17g")
    # keep floats recognisable as floats
    return text if any(c in text for c in ".en") else text + ".0"


def _emit(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), indent, level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(str(k)) + ": ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        # numeric rows stay on one line
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            parts = []
            for v in obj:
                buf = []
                _emit(v, indent, level, buf)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with floats at 17 significant digits."""
    out = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def model_to_dict(model, fit=None):
    """Plain-data document for ``model``; ``fit`` is an optional summary
    ``{"loglik", "dof", "iterations", "converged", "seed"}``."""
    doc = {
        "format_version": FORMAT_VERSION,
        "p": model.p,
        "schema": model.schema.to_list(),
        "alpha": model.alpha,
        "T": model.T,
        "transform": model.transform.to_dict(),
    }
    if fit is not None:
        doc["fit"] = {
            "loglik": float(fit["loglik"]),
            "dof": int(fit["dof"]),
            "iterations": int(fit["iterations"]),
            "converged": bool(fit["converged"]),
            "seed": int(fit["seed"]),
        }
    return doc


def model_from_dict(doc):
    """Inverse of :func:`model_to_dict`; returns ``(model, fit_summary)``."""
    if doc.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format_version {doc.get('format_version')!r}")
    try:
        schema = CovariateSchema.from_list(doc["schema"])
        model = PhMoeModel(schema, np.asarray(doc["alpha"], dtype=float),
                           np.asarray(doc["T"], dtype=float),
                           tf.Transform.from_dict(doc["transform"]))
    except KeyError as exc:
        raise SchemaError(f"model file lacks field {exc.args[0]!r}") from None
    if int(doc.get("p", model.p)) != model.p:
        raise SchemaError("model file: p does not match T")
    return model, doc.get("fit")


def save_model(path, model, fit=None):
    text = dumps(model_to_dict(model, fit))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(doc)


# ---------------------------------------------------------------- CSV


def parse_schema_spec(spec):
    """Schema from ``name:num,name:cat`` or ``name:cat[A|B|C]`` text, or from a
    JSON file holding a list of column objects.

    Levels of a ``cat`` column without explicit levels are filled in from the
    data (sorted; the first is the baseline). Returns a list of partial
    column dicts.
    """
    spec = spec.strip()
    if spec.endswith(".json"):
        with open(spec, encoding="utf-8") as fh:
            return json.load(fh)
    cols = []
    for item in filter(None, (s.strip() for s in spec.split(","))):
        name, _, kind = item.partition(":")
        kind = kind.strip() or "num"
        levels = None
        if "[" in kind:
            kind, _, rest = kind.partition("[")
            levels = [v for v in rest.rstrip("]").split("|") if v]
        kind = {"num": NUMERIC, "numeric": NUMERIC, "cat": CATEGORICAL,
                "categorical": CATEGORICAL}.get(kind.strip().lower())
        if kind is None:
            raise SchemaError(f"bad schema item {item!r}; use name:num or name:cat")
        d = {"name": name.strip(), "kind": kind}
        if levels is not None:
            d["levels"] = levels
        cols.append(d)
    return cols


def _sort_levels(values):
    uniq = sorted(set(values))
    try:
        return sorted(uniq, key=float)
    except ValueError:
        return uniq


def _infer_schema(raw, names, partial=None, standardize=False):
    given = {d["name"]: d for d in (partial or [])}
    order = [d["name"] for d in partial] if partial else names
    cols = []
    for name in order:
        if name not in raw:
            raise SchemaError(f"schema names column {name!r} which is not in the data",
                              column=name)
        vals = raw[name]
        d = given.get(name, {})
        kind = d.get("kind")
        if kind is None:
            kind = NUMERIC if all(_is_float(v) for v in vals) else CATEGORICAL
        if kind == CATEGORICAL:
            levels = d.get("levels") or _sort_levels(vals)
            cols.append(Column(name, CATEGORICAL, tuple(levels)))
        else:
            center, scale = d.get("center", 0.0), d.get("scale", 1.0)
            if standardize:
                x = np.asarray([float(v) for v in vals])
                center = float(x.mean())
                sd = float(x.std())
                scale = sd if sd > 0 else 1.0
            cols.append(Column(name, NUMERIC, (), center, scale))
    return CovariateSchema(tuple(cols))


def _is_float(v):
    try:
        float(v)
    except ValueError:
        return False
    return True


def _parse_number(text, column, row, allow_empty=False):
    text = text.strip()
    if text == "" and allow_empty:
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"row {row}: column {column!r} is not a number ({text!r})",
                          column=column, row=row) from None


def read_dataset(path, schema=None, schema_spec=None, standardize=False, response_scale=1.0):
    """Read a dataset CSV.

    Response columns are ``y`` or ``y_low``/``y_high`` (empty ``y_high`` means
    right-censored, ``y_low == y_high`` an exact value), with an optional
    ``weight``. All other columns are
    covariates. With ``schema`` given (e.g. from a model file) the covariates
    are coded with it; otherwise the schema is built from ``schema_spec`` or
    inferred. Responses are divided by ``response_scale``.

    Returns ``(dataset, schema)``. Row numbers in errors count data rows
    from 1.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [r for r in reader if any(c.strip() for c in r)]
    if "y" in header:
        mode = "exact"
    elif "y_low" in header and "y_high" in header:
        mode = "interval"
    else:
        raise SchemaError(f"{path}: need a 'y' column or 'y_low' and 'y_high' columns")
    pos = {h: i for i, h in enumerate(header)}
    cov_names = [h for h in header if h not in RESPONSE_COLUMNS]
    n = len(rows)
    if n == 0:
        raise SchemaError(f"{path}: no data rows")
    low, high, w = np.empty(n), np.empty(n), np.ones(n)
    raw = {c: [] for c in cov_names}
    for i, r in enumerate(rows, start=1):
        if len(r) != len(header):
            raise SchemaError(f"row {i}: expected {len(header)} fields, got {len(r)}", row=i)
        if mode == "exact":
            y = _parse_number(r[pos["y"]], "y", i)
            if y == 0:
                raise SchemaError(f"row {i}: y = 0 is not a valid severity; encode it as a "
                                  "small interval, e.g. y_low=0 and y_high=1e-6", column="y", row=i)
            if not y > 0 or not math.isfinite(y):
                raise SchemaError(f"row {i}: y must be positive and finite", column="y", row=i)
            low[i - 1] = high[i - 1] = y
        else:
            lo = _parse_number(r[pos["y_low"]], "y_low", i)
            hi = _parse_number(r[pos["y_high"]], "y_high", i, allow_empty=True)
            # equal bounds mark an exact observation in mixed files
            if lo == hi == 0:
                raise SchemaError(f"row {i}: y = 0 is not a valid severity; encode it as a "
                                  "small interval, e.g. y_low=0 and y_high=1e-6",
                                  column="y_low", row=i)
            if not (0 <= lo <= hi) or not math.isfinite(lo):
                raise SchemaError(f"row {i}: need 0 <= y_low < y_high", column="y_low", row=i)
            low[i - 1], high[i - 1] = lo, hi
        if "weight" in pos:
            w[i - 1] = _parse_number(r[pos["weight"]], "weight", i)
            if not w[i - 1] > 0:
                raise SchemaError(f"row {i}: weight must be positive", column="weight", row=i)
        for c in cov_names:
            raw[c].append(r[pos[c]].strip())
    if response_scale != 1.0:
        low, high = low / response_scale, high / response_scale
    if schema is None:
        partial = parse_schema_spec(schema_spec) if schema_spec else None
        schema = _infer_schema(raw, cov_names, partial, standardize)
    try:
        X = schema.design_matrix(raw, n=n)
    except SchemaError as exc:
        if exc.row is not None:
            raise SchemaError(f"row {exc.row + 1}: {exc}", column=exc.column,
                              row=exc.row + 1) from None
        raise
    covs = {c.name: raw[c.name] for c in schema.columns}
    return Dataset(low, high, X, w, covs), schema


def _num(x):
    return "" if math.isinf(x) and x > 0 else repr(float(x))


def write_dataset(path, data, schema=None):
    """Write ``data`` in the CSV format read by :func:`read_dataset`.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(path, data, schema)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_rows(fh, data, schema)


def _write_rows(fh, data, schema):
    names = schema.names if schema is not None else list(data.covariates)
    exact = bool(np.all(data.is_exact))
    head = (["y"] if exact else ["y_low", "y_high"])
    if not np.all(data.weights == 1.0):
        head.append("weight")
    head += names
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(head)
    for i in range(len(data)):
        row = [_num(data.low[i])] if exact else [_num(data.low[i]), _num(data.high[i])]
        if "weight" in head:
            row.append(_num(data.weights[i]))
        row += [str(data.covariates[c][i]) for c in names]
        wr.writerow(row)


def write_csv(path, header, rows):
    """Plain CSV writer for report tables; floats in shortest round-trip form."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                         for v in r])
