"""CSV ingestion/emission and the versioned JSON model and operator files."""
from __future__ import annotations

import csv
import hashlib
import json

import numpy as np
from scipy.linalg import cho_factor

from .errors import CsvFormatError, ModelFormatError
from .operators import QuadraticOperator, validate_psd
from .penalties import PenaltySpec
from .pipeline import RplsModel
from .prediction import LdaModel, compose_regression

MODEL_FORMAT = "rpls-model/1"
OPERATOR_FORMAT = "rpls-operator/1"
VERSION = "0.1.0"


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def header_line(config=None, seed=None):
    return f"# rpls {VERSION} config={config_hash(config or {})} seed={seed}"


def _rows(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    return list(csv.reader(lines))


def read_table(path):
    """Header row plus string cells; comment lines starting with '#' are skipped."""
    rows = _rows(path)
    if not rows:
        raise CsvFormatError(f"{path}: no data")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if not body:
        raise CsvFormatError(f"{path}: header but no rows")
    for i, r in enumerate(body, 2):
        if len(r) != len(header):
            raise CsvFormatError(f"{path}: row {i} has {len(r)} fields, header has {len(header)}")
    return header, body


def read_matrix(path):
    """Numeric CSV -> (values, header). Empty, NA or non-finite cells are rejected."""
    header, body = read_table(path)
    try:
        values = np.array([[float(c) for c in r] for r in body], dtype=float)
    except ValueError as exc:
        raise CsvFormatError(f"{path}: non-numeric cell ({exc})") from exc
    if not np.all(np.isfinite(values)):
        raise CsvFormatError(f"{path}: missing or non-finite values")
    return values, header


def read_labels(path):
    header, body = read_table(path)
    if len(header) != 1:
        raise CsvFormatError(f"{path}: expected one label column, got {len(header)}")
    labels = [r[0].strip() for r in body]
    if any(lab == "" for lab in labels):
        raise CsvFormatError(f"{path}: missing label")
    return np.asarray(labels)


def read_positions(path):
    """One position per variable: either a single numeric column or a numeric header row."""
    rows = _rows(path)
    if not rows:
        raise CsvFormatError(f"{path}: no data")
    try:
        if len(rows[0]) > 1:
            out = np.array([float(h) for h in rows[0]])
        else:
            # a single column, with or without a name on top
            cells = [r[0] for r in rows if len(r) == 1]
            if len(cells) != len(rows):
                raise CsvFormatError(f"{path}: ragged position column")
            try:
                float(cells[0])
            except ValueError:
                cells = cells[1:]
            out = np.array([float(c) for c in cells])
    except ValueError as exc:
        raise CsvFormatError(f"{path}: positions must be numeric") from exc
    if out.size == 0 or not np.all(np.isfinite(out)):
        raise CsvFormatError(f"{path}: positions must be finite and nonempty")
    return out


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows, config=None, seed=None):
    """Write rows under a provenance comment line (version, config hash, seed)."""
    with open(path, "w", newline="") as fh:
        fh.write(header_line(config, seed) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _mat(a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return {"rows": a.shape[0], "cols": a.shape[1], "data": a.reshape(-1).tolist()}


def _unmat(d):
    try:
        return np.asarray(d["data"], dtype=float).reshape(d["rows"], d["cols"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"bad matrix block: {exc}") from exc


def _penalty_record(spec):
    return {
        "family": spec.family,
        "lam": spec.lam,
        "nonnegative": spec.nonnegative,
        "groups": None if spec.groups is None else [np.asarray(g).tolist() for g in spec.groups],
    }


def _penalty_from(d):
    groups = None if d.get("groups") is None else tuple(np.asarray(g, dtype=int) for g in d["groups"])
    return PenaltySpec(d["family"], float(d["lam"]), bool(d["nonnegative"]), groups)


def operator_record(Q):
    rec = Q.record()
    rec["format"] = OPERATOR_FORMAT
    rec["matrix"] = _mat(Q.matrix)
    return rec


def operator_from(rec):
    if rec.get("format") != OPERATOR_FORMAT:
        raise ModelFormatError(f"unsupported operator format {rec.get('format')!r}")
    positions = None if rec.get("positions") is None else np.asarray(rec["positions"], dtype=float)
    if rec.get("is_identity"):
        M = _unmat(rec["matrix"])
        return QuadraticOperator(M, kind="identity", is_identity=True, min_eigenvalue=1.0)
    Q = validate_psd(_unmat(rec["matrix"]), kind=rec.get("kind", "custom"))
    return QuadraticOperator(Q.matrix, Q.kind, positions, rec.get("bandwidth"), False, Q.min_eigenvalue)


def save_operator(path, Q, extra=None):
    rec = operator_record(Q)
    if extra:
        rec.update(extra)
    with open(path, "w") as fh:
        json.dump(rec, fh, indent=1, sort_keys=True)


def load_operator(path):
    with open(path) as fh:
        try:
            rec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not JSON ({exc})") from exc
    return operator_from(rec)


def model_record(model, regression=None, lda=None, classes=None, meta=None):
    rec = {
        "format": MODEL_FORMAT,
        "p": model.p,
        "K": model.K,
        "penalty": _penalty_record(model.penalty),
        "lambdas": model.lambdas.tolist(),
        "V": _mat(model.V),
        "Z": _mat(model.Z),
        "R": _mat(model.R),
        "x_mean": model.x_mean.tolist(),
        "x_scale": model.x_scale.tolist(),
        "y_mean": model.y_mean.tolist(),
        "y_scale": model.y_scale.tolist(),
        "stop_reason": model.stop_reason,
        "requested_K": model.requested_K,
        "operator": None if model.Q is None else operator_record(model.Q),
        "regression": None,
        "lda": None,
        "meta": meta or {},
    }
    if regression is not None:
        rec["regression"] = {"B": _mat(regression.B)}
    if lda is not None:
        rec["lda"] = {
            "classes": [str(c) for c in lda.classes],
            "means": _mat(lda.means),
            "cov": _mat(lda.cov),
            "priors": lda.priors.tolist(),
            "ridge": lda.ridge,
        }
    if classes is not None:
        rec["classes"] = [str(c) for c in classes]
    return rec


def model_from(rec):
    """Rebuild (model, regression or None, lda or None) from a JSON record."""
    if not isinstance(rec, dict) or rec.get("format") != MODEL_FORMAT:
        found = rec.get("format") if isinstance(rec, dict) else None
        raise ModelFormatError(f"expected format {MODEL_FORMAT!r}, found {found!r}")
    try:
        model = RplsModel(
            V=_unmat(rec["V"]),
            Z=_unmat(rec["Z"]),
            R=_unmat(rec["R"]),
            lambdas=np.asarray(rec["lambdas"], dtype=float),
            penalty=_penalty_from(rec["penalty"]),
            x_mean=np.asarray(rec["x_mean"], dtype=float),
            x_scale=np.asarray(rec["x_scale"], dtype=float),
            y_mean=np.asarray(rec["y_mean"], dtype=float),
            y_scale=np.asarray(rec["y_scale"], dtype=float),
            Q=None if rec.get("operator") is None else operator_from(rec["operator"]),
            stop_reason=rec.get("stop_reason"),
            requested_K=int(rec.get("requested_K", 0)),
        )
    except KeyError as exc:
        raise ModelFormatError(f"missing field {exc}") from exc
    if model.V.shape != (int(rec["p"]), int(rec["K"])):
        raise ModelFormatError("loading dimensions disagree with the declared p, K")
    regression = None
    if rec.get("regression") is not None:
        regression = compose_regression(model, _unmat(rec["regression"]["B"]))
    lda = None
    if rec.get("lda") is not None:
        d = rec["lda"]
        means, cov = _unmat(d["means"]), _unmat(d["cov"])
        chol = cho_factor(cov + d["ridge"] * np.eye(cov.shape[0]))
        lda = LdaModel(np.asarray(d["classes"]), means, cov, np.asarray(d["priors"]), float(d["ridge"]), chol)
    return model, regression, lda


def save_model(path, model, regression=None, lda=None, classes=None, meta=None):
    with open(path, "w") as fh:
        json.dump(model_record(model, regression, lda, classes, meta), fh, indent=1, sort_keys=True)


def load_model(path):
    with open(path) as fh:
        try:
            rec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not JSON ({exc})") from exc
    return model_from(rec)

