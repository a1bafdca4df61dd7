"""Fit / predict API and model persistence.

The fitted function is ``f(x) = sum_i lambda_i * k_f(||x_i - x||)``.  It is
evaluated as ``offset_level + sum_i lambda_i * shape(||x_i - x||)`` where
``offset_level = c * sum(lambda)`` comes straight out of the bordered solve
(see :mod:`polyspline.gram_solver`); in exact arithmetic the two forms agree.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, DomainError, ModelFormatError
from .gram_solver import as_points, assemble_gram, pairwise_distances, solve_coefficients
from .kernel import BCMode, KernelParams, shape_values

FORMAT_VERSION = 1
_PREDICT_BLOCK = 1024


@dataclass(frozen=True)
class TrainingSet:
    """``k`` input vectors in R^n (rows of ``xs``) and their targets ``ys``."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = as_points(self.xs, name="training inputs")
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.shape[0] < 1:
            raise DimensionError("training set must contain at least one point")
        if ys.size != xs.shape[0]:
            raise DimensionError(f"{xs.shape[0]} inputs but {ys.size} targets")
        if not np.all(np.isfinite(ys)):
            raise DomainError("training targets must be finite")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def k(self) -> int:
        return self.xs.shape[0]

    @property
    def n(self) -> int:
        return self.xs.shape[1]


@dataclass(frozen=True)
class FittedModel:
    params: KernelParams
    xs: np.ndarray
    lambda_: np.ndarray
    offset_level: float
    condition_estimate: float

    @property
    def n(self) -> int:
        return self.xs.shape[1]

    @property
    def k(self) -> int:
        return self.xs.shape[0]


def fit(data: TrainingSet, params: KernelParams, threads: int | None = None) -> FittedModel:
    """Solve ``(K + sigma2*E) lambda = Y`` for the training set.

    Raises :class:`~polyspline.errors.SingularMatrixError` for degenerate
    configurations, typically coincident inputs with ``sigma2 = 0``.
    """
    gram = assemble_gram(data.xs, params, threads=threads)
    report = solve_coefficients(gram, data.ys)
    return FittedModel(params, data.xs, report.lambda_, report.offset_level, report.condition_estimate)


def predict_batch(model: FittedModel, xs) -> np.ndarray:
    """Evaluate the fitted function at each row of ``xs`` (order preserved)."""
    q = np.asarray(xs, dtype=float)
    if q.size == 0:
        return np.zeros(0)
    q = as_points(q, n=model.n, name="query points")
    lam = model.lambda_.astype(np.longdouble)
    out = np.empty(q.shape[0])
    for s in range(0, q.shape[0], _PREDICT_BLOCK):
        phi = shape_values(pairwise_distances(q[s:s + _PREDICT_BLOCK], model.xs), model.params)
        # lambda can be large with cancelling signs; accumulate in extended precision
        acc = np.sum(phi.astype(np.longdouble) * lam, axis=1)
        out[s:s + _PREDICT_BLOCK] = (acc + np.longdouble(model.offset_level)).astype(float)
    return out


def predict(model: FittedModel, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size != model.n:
        raise DimensionError(f"query point has dimension {x.size}, expected {model.n}")
    return float(predict_batch(model, x.reshape(1, -1))[0])


def residuals(model: FittedModel, data: TrainingSet) -> np.ndarray:
    """``y_i - f(x_i)``; equals ``sigma2 * lambda_i`` up to solver error."""
    if data.k != model.k or data.n != model.n:
        raise DimensionError(
            f"training set is {data.k}x{data.n}, model was fit on {model.k}x{model.n}"
        )
    return data.ys - predict_batch(model, data.xs)


def _finite_or_none(v):
    return v if math.isfinite(v) else None


def model_to_dict(model: FittedModel) -> dict:
    p = model.params
    return {
        "format_version": FORMAT_VERSION,
        "n": model.n,
        "omega0": p.omega0,
        "sigma2": p.sigma2,
        "mode": p.mode.value,
        "b_const": p.b_const,
        "c_const": p.c_const,
        "offset_level": model.offset_level,
        "condition_estimate": _finite_or_none(model.condition_estimate),
        "xs": model.xs.tolist(),
        "lambda": model.lambda_.tolist(),
    }


def _require(doc, key, kind):
    if key not in doc:
        raise ModelFormatError(f"model file lacks field {key!r}")
    value = doc[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ModelFormatError(f"field {key!r} must be a number")
        return float(value)
    if not isinstance(value, kind):
        raise ModelFormatError(f"field {key!r} has the wrong type")
    return value


def model_from_dict(doc) -> FittedModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must contain a JSON object")
    version = _require(doc, "format_version", int)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version}; expected {FORMAT_VERSION}")
    n = _require(doc, "n", int)
    try:
        params = KernelParams(_require(doc, "omega0", float), _require(doc, "sigma2", float),
                              BCMode.parse(_require(doc, "mode", str)))
    except DomainError as exc:
        raise ModelFormatError(f"invalid kernel parameters: {exc}") from None
    # the stored constants act as a checksum on omega0
    if (_require(doc, "b_const", float) != params.b_const
            or _require(doc, "c_const", float) != params.c_const):
        raise ModelFormatError("stored b_const/c_const do not match omega0")
    try:
        xs = np.array(_require(doc, "xs", list), dtype=float)
        lam = np.array(_require(doc, "lambda", list), dtype=float)
    except (TypeError, ValueError):
        raise ModelFormatError("xs/lambda must be numeric arrays") from None
    if n < 1 or xs.ndim != 2 or xs.shape[1] != n or lam.ndim != 1 or lam.size != xs.shape[0] or lam.size < 1:
        raise ModelFormatError(
            f"inconsistent shapes: n={n}, xs {xs.shape}, lambda {lam.shape}"
        )
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(lam))):
        raise ModelFormatError("xs/lambda contain non-finite values")
    offset = _require(doc, "offset_level", float)
    cond = doc.get("condition_estimate")
    cond = float("inf") if cond is None else float(cond)
    xs.setflags(write=False)
    lam.setflags(write=False)
    return FittedModel(params, xs, lam, offset, cond)


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model: FittedModel, path) -> None:
    """Write the model as versioned JSON (floats in shortest round-trip form)."""
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> FittedModel:
    """Read a model written by :func:`save_model`.

    Raises ``OSError`` for I/O problems and :class:`ModelFormatError` for
    truncated, malformed or inconsistent files.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc.msg} at line {exc.lineno})") from None
    return model_from_dict(doc)
