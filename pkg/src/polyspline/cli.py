"""Command line front end.

Commands: ``fit``, ``predict``, ``kernel-curve``, ``sample`` and
``suggest-omega0``.  Errors are reported on stderr as one line starting with
an error code (``E_IO``, ``E_FORMAT``, ``E_SINGULAR``, ``E_DIM``,
``E_CONFIG``).  Exit status is 0 on success, 2 for usage, I/O and data
problems and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
import warnings
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ConditioningWarning, ConfigError, PolysplineError
from .kernel import DEFAULT_MARGIN, BCMode, KernelParams, b_of_tau, c_of_tau, kernel_eval, period, suggest_omega0
from .model import TrainingSet, atomic_write_text, fit, load_model, predict_batch, residuals, save_model
from .spectral_lab import SpectralConfig, sample_realizations


class CLIError(Exception):
    def __init__(self, code, message, status=2):
        super().__init__(message)
        self.code = code
        self.status = status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError("E_CONFIG", f"{self.prog}: {message}")


def fmt(value: float) -> str:
    """Shortest round-trip decimal, without a trailing ``.0``."""
    s = repr(float(value))
    return s[:-2] if s.endswith(".0") else s


def _is_number(field):
    try:
        float(field)
    except ValueError:
        return False
    return True


def read_numeric_csv(path) -> np.ndarray:
    """Rectangular comma-separated numbers; a non-numeric first row is a header."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CLIError("E_IO", f"cannot read {path}: {exc.strerror or exc}") from None
    rows = []
    first = True
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if first:
            first = False
            if not all(_is_number(f) for f in fields):
                continue
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise CLIError("E_FORMAT", f"{path}:{lineno}: non-numeric field") from None
        if len(rows[-1]) != len(rows[0]):
            raise CLIError("E_FORMAT", f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise CLIError("E_FORMAT", f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise CLIError("E_FORMAT", f"{path}: non-finite value")
    return arr


def read_dataset(path) -> TrainingSet:
    arr = read_numeric_csv(path)
    if arr.shape[1] < 2:
        raise CLIError("E_FORMAT", f"{path}: need at least one input column and a target column")
    return TrainingSet(arr[:, :-1], arr[:, -1])


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        atomic_write_text(out, text)
    except OSError as exc:
        raise CLIError("E_IO", f"cannot write {out}: {exc.strerror or exc}") from None


def _domain_diameter(xs):
    if xs.shape[0] < 2:
        return 0.0
    return float(np.max(pdist(xs)))


def cmd_fit(args) -> int:
    data = read_dataset(args.data)
    if args.omega0 is None:
        diameter = _domain_diameter(data.xs)
        if diameter <= 0:
            raise CLIError("E_CONFIG", "cannot choose omega0 automatically for coincident inputs; pass --omega0")
        omega0 = suggest_omega0(diameter, args.margin)
        source = f"auto (margin {fmt(args.margin)} x diameter {fmt(diameter)})"
    else:
        omega0 = args.omega0
        source = "given"
    params = KernelParams(omega0, args.sigma2, args.mode)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConditioningWarning)
        model = fit(data, params)
    r = residuals(model, data)
    deviation = float(np.max(np.abs(r - params.sigma2 * model.lambda_)))
    try:
        save_model(model, args.out)
    except OSError as exc:
        raise CLIError("E_IO", f"cannot write {args.out}: {exc.strerror or exc}") from None
    print(f"k={data.k}")
    print(f"n={data.n}")
    print(f"omega0={fmt(omega0)} ({source}; period {fmt(period(omega0))})")
    print(f"mode={params.mode.value} sigma2={fmt(params.sigma2)}")
    print(f"condition_estimate={model.condition_estimate:.6g}")
    print(f"max_abs_residual={float(np.max(np.abs(r))):.6g}")
    print(f"residual_identity_max_deviation={deviation:.6g}")
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return 0


def cmd_predict(args) -> int:
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise CLIError("E_IO", f"cannot read {args.model}: {exc.strerror or exc}") from None
    if (args.input is None) == (args.point is None):
        raise CLIError("E_CONFIG", "give exactly one of --in or --point")
    if args.input is not None:
        q = read_numeric_csv(args.input)
    else:
        try:
            q = np.array([[float(v) for v in args.point.split(",")]])
        except ValueError:
            raise CLIError("E_FORMAT", f"--point must be comma-separated numbers, got {args.point!r}") from None
    if q.shape[1] != model.n:
        raise CLIError("E_DIM", f"query rows have {q.shape[1]} columns, model expects n={model.n}")
    pred = predict_batch(model, q)
    header = [f"x_{i + 1}" for i in range(model.n)] + ["prediction"]
    _emit(_csv_text(header, np.column_stack([q, pred])), args.out)
    return 0


def cmd_kernel_curve(args) -> int:
    if not (0 <= args.tau_min < args.tau_max) or not math.isfinite(args.tau_max):
        raise CLIError("E_CONFIG", f"need 0 <= tau_min < tau_max, got [{args.tau_min}, {args.tau_max}]")
    if args.steps < 2:
        raise CLIError("E_CONFIG", f"steps must be >= 2, got {args.steps}")
    params = KernelParams(args.omega0, 0.0, args.mode)
    tau = np.linspace(args.tau_min, args.tau_max, args.steps)
    cols = [tau, kernel_eval(tau, params)]
    header = ["tau", "k_f"]
    if params.mode is BCMode.EXACT:
        cols += [b_of_tau(tau, params.omega0), c_of_tau(tau, params.omega0)]
        header += ["b", "c"]
    _emit(_csv_text(header, np.column_stack(cols)), args.out)
    return 0


def cmd_sample(args) -> int:
    try:
        config = SpectralConfig(args.omega0, args.omega_max, args.delta_omega, seed=args.seed)
    except ConfigError as exc:
        raise CLIError("E_CONFIG", str(exc)) from None
    if args.x_count < 1 or not args.x_max >= args.x_min:
        raise CLIError("E_CONFIG", "grid needs x_count >= 1 and x_max >= x_min")
    grid = np.linspace(args.x_min, args.x_max, args.x_count)
    reals = sample_realizations(config, grid, args.count)
    header = ["x"] + [f"r{i}" for i in range(args.count)]
    _emit(_csv_text(header, np.column_stack([grid] + [r.values for r in reals])), args.out)
    return 0


def cmd_suggest_omega0(args) -> int:
    if (args.diameter is None) == (args.data is None):
        raise CLIError("E_CONFIG", "give exactly one of --diameter or --data")
    diameter = args.diameter if args.diameter is not None else _domain_diameter(read_dataset(args.data).xs)
    omega0 = suggest_omega0(diameter, args.margin)
    print(f"omega0={fmt(omega0)}")
    print(f"period={fmt(period(omega0))}")
    print(f"diameter={fmt(diameter)} margin={fmt(args.margin)}")
    return 0


def _mode(value):
    try:
        return BCMode.parse(value)
    except PolysplineError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polyspline", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model to a CSV dataset (columns x_1..x_n, y)")
    p.add_argument("--data", required=True)
    p.add_argument("--omega0", type=float, default=None,
                   help="frequency cutoff; chosen from the data diameter when omitted")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN,
                   help="period/diameter ratio for the automatic omega0 (default %(default)s)")
    p.add_argument("--sigma2", type=float, default=0.0)
    p.add_argument("--mode", type=_mode, default=BCMode.CONSTANT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", default=None, help="CSV of query points")
    p.add_argument("--point", default=None, help="single query point, e.g. 0.5,1.5")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("kernel-curve", help="tabulate k_f(tau)")
    p.add_argument("--omega0", type=float, required=True)
    p.add_argument("--mode", type=_mode, default=BCMode.CONSTANT)
    p.add_argument("--tau-min", type=float, default=0.0)
    p.add_argument("--tau-max", type=float, required=True)
    p.add_argument("--steps", type=int, default=101)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_kernel_curve)

    p = sub.add_parser("sample", help="draw truncated-spectrum realizations on a grid")
    p.add_argument("--omega0", type=float, required=True)
    p.add_argument("--omega-max", type=float, default=None)
    p.add_argument("--delta-omega", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x-min", type=float, default=0.0)
    p.add_argument("--x-max", type=float, required=True)
    p.add_argument("--x-count", type=int, default=101)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("suggest-omega0", help="omega0 whose period is margin x the data diameter")
    p.add_argument("--diameter", type=float, default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    p.set_defaults(func=cmd_suggest_omega0)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CLIError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return exc.status
    except PolysplineError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return exc.exit_status


if __name__ == "__main__":
    sys.exit(main())
