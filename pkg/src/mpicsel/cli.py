"""Command-line front end.

Subcommands: ``select``, ``simulate``, ``whiten-select``, ``diagnose``.
Options may also come from a flat JSON object passed with ``--config``;
command-line flags override file values.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 no scoreable
model.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .criteria import (
    AIC,
    AICc,
    BIC,
    GIC,
    MPIC,
    BetaPosterior,
    InversePower,
    PowerAlpha,
    PriorKind,
    RatioPower,
    Score,
)
from .diagnostics import check_design_assumption, check_weight_conditions
from .errors import (
    DataError,
    DegenerateResiduals,
    NoScoreableModel,
    RankDeficient,
    SigmaNotPD,
    TooManyModels,
)
from .plotting import line_plot_svg
from .prewhiten import whiten_select
from .regression import Dataset, ModelIndex
from .selection import (
    Explicit,
    ForcedSubsets,
    Nested,
    SkipReason,
    _reduce,
    _score_all,
    enumerate_models,
    fit_family,
)
from .simulation import (
    ChiSq,
    ContaminatedNormal,
    EPSILON_GRID,
    Gaussian,
    Laplace,
    SimConfig,
    StudentT,
    default_true_model,
    design_rng,
    epsilon_criteria,
    gen_design,
    gen_response,
    nonnested_family,
    run_simulation,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_EMPTY = 0, 2, 3, 4


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# formatting and I/O
# ---------------------------------------------------------------------------

def fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: List[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def _split_names(value, key: str) -> List[str]:
    if isinstance(value, (list, tuple)):
        names = [str(v).strip() for v in value]
    else:
        names = [v.strip() for v in str(value).split(",")]
    names = [v for v in names if v]
    if not names:
        raise ConfigError(f"{key}: expected a comma-separated list")
    return names


def read_table(path: str, response_cols: List[str], predictor_cols: List[str],
               time_col: Optional[str] = None, add_intercept: bool = False) -> Dataset:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"data: cannot open {path}: {err}") from err
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        body = list(reader)
    used = response_cols + predictor_cols + ([time_col] if time_col else [])
    for c in used:
        if c not in header:
            key = "response_cols" if c in response_cols else "predictor_cols" if c in predictor_cols else "time_col"
            raise ConfigError(f"{key}: column {c!r} not in {path}")
    pos = {c: header.index(c) for c in used}
    values = {c: [] for c in used}
    for r, row in enumerate(body, start=2):
        if not any(cell.strip() for cell in row):
            continue
        for c in used:
            cell = row[pos[c]].strip() if pos[c] < len(row) else ""
            if cell == "":
                raise DataError(f"missing value at row {r}, column {c!r}")
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"non-numeric value {cell!r} at row {r}, column {c!r}") from None
            if not math.isfinite(v):
                raise DataError(f"non-finite value {cell!r} at row {r}, column {c!r}")
            values[c].append(v)
    Y = np.column_stack([values[c] for c in response_cols])
    X = np.column_stack([values[c] for c in predictor_cols])
    names = list(predictor_cols)
    if time_col:
        order = np.argsort(np.asarray(values[time_col]), kind="stable")
        Y, X = Y[order], X[order]
    if add_intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
        names = ["const"] + names
    return Dataset(Y, X, tuple(names))


# ---------------------------------------------------------------------------
# option parsing
# ---------------------------------------------------------------------------

_COMMON = {"config", "family", "criteria", "prior", "weight", "epsilon", "gic_beta", "out"}
_DATA = {"data", "response_cols", "predictor_cols", "add_intercept"}
ALLOWED = {
    "select": _COMMON | _DATA,
    "simulate": _COMMON | {"mode", "grid", "reps", "seed", "error", "k", "fixed_design"},
    "whiten-select": _COMMON | _DATA | {"split_index", "time_col", "rho"},
    "diagnose": _COMMON | _DATA | {"synthetic", "seed", "p", "grid", "k_star", "k_j", "gamma"},
}
DEFAULTS = {
    "family": "nested",
    "criteria": "AIC,AICc,BIC,GIC,MPIC",
    "prior": "approx",
    "weight": "ratio",
    "epsilon": None,
    "gic_beta": "auto",
    "add_intercept": False,
    "reps": 100,
    "seed": 0,
    "error": "gaussian",
    "k": None,
    "fixed_design": False,
    "p": 2,
    "k_star": 5,
    "k_j": 6,
    "gamma": 0,
    "split_index": None,
    "time_col": None,
    "rho": None,
}


def _load_config(path: str, command: str) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"config: cannot read {path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a flat JSON object")
    out = {}
    for key, val in raw.items():
        k = str(key).replace("-", "_")
        if k not in ALLOWED[command] or k == "config":
            raise ConfigError(f"{key}: unknown key for '{command}'")
        if isinstance(val, dict):
            raise ConfigError(f"{key}: nested values are not allowed")
        out[k] = val
    return out


def _merge(ns: argparse.Namespace) -> Dict[str, Any]:
    command = ns.command
    flags = {k: v for k, v in vars(ns).items() if k != "command"}
    opts = {k: v for k, v in DEFAULTS.items() if k in ALLOWED[command]}
    if "config" in flags:
        opts.update(_load_config(flags.pop("config"), command))
    opts.update(flags)
    opts["command"] = command
    return opts


def _as_int(opts, key, minimum=None) -> int:
    try:
        v = int(opts[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {opts.get(key)!r}") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {v}")
    return v


def _as_float(opts, key) -> Optional[float]:
    if opts.get(key) is None:
        return None
    try:
        return float(opts[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {opts[key]!r}") from None


def parse_grid(text) -> List[tuple]:
    pts = []
    for part in str(text).replace(" ", "").split(";"):
        if not part:
            continue
        try:
            n, p = part.split(":")
            pts.append((int(n), int(p)))
        except ValueError:
            raise ConfigError(f"grid: bad point {part!r}, expected n:p") from None
    if not pts:
        raise ConfigError("grid: no points given")
    for n, p in pts:
        if n < 2 or p < 1:
            raise ConfigError(f"grid: invalid point {n}:{p}")
    return pts


def _weight(opts):
    name = str(opts["weight"]).lower()
    eps = _as_float(opts, "epsilon")
    if eps is not None and not eps > 0:
        raise ConfigError(f"epsilon: must be positive, got {eps}")
    prior = _prior(opts)
    if name == "ratio":
        return RatioPower(0.499 if eps is None else eps)
    if name == "inverse":
        return InversePower(0.5 if eps is None else eps)
    if name in ("beta-posterior", "beta_posterior"):
        e = 0.499 if eps is None else eps
        return BetaPosterior(PowerAlpha(e), e, prior)
    raise ConfigError(f"weight: unknown scheme {opts['weight']!r}")


def _prior(opts) -> PriorKind:
    try:
        return PriorKind(str(opts["prior"]).lower())
    except ValueError:
        raise ConfigError(f"prior: unknown prior {opts['prior']!r}") from None


def parse_criteria(opts) -> list:
    beta = str(opts.get("gic_beta", "auto")).lower()
    if beta == "auto":
        gic_beta = None
    else:
        try:
            gic_beta = float(beta)
        except ValueError:
            raise ConfigError(f"gic_beta: expected a number or 'auto', got {beta!r}") from None
    specs = []
    for name in _split_names(opts["criteria"], "criteria"):
        key = name.lower()
        if key == "aic":
            specs.append(AIC())
        elif key in ("aicc", "exact-aic"):
            specs.append(AICc())
        elif key == "bic":
            specs.append(BIC())
        elif key == "gic":
            specs.append(GIC(gic_beta))
        elif key == "mpic":
            specs.append(MPIC(_prior(opts), _weight(opts)))
        elif key.startswith("mpic_"):
            try:
                prior = PriorKind(key[5:])
            except ValueError:
                raise ConfigError(f"criteria: unknown criterion {name!r}") from None
            specs.append(MPIC(prior, _weight(opts)))
        else:
            raise ConfigError(f"criteria: unknown criterion {name!r}")
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"criteria: duplicate entries in {labels}")
    return specs


def parse_family(text, k: int):
    text = str(text).strip()
    if text == "nested":
        return Nested(k)
    if text.startswith("nested:"):
        try:
            return Nested(int(text[7:]))
        except ValueError:
            raise ConfigError(f"family: bad nested size in {text!r}") from None
    if text.startswith("forced:"):
        try:
            forced = tuple(int(i) for i in text[7:].split(",") if i.strip())
        except ValueError:
            raise ConfigError(f"family: bad index list in {text!r}") from None
        if any(i < 0 or i >= k for i in forced):
            raise ConfigError(f"family: forced index out of range 0..{k - 1}")
        free = tuple(i for i in range(k) if i not in forced)
        return ForcedSubsets(forced, free)
    if text.startswith("explicit:"):
        path = text[9:]
        models = []
        try:
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line and not line.startswith("#"):
                        models.append(ModelIndex.of(int(i) for i in line.replace(" ", "").split(",")))
        except (OSError, ValueError) as err:
            raise ConfigError(f"family: cannot read explicit models from {path}: {err}") from err
        if not models:
            raise ConfigError(f"family: {path} lists no models")
        return Explicit(tuple(models))
    raise ConfigError(f"family: unknown family {text!r}")


def _require(opts, *keys):
    for k in keys:
        if opts.get(k) in (None, ""):
            raise ConfigError(f"{k}: required")


def _load_dataset(opts, with_time=False) -> Dataset:
    _require(opts, "data", "response_cols", "predictor_cols")
    return read_table(
        str(opts["data"]),
        _split_names(opts["response_cols"], "response_cols"),
        _split_names(opts["predictor_cols"], "predictor_cols"),
        time_col=opts.get("time_col") if with_time else None,
        add_intercept=bool(opts.get("add_intercept")),
    )


def _model_label(m: ModelIndex, names: Sequence[str]) -> str:
    return "+".join(names[i] for i in m.indices)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_select(opts) -> int:
    _require(opts, "out")
    specs = parse_criteria(opts)
    data = _load_dataset(opts)
    family = parse_family(opts["family"], data.k)
    empty = []
    models = enumerate_models(family, data.k)
    fits = fit_family(data, models)
    if all(isinstance(f, SkipReason) for f in fits.values()):
        # every candidate failed to fit: a property of the data, not of a criterion
        raise DataError("no candidate model could be fitted: "
                        + "; ".join(f"{m}: {f}" for m, f in fits.items()))
    rows = []
    for spec in specs:
        scores = _score_all(data, models, spec, fits)
        try:
            rep = _reduce(scores, spec)
            best = rep.best
            print(f"{spec.label}: best model {_model_label(best, data.col_names)}")
        except NoScoreableModel:
            empty.append(spec.label)
            best = None
            print(f"{spec.label}: no scoreable model", file=sys.stderr)
        ok = sorted((m for m, s in scores.items() if isinstance(s, Score)),
                    key=lambda m: (scores[m].value, m.sort_key()))
        bad = [m for m, s in scores.items() if isinstance(s, SkipReason)]
        for m in ok:
            s = scores[m]
            rows.append([spec.label, _model_label(m, data.col_names), m.k_j, s.neg2loglik,
                         s.penalty, s.value, m == best, ""])
        for m in bad:
            rows.append([spec.label, _model_label(m, data.col_names), m.k_j, None, None, None,
                         False, str(scores[m])])
    write_csv(Path(opts["out"]),
              ["criterion", "model", "k_j", "neg2loglik", "penalty", "value", "selected", "skip_reason"],
              rows)
    return EXIT_EMPTY if empty else EXIT_OK


_ROBUST = (Laplace(), StudentT(), ChiSq(), ContaminatedNormal())
_ERRORS = {"gaussian": Gaussian(), "laplace": Laplace(), "student_t": StudentT(),
           "chisq": ChiSq(), "chisq_raw": ChiSq(centered=False), "contaminated": ContaminatedNormal()}


def cmd_simulate(opts) -> int:
    _require(opts, "mode", "grid", "out")
    mode = str(opts["mode"])
    if mode not in ("prob", "eff", "robust", "epsilon-sweep"):
        raise ConfigError(f"mode: unknown mode {mode!r}")
    grid = parse_grid(opts["grid"])
    reps = _as_int(opts, "reps", 1)
    seed = _as_int(opts, "seed")
    fam_text = str(opts["family"])
    if fam_text == "nonnested":
        k = _as_int(opts, "k", 2) if opts.get("k") is not None else 8
        family = nonnested_family(k)
    else:
        k = _as_int(opts, "k", 1) if opts.get("k") is not None else 10
        family = parse_family(fam_text, k)
    if k < 5:
        raise ConfigError("k: the true model needs at least 5 design columns")
    for n, _ in grid:
        if n <= k:
            raise ConfigError(f"grid: n={n} must exceed k={k}")
    if mode == "epsilon-sweep":
        specs = epsilon_criteria(EPSILON_GRID)
    else:
        specs = parse_criteria(opts)
    err_name = str(opts["error"]).lower()
    if err_name not in _ERRORS:
        raise ConfigError(f"error: unknown distribution {opts['error']!r}")

    if mode == "robust":
        experiments = [(f"robust_{d.label}", d) for d in _ROBUST]
    elif mode == "epsilon-sweep":
        experiments = [("epsilon_sweep", _ERRORS[err_name])]
    else:
        experiments = [(mode, _ERRORS[err_name])]
    metric = "efficiency" if mode == "eff" else "probability"
    out_dir = Path(opts["out"])

    results = []
    for name, dist in experiments:
        rows = []
        for n, p in grid:
            cfg = SimConfig(n=n, p=p, k=k, reps=reps, seed=seed, family=family,
                            criteria=specs, error=dist,
                            redraw_X_each_rep=not bool(opts.get("fixed_design")))
            res = run_simulation(cfg, efficiency=(mode == "eff"))
            values = res.efficiency if mode == "eff" else res.probability
            for spec in specs:
                rows.append([n, p, spec.label, values[spec.label], reps, seed])
        results.append((name, rows))

    for name, rows in results:
        write_csv(out_dir / f"{name}.csv", ["n", "p", "criterion", metric, "reps", "seed"], rows)
        series: Dict[str, list] = {}
        for n, p, lab, v, _, _ in rows:
            series.setdefault(lab, []).append((float(n), float(v)))
        ylim = (0.0, 1.0) if metric == "probability" else None
        svg = line_plot_svg(series, f"{name} ({metric})", "n", metric, ylim=ylim)
        (out_dir / f"{name}.svg").write_text(svg, encoding="utf-8")
        print(f"wrote {out_dir / (name + '.csv')}")
    return EXIT_OK


def cmd_whiten_select(opts) -> int:
    _require(opts, "out")
    specs = parse_criteria(opts)
    data = _load_dataset(opts, with_time=True)
    family = parse_family(opts["family"], data.k)
    split = opts.get("split_index")
    if split is not None:
        split = _as_int(opts, "split_index")
        if not data.k + 2 <= split < data.n:
            raise ConfigError(f"split_index: must be in [{data.k + 2}, {data.n - 1}], got {split}")
    rho = _as_float(opts, "rho")
    if rho is not None and not abs(rho) < 1:
        raise ConfigError(f"rho: must satisfy |rho| < 1, got {rho}")
    rows, empty = [], False
    for spec in specs:
        try:
            res = whiten_select(data, family, spec, split_at=split, rho=rho)
        except NoScoreableModel:
            empty = True
            rows.append([spec.label, rho] + [None] * data.k + [None])
            continue
        rho = res.rho_hat
        chosen = set(res.report.best.indices)
        rows.append([spec.label, res.rho_hat] + [int(i in chosen) for i in range(data.k)]
                    + [res.prediction_error])
        print(f"{spec.label}: best model {_model_label(res.report.best, data.col_names)}")
    if rho is not None:
        print(f"rho_hat = {fmt(rho)}")
    write_csv(Path(opts["out"]),
              ["criterion", "rho_hat"] + list(data.col_names) + ["prediction_error"], rows)
    return EXIT_EMPTY if empty else EXIT_OK


def cmd_diagnose(opts) -> int:
    _require(opts, "out", "grid")
    if opts.get("synthetic"):
        try:
            n, k = (int(v) for v in str(opts["synthetic"]).split(":"))
        except ValueError:
            raise ConfigError(f"synthetic: expected n:k, got {opts['synthetic']!r}") from None
        if k < 5 or n <= k:
            raise ConfigError("synthetic: need k >= 5 and n > k")
        p = _as_int(opts, "p", 1)
        rng = design_rng(_as_int(opts, "seed"))
        X = gen_design(n, k, rng)
        Y = gen_response(X, default_true_model(p), Gaussian(), rng)
        data = Dataset(Y, X)
    else:
        data = _load_dataset(opts)
    family = parse_family(opts["family"], data.k)
    check = check_design_assumption(data, family)
    report = check_weight_conditions(_weight(opts), parse_grid(opts["grid"]),
                                     _as_int(opts, "k_star", 1), _as_int(opts, "k_j", 1),
                                     _as_int(opts, "gamma", 0))
    out_dir = Path(opts["out"])
    write_csv(out_dir / "design.csv", ["model", "k_j", "logdet", "det", "flagged"],
              [[_model_label(r.model, data.col_names), r.model.k_j, r.logdet, r.det, r.flagged]
               for r in check.rows])
    write_csv(out_dir / "design_summary.csv", ["key", "value"],
              [["lambda_min", check.lambda_min], ["n_flagged", len(check.flagged)]])
    write_csv(out_dir / "conditions.csv",
              ["condition", "n", "p", "log_weight_ratio", "value", "threshold", "applies", "verdict"],
              [[r.condition, r.n, r.p, r.log_weight_ratio, r.value, r.threshold, r.applies,
                report.verdicts[r.condition]] for r in report.rows])
    for m in check.flagged:
        print(f"flagged: {_model_label(m, data.col_names)}")
    print(f"lambda_min(X^T X / n) = {fmt(check.lambda_min)}")
    return EXIT_OK


COMMANDS = {
    "select": cmd_select,
    "simulate": cmd_simulate,
    "whiten-select": cmd_whiten_select,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="mpicsel", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=S, help="flat JSON file of option values")
        p.add_argument("--family", default=S, help="nested | nested:<k> | forced:<idx,...> | explicit:<file>")
        p.add_argument("--criteria", default=S, help="comma list of AIC,AICc,BIC,GIC,MPIC,MPIC_Normal,MPIC_Uniform")
        p.add_argument("--prior", default=S, choices=["normal", "uniform", "approx"])
        p.add_argument("--weight", default=S, choices=["ratio", "inverse", "beta-posterior"])
        p.add_argument("--epsilon", default=S, type=float)
        p.add_argument("--gic-beta", dest="gic_beta", default=S, help="number or 'auto'")
        p.add_argument("--out", default=S)

    def data_opts(p):
        p.add_argument("--data", default=S, help="CSV with a header row")
        p.add_argument("--response-cols", dest="response_cols", default=S)
        p.add_argument("--predictor-cols", dest="predictor_cols", default=S)
        p.add_argument("--add-intercept", dest="add_intercept", action="store_true", default=S)

    p = sub.add_parser("select", help="score a candidate family on a CSV")
    common(p)
    data_opts(p)

    p = sub.add_parser("simulate", help="Monte Carlo selection experiments")
    common(p)
    p.add_argument("--mode", default=S, choices=["prob", "eff", "robust", "epsilon-sweep"])
    p.add_argument("--grid", default=S, help='"n:p;n:p;..."')
    p.add_argument("--reps", default=S, type=int)
    p.add_argument("--seed", default=S, type=int)
    p.add_argument("--error", default=S, choices=sorted(_ERRORS))
    p.add_argument("--k", default=S, type=int, help="design columns (10 nested, 8 nonnested)")
    p.add_argument("--fixed-design", dest="fixed_design", action="store_true", default=S)

    p = sub.add_parser("whiten-select", help="AR(1) pre-whitening then selection")
    common(p)
    data_opts(p)
    p.add_argument("--split-index", dest="split_index", default=S, type=int)
    p.add_argument("--time-col", dest="time_col", default=S)
    p.add_argument("--rho", default=S, type=float, help="fix rho instead of estimating it")

    p = sub.add_parser("diagnose", help="design and weight-condition diagnostics")
    common(p)
    data_opts(p)
    p.add_argument("--synthetic", default=S, help="n:k synthetic design")
    p.add_argument("--seed", default=S, type=int)
    p.add_argument("--p", default=S, type=int)
    p.add_argument("--grid", default=S)
    p.add_argument("--k-star", dest="k_star", default=S, type=int)
    p.add_argument("--k-j", dest="k_j", default=S, type=int)
    p.add_argument("--gamma", default=S, type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        opts = _merge(ns)
        return COMMANDS[opts["command"]](opts)
    except (ConfigError, TooManyModels) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, RankDeficient, SigmaNotPD, DegenerateResiduals) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except NoScoreableModel as err:
        print(f"no scoreable model: {err}", file=sys.stderr)
        return EXIT_EMPTY
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
