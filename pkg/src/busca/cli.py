"""Command-line interface.

Every command reads plain-text or JSON Lines series, processes them in a
worker pool and writes one CSV (or JSONL) to ``--out``. Exit status is 0 on
success, 1 when some series failed (listed on standard error) and 2 on an
invalid invocation. Options can also be set through environment variables
named ``BUSCA_<COMMAND>_<OPTION>``, e.g. ``BUSCA_FIT_SEED=7``.
"""

from __future__ import annotations

import contextlib
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional

import click
import numpy as np

from .anomaly import anomaly_scores, fit_robust_gaussian
from .burst import detect_bursts
from .classify import classify
from .core import BuscaError, Label, MixtureParams, Verdict
from .disentangle import DEFAULT_REPLICATIONS, disentangle
from .estimate import EmConfig, delta_metric, fit_em
from .fileio import (CsvSink, read_csv, read_series_file,
                     series_to_json, write_jsonl)
from .hawkes import compare_aic, fit_hawkes
from .likelihood import DEFAULT_TRUNCATION_DEPTH
from .simulate import (HawkesParams, pick_params_for_psi, simulate_hawkes,
                       simulate_mixture, simulate_poisson, simulate_sfp)

DELTA_CENSOR = 5.0

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


def series_seed(seed: Optional[int], index: int) -> Optional[int]:
    """Per-series seed, independent of worker count and scheduling."""
    if seed is None:
        return None
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def run_pool(func: Callable, items: List, workers: int) -> Iterable:
    if workers <= 1 or len(items) <= 1:
        return map(func, items)
    pool = ProcessPoolExecutor(max_workers=workers)
    chunk = max(1, len(items) // (4 * workers))
    return _closing_map(pool, func, items, chunk)


def _closing_map(pool, func, items, chunk):
    with pool:
        yield from pool.map(func, items, chunksize=chunk)


def _guarded(func):
    """Turn per-series exceptions into ``("error", message)`` results."""
    def wrapper(task):
        sid = task[0].id
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return sid, "ok", func(*task)
        except (BuscaError, ValueError, ArithmeticError) as exc:
            return sid, "error", f"{type(exc).__name__}: {exc}"
    wrapper.__name__ = func.__name__
    return wrapper


# --- per-series tasks (module level so worker processes can import them) ---

def _config(opts, seed):
    return EmConfig(max_iterations=opts["max_iters"], refine_mu=opts["refine_mu"],
                    refine_replications=opts["replications"], seed=seed,
                    truncation_depth=opts["truncation_depth"])


def _fit_rows(series, opts, seed):
    f = fit_em(series, _config(opts, seed))
    return [[series.id, f.lambda_p, f.mu, f.psi, f.log_likelihood, f.em_iterations,
             f.converged, f.mu_refined]]


def _classify_rows(series, opts, seed):
    f = fit_em(series, _config(opts, seed))
    c = classify(series, f, opts["alpha"])
    return [[series.id, c.phi_p, c.phi_s, c.verdict, f.psi]]


def _disentangle_rows(series, opts, seed):
    f = fit_em(series, _config(opts, seed))
    lab = disentangle(series, f, opts["dis_replications"], seed)
    return [[series.id, t, Label(l).name] for t, l in zip(series.timestamps, lab.labels)]


def _goodness_rows(series, opts, seed):
    f = fit_em(series, _config(opts, seed))
    lab = disentangle(series, f, opts["dis_replications"], seed)
    return [[series.id, lab.r2_poisson, lab.r2_sfp]]


def _compare_rows(series, opts, seed):
    f = fit_em(series, _config(opts, seed))
    h = fit_hawkes(series)
    winner, a_b, a_h = compare_aic(series, f, h)
    return [[series.id, a_b, a_h, winner]]


def _burst_rows(series, opts, seed):
    f = fit_em(series, _config(opts, seed))
    segs, lab = detect_bursts(series, f, seed, opts["penalty"], opts["tau_threshold"],
                              opts["dis_replications"], return_labels=True)
    rows = [[series.id, s.t_start, s.t_end, s.sfp_count, s.tau, s.is_burst]
            for s in segs]
    return rows, json_labels(series.id, lab.labels)


TASKS = {name: _guarded(fn) for name, fn in {
    "fit": _fit_rows, "classify": _classify_rows, "disentangle": _disentangle_rows,
    "goodness": _goodness_rows, "compare": _compare_rows, "bursts": _burst_rows,
}.items()}

HEADERS = {
    "fit": ["id", "lambda_p", "mu", "psi", "loglik", "iterations", "converged",
            "mu_refined"],
    "classify": ["id", "phi_p", "phi_s", "verdict", "psi"],
    "disentangle": ["id", "timestamp", "label"],
    "goodness": ["id", "r2_pp", "r2_sfp"],
    "compare": ["id", "aic_busca", "aic_hawkes", "winner"],
    "bursts": ["id", "t_start", "t_end", "sfp_count", "tau", "is_burst"],
}


def _task_entry(args):
    name, series, opts, seed = args
    return TASKS[name]((series, opts, seed))


@contextlib.contextmanager
def _output(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _report(failures: List[str]) -> int:
    for msg in failures:
        click.echo(msg, err=True)
    return EXIT_PARTIAL if failures else EXIT_OK


def _run_command(name: str, in_path: str, out_path: str, opts: dict,
                 seed: Optional[int], workers: int) -> int:
    series, errors = read_series_file(in_path)
    failures = [f"error: {e}" for e in errors]
    tasks = [(name, s, opts, series_seed(seed, k)) for k, s in enumerate(series)]
    extras = []
    with _output(out_path) as fh:
        sink = CsvSink(fh, HEADERS[name])
        for sid, status, payload in run_pool(_task_entry, tasks, workers):
            if status != "ok":
                failures.append(f"error: {sid}: {payload}")
                continue
            if isinstance(payload, tuple):
                payload, extra = payload
                extras.append(extra)
            for row in payload:
                sink.write(row)
    if opts.get("labels_path"):
        write_jsonl(opts["labels_path"], extras)
    return _report(failures)


# --- click plumbing ---

def _common(f):
    f = click.option("--workers", default=1, show_default=True, type=click.IntRange(1),
                     help="Worker processes.")(f)
    f = click.option("--seed", type=int, default=None, help="Base random seed.")(f)
    f = click.option("--out", "out_path", default="-", show_default=True,
                     type=click.Path(dir_okay=False, allow_dash=True),
                     help="Output file ('-' for stdout).")(f)
    f = click.option("--in", "in_path", required=True,
                     type=click.Path(exists=True, dir_okay=False),
                     help="Input series (plain text or JSON Lines).")(f)
    return f


def _fit_options(f):
    f = click.option("--max-iters", default=100, show_default=True,
                     type=click.IntRange(1))(f)
    f = click.option("--truncation-depth", default=DEFAULT_TRUNCATION_DEPTH,
                     show_default=True, type=click.IntRange(1))(f)
    f = click.option("--replications", default=30, show_default=True,
                     type=click.IntRange(1), help="Deletion passes for the mu correction.")(f)
    f = click.option("--refine-mu/--no-refine-mu", default=True, show_default=True)(f)
    return f


def _opts(**kw):
    base = dict(alpha=0.05, dis_replications=DEFAULT_REPLICATIONS, penalty=None,
                tau_threshold=1.0)
    base.update(kw)
    return base


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact")
def cli():
    """Fit and use the Poisson plus self-feeding mixture on event series."""


@cli.command()
@click.option("--model", type=click.Choice(["mixture", "poisson", "sfp", "hawkes"]),
              default="mixture", show_default=True)
@click.option("--psi", type=click.FloatRange(0, 100, max_open=True), default=None,
              help="Target SFP percentage (mixture only; calibrates lambda_p and mu).")
@click.option("--n", "n_target", type=click.IntRange(10), default=1000, show_default=True,
              help="Target event count used with --psi.")
@click.option("--lambda-p", type=float, default=None)
@click.option("--mu", type=float, default=None)
@click.option("--alpha", "h_alpha", type=float, default=0.5, show_default=True,
              help="Hawkes branching ratio.")
@click.option("--beta", "h_beta", type=float, default=1.0, show_default=True,
              help="Hawkes decay rate.")
@click.option("--series", "n_series", type=click.IntRange(1), default=1, show_default=True)
@click.option("--window-length", type=click.FloatRange(0, min_open=True), default=1000.0,
              show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="JSON Lines output.")
@click.option("--labels", "labels_path", default=None, type=click.Path(dir_okay=False),
              help="Ground-truth label sidecar (default: <out>.labels.jsonl).")
def simulate(model, psi, n_target, lambda_p, mu, h_alpha, h_beta, n_series,
             window_length, seed, out_path, labels_path):
    """Write synthetic series as JSON Lines."""
    a, b = 0.0, window_length
    if model == "mixture":
        if psi is not None:
            params = pick_params_for_psi(psi, n_target, (a, b))
        elif lambda_p is not None and mu is not None:
            params = MixtureParams(lambda_p, mu)
        else:
            raise click.UsageError("mixture needs --psi or both --lambda-p and --mu")
    elif model in ("poisson", "hawkes") and lambda_p is None:
        raise click.UsageError(f"{model} needs --lambda-p")
    elif model == "sfp" and mu is None:
        raise click.UsageError("sfp needs --mu")
    records, labels, failures = [], [], []
    for k in range(n_series):
        s_seed = series_seed(seed, k)
        sid = f"series-{k}"
        try:
            if model == "mixture":
                s, lab = simulate_mixture(params, a, b, s_seed, id=sid)
                labels.append(json_labels(sid, lab.labels))
            elif model == "poisson":
                s = simulate_poisson(lambda_p, a, b, s_seed, id=sid)
            elif model == "sfp":
                s = simulate_sfp(mu, a, b, s_seed, id=sid)
            else:
                s = simulate_hawkes(HawkesParams(lambda_p, h_alpha, h_beta), a, b,
                                    s_seed, id=sid)
        except BuscaError as exc:
            failures.append(f"error: {sid}: {exc}")
            continue
        records.append(series_to_json(s))
    write_jsonl(out_path, records)
    if labels:
        write_jsonl(labels_path or _sidecar(out_path), labels)
    sys.exit(_report(failures))


def json_labels(sid, labels) -> str:
    return json.dumps({"id": sid, "labels": [int(v) for v in labels]})


def _sidecar(path: str) -> str:
    stem = path[:-6] if path.endswith(".jsonl") else path
    return stem + ".labels.jsonl"


@cli.command()
@_common
@_fit_options
def fit(in_path, out_path, seed, workers, refine_mu, replications, truncation_depth,
        max_iters):
    """Fit lambda_p and mu for each series."""
    opts = _opts(refine_mu=refine_mu, replications=replications,
                 truncation_depth=truncation_depth, max_iters=max_iters)
    sys.exit(_run_command("fit", in_path, out_path, opts, seed, workers))


@cli.command("classify")
@_common
@_fit_options
@click.option("--alpha", type=click.FloatRange(0, 1, min_open=True, max_open=True),
              default=0.05, show_default=True)
def classify_cmd(in_path, out_path, seed, workers, refine_mu, replications,
                 truncation_depth, max_iters, alpha):
    """Likelihood-ratio verdict per series."""
    opts = _opts(refine_mu=refine_mu, replications=replications,
                 truncation_depth=truncation_depth, max_iters=max_iters, alpha=alpha)
    sys.exit(_run_command("classify", in_path, out_path, opts, seed, workers))


def _labelling_command(name, doc):
    @_common
    @_fit_options
    @click.option("--dis-replications", default=DEFAULT_REPLICATIONS, show_default=True,
                  type=click.IntRange(1), help="Disentangling replications.")
    def command(in_path, out_path, seed, workers, refine_mu, replications,
                truncation_depth, max_iters, dis_replications):
        opts = _opts(refine_mu=refine_mu, replications=replications,
                     truncation_depth=truncation_depth, max_iters=max_iters,
                     dis_replications=dis_replications)
        sys.exit(_run_command(name, in_path, out_path, opts, seed, workers))
    command.__doc__ = doc
    return cli.command(name)(command)


_labelling_command("disentangle", "Per-event Poisson/SFP labels.")
_labelling_command("goodness", "R^2 diagnostics of the two disentangled components.")


@cli.command()
@_common
@_fit_options
def compare(in_path, out_path, seed, workers, refine_mu, replications, truncation_depth,
            max_iters):
    """AIC of the mixture against an exponential-kernel Hawkes fit."""
    opts = _opts(refine_mu=refine_mu, replications=replications,
                 truncation_depth=truncation_depth, max_iters=max_iters)
    sys.exit(_run_command("compare", in_path, out_path, opts, seed, workers))


@cli.command()
@_common
@_fit_options
@click.option("--dis-replications", default=DEFAULT_REPLICATIONS, show_default=True,
              type=click.IntRange(1))
@click.option("--tau-threshold", type=click.FloatRange(0), default=1.0, show_default=True)
@click.option("--penalty", type=click.FloatRange(0), default=None,
              help="Per-segment cost (default: single-fit residual variance / 20).")
@click.option("--labels", "labels_path", default=None, type=click.Path(dir_okay=False),
              help="Also write the disentangled labels as JSON Lines.")
def bursts(in_path, out_path, seed, workers, refine_mu, replications, truncation_depth,
           max_iters, dis_replications, tau_threshold, penalty, labels_path):
    """Segment each series and score burst power."""
    opts = _opts(refine_mu=refine_mu, replications=replications,
                 truncation_depth=truncation_depth, max_iters=max_iters,
                 dis_replications=dis_replications, tau_threshold=tau_threshold,
                 penalty=penalty, labels_path=labels_path)
    sys.exit(_run_command("bursts", in_path, out_path, opts, seed, workers))


@cli.command()
@click.option("--fits", "fits_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="CSV from `fit`.")
@click.option("--verdicts", "verdicts_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="CSV from `classify`.")
@click.option("--alpha", type=click.FloatRange(0, 1, min_open=True, max_open=True),
              default=0.01, show_default=True)
@click.option("--out", "out_path", default="-", show_default=True,
              type=click.Path(dir_okay=False, allow_dash=True))
def anomalies(fits_path, verdicts_path, alpha, out_path):
    """Flag mixed series far from the corpus cloud in (log lambda_p, log mu)."""
    verdicts = {r["id"]: r["verdict"] for r in read_csv(verdicts_path)}
    ids, points, failures, skipped = [], [], [], 0
    for row in read_csv(fits_path):
        sid = row["id"]
        if verdicts.get(sid) != Verdict.MIXED.value:
            skipped += 1
            continue
        try:
            lam, mu = float(row["lambda_p"]), float(row["mu"])
        except (KeyError, ValueError) as exc:
            failures.append(f"error: {sid}: bad fit row ({exc})")
            continue
        if not (lam > 0 and 0 < mu < math.inf):
            failures.append(f"error: {sid}: parameters outside the log domain")
            continue
        ids.append(sid)
        points.append((math.log(lam), math.log(mu)))
    if skipped:
        click.echo(f"note: {skipped} non-mixed series excluded", err=True)
    try:
        model = fit_robust_gaussian(np.array(points).reshape(-1, 2))
    except BuscaError as exc:
        click.echo(f"error: cannot fit the corpus model: {exc}", err=True)
        sys.exit(EXIT_PARTIAL)
    d2, flag = anomaly_scores(np.array(points), model, alpha)
    with _output(out_path) as fh:
        sink = CsvSink(fh, ["id", "log_lambda_p", "log_mu", "d2", "is_anomalous"])
        for sid, (x, y), d, f in zip(ids, points, d2, flag):
            sink.write([sid, x, y, d, bool(f)])
    sys.exit(_report(failures))


# --- evaluation harness ---

def _censor(x: float) -> float:
    return float(np.clip(x, -DELTA_CENSOR, DELTA_CENSOR))


def _eval_cell(args):
    n, psi, rep, params, window, seed, opts = args
    try:
        series, _ = simulate_mixture(params, window[0], window[1], seed)
        f = fit_em(series, _config(opts, seed))
        c = classify(series, f, opts["alpha"])
        lam = f.lambda_p if f.lambda_p > 0 else 1e-12
        return ("ok", [n, psi, rep, _censor(delta_metric(lam, params.lambda_p)),
                       _censor(delta_metric(f.mu_em, params.mu)),
                       _censor(delta_metric(f.mu, params.mu)), c.phi_p, c.phi_s])
    except (BuscaError, ValueError, ArithmeticError) as exc:
        return ("error", f"n={n} psi={psi} rep={rep}: {exc}")


def eval_tasks(ns, psis, reps, window, seed, opts):
    tasks = []
    for n in ns:
        for psi in psis:
            params = pick_params_for_psi(psi, n, window)
            for rep in range(reps):
                tasks.append((n, psi, rep, params, window,
                              _cell_seed(seed, n, psi, rep), opts))
    return tasks


def _cell_seed(seed, n, psi, rep):
    base = 0 if seed is None else seed
    key = [base, int(n), int(round(psi * 1000)), int(rep)]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


@cli.command("eval")
@click.option("--n", "ns", multiple=True, type=click.IntRange(10), default=(200, 1000),
              show_default=True)
@click.option("--psi", "psis", multiple=True, type=click.FloatRange(0, 100, min_open=True,
              max_open=True), default=(25.0, 50.0, 75.0), show_default=True)
@click.option("--reps", type=click.IntRange(1), default=50, show_default=True)
@click.option("--window-length", type=click.FloatRange(0, min_open=True), default=1000.0,
              show_default=True)
@click.option("--alpha", type=click.FloatRange(0, 1, min_open=True, max_open=True),
              default=0.05, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", default=1, show_default=True, type=click.IntRange(1))
@click.option("--out", "out_path", default="-", show_default=True,
              type=click.Path(dir_okay=False, allow_dash=True))
@_fit_options
def eval_cmd(ns, psis, reps, window_length, alpha, seed, workers, out_path, refine_mu,
             replications, truncation_depth, max_iters):
    """Simulate a (n, psi) grid, fit every series and report estimation errors."""
    opts = _opts(refine_mu=refine_mu, replications=replications,
                 truncation_depth=truncation_depth, max_iters=max_iters, alpha=alpha)
    tasks = eval_tasks(ns, psis, reps, (0.0, window_length), seed, opts)
    failures = []
    with _output(out_path) as fh:
        sink = CsvSink(fh, ["n", "psi", "rep", "delta_lambda", "delta_mu_em",
                            "delta_mu_refined", "phi_p", "phi_s"])
        for status, payload in run_pool(_eval_cell, tasks, workers):
            if status == "ok":
                sink.write(payload)
            else:
                failures.append(f"error: {payload}")
    sys.exit(_report(failures))


def main(argv=None):
    cli.main(args=argv, prog_name="busca", auto_envvar_prefix="BUSCA")


if __name__ == "__main__":
    main()
