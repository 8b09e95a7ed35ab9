"""Implementations of the ``s5lab`` subcommands.

Each returns a process exit status: 0 on success, 1 when a verification check
fails, 2 on bad input (config, checkpoint or dataset errors are raised and
mapped to 2 by :func:`s5lab.cli.main.main`).
"""

import statistics
import sys
import time
from pathlib import Path

import numpy as np

from s5lab import checks
from s5lab.cli import checkpoint
from s5lab.cli.config import load_config
from s5lab.conv import fft_convolve, materialize_kernel
from s5lab.errors import RejectedInputError
from s5lab.rng import make_rng
from s5lab.scan import chunk_bounds, parallel_scan, sequential_scan
from s5lab.train.data import load_mnist_idx, make_irregular_task
from s5lab.train.loop import METRICS_HEADER, evaluate, fit
from s5lab.train.model import init_model

SUITES = {
    "scan": checks.scan_checks,
    "assoc": checks.assoc_checks,
    "hippo": checks.hippo_checks,
    "prop2": checks.prop2_checks,
    "corollary1": checks.corollary1_checks,
    "conv": checks.conv_checks,
    "grad": checks.grad_checks,
    "irregular": checks.irregular_checks,
}


def cmd_verify(selectors=None, out=None):
    out = out or sys.stdout
    names = list(selectors) if selectors else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise RejectedInputError(f"unknown suite(s) {unknown}; available: {', '.join(SUITES)}")
    failed = []
    total = 0
    for name in names:
        print(f"# suite {name}", file=out)
        if name == "corollary1":
            results = SUITES[name](report=lambda csv: out.write(csv))
        else:
            results = SUITES[name]()
        for r in results:
            print(r.line(), file=out)
            total += 1
            if not r.passed:
                failed.append(r.name)
    if failed:
        print(f"FAILED {len(failed)} of {total} checks: {', '.join(failed)}", file=out)
        return 1
    print(f"all {total} checks passed", file=out)
    return 0


BENCH_HEADER = "method,L,P,H,workers,chunk_size,repeats,seed,median_seconds,speedup_vs_sequential"


def _median_time(fn, repeats):
    fn()  # warm-up (also triggers JIT compilation)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_rows(lengths, P, H, workers_list, repeats=5, seed=0, conv=True):
    """Timing rows as dicts; the scan runs on an ``(L, P)`` complex system.

    The convolution baseline convolves ``H`` real feature channels of length
    ``L`` with materialized ``P``-state kernels, the work a bank of SISO
    systems does for the same layer width.
    """
    if min(P, H, repeats) < 1 or any(L < 1 for L in lengths) or any(w < 1 for w in workers_list):
        raise RejectedInputError("bench sizes, worker counts and repeats must be positive")
    rows = []
    for L in lengths:
        rng = make_rng(seed, 60, L, P)
        a = rng.uniform(0.5, 1.0, P) * np.exp(1j * rng.uniform(-np.pi, np.pi, P))
        bu = rng.standard_normal((L, P)) + 1j * rng.standard_normal((L, P))
        # one reused output buffer, so large-L timings do not include page faults
        out = np.empty_like(bu)
        t_seq = _median_time(lambda: sequential_scan(a, bu, out=out), repeats)
        rows.append(dict(method="sequential_scan", L=L, P=P, H=H, workers=1, chunk_size=L,
                         repeats=repeats, seed=seed, median_seconds=t_seq, speedup_vs_sequential=1.0))
        for w in workers_list:
            chunk = chunk_bounds(L, w)[0][1]
            t = _median_time(lambda: parallel_scan(a, bu, workers=w, out=out), repeats)
            rows.append(dict(method="parallel_scan", L=L, P=P, H=H, workers=w, chunk_size=chunk,
                             repeats=repeats, seed=seed, median_seconds=t,
                             speedup_vs_sequential=t_seq / t))
        if conv:
            u = rng.standard_normal((H, L))
            b = rng.standard_normal((H, P)) + 1j * rng.standard_normal((H, P))
            c = rng.standard_normal((H, P)) + 1j * rng.standard_normal((H, P))
            kernels = [materialize_kernel(a, b[h], c[h], L) for h in range(H)]

            def run_conv():
                for h in range(H):
                    fft_convolve(u[h], kernels[h])

            t = _median_time(run_conv, repeats)
            rows.append(dict(method="fft_conv_siso_bank", L=L, P=P, H=H, workers=1, chunk_size=L,
                             repeats=repeats, seed=seed, median_seconds=t,
                             speedup_vs_sequential=t_seq / t))
    return rows


def format_bench(rows):
    lines = [BENCH_HEADER]
    for r in rows:
        lines.append(",".join(
            f"{r[k]:.6e}" if k == "median_seconds" else f"{r[k]:.4f}" if k == "speedup_vs_sequential"
            else str(r[k]) for k in BENCH_HEADER.split(",")))
    return "\n".join(lines) + "\n"


def cmd_bench(lengths, P, H, workers_list, repeats=5, seed=0, out=None, conv=True):
    out = out or sys.stdout
    out.write(format_bench(bench_rows(lengths, P, H, workers_list, repeats, seed, conv)))
    return 0


def load_datasets(cfg):
    """``(train, test)`` datasets described by ``cfg``."""
    if cfg.dataset == "irregular":
        train = make_irregular_task(cfg.seed, cfg.train_items, cfg.seq_len, cfg.classes)
        test = make_irregular_task(cfg.seed, cfg.test_items, cfg.seq_len, cfg.classes,
                                   start_index=cfg.train_items)
        return train, test
    paths = [cfg.train_images, cfg.train_labels, cfg.test_images, cfg.test_labels]
    if not all(paths):
        raise RejectedInputError("mnist dataset needs train_images, train_labels, test_images, test_labels")
    for p in paths:
        if not cfg.path(p).is_file():
            raise FileNotFoundError(f"dataset file not found: {cfg.path(p)}")
    train = load_mnist_idx(cfg.path(cfg.train_images), cfg.path(cfg.train_labels),
                           limit=cfg.train_limit or None)
    test = load_mnist_idx(cfg.path(cfg.test_images), cfg.path(cfg.test_labels),
                          limit=cfg.test_limit or None)
    return train, test


def _eval_row(step, loss, acc, lr):
    return f"eval,{step},{loss:.10g},{acc:.10g},{lr:.10g}"


def cmd_train(config_path, out=None):
    out = out or sys.stdout
    cfg = load_config(config_path)
    train, test = load_datasets(cfg)
    mcfg = cfg.model_config()
    model = init_model(mcfg)
    metrics_path = cfg.path(cfg.metrics)
    rows = [METRICS_HEADER]

    def log_epoch(m):
        rows.append(m.csv_row())
        print(m.csv_row(), file=out, flush=True)

    print(METRICS_HEADER, file=out)
    history = fit(model, mcfg, cfg.optimizer_config(), train, cfg.batch, seed=cfg.seed,
                  workers=cfg.workers, callback=log_epoch)
    loss, acc = evaluate(model, mcfg, test, workers=cfg.workers)
    last = history[-1]
    row = _eval_row(last.step, loss, acc, last.lr)
    rows.append(row)
    print(row, file=out)
    Path(metrics_path).write_text("\n".join(rows) + "\n", encoding="utf-8")
    checkpoint.save(cfg.path(cfg.checkpoint), checkpoint.model_tensors(model))
    return 0


def cmd_eval(config_path, ckpt_path, out=None):
    out = out or sys.stdout
    cfg = load_config(config_path)
    tensors = checkpoint.load(ckpt_path)
    mcfg = cfg.model_config()
    model = checkpoint.load_into_model(init_model(mcfg), tensors)
    _, test = load_datasets(cfg)
    loss, acc = evaluate(model, mcfg, test, workers=cfg.workers)
    print(METRICS_HEADER, file=out)
    print(_eval_row(0, loss, acc, 0.0), file=out)
    return 0
