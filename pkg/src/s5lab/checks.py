"""Named numerical checks with thresholds.

Each function returns a list of :class:`CheckResult`. Default arguments are the
full-size settings used by both the ``verify`` command and the acceptance tests.
"""

from dataclasses import dataclass

import numpy as np

from s5lab import equivalence, scan
from s5lab.conv import siso_conv_vs_scan
from s5lab.discretize import zoh_terms
from s5lab.hippo import HippoSpec, diagonalize_normal, make_hippo_legs, make_hippo_normal, make_p_legs
from s5lab.layer import LayerConfig, init_layer, layer_forward
from s5lab.rng import make_rng

# sub-stream ids for check inputs
_STREAM_CHECKS = 50


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name}: {self.value:.3e} (threshold {self.threshold:.1e}){extra}"


def _le(name, value, threshold, detail=""):
    return CheckResult(name, float(value), float(threshold), bool(value <= threshold), detail)


def random_stable_system(rng, L, P):
    """Transitions with modulus in ``[0.5, 1)`` and complex Gaussian forcing."""
    a = rng.uniform(0.5, 1.0, P) * np.exp(1j * rng.uniform(-np.pi, np.pi, P))
    bu = rng.standard_normal((L, P)) + 1j * rng.standard_normal((L, P))
    return a, bu


def scan_checks(L_values=tuple(2 ** k for k in range(6, 15)), P_values=(2, 64), systems=50,
                workers=4, seed=0):
    """Parallel against sequential scan, relative to the largest state magnitude."""
    worst = 0.0
    for L in L_values:
        for P in P_values:
            rng = make_rng(seed, _STREAM_CHECKS, 1, L, P)
            for _ in range(systems):
                a, bu = random_stable_system(rng, L, P)
                ref = scan.sequential_scan(a, bu)
                par = scan.parallel_scan(a, bu, workers=workers)
                worst = max(worst, np.max(np.abs(par - ref)) / np.max(np.abs(ref)))
    return [_le("scan.parallel_vs_sequential", worst, 1e-12,
                f"L={min(L_values)}..{max(L_values)} P={list(P_values)} systems={systems}")]


def assoc_checks(n_triples=10_000, seed=0):
    """Both groupings of random element triples under :func:`scan.scan_binop`.

    Errors are scaled by the magnitude of the terms that are summed, so
    cancellation does not inflate the relative error.
    """
    rng = make_rng(seed, _STREAM_CHECKS, 2)

    def draw():
        a = rng.uniform(0.0, 1.0, n_triples) * np.exp(1j * rng.uniform(-np.pi, np.pi, n_triples))
        b = rng.standard_normal(n_triples) + 1j * rng.standard_normal(n_triples)
        return scan.ScanElement(a, b)

    e1, e2, e3 = draw(), draw(), draw()
    left = scan.scan_binop(scan.scan_binop(e1, e2), e3)
    right = scan.scan_binop(e1, scan.scan_binop(e2, e3))
    scale_a = np.abs(e1.a * e2.a * e3.a)
    scale_b = np.abs(e3.a * e2.a * e1.bu) + np.abs(e3.a * e2.bu) + np.abs(e3.bu)
    tiny = np.finfo(float).tiny
    err = max(np.max(np.abs(left.a - right.a) / np.maximum(scale_a, tiny)),
              np.max(np.abs(left.bu - right.bu) / np.maximum(scale_b, tiny)))
    return [_le("assoc.binop_groupings", err, 1e-12, f"triples={n_triples}")]


def hippo_checks(N_max=256):
    ident = 0.0
    off_real = 0
    unit = 0.0
    for N in range(1, N_max + 1):
        A, _ = make_hippo_legs(N)
        p = make_p_legs(N)
        An = make_hippo_normal(N)
        ident = max(ident, np.max(np.abs(A - (An - np.outer(p, p)))))
        lam, V = diagonalize_normal(An)
        off_real += int(np.count_nonzero(lam.real != -0.5))
        unit = max(unit, np.max(np.abs(V.conj().T @ V - np.eye(N))))
    return [
        _le("hippo.legs_equals_normal_minus_ppT", ident, 1e-12, f"N=1..{N_max}"),
        _le("hippo.real_parts_not_minus_half", off_real, 0, "count of eigenvalues"),
        _le("hippo.eigenvector_unitarity", unit, 1e-10),
    ]


def prop2_checks(configs=20, seed=0):
    """Tied-bank projection, state sum, dense reparameterization, block split, linearity."""
    rng = make_rng(seed, _STREAM_CHECKS, 4)
    out = ssum = rep = lin = blk = 0.0
    for i in range(configs):
        N, H, L = int(rng.integers(1, 9)), int(rng.integers(1, 5)), int(rng.integers(1, 65))
        r = equivalence.prop2_report(N, H, L, seed * 1000 + i)
        out, ssum, rep = max(out, r.output_residual), max(ssum, r.state_sum_residual), max(
            rep, r.reparam_residual)
        u = make_rng(seed, _STREAM_CHECKS, 5, i).standard_normal((L, H))
        scale = 10.0 ** rng.uniform(-3, 3)
        r1 = equivalence.prop2_report(N, H, L, seed * 1000 + i, u=u)
        r2 = equivalence.prop2_report(N, H, L, seed * 1000 + i, u=scale * u)
        lin = max(lin, abs(r2.output_residual / scale - r1.output_residual), r2.output_residual / scale)
        R = 2 * int(rng.integers(1, 5))
        blk = max(blk, equivalence.blockdiag_check(R, 2, H, L, seed * 1000 + i))
    return [
        _le("prop2.output_residual", out, 1e-10, f"configs={configs}"),
        _le("prop2.state_sum", ssum, 1e-11),
        _le("prop2.dense_reparameterization", rep, 1e-10),
        _le("prop2.input_scaling", lin, 1e-10),
        _le("prop2.blockdiag_J2", blk, 1e-10),
    ]


def corollary1_checks(seeds=(0, 1, 2), N_values=(16, 32, 64, 128), steps=equivalence.DEFAULT_STEPS,
                      report=None):
    """``e(N)`` non-increasing and ``e(N_max) < 0.5 e(N_min)`` per seed.

    ``report`` (a callable) receives each seed's CSV table.
    """
    increases = 0
    worst_ratio = 0.0
    for s in seeds:
        rep = equivalence.corollary1_check(N_values, steps=steps, seed=s)
        if report is not None:
            report(rep.to_csv())
        increases += 0 if rep.non_increasing() else 1
        worst_ratio = max(worst_ratio, rep.discrepancies[-1] / rep.discrepancies[0])
    return [
        _le("corollary1.seeds_with_increase", increases, 0, f"N={list(N_values)}"),
        CheckResult("corollary1.e_last_over_e_first", worst_ratio, 0.5, worst_ratio < 0.5),
    ]


def conv_checks(systems=20, N_max=32, L_max=4096, seed=0):
    """FFT convolution of the materialized kernel against the scan."""
    rng = make_rng(seed, _STREAM_CHECKS, 6)
    worst = 0.0
    for i in range(systems):
        N = int(rng.integers(1, N_max + 1))
        L = L_max if i == 0 else int(rng.integers(1, L_max + 1))
        lam, _ = diagonalize_normal(make_hippo_normal(N))
        delta = np.exp(rng.uniform(np.log(1e-3), np.log(1e-1), N))
        lam_bar, f = zoh_terms(lam, delta)
        b = f * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
        c = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        worst = max(worst, siso_conv_vs_scan(lam_bar, b, c, rng.standard_normal(L)))
    return [_le("conv.fft_vs_scan", worst, 1e-8, f"systems={systems} N<={N_max} L<={L_max}")]


GRAD_CONFIGS = (
    ("zoh", LayerConfig(), False),
    ("zoh_postnorm", LayerConfig(prenorm=False), False),
    ("zoh_conj_sym", LayerConfig(conj_sym=True), False),
    ("bilinear", LayerConfig(discretization="bilinear"), False),
    ("direct_discrete", LayerConfig(discretization="direct-discrete"), False),
    ("bidirectional", LayerConfig(bidirectional=True, conj_sym=True), False),
    ("time_varying", LayerConfig(), True),
    ("time_varying_bidirectional", LayerConfig(bidirectional=True), True),
)


def finite_difference_error(cfg, time_varying, P=4, H=3, L=16, B=2, seed=0, max_entries=12):
    """Worst relative error between analytic and central-difference gradients."""
    from s5lab.train.grad import layer_backward

    rng = make_rng(seed, _STREAM_CHECKS, 7)
    spec = HippoSpec(P, H, conj_sym=cfg.conj_sym, bidirectional=cfg.bidirectional, seed=seed)
    params = init_layer(spec)
    params.norm_scale = rng.standard_normal(H)
    params.norm_bias = 0.3 * rng.standard_normal(H)
    if cfg.discretization == "direct-discrete":
        params.ssm.Lambda = np.exp(0.1 * params.ssm.Lambda)
    u = rng.standard_normal((B, L, H))
    upstream = rng.standard_normal((B, L, H))
    iv = rng.uniform(0.0, 2.0, (B, L)) if time_varying else None
    grads, du = layer_backward(params, cfg, u, upstream, intervals=iv)

    def loss():
        return np.sum(upstream * layer_forward(params, cfg, u, intervals=iv))

    worst = 0.0

    def compare(arr, garr):
        nonlocal worst
        idxs = list(np.ndindex(arr.shape))
        if len(idxs) > max_entries:
            pick = rng.choice(len(idxs), max_entries, replace=False)
            idxs = [idxs[k] for k in sorted(pick)]
        parts = (1.0, 1j) if np.iscomplexobj(arr) else (1.0,)
        for idx in idxs:
            for part in parts:
                x0 = arr[idx]
                h = 1e-5 * (1.0 + abs(x0))
                arr[idx] = x0 + h * part
                lp = loss()
                arr[idx] = x0 - h * part
                lm = loss()
                arr[idx] = x0
                fd = (lp - lm) / (2 * h)
                an = garr[idx].real if part == 1.0 else garr[idx].imag
                worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-6))

    s, g = params.ssm, grads.ssm
    for arr, garr in ((s.Lambda, g.Lambda), (s.B_tilde, g.B_tilde), (s.C_tilde, g.C_tilde),
                      (s.D, g.D), (params.W_gate, grads.W_gate),
                      (params.norm_scale, grads.norm_scale), (params.norm_bias, grads.norm_bias),
                      (u, du)):
        compare(arr, garr)
    if cfg.discretization != "direct-discrete":
        compare(s.log_delta, g.log_delta)
    return worst


def grad_checks(seed=0, configs=GRAD_CONFIGS):
    return [_le(f"grad.{name}", finite_difference_error(cfg, tv, seed=seed), 1e-4)
            for name, cfg, tv in configs]


def irregular_checks(seed=0, L=64, H=4, P=8):
    """Constant intervals against the fixed-timescale path."""
    rng = make_rng(seed, _STREAM_CHECKS, 8)
    params = init_layer(HippoSpec(P, H, seed=seed))
    cfg = LayerConfig()
    u = rng.standard_normal((2, L, H))
    fixed = layer_forward(params, cfg, u)
    unit = layer_forward(params, cfg, u, intervals=np.ones(L))
    c = 0.37
    scaled = params.copy()
    scaled.ssm.log_delta = scaled.ssm.log_delta - np.log(c)
    rescaled = layer_forward(scaled, cfg, u, intervals=np.full((2, L), c))
    return [
        _le("irregular.unit_intervals_vs_fixed", np.max(np.abs(unit - fixed)), 1e-12),
        _le("irregular.constant_intervals_vs_fixed", np.max(np.abs(rescaled - fixed)), 1e-12),
    ]
