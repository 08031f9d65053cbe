"""Numerical experiments behind the command line subcommands.

Each ``run_*`` function takes a :class:`RunConfig`, writes CSV files and a
plain-text summary into ``cfg.out`` and returns a process exit code.
"""

from __future__ import annotations

import csv
import logging
import math
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

from . import cache as cache_io
from .boltzmann_modes import (
    GridConfig,
    ModeIntegrator,
    QuadratureSpec,
    build_mode_tensor,
    compute_mode,
    compute_mode_vhs,
    evaluate_invariants,
    grid_rmax,
    vhs_prefactor,
)
from .config import RunConfig, parse_float_list, parse_int_list
from .cross_sections import CrossSection, GrazingFamily, parse_kernel_spec, validate_grazing_family
from .errors import ConfigError, GrazingModesError, NonIntegrableError
from .grazing_fpl_modes import (
    SYM_PAIRS,
    FplKernel,
    SplitKernel,
    _radial_mode,
    _radial_nodes,
    approx_coefficients,
    build_split_kernel,
    fpl_mode,
    fpl_mode_alt,
    fpl_mode_radial,
    mode_tensor_from_split,
)
from .initial_data import make_initial
from .spectral_core import (
    SpectralState,
    collision_direct,
    collision_fast,
    export_coefficients,
    hermitian_part,
    integrate,
    l2_distance_to,
    matched_maxwellian,
    moments,
    project_initial,
    reconstruct,
    suggest_dt,
)
from .validation import check_epsilons, check_evaluator

log = logging.getLogger(__name__)

DEFAULT_EPS = "0.2,0.1,0.05,0.025"


def _version():
    from . import __version__

    return __version__


def preamble(cfg):
    return [["# grazingmodes", _version(), "config_sha256", cfg.digest()]]


def write_csv(path, cfg, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerows(preamble(cfg))
        w.writerow(header)
        w.writerows(rows)
    return path


def write_summary(cfg, name, lines):
    path = Path(cfg.out) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def fmt(x):
    return repr(float(x))


def _grid(cfg, default):
    return GridConfig(cfg.get("N", default, int))


def _quad(cfg, grid):
    return QuadratureSpec.for_grid(grid.N, tol=cfg.get("tol", 1e-10, float))


def _cache_file(cfg, stem):
    if cfg.cache is None:
        return None
    return Path(cfg.cache) / f"{stem}_{cfg.digest()[:16]}.gzm"


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``; NaN if underdetermined."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


# -- modes / fpl-modes ----------------------------------------------------------------


def run_modes(cfg: RunConfig) -> int:
    grid = _grid(cfg, 4)
    quad = _quad(cfg, grid)
    kernel = parse_kernel_spec(cfg.kernel_spec(kind="cutoff"))
    if isinstance(kernel, FplKernel):
        raise ConfigError("use the fpl-modes subcommand for the Landau kernel")
    t0 = time.perf_counter()
    tensor = build_mode_tensor(kernel, grid, quad, cache_path=_cache_file(cfg, "modes"), seed=cfg.seed)
    elapsed = time.perf_counter() - t0
    rows = ((int(k[0]), int(k[1]), int(k[2]), fmt(v)) for k, v in zip(tensor.keys, tensor.values))
    write_csv(Path(cfg.out) / "modes.csv", cfg, ["kplus2", "kminus2", "dot", "value"], rows)
    lines = [f"kernel: {tensor.kernel_tag}", f"N: {grid.N}", f"classes: {len(tensor)}", f"tol: {quad.tol:g}"]
    lines += [f"symmetry {k}: {v:.3e}" for k, v in sorted(tensor.meta.get("symmetry", {}).items())]
    lines.append(f"build seconds: {elapsed:.2f}")
    write_summary(cfg, "modes_summary.txt", lines)
    return 0


def _split_source(cfg):
    kernel = parse_kernel_spec(cfg.kernel_spec(kind="fpl"))
    if isinstance(kernel, CrossSection):
        raise ConfigError("split kernels need kind=fpl or a grazing family (approximate modes)")
    return kernel


def _load_or_build_split(cfg, source, grid, quad):
    path = _cache_file(cfg, "split")
    tag = source.tag if isinstance(source, FplKernel) else "approx:" + source.at().tag
    if path is not None and path.exists():
        return cache_io.load_split_kernel(path, N=grid.N, kernel_tag=tag, tol=quad.tol), 0.0
    t0 = time.perf_counter()
    split = build_split_kernel(source, grid, quad, seed=cfg.seed)
    elapsed = time.perf_counter() - t0
    if path is not None:
        cache_io.save_split_kernel(split, path)
    return split, elapsed


def run_fpl_modes(cfg: RunConfig) -> int:
    grid = _grid(cfg, 4)
    quad = _quad(cfg, grid)
    split, elapsed = _load_or_build_split(cfg, _split_source(cfg), grid, quad)
    stack = split.field_stack()
    names = ["E", "F1", "F2", "F3", "G"] + [f"I{j + 1}{h + 1}" for j, h in SYM_PAIRS]
    imag = float(np.max(np.abs(stack.imag)))
    N = grid.N

    def rows():
        for idx in np.ndindex(*grid.shape):
            yield [idx[0] - N, idx[1] - N, idx[2] - N] + [fmt(stack[(f,) + idx].real) for f in range(stack.shape[0])]

    write_csv(Path(cfg.out) / "split_fields.csv", cfg, ["m1", "m2", "m3"] + names, rows())
    lines = [
        f"kernel: {split.kernel_tag}",
        f"variant: {split.variant.name}",
        f"N: {N}",
        f"max imaginary part of fields: {imag:.3e}",
        f"reassembly check: {split.meta.get('reassembly')}",
        f"build seconds: {elapsed:.2f}",
    ]
    write_summary(cfg, "fpl_modes_summary.txt", lines)
    return 0


# -- grazing study ------------------------------------------------------------------


def grazing_sample(N, seed, random_pairs=50):
    """All pairs with ``|l|_inf, |m|_inf <= min(2, N)`` plus seeded random pairs."""
    r = np.arange(-min(2, N), min(2, N) + 1)
    low = np.array(np.meshgrid(r, r, r, indexing="ij")).reshape(3, -1).T
    ll, mm = np.repeat(low, len(low), axis=0), np.tile(low, (len(low), 1))
    rng = np.random.default_rng(seed)
    rnd = rng.integers(-N, N + 1, size=(random_pairs, 2, 3))
    l = np.concatenate([ll, rnd[:, 0]])
    m = np.concatenate([mm, rnd[:, 1]])
    keep = np.any(l != m, axis=1)
    return l[keep], m[keep]


def _invariants(l, m):
    d = l - m
    return np.stack([np.sum(m * m, 1), np.sum(m * d, 1), np.sum(d * d, 1)], axis=1)


def grazing_table(fam, grid, eps_list, l, m, quad=None):
    """Per-epsilon mode values on the distinct invariant triples of the sample.

    Returns ``(inv, inverse, B_L, {eps: (B_eps, approx)})``.
    """
    quad = quad or QuadratureSpec.for_grid(grid.N)
    inv, inverse = np.unique(_invariants(l, m), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    fk = FplKernel.from_family(fam)
    # representative pair for each triple, for the FPL modes
    first = np.zeros(len(inv), dtype=np.int64)
    first[inverse[::-1]] = np.arange(len(inverse))[::-1]
    b_l = np.array([fpl_mode_radial(fk, grid, l[i], m[i]) for i in first])
    out = {}
    for eps in eps_list:
        fe = fam.with_epsilon(eps)
        vals, _ = evaluate_invariants(fe, grid, inv, quad)
        c1, c2 = approx_coefficients(fe, quad)
        approx = []
        for i in first:
            d = (l[i] - m[i]).astype(float)
            n = _radial_nodes(grid, d, m[i])
            approx.append(_radial_mode(c1, c2, fam.gamma, grid, d, m[i].astype(float), 2 * n))
        out[eps] = (vals.real, np.array(approx))
    return inv, inverse, b_l, out


def run_grazing_study(cfg: RunConfig) -> int:
    eps_list = check_epsilons(parse_float_list(cfg.settings.get("eps", DEFAULT_EPS)))
    grid = _grid(cfg, 4)
    quad = _quad(cfg, grid)
    fam = parse_kernel_spec(cfg.kernel_spec(kind="rescaled", gamma="0", nu="0.5", epsilon=str(eps_list[0])))
    if not isinstance(fam, GrazingFamily):
        raise ConfigError("grazing-study needs a grazing family (kind=rescaled or kind=log_cutoff)")
    l, m = grazing_sample(grid.N, cfg.seed, cfg.get("random_pairs", 50, int))
    inv, inverse, b_l, table = grazing_table(fam, grid, eps_list, l, m, quad)
    metrics = {"eps_vs_landau": [], "approx_vs_eps": [], "approx_vs_landau": []}
    rows = []
    for eps in eps_list:
        b_e, approx = table[eps]
        diffs = {
            "eps_vs_landau": np.abs(b_e - b_l)[inverse],
            "approx_vs_eps": np.abs(approx - b_e)[inverse],
            "approx_vs_landau": np.abs(approx - b_l)[inverse],
        }
        row = [fmt(eps)]
        for key in metrics:
            metrics[key].append(float(diffs[key].max()))
            row += [fmt(diffs[key].max()), fmt(diffs[key].mean())]
        rows.append(row)
    header = ["epsilon"]
    for key in metrics:
        header += [f"max_{key}", f"mean_{key}"]
    write_csv(Path(cfg.out) / "grazing_study.csv", cfg, header, rows)
    slopes = {key: loglog_slope(eps_list, vals) for key, vals in metrics.items()}
    write_csv(
        Path(cfg.out) / "grazing_slopes.csv", cfg, ["metric", "loglog_slope"], [[k, fmt(v)] for k, v in slopes.items()]
    )

    def pair_rows():
        counts = np.bincount(inverse, minlength=len(inv))
        for j, (a, b, c) in enumerate(inv):
            for eps in eps_list:
                b_e, approx = table[eps]
                yield [int(a), int(b), int(c), int(counts[j]), fmt(eps), fmt(b_e[j]), fmt(b_l[j]), fmt(approx[j])]

    write_csv(
        Path(cfg.out) / "grazing_pairs.csv",
        cfg,
        ["m_sq", "m_dot_d", "d_sq", "multiplicity", "epsilon", "B_eps", "B_landau", "B_approx"],
        pair_rows(),
    )
    lines = [f"family: {fam.at().tag}", f"lambda0: {fam.lambda0!r}", f"N: {grid.N}", f"pairs: {len(l)}"]
    lines += [f"slope {k}: {v:.4f}" for k, v in slopes.items()]
    code = 0
    if len(eps_list) < 2:
        msg = "single epsilon: slopes are undetermined"
        warnings.warn(msg, stacklevel=2)
        lines.append("warning: " + msg)
    elif abs(slopes["approx_vs_eps"] - 1.0) > 0.3:
        lines.append(f"FAIL: approximation remainder slope {slopes['approx_vs_eps']:.3f} is not within 1 +- 0.3")
        code = 1
    write_summary(cfg, "grazing_summary.txt", lines)
    return code


# -- relaxation ------------------------------------------------------------------------


_INIT_KEYS = ("rho", "T", "shift", "taper", "width", "height")


def relax_setup(cfg: RunConfig):
    grid = _grid(cfg, 8)
    quad = _quad(cfg, grid)
    kernel = parse_kernel_spec(cfg.kernel_spec(kind="fpl", lambda0="0.25"))
    init_name = cfg.get("initial", "sum_of_two_maxwellians")
    params = {k: cfg.get(k, cast=float) for k in _INIT_KEYS if k in cfg.settings}
    if init_name == "sum_of_two_maxwellians":
        params.setdefault("T", 0.06)
        params.setdefault("shift", 0.35)
    f0 = make_initial(init_name, grid.R, **params)
    state = project_initial(f0, grid, cfg.get("n_grid", None, int))
    if isinstance(kernel, FplKernel) or (
        isinstance(kernel, GrazingFamily) and cfg.get("approx", "false").lower() in ("1", "true", "yes")
    ):
        split = build_split_kernel(kernel, grid, quad, seed=cfg.seed)
        modes = {"fast": split, "direct": split}
    else:
        tensor = build_mode_tensor(kernel, grid, quad, cache_path=_cache_file(cfg, "modes"), seed=cfg.seed)
        modes = {"direct": tensor}
    return grid, state, modes


def relax_series(state, kernel, evaluator, t_end, dt, every, n_grid=None):
    """Rows ``(t, mass, p1, p2, p3, energy, l2_to_maxwellian, f_min)``."""
    params = matched_maxwellian(moments(state, n_grid))
    rows = []

    def record(s):
        mo = moments(s, n_grid)
        fmin = float(reconstruct(s, n_grid).min())
        rows.append((s.time, mo.mass, *mo.momentum, mo.energy, l2_distance_to(s, params, n_grid), fmin))

    record(state)
    n_out = int(round(t_end / every)) if t_end > 0 else 0
    for j in range(1, n_out + 1):
        state = integrate(state, kernel, min(j * every, t_end), dt, evaluator)
        record(state)
    return rows, state


def run_relax(cfg: RunConfig) -> int:
    evaluator = check_evaluator(cfg.get("evaluator", "fast"), allow_both=True)
    t_end = cfg.get("t_end", 4.0, float)
    if t_end < 0:
        raise ConfigError("t_end must be nonnegative")
    every = cfg.get("output_every", 0.1, float)
    grid, state, modes = relax_setup(cfg)
    evaluators = ["direct", "fast"] if evaluator == "both" else [evaluator]
    n_grid = cfg.get("n_grid", None, int)
    rows = []
    lines = [f"N: {grid.N}", f"t_end: {t_end!r}"]
    for ev in evaluators:
        if ev not in modes:
            raise ConfigError(f"evaluator {ev!r} is not available for this kernel")
        kernel = modes[ev]
        dt = cfg.get("dt", None, float)
        if dt is None:
            dt = suggest_dt(state, kernel, factor=cfg.get("dt_factor", 1.0, float), method="spectral",
                            evaluator="fast" if isinstance(kernel, SplitKernel) else "direct")
        series, final = relax_series(state, kernel, ev, t_end, min(dt, every), every, n_grid)
        rows += [[ev] + [fmt(x) for x in r] for r in series]
        export_coefficients(final, Path(cfg.out) / f"relax_final_{ev}.csv", preamble(cfg))
        m0, m1 = series[0][1], series[-1][1]
        lines += [
            f"{ev}: dt {dt!r}",
            f"{ev}: relative mass drift {abs(m1 - m0) / abs(m0):.3e}",
            f"{ev}: momentum drift {np.linalg.norm(np.subtract(series[-1][2:5], series[0][2:5])):.3e}",
            f"{ev}: energy drift {series[-1][5] - series[0][5]:.3e}",
            f"{ev}: L2 distance to Maxwellian {series[0][6]:.4e} -> {series[-1][6]:.4e}",
        ]
    header = ["evaluator", "t", "mass", "momentum1", "momentum2", "momentum3", "energy", "l2_to_maxwellian", "f_min"]
    write_csv(Path(cfg.out) / "relax.csv", cfg, header, rows)
    write_summary(cfg, "relax_summary.txt", lines)
    return 0


# -- benchmark ---------------------------------------------------------------------------


def random_hermitian_state(grid, rng):
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return SpectralState(grid, hermitian_part(c))


def _best_time(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(cfg: RunConfig) -> int:
    ns = parse_int_list(cfg.settings.get("ns", "4,8,16"))
    repeats = cfg.get("repeats", 3, int)
    fk = _split_source(cfg)
    rng = np.random.default_rng(cfg.seed)
    # compile the numba loops outside the timed region
    small = GridConfig(1)
    warm = build_split_kernel(fk, small, check_samples=0)
    collision_direct(random_hermitian_state(small, rng), warm)
    rows = []
    timings = []
    for N in ns:
        grid = GridConfig(N)
        split, build = _load_or_build_split(cfg, fk, grid, QuadratureSpec.for_grid(N))
        state = random_hermitian_state(grid, rng)
        t_direct = _best_time(lambda: collision_direct(state, split), 1 if N >= 12 else repeats)
        t_fast = _best_time(lambda: collision_fast(state, split), repeats)
        a = collision_direct(state, split)
        b = collision_fast(state, split)
        rel = float(np.abs(a - b).max() / np.abs(a).max())
        timings.append((N, t_direct, t_fast))
        rows.append([N, fmt(build), fmt(t_direct), fmt(t_fast), fmt(t_direct / t_fast), fmt(rel)])
    write_csv(
        Path(cfg.out) / "bench.csv",
        cfg,
        ["N", "build_seconds", "direct_seconds", "fast_seconds", "speedup", "relative_discrepancy"],
        rows,
    )
    lines = []
    if len(ns) >= 2:
        n = [t[0] for t in timings]
        e_direct = loglog_slope(n, [t[1] for t in timings])
        e_fast = loglog_slope(n, [t[2] for t in timings])
        lines += [f"direct cost exponent: {e_direct:.3f}", f"fast cost exponent: {e_fast:.3f}"]
    else:
        lines.append("single N: raw timings only")
    last = timings[-1]
    if last[2] >= last[1]:
        lines.append(f"FLAG: fast path not cheaper than direct at N={last[0]}")
    write_summary(cfg, "bench_summary.txt", lines)
    return 0


def bench_exponents(out_dir):
    """Read back ``bench.csv`` and fit the direct and fast cost exponents."""
    with open(Path(out_dir) / "bench.csv", newline="") as fh:
        rows = list(csv.reader(fh))[2:]
    n = [int(r[0]) for r in rows]
    return loglog_slope(n, [float(r[2]) for r in rows]), loglog_slope(n, [float(r[3]) for r in rows]), rows


# -- validation ---------------------------------------------------------------------------


def _check(results, name, fn):
    try:
        ok, detail = fn()
        results.append((name, "PASS" if ok else "FAIL", detail))
    except NonIntegrableError as exc:
        results.append((name, "SKIP", f"NON_INTEGRABLE: {exc}"))
    except (GrazingModesError, ValueError) as exc:
        results.append((name, "FAIL", f"{type(exc).__name__}: {exc}"))


def validation_checks(cfg: RunConfig):
    """Desk-scale invariant suite; returns rows ``(check, status, detail)``."""
    N = cfg.get("N", 2, int)
    grid = GridConfig(min(N, 4))
    quad = QuadratureSpec.for_grid(grid.N, tol=cfg.get("tol", 1e-10, float))
    spec = cfg.kernel_spec(kind="cutoff")
    rng = np.random.default_rng(cfg.seed)
    pairs = rng.integers(-grid.N, grid.N + 1, size=(8, 2, 3))
    tol = 1e-8
    results = []

    def kernel():
        k = parse_kernel_spec(spec)
        if isinstance(k, FplKernel):
            return CrossSection.cutoff(k.gamma, 1.0)
        return k

    def momentum_constant():
        cs = CrossSection.cutoff(0.0, 1.0)
        from .cross_sections import momentum_transfer_constant

        # 2 pi int_0^{pi/2} sin(t) (1 - cos t) dt = pi
        got = momentum_transfer_constant(cs)
        return abs(got - math.pi) <= 1e-9, f"|L - pi| = {abs(got - math.pi):.2e}"

    def family():
        fam = GrazingFamily(CrossSection.power_law(0.0, 0.5), parse_kernel_spec({"kind": "rescaled"}).family_kind, 0.2)
        rep = validate_grazing_family(fam, [0.2, 0.1, 0.05], 0.5, 1e-6)
        return rep.passed, f"cauchy={rep.cauchy_ok} sup_monotone={rep.sup_monotone}"

    def symmetries():
        cs = kernel()
        tensor = build_mode_tensor(cs, grid, quad, verify_samples=20, seed=cfg.seed)
        worst = max(tensor.meta["symmetry"].values())
        return worst <= tol, f"max violation {worst:.2e} over {len(tensor)} classes"

    def vhs():
        cs = CrossSection.vhs(0.0, 1.0)
        worst = max(abs(compute_mode(cs, grid, l, m, quad) - compute_mode_vhs(0.0, 1.0, grid, l, m)) for l, m in pairs)
        return worst <= tol, f"max |reduced - closed form| {worst:.2e}"

    def fpl_repr():
        fk = FplKernel(float(spec.get("gamma", 0.0)) if spec.get("kind") == "fpl" else 0.0)
        worst = 0.0
        for l, m in pairs[:4]:
            a = fpl_mode(fk, grid, l, m, quad)
            worst = max(worst, abs(a - fpl_mode_alt(fk, grid, l, m, quad)), abs(a - fpl_mode_radial(fk, grid, l, m)))
        return worst <= 2 * tol, f"max representation gap {worst:.2e}"

    def split_and_fast():
        fk = FplKernel(0.0)
        split = build_split_kernel(fk, grid, quad, check_samples=50, seed=cfg.seed)
        state = random_hermitian_state(grid, rng)
        a = collision_direct(state, split)
        b = collision_fast(state, split)
        rel = float(np.abs(a - b).max() / np.abs(a).max())
        return rel <= 1e-12 and abs(a[(grid.N,) * 3]) == 0.0, f"fast/direct {rel:.2e}, Q_0 {abs(a[(grid.N,) * 3]):.1e}"

    def mass():
        g = GridConfig(grid.N)
        split = build_split_kernel(FplKernel(0.0, 0.25), g, quad, check_samples=0)
        state = project_initial(make_initial("smooth_bump", g.R), g)
        m0 = moments(state).mass
        end = integrate(state, split, 0.2, 0.05)
        drift = abs(moments(end).mass - m0) / m0
        return drift <= tol, f"relative mass drift {drift:.2e}"

    def caches():
        files = sorted(Path(cfg.cache).glob("*.gzm")) if cfg.cache is not None else []
        if not files:
            with tempfile.TemporaryDirectory() as tmp:
                cs = CrossSection.cutoff(0.0, 1.0)
                g1 = GridConfig(1)
                t = build_mode_tensor(cs, g1, verify_samples=0)
                p = Path(tmp) / "roundtrip.gzm"
                cache_io.save_mode_tensor(t, p)
                back = cache_io.load_mode_tensor(p, N=1, kernel_tag=t.kernel_tag, tol=t.tol)
                ok = np.array_equal(back.values, t.values) and np.array_equal(back.keys, t.keys)
                return ok, "round trip of a fresh tensor"
        bad = []
        for p in files:
            try:
                cache_io.load_any(p)
            except GrazingModesError as exc:
                bad.append(f"{p.name}: {exc}")
        return not bad, "; ".join(bad) if bad else f"{len(files)} cache files verified"

    _check(results, "cross_sections.momentum_constant", momentum_constant)
    _check(results, "cross_sections.grazing_family", family)
    _check(results, "boltzmann_modes.symmetries", symmetries)
    _check(results, "boltzmann_modes.vhs_closed_form", vhs)
    _check(results, "grazing_fpl_modes.representations", fpl_repr)
    _check(results, "spectral_core.split_fast_direct", split_and_fast)
    _check(results, "spectral_core.mass_conservation", mass)
    _check(results, "cache.integrity", caches)
    return results


def run_validate(cfg: RunConfig) -> int:
    results = validation_checks(cfg)
    write_csv(Path(cfg.out) / "validate.csv", cfg, ["check", "status", "detail"], results)
    width = max(len(r[0]) for r in results)
    lines = [f"{name:<{width}}  {status}  {detail}" for name, status, detail in results]
    fails = sum(1 for r in results if r[1] == "FAIL")
    lines.append(f"failures: {fails}")
    write_summary(cfg, "validate_summary.txt", lines)
    print("\n".join(lines))
    return fails


RUNNERS = {
    "modes": run_modes,
    "fpl-modes": run_fpl_modes,
    "grazing-study": run_grazing_study,
    "relax": run_relax,
    "bench": run_bench,
    "validate": run_validate,
}
