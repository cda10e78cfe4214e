"""Experiment pipelines: configuration in, CSV/JSON artifacts out.

Each kind orchestrates the solver backends and writes deterministic
artifacts (floats at 17 significant digits, atomic file replacement, and a
manifest echoing the config). Reruns of an identical config produce
byte-identical CSV bodies.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__, fock, metrics, pde, phasespace
from ..analytic import (
    QuadratureSpec,
    cat_fringe_weight,
    closed_quadrature_moment,
    kitten_coefficients,
)
from ..params import ModelParams
from .config import ExperimentConfig

FMT = "%.17g"


class NumericalFailure(RuntimeError):
    """A backend failed to produce a trustworthy result."""


@dataclass
class RunResult:
    run_id: str
    out_dir: Path
    artifacts: list[str]
    wall_time_s: float


# -- deterministic file helpers ---------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_series_csv(path: Path, meta: dict, columns: dict[str, np.ndarray]) -> None:
    lines = [f"# {k} = {v}" for k, v in meta.items()]
    names = list(columns)
    lines.append(",".join(names))
    cols = [np.asarray(columns[n], dtype=float) for n in names]
    for row in zip(*cols):
        lines.append(",".join(FMT % v for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_series_csv(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    meta: dict[str, str] = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, val = lines[i][1:].partition("=")
        meta[key.strip()] = val.strip()
        i += 1
    names = lines[i].split(",")
    data = np.loadtxt(lines[i + 1:], delimiter=",", ndmin=2)
    return meta, {n: data[:, j] for j, n in enumerate(names)}


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- backend moment tables ---------------------------------------------------


def moment_table(
    backend: str,
    params: ModelParams,
    orders: tuple[int, ...],
    thetas: np.ndarray,
    taus: np.ndarray,
    cfg: ExperimentConfig,
    dr: float | None = None,
) -> np.ndarray:
    """``<X_theta^n>(t)`` for every requested order and angle.

    Returns shape (len(orders), len(thetas), len(taus)). ``taus`` are
    dimensionless Kerr phases ``kappa*t``.
    """
    out = np.empty((len(orders), len(thetas), len(taus)))
    if backend == "pde" or (backend == "twa" and params.gamma > 0.0):
        mode = "twa" if backend == "twa" else "full"
        k_need = max(orders)
        field = phasespace.init_coherent(params, k_max=k_need, dr=dr)
        solver = pde.SolverConfig(abs_tol=cfg.abs_tol, rel_tol=cfg.rel_tol,
                                  max_step=cfg.max_step, mode=mode, k_max=k_need)
        trace = pde.evolve_moments(field, taus, powers=tuple(sorted(set(orders))),
                                   cfg=solver)
        for i, n in enumerate(orders):
            for j, th in enumerate(thetas):
                out[i, j] = trace.quadrature_moment(n, th)
        return out
    if backend == "twa":
        tab = pde.TwaCharacteristics(params, taus, max_n=max(orders))
        for i, n in enumerate(orders):
            for j, th in enumerate(thetas):
                out[i, j] = tab.quadrature_moment(n, th)
        return out
    if backend == "fock":
        n_trunc = cfg.n_trunc or fock.default_n_trunc(params.alpha0)
        rho0 = fock.coherent_density(params.alpha0, n_trunc)
        ts = taus / params.kappa if params.kappa > 0 else taus
        try:
            prop = fock.AnalyticPropagator(rho0, params)
            states = [prop.rho(t) for t in ts]
        except ArithmeticError:
            states = fock.evolve_direct(rho0, ts, params, tol=1e-10)
        for it, rho in enumerate(states):
            for i, n in enumerate(orders):
                for j, th in enumerate(thetas):
                    out[i, j, it] = fock.quadrature_moment_fock(rho, QuadratureSpec(n, th))
        return out
    if backend == "analytic":
        if params.gamma != 0.0:
            raise NumericalFailure("analytic backend covers the closed system only")
        for i, n in enumerate(orders):
            for j, th in enumerate(thetas):
                for it, tau in enumerate(taus):
                    out[i, j, it] = closed_quadrature_moment(
                        QuadratureSpec(n, th), tau / params.kappa, params)
        return out
    raise NumericalFailure(f"unknown backend {backend!r}")


def averaged_deviation_table(exact: np.ndarray, twa: np.ndarray, taus: np.ndarray,
                             orders: tuple[int, ...], alpha0: float) -> dict[int, metrics.TimeSeries]:
    """Angle-averaged deviations per order from two moment tables."""
    out = {}
    for i, n in enumerate(orders):
        out[n] = metrics.averaged_deviation(exact[i], twa[i], taus, n, alpha0,
                                            label=f"dbar{n}")
    return out


# -- kind pipelines -----------------------------------------------------------


def _run_kitten(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    state = kitten_coefficients(cfg.M, cfg.N, cfg.alpha0)
    f = np.array(state.f)
    k = np.arange(len(f), dtype=float)
    write_series_csv(
        outdir / "kitten.csv",
        {"M": cfg.M, "N": cfg.N, "alpha0": cfg.alpha0,
         "formation_kt": FMT % state.formation_time},
        {"k": k, "re_f": f.real, "im_f": f.imag, "weight": np.abs(f) ** 2},
    )
    return ["kitten.csv"]


def _run_moments(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    params = ModelParams(kappa=cfg.kappa, gamma=cfg.gamma, alpha0=cfg.alpha0)
    taus = np.linspace(cfg.t_min, cfg.t_max, cfg.n_samples)
    thetas = metrics.theta_grid(cfg.n_theta)
    table = moment_table(cfg.backend, params, cfg.orders, thetas, taus, cfg, dr=cfg.dr)
    cols = {"t": taus}
    for i, n in enumerate(cfg.orders):
        for j in range(len(thetas)):
            cols[f"x{n}_th{j}"] = table[i, j]
    write_series_csv(outdir / "moments.csv",
                     _meta(cfg) | {"thetas": ",".join(FMT % t for t in thetas)},
                     cols)
    return ["moments.csv"]


def _run_deviation(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    params = ModelParams(kappa=cfg.kappa, gamma=cfg.gamma, alpha0=cfg.alpha0)
    taus = np.linspace(cfg.t_min, cfg.t_max, cfg.n_samples)
    thetas = metrics.theta_grid(cfg.n_theta)
    exact = moment_table(cfg.backend, params, cfg.orders, thetas, taus, cfg, dr=cfg.dr)
    twa = moment_table("twa", params, cfg.orders, thetas, taus, cfg, dr=cfg.dr)
    meta = _meta(cfg) | {"thetas": ",".join(FMT % t for t in thetas)}
    names = []
    for label, tab in (("exact", exact), ("twa", twa)):
        cols = {"t": taus}
        for i, n in enumerate(cfg.orders):
            for j in range(len(thetas)):
                cols[f"x{n}_th{j}"] = tab[i, j]
        write_series_csv(outdir / f"moments_{label}.csv", meta, cols)
        names.append(f"moments_{label}.csv")
    dbar = averaged_deviation_table(exact, twa, taus, cfg.orders, cfg.alpha0)
    cols = {"t": taus}
    for n in cfg.orders:
        cols[f"dbar{n}"] = dbar[n].values
    write_series_csv(outdir / "deviation.csv", meta, cols)
    names.append("deviation.csv")
    return names


def grid_resolved_deviation(params: ModelParams, orders, thetas, taus,
                            cfg: ExperimentConfig, d_r: float) -> dict[int, metrics.TimeSeries]:
    """Averaged deviation with BOTH the exact run and its semiclassical
    baseline discretized at the same radial resolution.

    The shared-grid baseline is essential: the smooth part of the two
    solutions carries nearly identical discretization error, so their
    difference isolates how well the grid resolves the quantum deviation
    itself. A fixed fine-grid baseline would bury the decoherence-driven
    error suppression under the smooth-background error.
    """
    exact = moment_table("pde", params, orders, thetas, taus, cfg, dr=d_r)
    k_need = max(orders)
    field = phasespace.init_coherent(params, k_max=k_need, dr=d_r)
    solver = pde.SolverConfig(abs_tol=cfg.abs_tol, rel_tol=cfg.rel_tol,
                              max_step=cfg.max_step, mode="twa", k_max=k_need)
    trace = pde.evolve_moments(field, taus, powers=tuple(sorted(set(orders))),
                               cfg=solver)
    twa = np.empty_like(exact)
    for i, n in enumerate(orders):
        for j, th in enumerate(thetas):
            twa[i, j] = trace.quadrature_moment(n, th)
    return averaged_deviation_table(exact, twa, taus, orders, params.alpha0)


def _run_grid_error(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    taus = np.linspace(cfg.t_min, cfg.t_max, cfg.n_samples)
    thetas = metrics.theta_grid(cfg.n_theta)
    ref_dr = cfg.dr or phasespace.default_dr(cfg.alpha0)
    window = (cfg.t_min, cfg.t_max)
    names = []
    reports = []
    for gi, gamma in enumerate(cfg.gammas):
        params = ModelParams(kappa=cfg.kappa, gamma=gamma, alpha0=cfg.alpha0)
        dbar_ref = grid_resolved_deviation(params, cfg.orders, thetas, taus, cfg,
                                           ref_dr)
        cols = {"t": taus} | {f"dbar{n}": dbar_ref[n].values for n in cfg.orders}
        fn = f"deviation_ref_g{gi}.csv"
        write_series_csv(outdir / fn, _meta(cfg) | {"gamma": FMT % gamma,
                                                    "dr": FMT % ref_dr}, cols)
        names.append(fn)
        for n in cfg.orders:
            report = metrics.GridErrorReport(alpha0=cfg.alpha0, gamma=gamma, n=n,
                                             reference_dr=ref_dr, window=window)
            for di, d_r in enumerate(cfg.delta_r):
                dbar_c = grid_resolved_deviation(params, cfg.orders, thetas, taus,
                                                 cfg, d_r)
                eps = metrics.grid_error(dbar_c[n], dbar_ref[n], window=window)
                report.delta_r.append(d_r)
                report.epsilon.append(eps)
                if n == cfg.orders[0]:
                    fn = f"deviation_d{di}_g{gi}.csv"
                    cols = {"t": taus} | {f"dbar{m}": dbar_c[m].values for m in cfg.orders}
                    write_series_csv(outdir / fn,
                                     _meta(cfg) | {"gamma": FMT % gamma,
                                                   "dr": FMT % d_r}, cols)
                    names.append(fn)
            reports.append(report.to_dict())
    _write_json(outdir / "grid_error.json", {"reports": reports})
    names.append("grid_error.json")
    return names


def _run_convexity(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    tau_eval = cfg.t_eval
    thetas = np.array([0.0])
    taus = np.array([0.0, tau_eval]) if tau_eval > 0 else np.array([0.0])
    reports = []
    closed_params = ModelParams(kappa=cfg.kappa, gamma=0.0, alpha0=cfg.alpha0)
    closed = moment_table("analytic", closed_params, cfg.orders, thetas, taus, cfg)
    for gamma in cfg.gammas:
        params = ModelParams(kappa=cfg.kappa, gamma=gamma, alpha0=cfg.alpha0)
        open_tab = moment_table("fock", params, cfg.orders, thetas, taus, cfg)
        classical = moment_table("twa", params, cfg.orders, thetas, taus, cfg,
                                 dr=cfg.dr)
        report = metrics.ConvexityReport(alpha0=cfg.alpha0, gamma=gamma,
                                         t_eval=tau_eval / cfg.kappa)
        for i, n in enumerate(cfg.orders):
            p = metrics.convexity_p(open_tab[i, 0, -1], closed[i, 0, -1],
                                    classical[i, 0, -1], n, cfg.alpha0)
            report.orders.append(n)
            report.p_values.append(p)
            report.denominators.append(closed[i, 0, -1] - classical[i, 0, -1])
        reports.append(report.to_dict())
    _write_json(outdir / "convexity.json", {"reports": reports})
    return ["convexity.json"]


def _run_cat_decay(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    """Pure-loss decay of the Kerr cat: fringe coherence from the Fock
    evolution against the closed-form weights, plus the fitted rate."""
    if cfg.gamma <= 0:
        raise NumericalFailure("cat-decay needs gamma > 0")
    alpha0, gamma = cfg.alpha0, cfg.gamma
    params = ModelParams(kappa=0.0, gamma=gamma, alpha0=alpha0)
    n_trunc = cfg.n_trunc or fock.default_n_trunc(alpha0)
    cat = fock.density_from_vector(fock.kerr_evolved_vector(alpha0, n_trunc, math.pi))
    # window in gamma*t units; cfg.t_max defaults to the linear-response range
    gt_max = cfg.t_max if cfg.t_max > 0 else 0.02
    ts = np.linspace(0.0, gt_max / gamma, max(cfg.n_samples, 8))
    try:
        prop = fock.AnalyticPropagator(cat, params)
        states = [prop.rho(t) for t in ts]
    except ArithmeticError:
        states = fock.evolve_direct(cat, ts, params, tol=1e-12)
    x0 = math.sqrt(2.0) * alpha0
    coh = np.empty(len(ts))
    for it, rho in enumerate(states):
        beta_t = alpha0 * math.exp(-0.5 * gamma * ts[it])
        up = fock.coherent_vector(beta_t, n_trunc) * np.exp(
            1j * np.arange(n_trunc + 1) * math.pi / 2)
        dn = fock.coherent_vector(beta_t, n_trunc) * np.exp(
            -1j * np.arange(n_trunc + 1) * math.pi / 2)
        coh[it] = abs(up.conj() @ (rho.rho @ dn))
    slope = np.polyfit(ts, np.log(coh), 1)[0]
    fitted = -slope
    expected = 2.0 * alpha0**2 * gamma
    weights_exact = np.array([cat_fringe_weight(t, x0, gamma, True) for t in ts])
    weights_short = np.array([cat_fringe_weight(t, x0, gamma, False) for t in ts])
    write_series_csv(outdir / "cat_decay.csv", _meta(cfg),
                     {"t": ts, "coherence": coh,
                      "weight_exact": weights_exact, "weight_short": weights_short})
    _write_json(outdir / "cat_decay.json", {
        "fitted_rate": fitted,
        "expected_rate": expected,
        "relative_error": abs(fitted - expected) / expected,
    })
    return ["cat_decay.csv", "cat_decay.json"]


def _run_wigner_snapshot(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    params = ModelParams(kappa=cfg.kappa, gamma=cfg.gamma, alpha0=cfg.alpha0)
    k_max = cfg.k_max or phasespace.DEFAULT_K_MAX
    field = phasespace.init_coherent(params, k_max=k_max, dr=cfg.dr)
    solver = pde.SolverConfig(abs_tol=cfg.abs_tol, rel_tol=cfg.rel_tol,
                              max_step=cfg.max_step, k_max=k_max)
    times = sorted(cfg.snapshot_times)
    snaps = pde.evolve(field, times, solver)
    names = []
    for i, snap in enumerate(snaps):
        fn = f"wigner_{i:03d}.csv"
        phasespace.dump_field(snap, outdir / fn)
        names.append(fn)
        rn = f"raster_{i:03d}.csv"
        _write_raster(snap, outdir / rn, cfg.phi_step)
        names.append(rn)
    return names


def _write_raster(field, path: Path, phi_step: float) -> None:
    r_vals, phi_vals, W = phasespace.raster(field, phi_step=phi_step)
    lines = [f"# tau = {FMT % field.tau}", f"# phi_step = {FMT % phi_step}",
             "r,phi,x,p,w"]
    for i, r in enumerate(r_vals):
        for j, ph in enumerate(phi_vals):
            x = math.sqrt(2.0) * r * math.cos(ph)
            p = math.sqrt(2.0) * r * math.sin(ph)
            lines.append(",".join(FMT % v for v in (r, ph, x, p, W[i, j])))
    _atomic_write(path, "\n".join(lines) + "\n")


def export_raster(dump_path, out_path, phi_step: float = math.pi / 200) -> None:
    """Re-export a stored field dump as a Cartesian raster."""
    field = phasespace.load_field(dump_path)
    _write_raster(field, Path(out_path), phi_step)


def _meta(cfg: ExperimentConfig) -> dict:
    return {
        "run_id": cfg.run_id(),
        "kind": cfg.kind,
        "backend": cfg.backend,
        "alpha0": FMT % cfg.alpha0,
        "kappa": FMT % cfg.kappa,
        "gamma": FMT % cfg.gamma,
    }


_PIPELINES = {
    "kitten": _run_kitten,
    "moments": _run_moments,
    "deviation": _run_deviation,
    "grid-error-sweep": _run_grid_error,
    "convexity": _run_convexity,
    "cat-decay": _run_cat_decay,
    "wigner-snapshot": _run_wigner_snapshot,
}


def run(cfg: ExperimentConfig, output_root: str | None = None) -> RunResult:
    """Execute one experiment; artifacts land in ``<root>/<run_id>/``.

    The output root comes from (in order): the explicit argument, the
    ``KERRSIM_OUTPUT_DIR`` environment variable, the config.
    """
    root = Path(output_root or os.environ.get("KERRSIM_OUTPUT_DIR") or cfg.output_dir)
    run_id = cfg.run_id()
    outdir = root / run_id
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    artifacts = _PIPELINES[cfg.kind](cfg, outdir)
    wall = time.monotonic() - t0
    manifest = {
        "run_id": run_id,
        "kind": cfg.kind,
        "config": cfg.to_dict(),
        "config_ini": cfg.to_ini(),
        "versions": {"kerrsim": __version__, "numpy": np.__version__},
        "wall_time_s": wall,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "artifacts": artifacts,
    }
    _write_json(outdir / "run.json", manifest)
    return RunResult(run_id=run_id, out_dir=outdir, artifacts=artifacts,
                     wall_time_s=wall)
