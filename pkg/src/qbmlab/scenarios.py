"""Scenario execution: config -> CSV tables, manifest and optional plot scripts."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, catlab, diagnostics, observables, oracle
from .config import ScenarioConfig
from .errors import InvalidSpecError
from .propagator import EvolutionParams, evolve_state
from .statekit import (
    CatSpec,
    DiffusionCoeffs,
    GaussianSpec,
    PhysicalParams,
    build_cat,
    build_gaussian,
    evaluate,
    evaluate_rotated,
    to_position,
)

FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7")


@dataclass
class Scenario:
    config: ScenarioConfig
    physical: PhysicalParams
    diffusion: DiffusionCoeffs
    params: EvolutionParams
    spec: object  # GaussianSpec or CatSpec

    @property
    def is_cat(self) -> bool:
        return isinstance(self.spec, CatSpec)

    def initial_state(self):
        return build_cat(self.spec) if self.is_cat else build_gaussian(self.spec)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    ph = cfg.physical
    physical = PhysicalParams(ph.M, ph.m, ph.gamma, ph.T, ph.R, ph.var_sigma_x, ph.var_sigma_p, ph.hbar, ph.kB)
    d = cfg.diffusion
    if d.mode == "measurement":
        coeffs = diagnostics.measurement_diffusion(physical)
    elif d.mode == "caldeira-leggett":
        coeffs = diagnostics.caldeira_leggett(physical)
    elif d.mode == "explicit":
        coeffs = DiffusionCoeffs(d.D_pp, d.D_xx)
    else:
        coeffs = diagnostics.q_diffusion(d.q, d.D_xx, physical.gamma, physical.hbar)
    init = cfg.initial
    if init.kind == "gaussian":
        spec = GaussianSpec(init.x0, init.p0, init.dx0, physical.hbar)
    else:
        spec = CatSpec(init.l, init.sigma, init.v, physical.M, physical.hbar)
    params = EvolutionParams(physical.gamma, physical.M, coeffs, physical.hbar)
    return Scenario(cfg, physical, coeffs, params, spec)


# ---------------------------------------------------------------------------
# tables


def fmt(v) -> str:
    """Fixed 17-significant-digit formatting so identical runs give identical bytes."""
    v = float(v)
    if not math.isfinite(v):
        raise InvalidSpecError(f"refusing to write non-finite value {v!r}")
    return format(v, ".16e")


@dataclass
class Table:
    name: str
    header: list
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in r])
        return buf.getvalue()


def table_means(sc: Scenario, times) -> Table:
    s0 = sc.initial_state()
    rows = []
    for t in times:
        m = observables.state_moments(evolve_state(s0, float(t), sc.params))
        rows.append((t, m.mean_x, m.mean_p))
    return Table("means", ["t [s]", "mean_x [m]", "mean_p [kg m/s]"], rows)


def table_variances(sc: Scenario, times) -> Table:
    s0 = sc.initial_state()
    rows = []
    for t in times:
        m = observables.state_moments(evolve_state(s0, float(t), sc.params))
        rows.append((t, m.var_x, m.var_p, m.cov_xp))
    return Table("variances", ["t [s]", "var_x [m^2]", "var_p [kg^2 m^2/s^2]", "cov_xp [kg m^2/s]"], rows)


def table_purity(sc: Scenario, times) -> Table:
    s0 = sc.initial_state()
    rows = []
    for t in times:
        p = observables.trace_moments_x_only(evolve_state(s0, float(t), sc.params))[0]
        rows.append((t, p, 1 - p))
    return Table("purity", ["t [s]", "purity [1]", "linear_entropy [1]"], rows)


def table_coherence(sc: Scenario, times) -> Table:
    s0 = sc.initial_state()
    rows = []
    for t in times:
        st = evolve_state(s0, float(t), sc.params)
        Lx, Lp = observables.coherence_length(st, "x"), observables.coherence_length(st, "p")
        Mx, Mp = observables.spread(st, "x"), observables.spread(st, "p")
        rows.append((t, Lx, Lp, Mx, Mp, Lx * Mp, sc.physical.hbar / 2))
    header = ["t [s]", "L_x [m]", "L_p [kg m/s]", "M_x [m]", "M_p [kg m/s]", "L_x*M_p [J s]", "hbar/2 [J s]"]
    return Table("coherence", header, rows)


def table_attenuation(sc: Scenario, times, precision: str) -> Table:
    if not sc.is_cat:
        raise InvalidSpecError("attenuation needs a cat initial state")
    mode = "stable" if precision == "double" else "literal"
    rows = []
    for t in times:
        w = catlab.attenuation(sc.spec, sc.params, float(t), mode=mode, precision=precision)
        rows.append((t, w.W, w.log_W))
    return Table("attenuation", ["t [s]", "W [1]", "log_W [1]"], rows)


def _x_axis(sc: Scenario, times, points: int, half_width=None):
    if half_width is None:
        s0 = sc.initial_state()
        half_width = max(oracle.position_half_width(evolve_state(s0, float(t), sc.params), 6.0) for t in times)
    return oracle.uniform_axis(half_width, points)


def table_diagonal(sc: Scenario, times, points: int, half_width=None) -> Table:
    s0 = sc.initial_state()
    x = _x_axis(sc, times, points, half_width)
    rows = []
    for t in times:
        if sc.is_cat:
            rho = catlab.cat_diagonal(sc.spec, sc.params, float(t), x)
        else:
            rho = evaluate(to_position(evolve_state(s0, float(t), sc.params)), x, x).real
        rows.extend((t, xi, ri) for xi, ri in zip(x, rho))
    return Table("diagonal", ["t [s]", "x [m]", "rho(x,x) [1/m]"], rows)


def table_lindblad(sc: Scenario) -> Table:
    rep = diagnostics.lindblad_check(sc.diffusion, sc.physical.gamma, sc.physical.hbar)
    header = ["D_pp [kg^2 m^2/s^3]", "D_xx [m^2/s]", "product [J^2]", "threshold [J^2]", "margin [J^2]", "ratio [1]", "satisfied [bool]"]
    return Table("lindblad", header, [(sc.diffusion.D_pp, sc.diffusion.D_xx, rep.product, rep.threshold, rep.margin, rep.ratio, str(rep.satisfied).lower())])


def table_qsweep(sc: Scenario) -> Table:
    D_xx = sc.diffusion.D_xx
    if not D_xx > 0:
        raise InvalidSpecError("the q sweep needs D_xx > 0")
    g = sc.physical.gamma
    rows = [(q, r, g * (math.sqrt(q) - 1)) for q, r in diagnostics.q_sweep(D_xx, g, sc.config.q_grid, sc.physical.hbar)]
    return Table("qsweep", ["q [1]", "entropy_rate0 [1/s]", "gamma*(sqrt(q)-1) [1/s]"], rows)


def table_verify():
    from .verification import run_all

    results = run_all()
    rows = [(f"C{r.id}", r.name, "pass" if r.passed else "fail", r.value, r.tolerance) for r in results]
    return Table("verify", ["criterion [-]", "name [-]", "status [-]", "value [1]", "tolerance [1]"], rows), results


# ---------------------------------------------------------------------------
# run


@dataclass
class RunResult:
    files: dict
    manifest: Path
    ok: bool
    verification: list


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def run(cfg: ScenarioConfig, out_dir, precision: str = "double", grid_points=None, plots: bool = False, extra_tables=(), notes=None) -> RunResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = build_scenario(cfg)
    times = cfg.time_grid.values()
    points = grid_points or cfg.x_grid.points
    tables = []
    verification = []
    for kind in cfg.outputs:
        if kind == "means":
            tables.append(table_means(sc, times))
        elif kind == "variances":
            tables.append(table_variances(sc, times))
        elif kind == "purity":
            tables.append(table_purity(sc, times))
        elif kind == "coherence":
            tables.append(table_coherence(sc, times))
        elif kind == "attenuation":
            tables.append(table_attenuation(sc, times, precision))
        elif kind == "diagonal":
            tables.append(table_diagonal(sc, times, points, cfg.x_grid.half_width))
        elif kind == "lindblad":
            tables.append(table_lindblad(sc))
        elif kind == "qsweep":
            tables.append(table_qsweep(sc))
        elif kind == "verify":
            tab, verification = table_verify()
            tables.append(tab)
    tables.extend(extra_tables)
    files = {}
    for tab in tables:
        data = tab.to_csv().encode()
        path = out / f"{tab.name}.csv"
        path.write_bytes(data)
        files[path.name] = _sha256(data)
        if plots:
            script = plot_script(tab)
            if script:
                (out / f"plot_{tab.name}.py").write_text(script)
    rep = diagnostics.lindblad_check(sc.diffusion, sc.physical.gamma, sc.physical.hbar)
    manifest = {
        "qbmlab_version": __version__,
        "config": cfg.normalized(),
        "precision": precision,
        "grid_points": points,
        "diffusion": {"D_pp": sc.diffusion.D_pp, "D_xx": sc.diffusion.D_xx, "source": sc.diffusion.source.value},
        "lindblad": {"product": rep.product, "threshold": rep.threshold, "margin": rep.margin, "satisfied": rep.satisfied},
        "files": files,
    }
    if notes:
        manifest["notes"] = notes
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    ok = all(r.passed for r in verification)
    return RunResult(files, mpath, ok, verification)


# ---------------------------------------------------------------------------
# figures

_PLOT_TEMPLATE = '''"""Plot {name}.csv (needs matplotlib)."""
import csv
import matplotlib.pyplot as plt

with open("{name}.csv") as fh:
    rows = list(csv.reader(fh))
header, data = rows[0], [[float(c) for c in r] for r in rows[1:]]
cols = list(zip(*data))
fig, ax = plt.subplots()
for j in range(1, len(header)):
    ax.plot(cols[0], cols[j], label=header[j])
ax.set_xlabel(header[0])
{xscale}ax.legend()
fig.savefig("{name}.png", dpi=150)
'''


def plot_script(tab: Table):
    if tab.name in ("lindblad", "verify", "diagonal", "surface"):
        return None
    xscale = 'ax.set_xscale("log")\n' if tab.name in ("purity", "attenuation", "coherence") else ""
    return _PLOT_TEMPLATE.format(name=tab.name, xscale=xscale)


def figure_config(fig_id: str) -> ScenarioConfig:
    gauss = {"kind": "gaussian"}
    cat = {"kind": "cat"}
    if fig_id == "fig1":
        d = {"initial": gauss, "outputs": ["means", "variances"], "time_grid": {"start": 0.0, "stop": 5e-3, "points": 200}}
    elif fig_id == "fig2":
        d = {"initial": gauss, "outputs": ["purity"],
             "time_grid": {"start": 1e-26, "stop": 2e-5, "points": 120, "spacing": "log", "include_zero": True}}
    elif fig_id == "fig3":
        d = {"initial": gauss, "outputs": ["purity", "coherence"], "time_grid": {"start": 0.0, "stop": FIG3_TIME, "points": 2}}
    elif fig_id == "fig4":
        d = {"initial": cat, "diffusion": {"mode": "explicit", "D_pp": 0.0, "D_xx": 0.0}, "physical": {"gamma": 0.0},
             "outputs": ["diagonal"], "time_grid": {"start": 0.0, "stop": 4e-3, "points": 5}}
    elif fig_id == "fig5":
        d = {"initial": cat, "outputs": ["attenuation"],
             "time_grid": {"start": 1e-14, "stop": 1e-6, "points": 161, "spacing": "log", "include_zero": True}}
    elif fig_id == "fig6":
        d = {"initial": cat, "outputs": ["coherence"],
             "time_grid": {"start": 1e-26, "stop": 1e-2, "points": 97, "spacing": "log", "include_zero": True}}
    elif fig_id == "fig7":
        d = {"initial": gauss, "outputs": ["qsweep"], "q_grid": [round(0.1 * j, 10) for j in range(1, 41)],
             "time_grid": {"start": 0.0, "stop": 1.0, "points": 1}}
    else:
        raise InvalidSpecError(f"figure id must be one of {FIGURES}, got {fig_id!r}")
    return ScenarioConfig.model_validate(d)


# t* for the density-matrix surface: well before any spreading, after strong decoherence
FIG3_TIME = 1e-21


def surface_table(sc: Scenario, t: float, points: int) -> Table:
    """|rho(x, x', t)| on a square grid at time t (and the matching t = 0 grid)."""
    s0 = sc.initial_state()
    st = evolve_state(s0, t, sc.params)
    half = oracle.position_half_width(s0, 6.0)
    x = oracle.uniform_axis(half, points)
    rows = []
    for tt, state in ((0.0, s0), (t, st)):
        grid = np.abs(oracle.sample_state(state, x, x, "position").values)
        for i, xi in enumerate(x):
            for j, xj in enumerate(x):
                rows.append((tt, xi, xj, grid[i, j]))
    return Table("surface", ["t [s]", "x [m]", "x' [m]", "|rho(x,x')| [1/m]"], rows)


def offdiagonal_suppression(sc: Scenario, t: float) -> float:
    """Ratio of |rho(s)|/|rho(0)| at separation s = dx0 (centre of the packet), t = 0 over t."""
    s0 = sc.initial_state()
    dx = math.sqrt(observables.state_moments(s0).var_x)

    def contrast(state):
        X = observables.state_moments(state).mean_x
        pos = to_position(state)
        return abs(evaluate_rotated(pos, X, dx)) / abs(evaluate_rotated(pos, X, 0.0))

    return contrast(s0) / contrast(evolve_state(s0, t, sc.params))


def emit_figure_data(fig_id: str, out_dir, precision: str = "double", grid_points=None, plots: bool = False) -> RunResult:
    cfg = figure_config(fig_id)
    extra, notes = (), None
    if fig_id == "fig3":
        sc = build_scenario(cfg)
        extra = (surface_table(sc, FIG3_TIME, grid_points or 101),)
        notes = {"t_star": FIG3_TIME, "offdiagonal_suppression": offdiagonal_suppression(sc, FIG3_TIME)}
    return run(cfg, out_dir, precision=precision, grid_points=grid_points, plots=plots, extra_tables=extra, notes=notes)
