"""Command-line frontend: one subcommand per study, CSV/SVG outputs.

Every run validates its configuration before any compute (unknown keys
in a config file are rejected), writes its outputs plus a manifest with
the echoed configuration and per-file checksums, and uses a uniform
exit-code scheme: 0 ok, 2 configuration error, 3 solver failure,
4 partial grid failure (outputs still written, failures flagged).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, GallopError
from .integrator import IntegratorConfig, integrate
from .model import ModelParams, State, galloping_field
from . import equilibria as eqmod
from .cycles import continue_branch, branch_extrema
from .connections import (ClassifyOptions, ManifoldKind, classify_portrait,
                          manifold_branch)
from .experiments import (basin_map_ic, basin_map_ramp, ellipsoid_scan,
                          envelope_predict, normal_form_chart,
                          normal_form_s_point, ramp_envelope, ramp_run)
from . import io as gio

MODEL_KEYS = [
    ("b", float, 0.5, "combined stiffness margin"),
    ("e", float, -0.01, "imperfection"),
    ("v", float, 1.0, "wind speed parameter"),
    ("p", float, 0.1, "aerodynamic prefactor"),
    ("r", float, 0.1, "structural damping"),
]

SPECS = {
    "equilibria": MODEL_KEYS + [
        ("sensitivity", bool, False, "compute the imperfection-sensitivity table"),
        ("e_min", float, 1e-4, "smallest |e| for the sensitivity sweep"),
        ("e_max", float, 1e-2, "largest |e| for the sensitivity sweep"),
        ("n_e", int, 9, "sensitivity sweep points"),
        ("b_start", float, 1.0, "continuation start stiffness"),
        ("path_seed_x", float, None, "seed deflection for a nontrivial path"),
    ],
    "hopf": MODEL_KEYS,
    "branch": MODEL_KEYS + [
        ("v_min", float, 0.0, "lower continuation bound"),
        ("v_max", float, 4.0, "upper continuation bound"),
        ("period_cap", float, 200.0, "terminate when the period exceeds this"),
        ("n_orbits", int, 8, "sampled orbits exported for the overlay"),
    ],
    "portrait": MODEL_KEYS,
    "ellipsoid": [
        ("R", float, 0.2, "ellipsoid radius parameter"),
        ("n_phi", int, 181, "phi grid points"),
        ("n_psi", int, 181, "psi grid points"),
        ("p", float, 0.1, "aerodynamic prefactor"),
        ("r", float, 0.1, "structural damping"),
        ("refine", bool, True, "refine bifurcation arcs"),
        ("transect_psis", list, [], "psi rows for cyclic-fold transects"),
        ("workers", int, 1, "parallel workers"),
    ],
    "ramp": MODEL_KEYS + [
        ("gamma", float, 0.01, "ramp rate"),
        ("v0", float, None, "start speed (default: half the Hopf speed)"),
        ("v0_list", list, [], "several start speeds (overrides v0)"),
        ("x0", float, None, "initial angle (default: equilibrium - 0.05)"),
        ("xdot0", float, 0.0, "initial rate"),
        ("jump_factor", float, 10.0, "growth threshold for the jump-off speed"),
        ("envelope", bool, False, "export the predicted amplitude envelope"),
    ],
    "basin": [
        ("mode", str, "ramp", "'ramp' (v0 x gamma) or 'ic' (x0 x xdot0)"),
        ("b", float, 0.5, "combined stiffness margin"),
        ("e", float, -0.01, "imperfection"),
        ("p", float, 0.1, "aerodynamic prefactor"),
        ("r", float, 0.2, "structural damping"),
        ("v0_min", float, 0.4, "ramp-mode v0 sweep start"),
        ("v0_max", float, None, "ramp-mode v0 sweep end (default just below Hopf)"),
        ("n_v0", int, 512, "ramp-mode v0 steps"),
        ("log2_gamma_min", int, -5, "ramp-mode smallest log2 gamma row"),
        ("log2_gamma_max", int, 0, "ramp-mode largest log2 gamma row"),
        ("init_offset", float, -0.05, "ramp-mode initial angle offset"),
        ("v0", float, None, "ic-mode start speed (default: half the Hopf speed)"),
        ("gamma", float, 0.01, "ic-mode ramp rate"),
        ("x_min", float, -1.2, "ic-mode x0 range start"),
        ("x_max", float, 1.2, "ic-mode x0 range end"),
        ("n_x", int, 256, "ic-mode x0 steps"),
        ("xdot_min", float, -0.8, "ic-mode xdot0 range start"),
        ("xdot_max", float, 0.8, "ic-mode xdot0 range end"),
        ("n_xdot", int, 256, "ic-mode xdot0 steps"),
        ("rel_tol", float, 1e-6, "grid integration relative tolerance"),
        ("abs_tol", float, 1e-9, "grid integration absolute tolerance"),
        ("workers", int, 1, "parallel workers"),
    ],
    "normal-form": [
        ("w_min", float, -1.0, "w range start"),
        ("w_max", float, 1.0, "w range end"),
        ("p_min", float, -1.0, "p range start"),
        ("p_max", float, 1.0, "p range end"),
        ("n_w", int, 21, "w grid points"),
        ("n_p", int, 21, "p grid points"),
        ("s_w", float, -0.1, "fixed w for the saddle-connection transect"),
        ("s_p_min", float, -0.9, "transect p bracket start"),
        ("s_p_max", float, -0.1, "transect p bracket end"),
        ("workers", int, 1, "parallel workers"),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gallop",
        description="Bifurcation analysis of the galloping-buckling oscillator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, spec in SPECS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=str, default=None,
                        help="JSON config file (flags override it)")
        sp.add_argument("--out", type=str, default=None,
                        help="output directory (default: GALLOP_OUT_ROOT or cwd)")
        for key, typ, _default, help_text in spec:
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True,
                                default=None, help=help_text)
            elif typ is list:
                sp.add_argument(flag, dest=key, type=str, default=None,
                                help=help_text + " (comma-separated)")
            else:
                sp.add_argument(flag, dest=key, type=typ, default=None,
                                help=help_text)
    return ap


def resolve_config(args) -> dict:
    spec = SPECS[args.command]
    known = {key for key, *_ in spec}
    config = {key: default for key, _t, default, _h in spec}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config.update(loaded)
    for key, typ, _default, _h in spec:
        flag_val = getattr(args, key)
        if flag_val is not None:
            if typ is list and isinstance(flag_val, str):
                flag_val = [float(x) for x in flag_val.split(",") if x]
            config[key] = flag_val
        elif typ is list and isinstance(config[key], str):
            config[key] = [float(x) for x in config[key].split(",") if x]
    _validate(config, args.command)
    return config


def _validate(config: dict, command: str):
    for key, typ, _d, _h in SPECS[command]:
        val = config[key]
        if val is None:
            continue
        if typ in (float, int) and not isinstance(val, (int, float)):
            raise ConfigError(f"{key} must be a number, got {val!r}")
        if typ is list and not isinstance(val, (list, tuple)):
            raise ConfigError(f"{key} must be a list")
    for key in ("n_e", "n_phi", "n_psi", "n_v0", "n_x", "n_xdot", "n_w", "n_p",
                "n_orbits", "workers"):
        if key in config and config[key] is not None and int(config[key]) < 1:
            raise ConfigError(f"{key} must be at least 1")


def _params(config) -> ModelParams:
    return ModelParams(b=config["b"], e=config["e"],
                       v=config.get("v", 0.0) or 0.0,
                       p=config["p"], r=config["r"])


def _orbit_samples(q: ModelParams, cyc, n: int = 200):
    field = galloping_field(q.with_v(cyc.v))
    cfg = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11, t_max=cyc.period)
    traj = integrate(field.rhs, cyc.section_state, cfg=cfg)
    ts = np.linspace(0.0, cyc.period, n)
    pts = np.array([traj.at(min(t, traj.final_time)) for t in ts])
    return pts


# ---------------------------------------------------------------------------
# Subcommand bodies: each returns (output paths, partial_failure)
# ---------------------------------------------------------------------------

def cmd_equilibria(config, out):
    q = _params(config)
    chash = gio.config_hash(config)
    eqs = eqmod.find_equilibria(q)
    rows = [(eq.x, eq.eigenvalues[0].real, eq.eigenvalues[0].imag,
             eq.eigenvalues[1].real, eq.eigenvalues[1].imag, eq.kind.value)
            for eq in eqs]
    files = [gio.write_csv(out / "equilibria.csv",
                           ["x", "eig1_re", "eig1_im", "eig2_re", "eig2_im",
                            "kind"], rows,
                           {"config_hash": chash, "b": q.b, "e": q.e, "v": q.v})]
    for eq in eqs:
        print(f"x = {eq.x:+.9f}  {eq.kind.value}")

    if config["sensitivity"]:
        sign = -1.0 if config["e"] <= 0 else 1.0
        e_vals = sign * np.geomspace(config["e_min"], config["e_max"],
                                     int(config["n_e"]))
        sens = eqmod.imperfection_sensitivity(e_vals, b_start=config["b_start"])
        files.append(gio.write_csv(
            out / "sensitivity.csv", ["e", "b_fold"],
            list(zip(sens.e, sens.b_fold)),
            {"config_hash": chash, "loglog_slope": repr(sens.slope)}))
        print(f"imperfection-sensitivity log-log slope = {sens.slope:.4f}")
    else:
        seed = None
        if config["path_seed_x"] is not None:
            x0 = config["path_seed_x"]
            if q.e == 0.0:
                b0 = 1.0 / math.cos(x0) - 1.0
            else:
                b0 = config["b_start"]
            seed = (x0, b0)
        path = eqmod.static_path(q.e, b_start=config["b_start"], seed=seed)
        files.append(gio.write_csv(
            out / "static_path.csv", ["b", "x", "stable"],
            list(zip(path.b, path.x, path.stable)),
            {"config_hash": chash, "e": q.e,
             "folds": ";".join("%r,%r" % f for f in path.folds),
             "branch_points": ";".join("%r,%r" % f for f in path.branch_points)}))
        if path.folds:
            print(f"fold at b = {path.folds[0][0]:.9f}, x = {path.folds[0][1]:.9f}")
        for bp in path.branch_points:
            print(f"branch point at b = {bp[0]:.3e}")
    return files, False


def cmd_hopf(config, out):
    q = _params(config)
    v_ana = eqmod.hopf_velocity(q)
    v_num = eqmod.hopf_velocity_numeric(q)
    print(f"analytic Hopf speed: {v_ana!r}")
    print(f"numeric  Hopf speed: {v_num!r}")
    files = [gio.write_csv(out / "hopf.csv", ["v_hopf_analytic", "v_hopf_numeric"],
                           [(v_ana, v_num)],
                           {"config_hash": gio.config_hash(config),
                            "r": q.r, "p": q.p})]
    return files, False


def cmd_branch(config, out):
    q = _params(config).with_v(eqmod.hopf_velocity(_params(config)))
    chash = gio.config_hash(config)
    branch = continue_branch(q, v_range=(config["v_min"], config["v_max"]),
                             period_cap=config["period_cap"])
    tab = branch_extrema(branch)
    files = [gio.write_csv(
        out / "branch.csv",
        ["v", "x_max", "x_min", "period", "multiplier", "stable"],
        tab.tolist(),
        {"config_hash": chash, "origin": branch.origin,
         "termination": branch.termination,
         "fold_indices": ";".join(str(i) for i in branch.folds)})]

    canvas = gio.SvgCanvas((tab[:, 0].min() - 0.05, tab[:, 0].max() + 0.05),
                           (tab[:, 2].min() - 0.05, tab[:, 1].max() + 0.05))
    for stable in (True, False):
        mask = tab[:, 5] == (1.0 if stable else 0.0)
        if mask.any():
            canvas.polyline(tab[mask, 0], tab[mask, 1],
                            stroke="black" if stable else "gray")
            canvas.polyline(tab[mask, 0], tab[mask, 2],
                            stroke="black" if stable else "gray")
    files.append(canvas.save(out / "branch.svg"))

    n_orb = max(int(config["n_orbits"]), 1)
    picks = np.unique(np.linspace(0, len(branch.cycles) - 1, n_orb).astype(int))
    orbit_rows = []
    for k, idx in enumerate(picks):
        cyc = branch.cycles[idx]
        if cyc.period > 100.0:
            continue
        for t, (x, xd) in zip(np.linspace(0, cyc.period, 200),
                              _orbit_samples(q, cyc)):
            orbit_rows.append((k, cyc.v, t, x, xd))
    files.append(gio.write_csv(out / "orbits.csv",
                               ["orbit", "v", "t", "x", "xdot"], orbit_rows,
                               {"config_hash": chash}))
    print(f"branch: {len(branch.cycles)} points, folds at "
          f"{[round(branch.cycles[i].v, 6) for i in branch.folds]}, "
          f"end period {tab[-1, 3]:.2f} ({branch.termination})")
    return files, False


def cmd_portrait(config, out):
    q = _params(config)
    chash = gio.config_hash(config)
    pc = classify_portrait(q)
    print(f"equilibria: {pc.n_equilibria} "
          f"({', '.join(k.value for k in pc.eq_kinds)})")
    print(f"cycles: {pc.n_cycles} "
          f"({', '.join('stable' if s else 'unstable' for s in pc.cycle_stability)})")
    print(f"escape: {pc.escape.value}")
    eq_rows = [(eq.x, eq.kind.value) for eq in pc.equilibria]
    files = [gio.write_csv(out / "portrait_equilibria.csv", ["x", "kind"],
                           eq_rows,
                           {"config_hash": chash, "escape": pc.escape.value,
                            "n_cycles": pc.n_cycles})]

    man_rows = []
    field = galloping_field(q)
    for eq in pc.equilibria:
        if eq.kind is not eqmod.EqKind.SADDLE:
            continue
        for kind in (ManifoldKind.UNSTABLE, ManifoldKind.STABLE):
            for side in (+1, -1):
                br = manifold_branch(eq, kind, side, q)
                tag = f"{kind.value}_{'+' if side > 0 else '-'}_{eq.x:.3f}"
                for t, (x, xd) in zip(br.trajectory.t, br.trajectory.states):
                    man_rows.append((tag, t, x, xd))
    files.append(gio.write_csv(out / "portrait_manifolds.csv",
                               ["branch", "t", "x", "xdot"], man_rows,
                               {"config_hash": chash}))

    cyc_rows = []
    for k, cyc in enumerate(pc.cycles):
        for t, (x, xd) in zip(np.linspace(0, cyc.period, 200),
                              _orbit_samples(q, cyc)):
            cyc_rows.append((k, int(cyc.stable), t, x, xd))
    files.append(gio.write_csv(out / "portrait_cycles.csv",
                               ["cycle", "stable", "t", "x", "xdot"], cyc_rows,
                               {"config_hash": chash}))

    canvas = gio.SvgCanvas((-1.7, 1.7), (-1.5, 1.5))
    seen = {}
    for tag, t, x, xd in man_rows:
        seen.setdefault(tag, []).append((x, xd))
    for tag, pts in seen.items():
        arr = np.asarray(pts)
        canvas.polyline(arr[:, 0], arr[:, 1],
                        stroke="steelblue" if "unstable" in tag else "indianred")
    for k, cyc in enumerate(pc.cycles):
        pts = _orbit_samples(q, cyc)
        canvas.polyline(pts[:, 0], pts[:, 1],
                        stroke="black" if cyc.stable else "gray", width=1.5)
    for eq in pc.equilibria:
        canvas.circle(eq.x, 0.0, fill="black")
    files.append(canvas.save(out / "portrait.svg"))
    return files, False


def cmd_ellipsoid(config, out):
    chash = gio.config_hash(config)
    chart = ellipsoid_scan(R=config["R"], n_phi=int(config["n_phi"]),
                           n_psi=int(config["n_psi"]), p=config["p"],
                           r=config["r"], refine=config["refine"],
                           workers=int(config["workers"]),
                           transect_psis=tuple(config["transect_psis"]))
    legend = "; ".join(
        f"{i}=({s[0]} eq, {s[2]} cyc, {s[4].value})"
        for i, s in enumerate(chart.signatures))
    rows = [(chart.phis[i_phi], chart.psis[i_psi],
             int(chart.codes[i_psi, i_phi]))
            for i_psi in range(len(chart.psis))
            for i_phi in range(len(chart.phis))]
    from .connections import ClassifyOptions
    opts = ClassifyOptions()
    files = [gio.write_csv(out / "chart.csv", ["phi", "psi", "code"], rows,
                           {"config_hash": chash, "R": config["R"],
                            "scan_rel_tol": opts.scan_cfg.rel_tol,
                            "scan_abs_tol": opts.scan_cfg.abs_tol,
                            "probe_rel_tol": opts.probe_cfg.rel_tol,
                            "legend": legend})]
    arc_rows = [(tag, phi, psi) for tag, pts in sorted(chart.arcs.items())
                for phi, psi in pts]
    files.append(gio.write_csv(out / "arcs.csv", ["arc", "phi", "psi"],
                               arc_rows, {"config_hash": chash}))
    if chart.transects:
        files.append(gio.write_csv(
            out / "transects.csv",
            ["psi", "phi_hom", "b", "e", "v_hom", "v_fold", "gap"],
            [(t["psi"], t["phi_hom"], t["b"], t["e"], t["v_hom"], t["v_fold"],
              t["gap"]) for t in chart.transects],
            {"config_hash": chash}))
    files.append(gio.write_pgm(out / "chart.pgm", chart.codes,
                               maxval=max(len(chart.signatures) - 1, 1)))

    palette = {i: f"hsl({(i * 47) % 360},60%,{45 + (i % 3) * 15}%)"
               for i in range(len(chart.signatures))}
    canvas = gio.SvgCanvas((-1.05, 1.05), (-1.05, 1.05))
    canvas.raster(chart.phis, chart.psis, chart.codes, palette)
    arc_colors = {"fold": "blue", "hopf": "darkgreen", "homoclinic": "lightgreen",
                  "heteroclinic": "purple", "cyclic_fold": "orange",
                  "symmetry_line": "red", "cusp": "black"}
    for tag, pts in chart.arcs.items():
        for phi, psi in pts:
            canvas.circle(phi, psi, r_px=2.0, fill=arc_colors.get(tag, "black"))
    files.append(canvas.save(out / "chart.svg"))
    if chart.failures:
        print(f"{len(chart.failures)} cell/refinement failures (see manifest)")
    return files, bool(chart.failures)


def cmd_ramp(config, out):
    q = _params(config)
    chash = gio.config_hash(config)
    v_h = eqmod.hopf_velocity(q)
    v0s = list(config["v0_list"]) or [config["v0"] if config["v0"] is not None
                                      else 0.5 * v_h]
    init = None
    if config["x0"] is not None:
        init = State(config["x0"], config["xdot0"])
    summary, files = [], []
    for k, v0 in enumerate(v0s):
        res = ramp_run(q, config["gamma"], init=init, v0=float(v0),
                       jump_factor=config["jump_factor"])
        summary.append((v0, config["gamma"], res.outcome.value, res.v_jump,
                        res.tunnelling))
        traj = res.trajectory
        files.append(gio.write_csv(
            out / f"ramp_{k:03d}.csv", ["t", "x", "xdot", "v"],
            [(t, s[0], s[1], vv) for t, s, vv in
             zip(traj.t, traj.states, traj.v_of_t)],
            {"config_hash": chash, "v0": v0, "gamma": config["gamma"]}))
        print(f"v0={v0:.6g}: {res.outcome.value}, v_jump={res.v_jump:.6g}, "
              f"tunnelling={res.tunnelling:+.6g}")
    from .experiments import RAMP_CFG
    files.insert(0, gio.write_csv(
        out / "ramp_summary.csv",
        ["v0", "gamma", "outcome", "v_jump", "tunnelling"], summary,
        {"config_hash": chash, "v_hopf": repr(v_h),
         "rel_tol": RAMP_CFG.rel_tol, "abs_tol": RAMP_CFG.abs_tol}))
    if config["envelope"]:
        v0 = float(v0s[0])
        res = ramp_run(q, config["gamma"], init=init, v0=v0,
                       jump_factor=config["jump_factor"])
        d0 = abs(res.init.x - eqmod.central_equilibrium(
            eqmod.find_equilibria(q.with_v(0.0))).x)
        pred = envelope_predict(q, config["gamma"], v0, d0,
                                min(res.v_jump + 0.2, 2.4 * v_h))
        files.append(gio.write_csv(out / "envelope.csv", ["nu", "d_predicted"],
                                   list(zip(pred.nu, pred.d)),
                                   {"config_hash": chash, "d0": d0}))
        nu_pk, amp_pk = ramp_envelope(res, q)
        files.append(gio.write_csv(out / "envelope_peaks.csv",
                                   ["nu", "amplitude"],
                                   list(zip(nu_pk, amp_pk)),
                                   {"config_hash": chash}))
    return files, False


def cmd_basin(config, out):
    chash = gio.config_hash(config)
    q = ModelParams(b=config["b"], e=config["e"], v=0.0, p=config["p"],
                    r=config["r"])
    v_h = eqmod.hopf_velocity(q)
    cfg = IntegratorConfig(rel_tol=config["rel_tol"], abs_tol=config["abs_tol"],
                           t_max=1e6)
    if config["mode"] == "ramp":
        v0_max = config["v0_max"] if config["v0_max"] is not None else v_h - 0.05
        v0s = np.linspace(config["v0_min"], v0_max, int(config["n_v0"]))
        gammas = [2.0 ** k for k in range(int(config["log2_gamma_min"]),
                                          int(config["log2_gamma_max"]) + 1)]
        bm = basin_map_ramp(q, v0s, gammas, init_offset=config["init_offset"],
                            cfg=cfg, workers=int(config["workers"]))
        rows = [(g, v0, int(bm.outcomes[gi, vi]))
                for gi, g in enumerate(gammas) for vi, v0 in enumerate(v0s)]
        files = [gio.write_csv(out / "basin.csv", ["gamma", "v0", "outcome"],
                               rows, {"config_hash": chash, "v_hopf": repr(v_h),
                                      "codes": "0=left,1=right,2=captured"})]
        xs, ys = v0s, np.log2(gammas)
    elif config["mode"] == "ic":
        v0 = config["v0"] if config["v0"] is not None else 0.5 * v_h
        xs = np.linspace(config["x_min"], config["x_max"], int(config["n_x"]))
        ys = np.linspace(config["xdot_min"], config["xdot_max"],
                         int(config["n_xdot"]))
        bm = basin_map_ic(q, xs, ys, v0=v0, gamma=config["gamma"], cfg=cfg,
                          workers=int(config["workers"]))
        rows = [(x0, xd0, int(bm.outcomes[yi, xi]))
                for yi, xd0 in enumerate(ys) for xi, x0 in enumerate(xs)]
        files = [gio.write_csv(out / "basin.csv", ["x0", "xdot0", "outcome"],
                               rows, {"config_hash": chash, "v0": v0,
                                      "gamma": config["gamma"],
                                      "codes": "0=left,1=right,2=captured"})]
    else:
        raise ConfigError(f"unknown basin mode {config['mode']!r}")
    files.append(gio.write_pgm(out / "basin.pgm", bm.outcomes))
    canvas = gio.SvgCanvas((float(xs[0]), float(xs[-1])),
                           (float(ys[0]), float(ys[-1])))
    canvas.raster(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float),
                  bm.outcomes, {0: "black", 1: "white", 2: "#cc4444"})
    files.append(canvas.save(out / "basin.svg"))
    n_cap = int((bm.outcomes == 2).sum())
    if n_cap:
        print(f"{n_cap} cells captured (flagged in basin.csv)")
    return files, False


def cmd_normal_form(config, out):
    chash = gio.config_hash(config)
    ws = np.linspace(config["w_min"], config["w_max"], int(config["n_w"]))
    ps = np.linspace(config["p_min"], config["p_max"], int(config["n_p"]))
    chart = normal_form_chart(ws, ps, workers=int(config["workers"]))
    legend = "; ".join(f"{i}=({s[0]} eq, {s[2]} cyc, {s[4].value})"
                       for i, s in enumerate(chart.signatures))
    rows = [(ws[i_w], ps[i_p], int(chart.codes[i_p, i_w]))
            for i_p in range(len(ps)) for i_w in range(len(ws))]
    files = [gio.write_csv(out / "nf_chart.csv", ["w", "p", "code"], rows,
                           {"config_hash": chash, "legend": legend})]
    s_point = None
    try:
        s_point = normal_form_s_point(config["s_w"],
                                      (config["s_p_min"], config["s_p_max"]))
        print(f"saddle-connection transect: w={config['s_w']}, p*={s_point!r}")
    except GallopError as exc:
        print(f"saddle-connection transect failed: {exc}", file=sys.stderr)
    files.append(gio.write_csv(out / "nf_s_point.csv", ["w", "p_star"],
                               [(config["s_w"], s_point)] if s_point is not None
                               else [],
                               {"config_hash": chash}))
    palette = {i: f"hsl({(i * 61) % 360},55%,55%)"
               for i in range(len(chart.signatures))}
    canvas = gio.SvgCanvas((float(ws[0]), float(ws[-1])),
                           (float(ps[0]), float(ps[-1])))
    canvas.raster(ws, ps, chart.codes, palette)
    files.append(canvas.save(out / "nf_chart.svg"))
    return files, bool(chart.failures) or s_point is None


COMMANDS = {
    "equilibria": cmd_equilibria,
    "hopf": cmd_hopf,
    "branch": cmd_branch,
    "portrait": cmd_portrait,
    "ellipsoid": cmd_ellipsoid,
    "ramp": cmd_ramp,
    "basin": cmd_basin,
    "normal-form": cmd_normal_form,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = gio.output_root(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        files, partial = COMMANDS[args.command](config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GallopError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    gio.write_manifest(out, args.command, config, files, time.time() - t0)
    return 4 if partial else 0


if __name__ == "__main__":
    sys.exit(main())
