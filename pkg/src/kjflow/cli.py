"""Batch command-line interface.

Usage: kjflow <command> --config <path> [--seed N] [--out DIR]

Commands: hilbert, symbols, possio, flowmap, plate, simulate, verify-all.
Configs are plain key=value text (whitespace or newline separated);
unknown keys are rejected and all validation errors are reported at once.
Every run writes a manifest, delimited tables, and rendered figures into
the output directory, plus a summary with one PASS/FAIL line per check.
Exit codes: 0 all checks pass, 1 check failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import reporting
from .hilbert import ChebFunction, cheb_nodes, fht_forward, fht_tricomi_inverse
from .symbols import verify_multiplier_bounds
from .possio import (LineGrid, PossioProblem, apply_possio, solve_possio,
                     trace_diagnostic)
from .flowmap import (HalfPlaneGrid, check_duality_identity, neumann_flow_map,
                      resolvent_solve)
from .plate import (Berger, Kirchhoff, PlateGrid, VonKarman,
                    potential_gradient_check, potential_lower_bound, vk_bracket)
from .coupled import (CoupledState, CoupledSystem, admissibility_constant,
                      default_grid, evolve, picard_evolve)

COMMANDS = ("hilbert", "symbols", "possio", "flowmap", "plate", "simulate",
            "verify-all")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _pos_float(v):
    if v <= 0:
        raise ValueError("must be positive")
    return v


def _subsonic(v):
    if not (0 <= v < 1):
        raise ValueError("U must lie in [0,1)")
    return v


def _choice(*options):
    def check(v):
        if v not in options:
            raise ValueError(f"must be one of {options}")
        return v
    return check


def _int_min(lo):
    def check(v):
        if v < lo:
            raise ValueError(f"must be >= {lo}")
        return v
    return check


# key -> (caster, validator, default)
SCHEMAS = {
    "hilbert": {
        "n_nodes": (int, _int_min(8), 64),
        "max_mode": (int, _int_min(1), 6),
    },
    "symbols": {
        "alpha": (float, _pos_float, 1.0),
        "U": (float, _subsonic, 0.5),
        "resolution": (int, _int_min(10), 100),
        "bound_scale": (float, _pos_float, 1.0),
    },
    "possio": {
        "tau_re": (float, _pos_float, 1.0),
        "tau_im": (float, lambda v: v, 2.0),
        "U": (float, _subsonic, 0.5),
        "n_nodes": (int, _int_min(8), 64),
        "n_line": (int, _int_min(256), 4096),
        "L": (float, _pos_float, 8.0),
    },
    "flowmap": {
        "U": (float, _subsonic, 0.5),
        "levels": (int, _int_min(2), 3),
        "lx": (float, _pos_float, 4.0),
        "lz": (float, _pos_float, 2.0),
        "h": (float, _pos_float, 0.125),
    },
    "plate": {
        "kind": (str, _choice("kirchhoff", "berger", "vonkarman"), "kirchhoff"),
        "seeds": (int, _int_min(1), 5),
    },
    "simulate": {
        "U": (float, _subsonic, 0.0),
        "T": (float, _pos_float, 1.0),
        "dt": (float, _pos_float, 1e-3),
        "nonlinearity": (str, _choice("none", "kirchhoff", "berger"), "none"),
        "lx": (float, _pos_float, 8.0),
        "lz": (float, _pos_float, 3.0),
        "h": (float, _pos_float, 0.125),
    },
    "verify-all": {
        "bound_scale": (float, _pos_float, 1.0),
    },
}


@dataclass
class ExperimentConfig:
    command: str
    parameters: dict
    output_dir: Path = Path("kjflow-out")
    seed: int = 0
    errors: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors


def parse_config(text: str, command: str | None = None) -> ExperimentConfig:
    """Parse key=value config text; collects every error instead of
    stopping at the first."""
    errors = []
    pairs = {}
    for tok in text.split():
        if "=" not in tok:
            errors.append(f"malformed token {tok!r} (expected key=value)")
            continue
        k, v = tok.split("=", 1)
        if k in pairs:
            errors.append(f"duplicate key {k!r}")
        pairs[k] = v

    cmd = pairs.pop("command", command)
    if cmd is None:
        errors.append("missing required key 'command'")
        return ExperimentConfig("", {}, errors=errors)
    if command is not None and cmd != command:
        errors.append(f"config command {cmd!r} conflicts with requested "
                      f"{command!r}")
    if cmd not in SCHEMAS:
        errors.append(f"unknown command {cmd!r} (choose from {COMMANDS})")
        return ExperimentConfig(str(cmd), {}, errors=errors)

    schema = SCHEMAS[cmd]
    params = {k: d for k, (_, _, d) in schema.items()}
    for k, raw in pairs.items():
        if k not in schema:
            errors.append(f"unknown key {k!r} for command {cmd!r}")
            continue
        caster, validator, _ = schema[k]
        try:
            params[k] = validator(caster(raw))
        except ValueError as exc:
            msg = str(exc) or "invalid value"
            errors.append(f"{k}={raw}: {msg}")
    return ExperimentConfig(cmd, params, errors=errors)


# --------------------------------------------------------------------------
# check plumbing
# --------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _bump(t, a, b):
    s = (2 * np.asarray(t) - a - b) / (b - a)
    out = np.zeros_like(s, dtype=float)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1 - s[inside] ** 2))
    return out


def _sample_coupled_state(grid, U, amp=1.0):
    X, Z = np.meshgrid(grid.x, grid.z, indexing="ij")
    phi = amp * _bump(X, -2, 2) * _bump(Z, 0.2, 2 * grid.Lz - 0.4)
    psi = 0.5 * amp * _bump(X, -0.9, 0.9) * _bump(Z, -grid.Lz / 2, grid.Lz / 2)
    psi[~grid.omega_mask, 0] = 0.0
    xo = grid.x[grid.omega_mask]
    u = 0.3 * amp * (1 - xo**2) ** 2
    v = 0.1 * amp * xo * (1 - xo**2) ** 2
    return CoupledState(grid, U, phi, psi, u, v)


# --------------------------------------------------------------------------
# command runners: each writes artifacts and returns a list of Checks
# --------------------------------------------------------------------------

def run_hilbert(p, out, rng):
    n = p["n_nodes"]
    x = cheb_nodes(n)
    rows = []
    worst_fwd = 0.0
    for mode in range(1, p["max_mode"] + 1):
        # transform of sqrt(1-x^2) U_{m-1} is T_m
        vals = np.sin(mode * np.arccos(x)) / np.sin(np.arccos(x))
        g = fht_forward(ChebFunction(vals, "sqrt"))
        ref = np.cos(mode * np.arccos(x))
        err = float(np.max(np.abs(g.values - ref)))
        worst_fwd = max(worst_fwd, err)
        rows.append((mode, err))
    # null space: 1/sqrt(1-x^2) maps to zero
    null_err = float(np.max(np.abs(
        fht_forward(ChebFunction(np.ones(n), "inv_sqrt")).values)))
    # round trips on random sqrt-class inputs
    worst_rt = 0.0
    for _ in range(10):
        f = ChebFunction(np.polynomial.chebyshev.chebval(
            x, rng.standard_normal(8)), "sqrt")
        back = fht_tricomi_inverse(fht_forward(f), 0.0)
        worst_rt = max(worst_rt, float(np.max(np.abs(back.sample() - f.sample()))))
    reporting.write_csv(out / "forward_errors.csv", ["mode", "max_abs_error"], rows)
    demo = ChebFunction(np.ones(n), "sqrt")
    reporting.save_line_plot(out / "transform_pair.png", x,
                             {"input": demo.sample(),
                              "transform": fht_forward(demo).values.real},
                             xlabel="x", title="finite Hilbert transform pair")
    return [
        Check("forward-pairs", worst_fwd < 1e-8, f"max error {worst_fwd:.2e}"),
        Check("null-space", null_err < 1e-10, f"max image {null_err:.2e}"),
        Check("round-trip", worst_rt < 1e-8, f"max error {worst_rt:.2e}"),
    ]


def run_symbols(p, out, rng):
    rep = verify_multiplier_bounds(resolution=p["resolution"],
                                   bound_scale=p["bound_scale"])
    reporting.write_csv(
        out / "worst_margins.csv",
        ["alpha", "eta", "z_U", "case", "abs_M", "bound", "margin"],
        rep.worst_points)
    reporting.write_manifest(out / "bound_report.txt", {
        "n_points": rep.n_points,
        "violations_printed": rep.violations_printed,
        "violations_corrected": rep.violations_corrected,
        "worst_margin_printed": rep.worst_margin_printed,
        "worst_margin_corrected": rep.worst_margin_corrected,
        "fitted_C": rep.fitted_C,
        "fitted_c": rep.fitted_c,
    })
    # |M| slice figure at the configured alpha, z_U = eta
    eta = np.linspace(0.5, 100, 400)
    from .symbols import _abs_M
    reporting.save_line_plot(out / "multiplier_slice.png", eta,
                             {"|M| (z_U=eta)": _abs_M(p["alpha"], eta, eta)},
                             xlabel="eta", title="multiplier magnitude slice")
    checks = [
        Check("corrected-bounds", rep.violations_corrected == 0,
              f"{rep.violations_corrected} violations on {rep.n_points} points "
              f"(worst margin {rep.worst_margin_corrected:.2e})"),
    ]
    info = (f"printed-constant bound: {rep.violations_printed} violations "
            f"(worst margin {rep.worst_margin_printed:.2e}) [informational]")
    checks.append(Check("printed-bounds-report", True, info))
    return checks


def run_possio(p, out, rng):
    grid = LineGrid(L=p["L"], n=p["n_line"])
    tau = complex(p["tau_re"], p["tau_im"])
    n = p["n_nodes"]
    x = cheb_nodes(n)
    window = np.where(np.abs(x) < 0.9, (1 - (x / 0.9) ** 2) ** 6, 0.0)
    psi_star = window * np.polynomial.chebyshev.chebval(x, rng.standard_normal(6))
    d = apply_possio(psi_star, grid, tau, p["U"], n)
    prob = PossioProblem(ChebFunction(d, "smooth"), tau, p["U"], grid)
    direct = solve_possio(prob, "direct")
    decomp = solve_possio(prob, "decomposed")
    agree = float(np.linalg.norm(direct.psi_hat.values - decomp.psi_hat.values)
                  / np.linalg.norm(direct.psi_hat.values))
    td = trace_diagnostic(decomp.psi_hat, grid)
    reporting.write_csv(
        out / "solution.csv",
        ["x", "psi_true", "psi_direct_re", "psi_direct_im",
         "psi_decomposed_re", "psi_decomposed_im"],
        [(x[k], psi_star[k], direct.psi_hat.values[k].real,
          direct.psi_hat.values[k].imag, decomp.psi_hat.values[k].real,
          decomp.psi_hat.values[k].imag) for k in range(n)])
    reporting.write_manifest(out / "residuals.txt", {
        "residual_direct": direct.residual,
        "residual_decomposed": decomp.residual,
        "path_agreement": agree,
        "decomposed_iterations": decomp.iterations,
        "trace_norm": td.norm_value,
    })
    reporting.save_line_plot(out / "recovered_potential.png", x,
                             {"true": psi_star,
                              "recovered": decomp.psi_hat.values.real},
                             xlabel="x", title="downwash inversion")
    return [
        Check("residual-direct", direct.residual < 1e-6,
              f"{direct.residual:.2e}"),
        Check("residual-decomposed", decomp.residual < 1e-6,
              f"{decomp.residual:.2e}"),
        Check("path-agreement", agree < 1e-6, f"{agree:.2e}"),
    ]


def run_flowmap(p, out, rng):
    grid = HalfPlaneGrid(Lx=p["lx"], Lz=p["lz"], hx=p["h"], hz=p["h"])
    U = p["U"]
    grids = [grid]
    for _ in range(p["levels"] - 1):
        grids.append(grids[-1].refine())
    residuals = []
    for g_ in grids:
        X, Z = np.meshgrid(g_.x, g_.z, indexing="ij")
        phi = _bump(X, -2.5, 2.5) * _bump(Z, 0.4, g_.Lz - 0.4)
        psi = _bump(X, -0.9, 0.9) * np.exp(-2 * Z) * _bump(Z, -g_.Lz + 0.2, g_.Lz - 0.2)
        from .flowmap import FlowField
        y = FlowField(g_, phi, psi)
        gdat = _bump(g_.x[g_.omega_mask], -0.85, 0.85)
        residuals.append(check_duality_identity(y, gdat, U))
    factors = [residuals[i] / residuals[i + 1] for i in range(len(residuals) - 1)]
    rows = [(i, grids[i].hx, residuals[i],
             factors[i - 1] if i > 0 else float("nan"))
            for i in range(len(grids))]
    reporting.write_csv(out / "duality_residuals.csv",
                        ["level", "h", "residual", "refinement_factor"], rows)

    gdat = _bump(grid.x[grid.omega_mask], -0.85, 0.85)
    ng = neumann_flow_map(gdat, U, grid)
    reporting.write_snapshot(out / "flow_phi.snap", ng.phi, (grid.hx, grid.hz))
    reporting.write_csv(out / "boundary_slice.csv", ["x", "phi", "psi"],
                        [(grid.x[i], ng.phi[i, 0], ng.psi[i, 0])
                         for i in range(grid.nx)])
    reporting.save_heatmap(out / "flow_phi.png", ng.phi,
                           extent=(-grid.Lx, grid.Lx, 0, grid.Lz),
                           xlabel="x", ylabel="z",
                           title="static flow potential")
    f1 = np.zeros(grid.shape)
    g1 = gdat
    res = resolvent_solve(1.0, f1, f1, g1, 0.5 * g1, U, grid)
    reporting.write_manifest(out / "resolvent.txt", {
        "estimate_constant": res.estimate_constant,
        "residual": res.residual,
    })
    ok = all(f >= 1.8 for f in factors)
    return [
        Check("duality-refinement", ok,
              "factors " + ", ".join(f"{f:.2f}" for f in factors)),
        Check("resolvent-residual", res.residual < 1e-8,
              f"{res.residual:.2e}"),
    ]


def run_plate(p, out, rng):
    kind_name = p["kind"]
    if kind_name == "kirchhoff":
        kind = Kirchhoff(f=lambda s: s**3, F=lambda s: s**4 / 4)
        grid = PlateGrid(127, dim=1)
        tol = 1e-6
    elif kind_name == "berger":
        kind = Berger(kappa=1.0, gamma=2.0)
        grid = PlateGrid(127, dim=1)
        tol = 1e-6
    else:
        kind = VonKarman(F0=0.0)
        grid = PlateGrid(31, dim=2)
        tol = 1e-5

    def random_state(seed):
        r = np.random.default_rng(seed)
        if grid.dim == 1:
            return (1 - grid.x**2) ** 2 * np.polynomial.chebyshev.chebval(
                grid.x, r.standard_normal(5))
        X, Y = np.meshgrid(grid.x, grid.x, indexing="ij")
        mod = sum(c * np.sin((i + 1) * np.pi * X) * np.sin((j + 1) * np.pi * Y)
                  for (i, j), c in np.ndenumerate(r.standard_normal((2, 2))))
        return (X * (1 - X) * Y * (1 - Y)) ** 2 * (1 + mod)

    rows, worst = [], 0.0
    base = int(rng.integers(0, 1000))
    for s in range(p["seeds"]):
        u = random_state(base + s)
        h = random_state(base + s + 500)
        err = potential_gradient_check(u, h, kind, grid)
        worst = max(worst, err)
        rows.append((s, err))
    reporting.write_csv(out / "gradient_checks.csv", ["seed", "mismatch"], rows)
    u0 = random_state(base)
    c_delta, cs, vals = potential_lower_bound(u0, kind, grid)
    reporting.save_line_plot(out / "potential_ray.png", cs,
                             {"potential": vals}, xlabel="ray parameter",
                             title=f"{kind_name} potential along a scaling ray")
    checks = [Check("gradient-consistency", worst < tol,
                    f"worst {worst:.2e} over {p['seeds']} states")]
    if grid.dim == 2:
        X, Y = np.meshgrid(grid.x, grid.x, indexing="ij")
        b1 = float(np.max(np.abs(vk_bracket(X * Y, X * Y, grid) + 2.0)))
        b2 = float(np.max(np.abs(vk_bracket(X**2, Y**2, grid) - 4.0)))
        checks.append(Check("bracket-exact", max(b1, b2) < 1e-10,
                            f"errors {b1:.2e}, {b2:.2e}"))
    checks.append(Check("ray-lower-bound", np.all(vals + c_delta >= -1e-10),
                        f"C_delta = {c_delta:.3f}"))
    return checks


def run_simulate(p, out, rng):
    grid = HalfPlaneGrid(Lx=p["lx"], Lz=p["lz"], hx=p["h"], hz=p["h"])
    nl = {"none": None,
          "kirchhoff": Kirchhoff(f=lambda s: s**3, F=lambda s: s**4 / 4),
          "berger": Berger(kappa=1.0, gamma=0.5)}[p["nonlinearity"]]
    y0 = _sample_coupled_state(grid, p["U"])
    traj = evolve(y0, p["T"], p["dt"], nonlinearity=nl)
    reporting.write_csv(
        out / "energies.csv",
        ["t", "E_pl", "E_fl", "E_total", "potential", "boundary_work",
         "residual"],
        [(r.time, r.E_pl, r.E_fl, r.E_total, r.potential, r.boundary_work,
          r.residual) for r in traj.reports])
    reporting.write_snapshot(out / "final_phi.snap", traj.final_state.phi,
                             (grid.hx, grid.hz))
    reporting.write_snapshot(out / "final_psi.snap", traj.final_state.psi,
                             (grid.hx, grid.hz))
    t = [r.time for r in traj.reports]
    reporting.save_line_plot(out / "energy_history.png", t,
                             {"plate": [r.E_pl for r in traj.reports],
                              "flow": [r.E_fl for r in traj.reports],
                              "total": [r.E_total for r in traj.reports]},
                             xlabel="t", ylabel="energy",
                             title=f"coupled run U={p['U']}")
    e0 = traj.reports[0].E_total + traj.reports[0].potential
    checks = [Check("trace-constraint", traj.final_state.kj_defect() == 0.0,
                    "zero off the structure at every step")]
    if p["U"] == 0.0:
        drift = max(abs(r.E_total + r.potential - e0) for r in traj.reports) / e0
        checks.append(Check("energy-conservation", drift < 1e-6,
                            f"relative drift {drift:.2e}"))
    else:
        res = abs(traj.reports[-1].residual) / e0
        checks.append(Check("energy-relation", res < 1e-3,
                            f"relative residual {res:.2e}"))
    return checks


def run_verify_all(p, out, rng):
    checks = []
    checks += run_hilbert({"n_nodes": 64, "max_mode": 6}, out, rng)
    checks += run_symbols({"alpha": 1.0, "U": 0.5, "resolution": 100,
                           "bound_scale": p["bound_scale"]}, out, rng)
    checks += run_possio({"tau_re": 1.0, "tau_im": 2.0, "U": 0.5,
                          "n_nodes": 64, "n_line": 4096, "L": 8.0}, out, rng)
    checks += run_flowmap({"U": 0.5, "levels": 3, "lx": 4.0, "lz": 2.0,
                           "h": 0.125}, out, rng)
    checks += run_plate({"kind": "kirchhoff", "seeds": 5}, out, rng)
    checks += run_plate({"kind": "vonkarman", "seeds": 3}, out, rng)

    # energy conservation and relation
    grid = default_grid()
    y0 = _sample_coupled_state(grid, 0.0)
    traj = evolve(y0, 5.0, 1e-3)
    e0 = traj.reports[0].E_total
    drift = max(abs(r.E_total - e0) for r in traj.reports) / e0
    checks.append(Check("energy-conservation", drift < 1e-6,
                        f"relative drift {drift:.2e} over T=5"))
    slopes = []
    for U in (0.3, 0.7):
        res = []
        for dt in (4e-3, 2e-3, 1e-3):
            tr = evolve(_sample_coupled_state(grid, U), 0.5, dt)
            res.append(abs(tr.reports[-1].residual))
        slopes.append(0.5 * (np.log2(res[0] / res[1]) + np.log2(res[1] / res[2])))
    checks.append(Check("energy-relation-order",
                        all(1.8 < s < 2.2 for s in slopes),
                        "dt-slopes " + ", ".join(f"{s:.3f}" for s in slopes)))

    # fixed-point construction
    ptraj, rep = picard_evolve(_sample_coupled_state(grid, 0.5), 0.5, 2e-3)
    mono = evolve(_sample_coupled_state(grid, 0.5), 0.5, 2e-3)
    system = CoupledSystem(grid, 0.5)
    match = (system.y_norm(system.pack(ptraj.final_state)
                           - system.pack(mono.final_state))
             / system.y_norm(system.pack(mono.final_state)))
    checks.append(Check("fixed-point", rep.converged and match < 1e-5
                        and all(r < 1 for r in rep.ratios),
                        f"{rep.iterations} iterations, match {match:.2e}"))

    # admissibility stability
    g0 = HalfPlaneGrid(Lx=4.0, Lz=2.0, hx=0.125, hz=0.125)
    c1 = admissibility_constant(1.0, 10, U=0.5, grid=g0, dt=5e-3, seed=rng.integers(1000))
    c2 = admissibility_constant(1.0, 10, U=0.5, grid=g0.refine(), dt=5e-3,
                                seed=rng.integers(1000))
    stable = max(c1, c2) / min(c1, c2) < 2.0
    checks.append(Check("admissibility-stability", stable,
                        f"constants {c1:.3e} / {c2:.3e}"))
    return checks


RUNNERS = {
    "hilbert": run_hilbert,
    "symbols": run_symbols,
    "possio": run_possio,
    "flowmap": run_flowmap,
    "plate": run_plate,
    "simulate": run_simulate,
    "verify-all": run_verify_all,
}


def run_and_report(config: ExperimentConfig) -> int:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    manifest = {"command": config.command, "seed": config.seed}
    manifest.update(config.parameters)
    reporting.write_manifest(out / "manifest.txt", manifest)
    checks = RUNNERS[config.command](config.parameters, out, rng)
    lines = [c.line() for c in checks]
    verdict = "PASS" if all(c.passed for c in checks) else "FAIL"
    lines.append(f"SUMMARY {verdict}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0 if verdict == "PASS" else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kjflow",
        description="numerical workbench for subsonic flow-plate interaction "
                    "with a zero-pressure wake condition")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, default=None,
                        help="key=value config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=None)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    text = ""
    if args.config is not None:
        if not args.config.exists():
            print(f"config file not found: {args.config}", file=sys.stderr)
            return 2
        text = args.config.read_text()
    config = parse_config(text, command=args.command)
    config.seed = args.seed
    config.output_dir = args.out or Path("kjflow-out") / args.command
    if not config.valid:
        for err in config.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    return run_and_report(config)


if __name__ == "__main__":
    sys.exit(main())
