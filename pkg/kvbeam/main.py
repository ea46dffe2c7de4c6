# -*- coding: utf-8 -*-
"""
kvbeam command line

- design    Steps 1-4 on the design plant; writes the controller matrices and design.json
- simulate  closed loop with the (higher order, optionally perturbed) simulation plant;
            trajectory.csv, metrics.json, eigenvalues.csv, deflection.dat and gnuplot scripts
- compare   observer-based controller vs low-gain controller on identical signals
- verify    closed-form/oracle checks, form inequalities, Riccati residuals
- matrices  dump the assembled Galerkin matrices

Exit status: 0 ok, 2 invalid configuration, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

# ======== standard libs ========
import argparse
import asyncio
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

# ======== third-party ========
import numpy as np
from pydantic import ValidationError

# ======== kvbeam ========
from kvbeam.api import artifacts
from kvbeam.api.experiment import ExperimentConfig, load_config
from kvbeam.engine import beam_galerkin as bg
from kvbeam.engine import controller_synthesis as cs
from kvbeam.engine.checks import run_verify
from kvbeam.engine.closed_loop import (
    assemble_closed_loop,
    closed_loop_eigenvalues,
    closed_loop_margin,
    error_metrics,
    simulate,
)
from kvbeam.engine.matrix_equations import stability_margin
from kvbeam.errors import KvBeamError, SynthesisError
from kvbeam.feeds.signals import TriangleWave, eval_trig, truncation_error
from kvbeam.state import ErrorMetrics, SimulationResult
from kvbeam.utils import logs
from kvbeam.utils.stats import last_period_mean

log = logs.get_logger("CLI")

# in-class regulation tolerance relative to the reference amplitude
REGULATION_TOL = 1e-3
DEFLECTION_POINTS = 41
DEFLECTION_FRAMES = 200


# --------------------------
# Pipelines
# --------------------------
@dataclass
class DesignOutcome:
    controller: cs.RegulatorRealization
    report: cs.SynthesisReport
    open_loop_margin: float
    design_loop_margin: float
    sim_loop_margin: float

    def summary(self) -> dict:
        r = self.report
        return {
            "controller_dim": r.controller_dim,
            "internal_model_dim": r.internal_model_dim,
            "r": r.r,
            "observer_margin": r.observer_margin,
            "observer_residual": r.observer_residual,
            "regulator_margin": r.regulator_margin,
            "regulator_residual": r.regulator_residual,
            "hankel_sv": r.hankel_sv[:20],
            "zero_check_sigma_min": r.zero_check.sigma_min,
            "open_loop_margin": self.open_loop_margin,
            "closed_loop_margin_design": self.design_loop_margin,
            "closed_loop_margin": self.sim_loop_margin,
        }


@dataclass
class RunOutcome:
    result: SimulationResult
    metrics: ErrorMetrics
    margin: float
    eigenvalues: np.ndarray


def design_plant(cfg: ExperimentConfig) -> bg.GalerkinModel:
    return bg.assemble_first_order(cfg.beam_parameters(), cfg.design.n)


def simulation_plant(cfg: ExperimentConfig) -> bg.GalerkinModel:
    return bg.assemble_first_order(cfg.simulation_parameters(), cfg.simulation.n)


def design_pipeline(cfg: ExperimentConfig) -> DesignOutcome:
    plant = design_plant(cfg)
    ctrl, report = cs.synthesize_regulator(plant, cfg.synthesis_options())
    design_margin = closed_loop_margin(assemble_closed_loop(plant, ctrl))
    sim_margin = closed_loop_margin(assemble_closed_loop(simulation_plant(cfg), ctrl))
    log.info("closed-loop margin: %.4g (design plant n=%d), %.4g (simulation plant n=%d)", design_margin, cfg.design.n, sim_margin, cfg.simulation.n)
    if sim_margin <= 0:
        raise SynthesisError(f"closed loop with the simulation plant is not stable (margin {sim_margin:.3e})")
    return DesignOutcome(ctrl, report, stability_margin(plant.A), design_margin, sim_margin)


def low_gain_pipeline(cfg: ExperimentConfig) -> tuple[cs.LowGainController, Optional[cs.EpsilonTuning]]:
    plant = design_plant(cfg)
    im = cs.build_internal_model(cfg.low_gain_freqs())
    tuning = None
    eps = cfg.design.eps
    if cfg.design.tune:
        tuning = cs.tune_epsilon(plant, im, eps_max=cfg.design.eps_max, grid=cfg.design.eps_grid)
        eps = tuning.eps_star
    return cs.build_low_gain(plant, im, eps), tuning


def run_closed_loop(cfg: ExperimentConfig, ctrl, keep_plant_state: bool = False) -> RunOutcome:
    plant = simulation_plant(cfg)
    cl = assemble_closed_loop(plant, ctrl)
    margin = closed_loop_margin(cl)
    x0 = np.zeros(cl.dim)
    x0[: plant.state_dim] = bg.initial_state(plant)
    sim = cfg.simulation
    res = simulate(
        cl, cfg.exogenous(), sim.T, sim.h, x0=x0, method=sim.method,
        record_every=sim.record_every, keep_plant_state=keep_plant_state,
    )
    return RunOutcome(res, error_metrics(res, cfg.reference_period()), margin, closed_loop_eigenvalues(cl))


def regulation_tolerance(cfg: ExperimentConfig) -> float:
    ref = cfg.reference_signal()
    if isinstance(ref, TriangleWave):
        return truncation_error(ref, cfg.frequencies.q)
    return REGULATION_TOL * max(cfg.reference_amplitude(), 1.0)


def in_class_error(cfg: ExperimentConfig, res: SimulationResult) -> float:
    """Last-period mean of |y - y_q|, y_q the part of the reference the internal model can track."""
    tracked = eval_trig(cfg.truncated_reference(), res.times)
    dev = np.linalg.norm(res.y - tracked, axis=1)
    return last_period_mean(res.times, dev, cfg.reference_period())


# --------------------------
# Output helpers
# --------------------------
def _out_dir(cfg: ExperimentConfig, args) -> Path:
    return Path(args.out) if args.out else Path(cfg.output.dir)


def _write_run(out: Path, stem: str, run: RunOutcome, plots: List[str]) -> None:
    data = f"{stem}.csv"
    artifacts.write_trajectory(out / data, run.result)
    for kind in plots:
        artifacts.write_plot_script(out / f"{stem}_{kind}.gp", kind, data)


def _write_deflection(out: Path, plant: bg.GalerkinModel, res: SimulationResult) -> None:
    step = max(1, res.samples // DEFLECTION_FRAMES)
    xi = np.linspace(-1.0, 1.0, DEFLECTION_POINTS)
    V = bg.deflection(plant, res.plant_state[::step], xi)
    artifacts.write_deflection(out / "deflection.dat", res.times[::step], xi, V)
    artifacts.write_plot_script(out / "deflection.gp", "deflection", "deflection.dat")


# --------------------------
# Subcommands
# --------------------------
def cmd_design(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    outcome = design_pipeline(cfg)
    artifacts.write_controller(out / "controller", outcome.controller)
    artifacts.write_json(out / "design.json", outcome.summary())
    log.info("design done: controller dim %d, closed-loop margin %.4g", outcome.report.controller_dim, outcome.sim_loop_margin)
    return 0


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    ctrl_dir = Path(args.controller) if args.controller else out / "controller"
    ctrl = artifacts.read_controller(ctrl_dir)
    run = run_closed_loop(cfg, ctrl, keep_plant_state=True)

    tol = regulation_tolerance(cfg)
    metrics = {
        **run.metrics.as_dict(),
        "closed_loop_margin": run.margin,
        "tolerance": tol,
        "in_class_error": in_class_error(cfg, run.result),
        "regulated": bool(run.margin > 0 and run.metrics.terminal_error <= tol),
    }
    _write_run(out, "trajectory", run, ["output", "error", "controls"])
    artifacts.write_eigenvalues(out / "eigenvalues.csv", run.eigenvalues)
    xmin = float(np.floor(max(run.eigenvalues.real.min(), -50.0)))
    artifacts.write_plot_script(out / "eigenvalues.gp", "eigenvalues", "eigenvalues.csv", xmin=xmin)
    _write_deflection(out, simulation_plant(cfg), run.result)
    artifacts.write_json(out / "metrics.json", metrics)
    log.info("simulate done: terminal |e| %.3e (tolerance %.3e), regulated=%s", run.metrics.terminal_error, tol, metrics["regulated"])
    return 0


async def _compare_runs(cfg: ExperimentConfig):
    async def observer_based():
        outcome = await asyncio.to_thread(design_pipeline, cfg)
        run = await asyncio.to_thread(run_closed_loop, cfg, outcome.controller)
        return outcome, run

    async def low_gain():
        ctrl, tuning = await asyncio.to_thread(low_gain_pipeline, cfg)
        run = await asyncio.to_thread(run_closed_loop, cfg, ctrl)
        return ctrl, tuning, run

    return await asyncio.gather(observer_based(), low_gain())


def compare_summary(cfg: ExperimentConfig, reg: RunOutcome, lg: RunOutcome) -> dict:
    period = cfg.reference_period()
    t = reg.result.times
    last = t >= t[-1] - period - 1e-12
    first = t <= t[0] + period + 1e-12
    du = np.max(np.abs(reg.result.u[last] - lg.result.u[last]))
    scale = np.max(np.abs(reg.result.u[last]))
    early_reg = np.linalg.norm(reg.result.u[first])
    early_lg = np.linalg.norm(lg.result.u[first])
    return {
        "regulator": {"closed_loop_margin": reg.margin, **reg.metrics.as_dict()},
        "low_gain": {"closed_loop_margin": lg.margin, **lg.metrics.as_dict()},
        "steady_state_u_rel_diff": float(du / scale) if scale > 0 else float(du),
        "early_control_ratio": float(early_lg / early_reg) if early_reg > 0 else float("nan"),
    }


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    (outcome, reg), (lg_ctrl, tuning, lg) = asyncio.run(_compare_runs(cfg))

    artifacts.write_controller(out / "controller", outcome.controller)
    artifacts.write_controller(out / "low_gain", lg_ctrl)
    _write_run(out, "regulator", reg, ["output", "error", "controls"])
    _write_run(out, "low_gain", lg, ["output", "error", "controls"])

    summary = compare_summary(cfg, reg, lg)
    summary["low_gain"]["eps"] = lg_ctrl.eps
    summary["low_gain"]["internal_model_dim"] = lg_ctrl.dim
    summary["regulator"]["controller_dim"] = outcome.controller.dim
    if tuning is not None:
        summary["low_gain"]["tuned_margin"] = tuning.margin
        summary["low_gain"]["poorly_stabilizable"] = tuning.poorly_stabilizable
    artifacts.write_json(out / "compare.json", summary)
    log.info(
        "compare: margins %.4g (observer-based) vs %.4g (low-gain), steady-state u difference %.2e",
        reg.margin, lg.margin, summary["steady_state_u_rel_diff"],
    )
    return 0


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    report = run_verify(cfg.beam_parameters(), cfg.synthesis_options(), seed=args.seed)
    ctrl_dir = out / "controller"
    if ctrl_dir.exists():
        ctrl = artifacts.read_controller(ctrl_dir)
        log.info("controller files in %s parse cleanly (dim %d)", ctrl_dir, ctrl.dim)
    traj = out / "trajectory.csv"
    if traj.exists():
        rows = artifacts.read_trajectory(traj)
        log.info("%s parses cleanly (%d samples)", traj, rows.shape[0])
    artifacts.write_json(out / "verify.json", report.as_dict())
    failed = [c.name for c in report.checks if not (c.passed or c.skipped)]
    if failed:
        log.error("verify failed: %s", ", ".join(failed))
        return 3
    return 0


def cmd_matrices(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args) / "matrices"
    n = args.n or cfg.design.n
    m = bg.assemble_first_order(cfg.beam_parameters(), n)
    artifacts.write_matrices(out, {"M": m.M, "F": m.F, "B0": m.B0, "Bd0": m.Bd0, "C0": m.C0, "A": m.A, "B": m.B, "Bd": m.Bd, "C": m.C})
    log.info("matrices for n=%d written to %s", n, out)
    return 0


COMMANDS = {
    "design": cmd_design,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "verify": cmd_verify,
    "matrices": cmd_matrices,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kvbeam", description="Robust output regulation of a Kelvin-Voigt damped beam")
    p.add_argument("--log-level", default=None)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="INI experiment file (defaults reproduce the flagship run)")
        sp.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
        if name == "simulate":
            sp.add_argument("--controller", default=None, help="controller directory (default <out>/controller)")
        if name == "matrices":
            sp.add_argument("--n", type=int, default=None, help="basis size (default [design] n)")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logs.configure(args.log_level)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        return COMMANDS[args.command](cfg, args)
    except ValidationError as e:
        log.error("invalid configuration:\n%s", e)
        return 2
    except KvBeamError as e:
        log.error("%s: %s", type(e).__name__, e)
        return e.exit_code
