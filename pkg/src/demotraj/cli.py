"""Pipeline command line: every stage is a subcommand, every artifact a file.

Exit codes: 0 success, 2 infeasible optimization, 3 invalid input, 4 internal
error. Failures emit a machine-readable JSON envelope on stderr. A JSON
config file may supply any flag's default; explicit flags win.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import dmp as dmp_mod
from . import figures, fixtures, ingest, kin, metrics, refine, replay, spline, timeopt, trajgen
from .errors import IncompleteReplay, InfeasibleProblem, NumericFailure

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_INTERNAL = 4


def _load_json(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def _dump_json(path: str, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _load_waypoints(path: str):
    doc = _load_json(path)
    wps = []
    for w in doc["waypoints"]:
        pose = kin.Pose(np.asarray(w["p"], dtype=float), np.asarray(w["theta"], dtype=float))
        wps.append(ingest.Waypoint(int(w["index"]), np.asarray(w["Q"], dtype=float), pose))
    return wps, doc.get("model", "")


def _dump_waypoints(path: str, wps, model_name: str) -> None:
    _dump_json(path, {
        "model": model_name,
        "waypoints": [
            {"index": w.index, "Q": w.Q.tolist(), "p": w.p.tolist(),
             "theta": w.theta.tolist()}
            for w in wps
        ],
    })


def _load_smooth_trajectory(path: str) -> trajgen.SmoothTrajectory:
    return trajgen.SmoothTrajectory.from_dict(_load_json(path))


@click.group()
@click.option("--config", type=click.Path(exists=True), default=None,
              help="JSON file supplying flag defaults; explicit flags override.")
@click.pass_context
def cli(ctx, config):
    """Demonstration smoothing pipeline."""
    if config:
        ctx.default_map = json.loads(Path(config).read_text())


@cli.command()
@click.option("--out", required=True, type=click.Path(), help="Recording CSV to write.")
@click.option("--duration", default=fixtures.DEMO_DURATION_S, show_default=True, type=float)
@click.option("--noise-std", default=fixtures.DEMO_NOISE_STD, show_default=True, type=float)
@click.option("--rate", default=fixtures.DEMO_RATE_HZ, show_default=True, type=float)
@click.option("--seed", default=fixtures.DEMO_SEED, show_default=True, type=int)
@click.option("--model", "model_name", default="fr3", show_default=True)
@click.option("--skeleton", type=click.Path(exists=True), default=None,
              help="CSV of joint rows to sweep through (default: bundled reach).")
def synth(out, duration, noise_std, rate, seed, model_name, skeleton):
    """Write a synthetic noisy demonstration recording."""
    skel = fixtures.REACH_SKELETON
    if skeleton:
        skel = np.loadtxt(skeleton, delimiter=",", ndmin=2)
    spec = ingest.SynthSpec(skeleton=skel, duration=duration, noise_std=noise_std,
                            rate_hz=rate, seed=seed, model_name=model_name)
    rec = ingest.synth_demo(spec)
    ingest.write_recording(out, rec)
    click.echo(f"wrote {rec.t.size} samples to {out}")


@cli.command("ingest")
@click.option("--rec", required=True, type=click.Path(exists=True))
@click.option("--model", "model_name", default=None, help="Model name or JSON path.")
@click.option("--pos-thresh", default=0.01, show_default=True, type=float)
@click.option("--ang-thresh", default=0.1, show_default=True, type=float)
@click.option("--out", required=True, type=click.Path())
def ingest_cmd(rec, model_name, pos_thresh, ang_thresh, out):
    """Extract waypoints from a recording."""
    recording = ingest.read_recording(rec)
    model = kin.load_model(model_name or recording.model_name or "fr3")
    wps = ingest.extract_waypoints(recording, model, pos_thresh, ang_thresh)
    _dump_waypoints(out, wps, model.name)
    click.echo(f"extracted {len(wps)} waypoints to {out}")


@cli.command("timeopt")
@click.option("--wps", required=True, type=click.Path(exists=True))
@click.option("--model", "model_name", default=None)
@click.option("--out", required=True, type=click.Path())
def timeopt_cmd(wps, model_name, out):
    """Solve the minimum-time schedule through the waypoints."""
    waypoints, wp_model = _load_waypoints(wps)
    model = kin.load_model(model_name or wp_model or "fr3")
    result = timeopt.solve_timing(waypoints, model)
    _dump_json(out, result.to_dict())
    click.echo(f"total {result.total_duration:.3f} s over {len(waypoints) - 1} segments")


@cli.command("trajgen")
@click.option("--wps", required=True, type=click.Path(exists=True))
@click.option("--tau", "tau_path", required=True, type=click.Path(exists=True),
              help="Timing JSON from the timeopt stage.")
@click.option("--model", "model_name", default=None)
@click.option("--tol-pos", default=0.02, show_default=True, type=float)
@click.option("--tol-ang", default=0.1, show_default=True, type=float)
@click.option("--tolerances", "tol_path", type=click.Path(exists=True), default=None,
              help="Per-waypoint tolerance JSON (overrides --tol-pos/--tol-ang).")
@click.option("--alpha", default=1.0, show_default=True, type=float)
@click.option("--beta", default=0.04, show_default=True, type=float)
@click.option("--gamma", default=1.0, show_default=True, type=float)
@click.option("--eps-t", default=0.5, show_default=True, type=float,
              help="Duration band half-width around the timing-stage total.")
@click.option("--no-duration-band", is_flag=True, default=False)
@click.option("--out", required=True, type=click.Path())
def trajgen_cmd(wps, tau_path, model_name, tol_pos, tol_ang, tol_path,
                alpha, beta, gamma, eps_t, no_duration_band, out):
    """Generate the jerk-regulated trajectory through the waypoints."""
    waypoints, wp_model = _load_waypoints(wps)
    model = kin.load_model(model_name or wp_model or "fr3")
    timing = _load_json(tau_path)
    tau = np.asarray(timing["tau"], dtype=float)
    if tol_path:
        tol = trajgen.ToleranceProfile.from_dict(_load_json(tol_path))
    else:
        tol = trajgen.ToleranceProfile.uniform(len(waypoints), tol_pos, tol_ang)
    cfg = trajgen.TrajGenConfig(alpha=alpha, beta=beta, gamma=gamma,
                                duration_band=None if no_duration_band else eps_t)
    st = trajgen.generate(waypoints, tau, tol, model, cfg,
                          duration_center=timing.get("total_s"))
    _dump_json(out, st.to_dict())
    click.echo(f"duration {st.duration:.3f} s, "
               f"normalized jerk {st.report['manj']:.1f}, wrote {out}")


@cli.command("refine")
@click.option("--traj", required=True, type=click.Path(exists=True),
              help="Smooth trajectory JSON (carries tau).")
@click.option("--trace", "trace_path", type=click.Path(exists=True), default=None,
              help="Offline command trace CSV `t,C`.")
@click.option("--serve", "serve_addr", default=None,
              help="Host the interactive replay service at [host]:port instead.")
@click.option("--model", "model_name", default="fr3")
@click.option("--eta", default=5.0, show_default=True, type=float)
@click.option("--vmin-ratio", default=0.2, show_default=True, type=float)
@click.option("--exponent", default=2.0, show_default=True, type=float)
@click.option("--out", required=True, type=click.Path())
@click.option("--figure", type=click.Path(), default=None,
              help="Also render the replay progression figure.")
def refine_cmd(traj, trace_path, serve_addr, model_name, eta, vmin_ratio,
               exponent, out, figure):
    """Re-time a trajectory from a brake trace (offline) or interactively."""
    st = _load_smooth_trajectory(traj)
    tol_params = refine.ToleranceMapParams(exponent=exponent)
    if (trace_path is None) == (serve_addr is None):
        raise click.UsageError("exactly one of --trace or --serve is required")
    if trace_path is not None:
        C = refine.read_command_trace(trace_path)
        result = refine.refine_offline(C, st.tau, st.duration, eta=eta,
                                       vmin_ratio=vmin_ratio, tol_params=tol_params)
    else:
        result = _serve_refinement(st, serve_addr, kin.load_model(model_name),
                                   eta, vmin_ratio, tol_params)
    _dump_json(out, result.to_dict())
    if figure:
        figures.save_refinement_figure(result.trace, figure)
    click.echo(f"refined schedule written to {out}")


def _serve_refinement(st, addr, model, eta, vmin_ratio, tol_params):
    import asyncio

    import uvicorn

    host, _, port = addr.rpartition(":")
    host = host or "127.0.0.1"
    config = replay.SessionConfig(
        trajectory=st.traj, tau=st.tau, model=model, eta=eta,
        vmin_ratio=vmin_ratio, tol_params=tol_params)
    app = replay.create_app(trace_dir=Path.cwd() / "traces", preloaded=config)
    session = app.state.sessions[app.state.preloaded_id]

    async def run():
        server = uvicorn.Server(uvicorn.Config(app, host=host, port=int(port),
                                               log_level="warning"))
        task = asyncio.ensure_future(server.serve())
        click.echo(f"replay service at http://{host}:{port}, session {session.id}")
        while session.phase != "done":
            await asyncio.sleep(0.2)
        server.should_exit = True
        await task

    asyncio.run(run())
    return session.result


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8900, show_default=True, type=int)
@click.option("--trace-dir", default="traces", show_default=True,
              help="Directory for per-session trace CSVs.")
def serve_cmd(host, port, trace_dir):
    """Host the replay service; clients create sessions over HTTP."""
    import uvicorn

    app = replay.create_app(trace_dir=Path(trace_dir))
    click.echo(f"replay service at http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@cli.command("finetune")
@click.option("--wps", required=True, type=click.Path(exists=True))
@click.option("--refinement", required=True, type=click.Path(exists=True))
@click.option("--traj", "prev_traj", type=click.Path(exists=True), default=None,
              help="Previous trajectory JSON; centers the duration band.")
@click.option("--model", "model_name", default=None)
@click.option("--alpha", default=1.0, show_default=True, type=float)
@click.option("--beta", default=0.04, show_default=True, type=float)
@click.option("--gamma", default=1.0, show_default=True, type=float)
@click.option("--eps-t", default=0.5, show_default=True, type=float)
@click.option("--out", required=True, type=click.Path())
def finetune_cmd(wps, refinement, prev_traj, model_name, alpha, beta, gamma, eps_t, out):
    """Re-optimize with the refined schedule and extracted tolerances."""
    waypoints, wp_model = _load_waypoints(wps)
    model = kin.load_model(model_name or wp_model or "fr3")
    doc = _load_json(refinement)
    tau_r = np.asarray(doc["tau_r"], dtype=float)
    tol = trajgen.ToleranceProfile.from_dict(doc["tolerances"])
    center = None
    if prev_traj:
        center = _load_smooth_trajectory(prev_traj).duration
    cfg = trajgen.TrajGenConfig(alpha=alpha, beta=beta, gamma=gamma, duration_band=eps_t)
    st = trajgen.generate(waypoints, tau_r, tol, model, cfg, duration_center=center)
    _dump_json(out, st.to_dict())
    click.echo(f"fine-tuned duration {st.duration:.3f} s, wrote {out}")


@cli.command("dmp-train")
@click.option("--rec", type=click.Path(exists=True), default=None,
              help="Train on a recording CSV.")
@click.option("--traj", type=click.Path(exists=True), default=None,
              help="Train on a trajectory JSON sampled at --sample-dt.")
@click.option("--sample-dt", default=0.01, show_default=True, type=float)
@click.option("--n-basis", default=25, show_default=True, type=int)
@click.option("--alpha-z", default=48.0, show_default=True, type=float)
@click.option("--out", required=True, type=click.Path())
def dmp_train_cmd(rec, traj, sample_dt, n_basis, alpha_z, out):
    """Fit a movement primitive to a recording or a generated trajectory."""
    if (rec is None) == (traj is None):
        raise click.UsageError("exactly one of --rec or --traj is required")
    if rec:
        recording = ingest.read_recording(rec)
        t, q = recording.t, recording.q
    else:
        tt = spline.trajectory_from_json(Path(traj).read_text())
        t = np.arange(0.0, tt.duration + sample_dt / 2, sample_dt)
        q = spline.evaluate(tt.curve, np.clip(t / tt.duration, 0, 1))
    model = dmp_mod.train(t, q, n_basis=n_basis, alpha_z=alpha_z)
    _dump_json(out, model.to_dict())
    click.echo(f"trained {model.dof}-joint primitive ({n_basis} basis) to {out}")


@cli.command("dmp-rollout")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--duration", default=None, type=float,
              help="Temporal scaling target (default: training duration).")
@click.option("--dt", default=1e-3, show_default=True, type=float)
@click.option("--out", required=True, type=click.Path(), help="Rollout CSV (t,q...).")
def dmp_rollout_cmd(model_path, duration, dt, out):
    """Integrate a trained primitive and write the joint trajectory."""
    model = dmp_mod.DmpModel.from_dict(_load_json(model_path))
    roll = dmp_mod.rollout(model, duration=duration, dt=dt)
    rec = ingest.DemoRecording(1.0 / dt, roll.t, roll.y)
    ingest.write_recording(out, rec)
    click.echo(f"rolled out {roll.t.size} samples ({roll.duration:.3f} s) to {out}")


@cli.command("metrics")
@click.option("--entry", "entries", multiple=True, required=True,
              help="label=path; .csv is a recording, .json a trajectory.")
@click.option("--model", "model_name", default="fr3")
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--json", "json_path", type=click.Path(), default=None)
@click.option("--figures", "figdir", type=click.Path(), default=None,
              help="Directory for profile/comparison figures (default: beside the CSV).")
@click.option("--no-figures", is_flag=True, default=False)
def metrics_cmd(entries, model_name, report_path, json_path, figdir, no_figures):
    """Tabulate duration, normalized jerk, and limit violations."""
    model = kin.load_model(model_name)
    loaded = []
    for spec_str in entries:
        label, _, path = spec_str.partition("=")
        if not path:
            raise click.UsageError(f"--entry must be label=path, got {spec_str!r}")
        if path.endswith(".csv"):
            loaded.append((label, ingest.read_recording(path)))
        else:
            loaded.append((label, spline.trajectory_from_json(Path(path).read_text())))
    rep = metrics.report(loaded, model)
    Path(report_path).write_text(metrics.report_to_csv(rep))
    if json_path:
        _dump_json(json_path, rep.to_dict())
    if not no_figures:
        outdir = figdir or str(Path(report_path).parent / "figures")
        written = figures.render_report_figures(loaded, rep, model, outdir)
        click.echo(f"rendered {len(written)} figures to {outdir}")
    click.echo(metrics.report_to_csv(rep).rstrip())


@cli.command("repro-rt1")
@click.option("--outdir", required=True, type=click.Path())
@click.option("--seed", default=fixtures.DEMO_SEED, show_default=True, type=int)
@click.option("--no-figures", is_flag=True, default=False)
def repro_rt1_cmd(outdir, seed, no_figures):
    """Full pipeline on the bundled synthetic reach demo; emits the comparison table."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    model = fixtures.demo_model()
    rec = ingest.synth_demo(fixtures.demo_spec(seed=seed))
    ingest.write_recording(outdir / "demo_raw.csv", rec)

    wps = ingest.extract_waypoints(rec, model, fixtures.WAYPOINT_POS_THRESH,
                                   fixtures.WAYPOINT_ANG_THRESH)
    _dump_waypoints(outdir / "waypoints.json", wps, model.name)
    click.echo(f"{len(wps)} waypoints")

    timing = timeopt.solve_timing(wps, model)
    _dump_json(outdir / "timing.json", timing.to_dict())
    click.echo(f"timing stage: {timing.total_duration:.3f} s")

    tol = trajgen.ToleranceProfile.uniform(len(wps))
    st = trajgen.generate(wps, timing.tau, tol, model, trajgen.TrajGenConfig(),
                          duration_center=timing.total_duration)
    _dump_json(outdir / "trajectory.json", st.to_dict())
    click.echo(f"smoothed duration {st.duration:.3f} s")

    dmp_raw = dmp_mod.train(rec.t, rec.q, n_basis=fixtures.DMP_BASIS,
                            alpha_z=fixtures.DMP_ALPHA_Z)
    dt = 1e-3
    tt = np.arange(0.0, st.duration + dt / 2, dt)
    q_smooth = spline.evaluate(st.traj.curve, np.clip(tt / st.duration, 0, 1))
    dmp_smooth = dmp_mod.train(tt, q_smooth, n_basis=fixtures.DMP_BASIS,
                               alpha_z=fixtures.DMP_ALPHA_Z)
    entries = [
        ("demo_raw", rec),
        ("demo_smoothed", st.traj),
        ("dmp_raw", dmp_mod.rollout(dmp_raw)),
        ("dmp_raw_scaled", dmp_mod.rollout(dmp_raw, duration=st.duration, dt=dt)),
        ("dmp_smoothed", dmp_mod.rollout(dmp_smooth, duration=st.duration, dt=dt)),
    ]
    rep = metrics.report(entries, model)
    (outdir / "report.csv").write_text(metrics.report_to_csv(rep))
    _dump_json(outdir / "report.json", rep.to_dict())
    if not no_figures:
        figures.render_report_figures(entries, rep, model, outdir / "figures")
    click.echo(metrics.report_to_csv(rep).rstrip())


def main(argv=None) -> int:
    """Run the CLI with the documented exit codes and JSON error envelope."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.ClickException as e:
        _emit_error("invalid_input", e.format_message())
        return EXIT_INVALID
    except click.exceptions.Abort:
        _emit_error("aborted", "aborted")
        return EXIT_INVALID
    except InfeasibleProblem as e:
        _emit_error("infeasible", str(e), getattr(e, "diagnostics", {}))
        return EXIT_INFEASIBLE
    except IncompleteReplay as e:
        _emit_error("incomplete_replay", str(e))
        return EXIT_INFEASIBLE
    except (FileNotFoundError, json.JSONDecodeError, ValueError, KeyError) as e:
        _emit_error("invalid_input", f"{type(e).__name__}: {e}")
        return EXIT_INVALID
    except NumericFailure as e:
        _emit_error("numeric_failure", str(e))
        return EXIT_INTERNAL
    except Exception as e:  # pragma: no cover - defensive
        _emit_error("internal", f"{type(e).__name__}: {e}")
        return EXIT_INTERNAL


def _emit_error(kind: str, message: str, details: dict | None = None) -> None:
    doc = {"error": {"type": kind, "message": message}}
    if details:
        doc["error"]["details"] = details
    print(json.dumps(doc), file=sys.stderr)


def entry() -> None:  # console-script entry point
    sys.exit(main())


if __name__ == "__main__":
    entry()
