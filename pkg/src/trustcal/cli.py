"""Command-line pipeline: estimate, select, solve, step-response, simulate,
serve.

Every subcommand prints its resolved configuration (including the seed) to
stdout, writes artifacts only to the paths given, and embeds a canonical
invocation line in each artifact so a run is reproducible from the artifact
alone.  Runs are deterministic given ``--seed`` regardless of ``--jobs``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .categories import (
    ACTION_DIMS,
    CONTEXTS,
    ActionTuple,
    Context,
    validate_action,
)
from .data import FRAMES_PER_SECOND, read_sequences
from .errors import TrustcalError
from .estimation import FitConfig, multi_restart_fit
from .model import RewardSpec, SELECTED_STRUCTURE, ActionStructure
from .selection import SelectionConfig, select_structure
from .serialization import (
    model_from_document,
    model_to_document,
    policy_from_document,
    policy_to_document,
    read_document,
    write_document,
)
from .simulation import run_closed_loop, scenario_generate, step_response
from .solver import SolverConfig, policy_grid, value_iteration

FLOAT = repr  # artifacts carry full-precision shortest-repr floats


def _echo_config(command: str, **kwargs) -> None:
    resolved = " ".join(f"{k}={v}" for k, v in kwargs.items())
    click.echo(f"trustcal {command}: {resolved}")


def _invocation(command: str, **kwargs) -> str:
    parts = [command]
    for k, v in kwargs.items():
        parts.append(f"--{k.replace('_', '-')}={v}")
    return " ".join(parts)


def _parse_dims(text: str | None) -> frozenset:
    if not text or text == "-":
        return frozenset()
    dims = [d.strip() for d in text.split(",") if d.strip()]
    for d in dims:
        if d not in ACTION_DIMS:
            raise click.BadParameter(
                f"unknown action dimension {d!r}; choose from {ACTION_DIMS}")
    return frozenset(dims)


def _resolve_structure(name: str, trust_dims: str | None,
                       workload_dims: str | None) -> ActionStructure:
    if name == "paper":
        if trust_dims or workload_dims:
            raise click.BadParameter(
                "--trust-dims/--workload-dims conflict with --structure paper")
        return SELECTED_STRUCTURE
    if name == "custom":
        if trust_dims is None or workload_dims is None:
            raise click.BadParameter(
                "--structure custom needs --trust-dims and --workload-dims")
        try:
            return ActionStructure(trust_dims=_parse_dims(trust_dims),
                                   workload_dims=_parse_dims(workload_dims))
        except ValueError as exc:
            raise click.BadParameter(str(exc)) from None
    raise click.BadParameter("--structure must be 'paper' or 'custom'")


def _load_reward(path: str | None) -> RewardSpec:
    if path is None:
        return RewardSpec.calibration_default()
    doc = json.loads(Path(path).read_text())
    table = [[doc[t][r] for r in ("Rel_low", "Rel_mid", "Rel_high")]
             for t in ("T_low", "T_high")]
    return RewardSpec(table=table)


def _load_context_dist(path: str | None):
    if path is None:
        return None
    doc = json.loads(Path(path).read_text())
    known = {"|".join(c) for c in CONTEXTS}
    unknown = set(doc) - known
    if unknown:
        raise click.BadParameter(
            f"unknown context keys {sorted(unknown)}; expected "
            "'Rel_*|Traffic_*|Peds_*' names")
    weights = np.array([float(doc.get("|".join(c), 0.0)) for c in CONTEXTS])
    total = weights.sum()
    if total <= 0:
        raise click.BadParameter("context distribution has no mass")
    return weights / total


def _parse_action(text: str) -> ActionTuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise click.BadParameter(
            "action must be 'transparency,reliability,traffic,pedestrians'")
    try:
        return validate_action(ActionTuple(*parts))
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


def _parse_context(text: str) -> Context:
    parts = [p.strip() for p in text.split("|" if "|" in text else ",")]
    if len(parts) != 3:
        raise click.BadParameter(
            "context must be 'reliability|traffic|pedestrians'")
    return Context(*parts)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 2
    except TrustcalError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except (FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except click.exceptions.Abort:
        return 130


@click.group()
def cli():
    """Trust-workload modeling and adaptive transparency policies."""


@cli.command()
@click.option("--data", required=True, type=click.Path(exists=True),
              help="Sequence CSV to fit on.")
@click.option("--structure", "structure_name", default="paper",
              show_default=True, help="'paper' or 'custom'.")
@click.option("--trust-dims", default=None,
              help="Comma-separated dims for custom structures.")
@click.option("--workload-dims", default=None,
              help="Comma-separated dims ('-' for none).")
@click.option("--restarts", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--tol", default=1e-6, show_default=True)
@click.option("--max-iter", default=500, show_default=True)
@click.option("--prob-floor", default=0.0, show_default=True)
@click.option("--jobs", default=1, show_default=True, envvar="TRUSTCAL_JOBS")
@click.option("--out", default="model.twmodel", show_default=True,
              type=click.Path())
@click.option("--fit-report", default="fit-report.txt", show_default=True,
              type=click.Path())
def estimate(data, structure_name, trust_dims, workload_dims, restarts, seed,
             tol, max_iter, prob_floor, jobs, out, fit_report):
    """Fit the model by best-of-N-restart EM and write the model document."""
    structure = _resolve_structure(structure_name, trust_dims, workload_dims)
    _echo_config("estimate", data=data, structure=structure_name,
                 trust_dims=sorted(structure.trust_dims),
                 workload_dims=sorted(structure.workload_dims),
                 restarts=restarts, seed=seed, tol=tol, max_iter=max_iter,
                 prob_floor=prob_floor, jobs=jobs)
    dataset = read_sequences(data)
    config = FitConfig(tol=tol, max_iter=max_iter, n_restarts=restarts,
                       rng_seed=seed, prob_floor=prob_floor, n_jobs=jobs)
    result = multi_restart_fit(dataset, structure, config)
    invocation = _invocation(
        "estimate", data=data, structure=structure_name, restarts=restarts,
        seed=seed, tol=tol, max_iter=max_iter, prob_floor=prob_floor)
    write_document(out, model_to_document(result.model, invocation=invocation))

    lines = [f"# trustcal fit-report", f"# {invocation}",
             "restart,log_likelihood"]
    for i, ll in enumerate(result.restart_log_likelihoods):
        lines.append(f"{i},{FLOAT(ll)}")
    lines.append(f"best_restart,{result.restart_index}")
    lines.append(f"best_log_likelihood,{FLOAT(result.total_log_likelihood)}")
    lines.append(f"em_iterations,{len(result.ll_trajectory)}")
    lines.append("")
    lines.append(model_to_document(result.model, invocation=invocation))
    Path(fit_report).write_text("\n".join(lines))
    click.echo(f"wrote {out} and {fit_report} "
               f"(best LL {result.total_log_likelihood:.6f} from restart "
               f"{result.restart_index})")


@cli.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--k-folds", default=3, show_default=True)
@click.option("--repeats", default=24, show_default=True)
@click.option("--restarts-per-fit", default=20, show_default=True)
@click.option("--fit-tol", default=1e-6, show_default=True)
@click.option("--fit-max-iter", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", default=1, show_default=True, envvar="TRUSTCAL_JOBS")
@click.option("--out", default="selection-report.csv", show_default=True,
              type=click.Path())
def select(data, k_folds, repeats, restarts_per_fit, fit_tol, fit_max_iter,
           seed, jobs, out):
    """Cross-validate all 128 action structures and rank them by AIC."""
    _echo_config("select", data=data, k_folds=k_folds, repeats=repeats,
                 restarts_per_fit=restarts_per_fit, seed=seed, jobs=jobs)
    dataset = read_sequences(data)
    config = SelectionConfig(
        k_folds=k_folds, n_repeats=repeats,
        restarts_per_fit=restarts_per_fit, rng_seed=seed, fit_tol=fit_tol,
        fit_max_iter=fit_max_iter, n_jobs=jobs)
    report = select_structure(dataset, config)
    invocation = _invocation("select", data=data, k_folds=k_folds,
                             repeats=repeats,
                             restarts_per_fit=restarts_per_fit, seed=seed)
    Path(out).write_text(f"# {invocation}\n" + report.to_csv())
    from .selection import dims_label
    click.echo(f"wrote {out}; chosen structure: "
               f"trust={dims_label(report.chosen.trust_dims)} "
               f"workload={dims_label(report.chosen.workload_dims)}")


@cli.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--gamma", default=25.0 / 26.0, show_default=True)
@click.option("--vi-tol", default=1e-10, show_default=True)
@click.option("--reward", "reward_path", default=None,
              type=click.Path(exists=True),
              help="JSON reward table override; defaults to the calibration "
                   "reward.")
@click.option("--context-dist", "context_dist_path", default=None,
              type=click.Path(exists=True),
              help="JSON {'Rel_low|Traffic_low|Peds_absent': weight, ...} "
                   "for future contexts; uniform if omitted.")
@click.option("--out", default="policy.twpolicy", show_default=True,
              type=click.Path())
@click.option("--grid-out", default="policy-grid.csv", show_default=True,
              type=click.Path())
@click.option("--grid-resolution", default=51, show_default=True)
def solve(model_path, gamma, vi_tol, reward_path, context_dist_path, out,
          grid_out, grid_resolution):
    """Synthesize the transparency policy and its belief-space decision grid."""
    _echo_config("solve", model=model_path, gamma=gamma, vi_tol=vi_tol,
                 reward=reward_path or "default",
                 context_dist=context_dist_path or "uniform",
                 grid_resolution=grid_resolution, seed="none (deterministic)")
    model = model_from_document(read_document(model_path))
    reward = _load_reward(reward_path)
    config = SolverConfig(gamma=gamma, vi_tol=vi_tol,
                          uncontrollable_dist=_load_context_dist(
                              context_dist_path))
    policy = value_iteration(model, reward, config)
    invocation = _invocation("solve", model=model_path, gamma=gamma,
                             vi_tol=vi_tol,
                             reward=reward_path or "default",
                             context_dist=context_dist_path or "uniform")
    write_document(out, policy_to_document(policy, invocation=invocation))

    grid = policy_grid(policy, resolution=grid_resolution)
    lines = [f"# {invocation}", "context,pT_high,pW_high,action"]
    for ctx, x, y, action in grid.rows():
        lines.append(f"{'|'.join(ctx)},{FLOAT(x)},{FLOAT(y)},{action}")
    Path(grid_out).write_text("\n".join(lines) + "\n")
    click.echo(f"wrote {out} and {grid_out} "
               f"({len(policy.residual_trajectory)} sweeps)")


@cli.command("step-response")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--action", "actions", multiple=True, required=True,
              help="Full action 'transparency,reliability,traffic,"
                   "pedestrians'; repeatable.")
@click.option("--horizon-seconds", default=None, type=float,
              help="Horizon in seconds (25 frames per second).")
@click.option("--horizon-frames", default=None, type=int)
@click.option("--out-dir", default="step-responses", show_default=True,
              type=click.Path())
def step_response_cmd(model_path, actions, horizon_seconds, horizon_frames,
                      out_dir):
    """Propagate High-state marginals under constant actions; CSV per action."""
    if horizon_seconds is not None and horizon_frames is not None:
        raise click.BadParameter(
            "give either --horizon-seconds or --horizon-frames, not both")
    if horizon_frames is None:
        horizon_frames = int(round((horizon_seconds if horizon_seconds
                                    is not None else 20.0)
                                   * FRAMES_PER_SECOND))
    _echo_config("step-response", model=model_path,
                 actions=[a for a in actions], horizon_frames=horizon_frames,
                 seed="none (deterministic)")
    model = model_from_document(read_document(model_path))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for text in actions:
        a = _parse_action(text)
        sr = step_response(model, a, horizon=horizon_frames)
        invocation = _invocation("step-response", model=model_path,
                                 action=",".join(a),
                                 horizon_frames=horizon_frames)
        lines = [f"# {invocation}", "t,action,p_trust_high,p_workload_high"]
        label = "|".join(a)
        for t in range(horizon_frames + 1):
            lines.append(f"{t},{label},{FLOAT(float(sr.p_trust_high[t]))},"
                         f"{FLOAT(float(sr.p_workload_high[t]))}")
        path = out / ("+".join(a) + ".csv")
        path.write_text("\n".join(lines) + "\n")
        written.append(str(path))
    click.echo("wrote " + ", ".join(written))


@cli.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True),
              help="True model the simulated human follows.")
@click.option("--belief-model", "belief_path", default=None,
              type=click.Path(exists=True),
              help="Model used for belief tracking (defaults to --model).")
@click.option("--policy", "policy_path", required=True,
              type=click.Path(exists=True))
@click.option("--episodes", default=10, show_default=True)
@click.option("--episode-frames", default=250, show_default=True)
@click.option("--scenario", "scenario_path", default=None,
              type=click.Path(exists=True),
              help="JSON [[context, frames], ...] overriding random episodes.")
@click.option("--seed", default=0, show_default=True)
@click.option("--min-dwell", default=0, show_default=True,
              help="Hold each transparency choice at least this many frames.")
@click.option("--metrics-out", default="metrics.json", show_default=True,
              type=click.Path())
@click.option("--trace-out", default="trace.csv", show_default=True,
              type=click.Path())
def simulate(model_path, belief_path, policy_path, episodes, episode_frames,
             scenario_path, seed, min_dwell, metrics_out, trace_out):
    """Run the closed loop against a simulated human and write metrics+trace."""
    _echo_config("simulate", model=model_path,
                 belief_model=belief_path or model_path, policy=policy_path,
                 episodes=episodes, episode_frames=episode_frames,
                 scenario=scenario_path or "random", seed=seed,
                 min_dwell=min_dwell)
    true_model = model_from_document(read_document(model_path))
    belief_model = true_model if belief_path is None else \
        model_from_document(read_document(belief_path))
    policy = policy_from_document(read_document(policy_path))
    if scenario_path is not None:
        spec = json.loads(Path(scenario_path).read_text())
        scenario = scenario_generate(
            [(_parse_context(ctx), frames) for ctx, frames in spec])
    else:
        scenario = scenario_generate(n_episodes=episodes,
                                     episode_frames=episode_frames,
                                     rng_seed=seed)
    result = run_closed_loop(true_model, belief_model, policy, scenario,
                             rng_seed=seed, min_dwell_frames=min_dwell)
    invocation = _invocation(
        "simulate", model=model_path, policy=policy_path, episodes=episodes,
        episode_frames=episode_frames, scenario=scenario_path or "random",
        seed=seed, min_dwell=min_dwell)

    m = result.metrics
    metrics = {
        "invocation": invocation,
        "discounted_return": m.discounted_return,
        "calibration_rate": m.calibration_rate,
        "transparency_on_rate": m.transparency_on_rate,
        "belief_rmse": m.belief_rmse,
        "n_frames": m.n_frames,
        "zero_likelihood_resets": m.zero_likelihood_resets,
    }
    Path(metrics_out).write_text(json.dumps(metrics, indent=2) + "\n")

    lines = [f"# {invocation}",
             "t,context,action,reliance,gaze,belief_0,belief_1,belief_2,"
             "belief_3,reward"]
    for st in result.trace:
        belief = ",".join(FLOAT(float(x)) for x in st.belief)
        lines.append(f"{st.t},{'|'.join(st.context)},{st.action},"
                     f"{st.observation.reliance},{st.observation.gaze},"
                     f"{belief},{FLOAT(st.reward)}")
    Path(trace_out).write_text("\n".join(lines) + "\n")
    click.echo(f"wrote {metrics_out} and {trace_out} "
               f"(return {m.discounted_return:.4f})")


@cli.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--policy", "policy_path", required=True,
              type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--journal-dir", default=None, type=click.Path())
@click.option("--ui-dir", default=None, type=click.Path(exists=True),
              help="Static directory for the companion web UI.")
def serve(model_path, policy_path, host, port, journal_dir, ui_dir):
    """Run the interaction service until interrupted."""
    import uvicorn

    from .service import create_app

    _echo_config("serve", model=model_path, policy=policy_path, host=host,
                 port=port, journal_dir=journal_dir, ui_dir=ui_dir)
    app = create_app(model_document=read_document(model_path),
                     policy_document=read_document(policy_path),
                     journal_dir=journal_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    sys.exit(main())
