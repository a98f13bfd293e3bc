"""Command-line client for the scheduling service.

Every subcommand builds an HTTP request against the FastAPI app.  By
default the app is run in-process (no server needed); pass --server or
set NCSCHED_SERVER to talk to a remote instance instead.  Training and
Monte Carlo outputs are written on the serving side; the in-process
default therefore behaves like a plain local tool.
"""

import csv
import json
import sys
from pathlib import Path

import click
import yaml

from .config import experiment_to_dict, load_experiment
from .errors import ConfigError


def _client(server):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from starlette.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _fail(resp):
    try:
        detail = resp.json().get("detail", resp.text)
    except Exception:
        detail = resp.text
    click.echo(f"error ({resp.status_code}): {detail}", err=True)
    sys.exit(1)


def _post(server, path, payload):
    with _client(server) as client:
        resp = client.post(path, json=payload)
        if resp.status_code >= 400:
            _fail(resp)
        return resp.json()


def _config_payload(config, overrides, seed, output_dir):
    ov = list(overrides)
    if seed is not None:
        ov.append(f"training.master_seed={seed}")
    try:
        cfg = load_experiment(config, overrides=tuple(ov))
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    payload = experiment_to_dict(cfg)
    if output_dir:
        payload["output_dir"] = str(output_dir)
    return payload


def _parse_schedule(text):
    path = Path(text)
    data = yaml.safe_load(path.read_text() if path.is_file() else text)
    if isinstance(data, dict) and "sequence" in data:
        data = data["sequence"]
    if not isinstance(data, list) or not all(isinstance(s, list) for s in data):
        raise click.ClickException(
            "schedule: expected a YAML list of subsets, e.g. [[1], [2], [3]]"
        )
    return [[int(m) for m in subset] for subset in data]


config_option = click.option(
    "-c", "--config", required=True,
    help="Config file path or packaged benchmark name (experiment1/2/3).",
)
override_option = click.option(
    "-O", "--override", "overrides", multiple=True, metavar="KEY.PATH=VALUE",
    help="Config override, e.g. -O training.epochs=50",
)
seed_option = click.option("--seed", type=int, default=None, help="Master seed override.")


@click.group()
@click.option(
    "--server", envvar="NCSCHED_SERVER", default=None,
    help="Base URL of a running service; default runs the app in-process.",
)
@click.pass_context
def main(ctx, server):
    """Networked-control channel scheduling: simulate, search, train, serve."""
    ctx.obj = server


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--job-workers", default=1, type=int, help="Concurrent background jobs.")
def serve(host, port, job_workers):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(max_job_workers=job_workers), host=host, port=port)


@main.command()
@config_option
@override_option
@seed_option
@click.option("-o", "--output-dir", default=None, help="Where to write run outputs.")
@click.option("--run-index", default=0, type=int)
@click.option("--no-wait", is_flag=True, help="Return a job id instead of blocking.")
@click.pass_obj
def train(server, config, overrides, seed, output_dir, run_index, no_wait):
    """Train the scheduler; writes training.csv and checkpoints."""
    payload = {
        "config": _config_payload(config, overrides, seed, None),
        "wait": not no_wait,
        "output_dir": str(output_dir) if output_dir else None,
        "run_index": run_index,
    }
    job = _post(server, "/train", payload)
    _report_job(job)


@main.command()
@config_option
@override_option
@seed_option
@click.option("-o", "--output-dir", default=None)
@click.option("--workers", default=None, type=int, help="Parallel training runs.")
@click.option("--no-wait", is_flag=True)
@click.pass_obj
def mc(server, config, overrides, seed, output_dir, workers, no_wait):
    """Monte Carlo replication: mean/stderr learning curve over many runs."""
    payload = {
        "config": _config_payload(config, overrides, seed, None),
        "wait": not no_wait,
        "output_dir": str(output_dir) if output_dir else None,
        "workers": workers,
    }
    job = _post(server, "/mc", payload)
    _report_job(job)


def _report_job(job):
    if job["status"] == "failed":
        click.echo(f"job {job['id']} failed: {job['error']}", err=True)
        sys.exit(1)
    if job["status"] in ("queued", "running"):
        click.echo(f"job {job['id']} {job['status']}; poll with: ncsched job {job['id']}")
        return
    click.echo(f"job {job['id']} done")
    for key, value in (job.get("result") or {}).items():
        click.echo(f"  {key}: {value}")


@main.command()
@click.argument("job_id")
@click.pass_obj
def job(server, job_id):
    """Show the status of a background job."""
    with _client(server) as client:
        resp = client.get(f"/jobs/{job_id}")
        if resp.status_code >= 400:
            _fail(resp)
        _report_job(resp.json())


@main.command("eval")
@config_option
@override_option
@click.option("--checkpoint", required=True, help="Trained checkpoint path (server side).")
@click.option("--runs", default=20, type=int)
@click.option("--episode-logs", default=None, help="Directory for per-episode CSV logs.")
@click.pass_obj
def eval_cmd(server, config, overrides, checkpoint, runs, episode_logs):
    """Greedy rollout of a trained policy: mean loss and channel shares."""
    payload = {
        "config": _config_payload(config, overrides, None, None),
        "checkpoint": str(checkpoint),
        "runs": runs,
        "episode_log_dir": str(episode_logs) if episode_logs else None,
    }
    data = _post(server, "/eval", payload)
    click.echo(f"mean control loss over {runs} runs: {data['mean_loss']!r}")
    for i, (frac, rho) in enumerate(zip(data["allocation"], data["spectral_radii"])):
        label = "unstable" if rho >= 1.0 else "stable"
        click.echo(f"  loop {i + 1}: allocation {frac:.4f}  (spectral radius {rho:.3f}, {label})")


@main.command()
@config_option
@override_option
@click.option(
    "--schedule", required=True,
    help="Periodic schedule: YAML file or inline list, e.g. '[[1],[2],[3]]'.",
)
@click.pass_obj
def oracle(server, config, overrides, schedule):
    """Exact expected loss of a fixed periodic schedule (no sampling)."""
    payload = {
        "env": _config_payload(config, overrides, None, None)["env"],
        "schedule": {"sequence": _parse_schedule(schedule)},
    }
    data = _post(server, "/oracle", payload)
    click.echo(f"period:        {data['period']}")
    click.echo(f"expected loss: {data['expected_loss']!r}")
    click.echo(f"  baseline:    {data['baseline_loss']!r}")
    click.echo(f"  error term:  {data['error_term']!r}")


def _format_sequence(sequence):
    return ";".join("|".join(str(m) for m in subset) for subset in sequence)


@main.command()
@config_option
@override_option
@click.option("--p-min", default=2, type=int)
@click.option("--p-max", default=11, type=int)
@click.option("--budget", default=10_000_000, type=int)
@click.option("-o", "--output", default=None, help="Write per-period results CSV here.")
@click.pass_obj
def baseline(server, config, overrides, p_min, p_max, budget, output):
    """Exhaustive periodic-schedule search scored by the exact oracle."""
    payload = {
        "env": _config_payload(config, overrides, None, None)["env"],
        "p_min": p_min,
        "p_max": p_max,
        "budget": budget,
    }
    data = _post(server, "/search", payload)
    click.echo(f"candidates evaluated: {data['candidates']}")
    click.echo(f"best schedule: {_format_sequence(data['sequence'])}")
    click.echo(f"expected loss: {data['expected_loss']!r}")
    if output:
        with open(output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["period", "sequence", "expected_loss"])
            for row in data["per_period"]:
                writer.writerow(
                    [row["period"], _format_sequence(row["sequence"]), repr(row["expected_loss"])]
                )
        click.echo(f"per-period results written to {output}")


@main.command()
@click.option("--checkpoint", required=True)
@click.option(
    "--errors", required=True,
    help="Stacked estimate-error vector, comma-separated floats.",
)
@click.pass_obj
def allocate(server, checkpoint, errors):
    """Ask a trained policy which loops get a channel for this error vector."""
    vector = [float(x) for x in errors.split(",")]
    data = _post(server, "/allocate", {"checkpoint": str(checkpoint), "error_vector": vector})
    click.echo(f"action {data['action']} -> subset {data['subset']}")
    click.echo("q-values: " + json.dumps(data["q_values"]))


if __name__ == "__main__":
    main()
