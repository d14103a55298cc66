"""Command-line entry point: ``pufkeys provision|run|audit``.

Exit codes: 0 on success (in-simulation aborts are results, not
failures), 2 for configuration errors, 3 for corrupt files, 4 for I/O
errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import load_scenario
from .crpstore import CrpDatabase, audit_database
from .errors import ConfigError, FormatError
from .provision import load_network, save_network
from .sim.runner import derive_seeds, run_scenario, write_outputs
from .sim.topology import build_topology

EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_IO = 4


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    """Map library errors onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(str(exc), EXIT_CONFIG)
        except FormatError as exc:
            _fail(str(exc), EXIT_FORMAT)
        except OSError as exc:
            _fail(f"{exc.filename or ''}: {exc.strerror or exc}", EXIT_IO)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Override the scenario seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.pass_context
def main(ctx: click.Context, seed: int | None, out_dir: str | None) -> None:
    """Provision PUF-backed key networks, run scenarios, audit CRP databases."""
    ctx.obj = {"seed": seed, "out": out_dir}


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.pass_context
@_guarded
def provision(ctx: click.Context, config: str) -> None:
    """Enroll tokens and write databases, helper data and the sealed token store."""
    scenario = load_scenario(config)
    seed = ctx.obj["seed"] if ctx.obj["seed"] is not None else scenario.seed
    out = Path(ctx.obj["out"] or "provisioned")
    network = build_topology(scenario.topology, derive_seeds(seed)[0])
    manifest = save_network(network, out)
    counts = manifest["counts"]
    click.echo(f"provisioned {manifest['mode']} network in {out}")
    click.echo(f"users {counts['users']}")
    click.echo(f"databases {counts['databases']} (expected {manifest['expected_databases']})")
    click.echo(f"manager_tokens {counts['manager_tokens']}")


@main.command()
@click.argument("scenario_path", metavar="SCENARIO", type=click.Path(dir_okay=False))
@click.pass_context
@_guarded
def run(ctx: click.Context, scenario_path: str) -> None:
    """Run a scenario and write its event log and metrics."""
    scenario = load_scenario(scenario_path)
    network = None
    if scenario.state:
        state = Path(scenario.state)
        if not state.is_absolute():
            state = Path(scenario_path).parent / state
        network = load_network(state)
        if sorted(network.users) != sorted(scenario.topology.users):
            raise ConfigError(f"{scenario_path}: users differ from the provisioned state in {state}")
    result = run_scenario(scenario, ctx.obj["seed"], network)
    out = Path(ctx.obj["out"] or "run-output")
    paths = write_outputs(result, scenario, out)
    m = result.metrics
    click.echo(f"sessions {m.sessions}")
    click.echo(f"keys_established {m.keys_established}")
    click.echo(f"aborts {json.dumps(m.aborts, sort_keys=True)}")
    click.echo(f"adversary_success {m.adversary_success}")
    for path in paths:
        click.echo(f"wrote {path}")


@main.command()
@click.argument("db_path", metavar="DB", type=click.Path(dir_okay=False))
@click.option("--alpha", type=float, default=0.01, show_default=True, help="Significance level.")
@_guarded
def audit(db_path: str, alpha: float) -> None:
    """Print status counts, blacklist consistency and randomness results for a database."""
    db = CrpDatabase.load(db_path)
    click.echo(audit_database(db, alpha).render(), nl=False)
