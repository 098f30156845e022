"""``eeconv`` command line: one subcommand per experiment. Exit 0 ok, 1 invariant failure, 2 usage error."""

from __future__ import annotations

import sys

import click

from . import experiments as ex
from .graph import GraphFormatError


def _common(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file."),
        click.option("--out", default=None, help="Output directory."),
        click.option("--seed", type=int, default=None, help="Run a single seed."),
        click.option("--mode", type=click.Choice(["exact", "chebyshev"]), default=None),
        click.option("--epsilon", type=float, default=None),
        click.option("--graph", type=click.Path(dir_okay=False), default=None, help="Graph JSON file."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _config(config_path, out, seed, mode, epsilon, graph) -> ex.ExperimentConfig:
    try:
        return ex.ExperimentConfig.from_sources(
            config_path, out=out, seeds=None if seed is None else [seed],
            mode=mode, epsilon=epsilon, epsilons=None if epsilon is None else [epsilon], graph=graph)
    except ex.ConfigError as exc:
        raise click.UsageError(str(exc)) from exc


def _run(fn, cfg, *args):
    try:
        return fn(cfg, *args)
    except (ex.ConfigError, GraphFormatError, FileNotFoundError) as exc:
        raise click.UsageError(str(exc)) from exc


@click.group()
def main():
    """Framelet energy experiments."""


@main.command("energy-trajectory")
@_common
def energy_trajectory(**kw):
    """Layer-wise Dirichlet energy of untrained deep models."""
    cfg = _config(**kw)
    res = _run(ex.cmd_energy_trajectory, cfg)
    for name, r in res.items():
        click.echo(f"{name}: E(H^0)={r['energy'][0]:.4e} E(H^L)={r['energy'][-1]:.4e}")


@main.command("sbm-sweep")
@_common
def sbm_sweep(**kw):
    """High-pass energy fraction and deep-layer energies over p/q ratios."""
    cfg = _config(**kw)
    res = _run(ex.cmd_sbm_sweep, cfg)
    for s in res["summary"]:
        click.echo(f"p/q={s['pq_ratio']}: high_fraction={s['high_fraction_mean']:.4f} "
                   f"+- {s['high_fraction_std']:.4f} (n={s['n']})")


@main.command("train")
@_common
def train_cmd(**kw):
    """Node classification accuracy against depth."""
    cfg = _config(**kw)
    res = _run(ex.cmd_train, cfg)
    for key, s in res["summary"].items():
        click.echo(f"{key}: test_acc={s['test_acc_mean']:.4f} +- {s['test_acc_std']:.4f}")


@main.command("transform")
@_common
def transform(**kw):
    """Dump framelet coefficients and per-pass principal-component projections."""
    cfg = _config(**kw)
    _run(ex.cmd_transform, cfg)
    click.echo(f"wrote {cfg.out}/coefficients.json and {cfg.out}/projection.csv")


@main.command("verify")
@_common
def verify(**kw):
    """Run every invariant suite; exit 1 if any fails."""
    cfg = _config(**kw)
    report = _run(ex.cmd_verify, cfg)
    for s in report["suites"]:
        click.echo(f"{'PASS' if s['passed'] else 'FAIL'} {s['suite']}: worst={s['worst']:.3e} "
                   f"tol={s['tolerance']:.0e}")
    if not report["ok"]:
        sys.exit(1)


@main.command("timing")
@_common
def timing(**kw):
    """Decompose wall-clock time against the node count."""
    cfg = _config(**kw)
    res = _run(ex.cmd_timing, cfg)
    for r in res["rows"]:
        click.echo(f"N={r['num_nodes']}: decompose {r['decompose_seconds']:.3e}s")
    click.echo(f"slope: {res['slope']}" if res["slope"] is not None else res["slope_flag"])


if __name__ == "__main__":
    main()
