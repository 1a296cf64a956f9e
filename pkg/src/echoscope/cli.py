"""Command-line entry points.

Configuration problems exit with status 2 before any work happens; a stage
failure exits with status 1 and names the stage.  Progress goes to stderr via
logging so stdout stays clean.
"""

from __future__ import annotations

import functools
import logging
import os
import sys

import click

from . import pipeline
from .config import load_config
from .errors import ConfigurationError, EchoscopeError

log = logging.getLogger("echoscope")


def _setup_logging(verbose: int):
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _common_options(fn):
    @click.option("--config", "-c", "config_path", required=True, type=click.Path(), help="YAML config file.")
    @click.option("--provider", type=click.Choice(["mock", "remote"]), default=None, help="Override the provider kind.")
    @click.option("--seed", type=int, default=None, help="Override the run seed.")
    @click.option("--workers", type=int, default=None, help="Override worker count for provider calls.")
    @click.option("--strict/--no-strict", "strict", default=None, help="Fail on the first malformed input record.")
    @click.option("--out-dir", "-o", "out_dir", type=click.Path(), default=None, help="Override the output directory.")
    @click.option("--verbose", "-v", count=True, help="-v for progress, -vv for debug.")
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)

    return wrapper


def _load(config_path, provider, seed, workers, strict, out_dir, verbose):
    _setup_logging(verbose)
    overrides = {
        "provider": provider,
        "seed": seed,
        "workers": workers,
        "strict": strict,
        "out_dir": out_dir,
    }
    env_url = os.environ.get("ECHOSCOPE_REMOTE_URL")
    if env_url:
        overrides["remote_url"] = env_url
    try:
        cfg = load_config(config_path, overrides)
        cfg.validate()
    except ConfigurationError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    return cfg


def _run_stage(cfg, stage: str, resume: bool):
    try:
        pipeline.run_stage(cfg, stage, resume=resume)
    except EchoscopeError as exc:
        click.echo(f"error in stage {stage}: {exc}", err=True)
        sys.exit(1)


@click.group()
def main():
    """Turn a social-news corpus into user embeddings, credibility and bias
    scores, and auto-sized user clusters."""


@main.command()
@_common_options
def run(config_path, provider, seed, workers, strict, out_dir, verbose):
    """Run every stage from raw inputs to the final report."""
    cfg = _load(config_path, provider, seed, workers, strict, out_dir, verbose)
    prov = None
    try:
        prov = pipeline.build_provider(cfg)
        for stage in pipeline.STAGE_ORDER:
            try:
                pipeline.run_stage(cfg, stage, resume=True, provider=prov)
            except EchoscopeError as exc:
                click.echo(f"error in stage {stage}: {exc}", err=True)
                sys.exit(1)
    finally:
        if prov is not None and hasattr(prov, "close"):
            prov.close()
    click.echo(f"run complete: outputs in {cfg.out_dir}")


def _stage_command(name: str, helptext: str):
    @main.command(name, help=helptext)
    @_common_options
    @click.option(
        "--resume/--no-resume",
        default=True,
        help="Resume from existing artifacts (default) or rebuild the prerequisite chain.",
    )
    def cmd(config_path, provider, seed, workers, strict, out_dir, verbose, resume):
        cfg = _load(config_path, provider, seed, workers, strict, out_dir, verbose)
        if resume:
            _run_stage(cfg, name, resume=True)
        else:
            for stage in pipeline.STAGE_ORDER:
                _run_stage(cfg, stage, resume=True)
                if stage == name:
                    break
        click.echo(f"{name} complete")

    return cmd


_stage_command("ingest", "Parse and prune the corpus.")
_stage_command("fit-negation", "Fit the negation map from sentence triplets.")
_stage_command("embed", "Embed post titles with the configured provider.")
_stage_command("score", "Detect stances and build user profiles.")
_stage_command("cluster", "Cluster user embeddings with the spectral scan.")
_stage_command("report", "Aggregate statistics and write the report files.")


@main.command("validate-config")
@_common_options
def validate_config(config_path, provider, seed, workers, strict, out_dir, verbose):
    """Check the configuration and input files, then exit."""
    cfg = _load(config_path, provider, seed, workers, strict, out_dir, verbose)
    click.echo(f"configuration ok (hash {cfg.semantic_hash()[:12]})")


if __name__ == "__main__":
    main()
