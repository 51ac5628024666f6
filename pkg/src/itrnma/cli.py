"""Command-line surface tying the pipeline together.

Exit codes: 2 config errors, 3 data errors, 4 numerical errors,
5 convergence flag raised on the fitted model.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click
import numpy as np

from . import io as iolib
from .bbdwols import BbConfig, run_bbdwols, run_qlearning
from .errors import (
    ConfigError,
    IdentifiabilityError,
    IngestionError,
    ItrNmaError,
    SchemaError,
    SingularDesignError,
)
from .nma import fit_nma, profile_effects
from .simlab import Scenario, dgm_a, dgm_b, dgm_c, run_scenario

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_NOT_CONVERGED = 5

_DGMS = {"A": dgm_a, "B": dgm_b, "C": dgm_c}


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Two-stage doubly-robust Bayesian ITR network meta-analysis."""


@main.command("fit-study")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--study", "study_id", required=True)
@click.option("--seed", type=int, default=None, help="Override the stage-one seed.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--negate-outcome", is_flag=True, default=None)
@click.option("--trim-quantile", type=float, default=None)
@click.option("--draws/--no-draws", default=False, help="Include raw draws in the artifact.")
def fit_study(config_path, study_id, seed, out_path, negate_outcome, trim_quantile, draws):
    """Fit stage one (BBdWOLS) for one study and write a blip-posterior JSON."""
    try:
        cfg = iolib.load_run_config(config_path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    study = next((s for s in cfg.studies if s.study_id == study_id), None)
    if study is None:
        _fail(EXIT_CONFIG, f"study {study_id!r} not in config")
    bb = cfg.stage_one
    if seed is not None:
        bb.seed = seed
    if trim_quantile is not None:
        bb.trim_quantile = trim_quantile
    negate = cfg.negate_outcome if negate_outcome is None else negate_outcome
    try:
        data = iolib.ingest_csv(
            Path(config_path).parent / study.path,
            cfg.specs,
            cfg.roles,
            study.arms,
            study_id=study.study_id,
            negate_outcome=negate,
        )
        data, _ = iolib.impute_simple(data)
        post = run_bbdwols(data, bb)
    except (IngestionError, SchemaError) as exc:
        _fail(EXIT_DATA, str(exc))
    except (SingularDesignError, np.linalg.LinAlgError) as exc:
        _fail(EXIT_NUMERICAL, str(exc))
    out = Path(out_path or f"{study_id}_blip.json")
    iolib.save_blip_posterior(post, out, include_draws=draws)
    click.echo(f"wrote {out}")


@main.command("fit-nma")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--posterior", "posterior_paths", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default="nma.json")
@click.option("--forest-csv", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--covariance", type=click.Choice(["full", "sparse"]), default=None)
@click.option("--effects", type=click.Choice(["common", "random"]), default=None)
def fit_nma_cmd(config_path, posterior_paths, out_path, forest_csv, seed, covariance, effects):
    """Pool blip-posterior artifacts with the consistency-constrained NMA."""
    try:
        cfg = iolib.load_run_config(config_path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    nma_cfg = cfg.nma
    if seed is not None:
        nma_cfg.seed = seed
    if covariance is not None:
        nma_cfg.covariance_mode = covariance
    if effects is not None:
        nma_cfg.effects = effects
    try:
        posteriors = [iolib.load_blip_posterior(p) for p in posterior_paths]
        post = fit_nma(posteriors, cfg.network, nma_cfg)
    except (KeyError, ValueError) as exc:
        _fail(EXIT_DATA, f"bad posterior artifact: {exc}")
    except (IdentifiabilityError, np.linalg.LinAlgError) as exc:
        _fail(EXIT_NUMERICAL, str(exc))
    iolib.save_nma_posterior(post, out_path)
    if forest_csv:
        rows = iolib.forest_plot_rows(post)
        with open(forest_csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["parameter", "mean", "lower", "upper"])
            writer.writeheader()
            writer.writerows(rows)
    click.echo(f"wrote {out_path}")
    if not post.converged:
        click.echo("warning: convergence criteria not met", err=True)
        sys.exit(EXIT_NOT_CONVERGED)


@main.command("simulate")
@click.option("--dgm", type=click.Choice(["A", "B", "C"]), default="B")
@click.option("--stage-one", type=click.Choice(["bbdwols", "qlearning"]), default="bbdwols")
@click.option("--misspecified-reference", is_flag=True, default=False)
@click.option("--covariance", type=click.Choice(["full", "sparse"]), default="full")
@click.option("--effects", type=click.Choice(["common", "random"]), default=None)
@click.option("--sigma-tau", type=float, default=0.51)
@click.option("--reps", type=int, default=200)
@click.option("--bb-iterations", type=int, default=400)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default=None)
def simulate(dgm, stage_one, misspecified_reference, covariance, effects, sigma_tau, reps,
             bb_iterations, seed, out_path):
    """Run one simulation scenario and print/write the performance report."""
    spec = _DGMS[dgm]()
    if effects is None:
        effects = "random" if spec.tau_true > 0 else "common"
    scenario = Scenario(
        dgm=spec,
        stage_one=stage_one,
        reference_correct=not misspecified_reference,
        covariance_mode=covariance,
        effects=effects,
        sigma_tau=sigma_tau,
        bb_iterations=bb_iterations,
    )
    try:
        report = run_scenario(scenario, reps=reps, seed=seed)
    except ItrNmaError as exc:
        _fail(EXIT_NUMERICAL, str(exc))
    rows = report.rows()
    fields = list(rows[0].keys())
    if out_path:
        with open(out_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
        click.echo(f"wrote {out_path}")
    for r in rows:
        bias = r["pct_bias"]
        cov = r["coverage"]
        click.echo(
            f"{r['parameter']}: %bias={bias:.2f} emp_se={r['emp_se']:.3f} "
            f"coverage={'NA' if cov is None else f'{cov:.3f}'}"
        )


@main.command("profile")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--x", "x_values", required=True,
              help="Comma-separated effect-modifier values.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def profile(model_path, x_values, out_path):
    """Posterior relative effects for one covariate profile."""
    post = iolib.load_nma_posterior(model_path)
    try:
        x = [float(v) for v in x_values.split(",") if v.strip() != ""]
    except ValueError:
        _fail(EXIT_CONFIG, f"bad profile {x_values!r}")
    if len(x) != post.q:
        _fail(EXIT_CONFIG, f"profile needs {post.q} values, got {len(x)}")
    result = profile_effects(post, np.array(x))
    payload = {
        "schema_version": 1,
        "profile": x,
        "treatments": result.treatments,
        "effects": {
            t: {
                "mean": float(d.mean()),
                "q025": float(np.quantile(d, 0.025)),
                "q975": float(np.quantile(d, 0.975)),
            }
            for t, d in result.effect_draws.items()
        },
        "optimal": result.optimal,
        "optimal_probs": result.optimal_probs,
        "tie": result.tie,
    }
    if out_path:
        iolib.dump_json(payload, out_path)
        click.echo(f"wrote {out_path}")
    else:
        import json

        click.echo(json.dumps(payload, sort_keys=True, indent=2))


@main.command("serve")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
def serve(model_path, port, host):
    """Start the what-if HTTP service on a fitted model artifact."""
    import uvicorn

    from .server import create_app

    app = create_app(model_path)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
