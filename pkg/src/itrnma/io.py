"""CSV ingestion, simple imputation, run configuration, JSON artifacts."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bbdwols import BbConfig, BlipPosterior
from .core import CovariateSpec, FormulaRoles, StudyDataset
from .errors import ConfigError, IngestionError
from .netmap import TreatmentNetwork
from .nma import NmaConfig, NmaPosterior

RESERVED_COLUMNS = ("study_id", "subject_id", "treatment", "outcome")


def dump_json(obj: dict, path: str | Path) -> None:
    """Deterministic JSON serialization (stable key order, '\\n' endings)."""
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def ingest_csv(
    path: str | Path,
    specs: list[CovariateSpec],
    roles: FormulaRoles,
    arm_treatments: list[str],
    study_id: str | None = None,
    negate_outcome: bool = False,
) -> StudyDataset:
    """Read one study's rows from CSV.

    Header: study_id, subject_id, treatment, outcome, then covariates.  An
    empty outcome cell marks a missing outcome; empty covariate cells are
    carried as NaN for ``impute_simple`` to resolve.
    """
    path = Path(path)
    arm_index = {t: k + 1 for k, t in enumerate(arm_treatments)}
    subject_ids: list[str] = []
    outcome: list[float] = []
    arm: list[int] = []
    cov_rows: dict[str, list] = {s.name: [] for s in specs}
    sid = study_id
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestionError(f"{path}: empty file")
        missing_cols = [c for c in RESERVED_COLUMNS if c not in reader.fieldnames]
        if missing_cols:
            raise IngestionError(f"{path}: missing columns {missing_cols}")
        for c in cov_rows:
            if c not in reader.fieldnames:
                raise IngestionError(f"{path}: missing covariate column {c!r}")
        for rownum, row in enumerate(reader, start=2):
            if sid is None:
                sid = row["study_id"]
            elif row["study_id"] != sid:
                raise IngestionError(f"{path} row {rownum}: mixed study ids")
            subj = row["subject_id"]
            if subj in subject_ids:
                raise IngestionError(f"{path} row {rownum}: duplicate subject_id {subj!r}")
            subject_ids.append(subj)
            trt = row["treatment"]
            if trt not in arm_index:
                raise IngestionError(f"{path} row {rownum}: unknown treatment {trt!r}")
            arm.append(arm_index[trt])
            cell = row["outcome"].strip()
            if cell == "":
                outcome.append(math.nan)
            else:
                try:
                    val = float(cell)
                except ValueError as exc:
                    raise IngestionError(f"{path} row {rownum}: bad outcome {cell!r}") from exc
                outcome.append(-val if negate_outcome else val)
            for spec in specs:
                cell = row[spec.name].strip()
                if spec.kind == "categorical":
                    cov_rows[spec.name].append(cell if cell else None)
                elif cell == "":
                    cov_rows[spec.name].append(math.nan)
                else:
                    try:
                        cov_rows[spec.name].append(float(cell))
                    except ValueError as exc:
                        raise IngestionError(
                            f"{path} row {rownum}: non-numeric value {cell!r} "
                            f"for covariate {spec.name!r}"
                        ) from exc
    covariates = {}
    for spec in specs:
        if spec.kind == "categorical":
            covariates[spec.name] = np.array(cov_rows[spec.name], dtype=object)
        else:
            covariates[spec.name] = np.array(cov_rows[spec.name], dtype=float)
    return StudyDataset(
        study_id=sid or path.stem,
        subject_ids=subject_ids,
        outcome=np.array(outcome, dtype=float),
        arm=np.array(arm, dtype=int),
        covariates=covariates,
        arm_treatments=list(arm_treatments),
        specs=list(specs),
        roles=roles,
    )


def write_csv(data: StudyDataset, path: str | Path) -> None:
    """Write a dataset back out in the ingestion schema (round-trip safe)."""
    names = [s.name for s in data.specs]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(RESERVED_COLUMNS) + names)
        for j in range(data.n):
            y = data.outcome[j]
            row = [
                data.study_id,
                data.subject_ids[j],
                data.arm_treatments[data.arm[j] - 1],
                "" if math.isnan(y) else repr(float(y)),
            ]
            for spec in data.specs:
                v = data.covariates[spec.name][j]
                if spec.kind == "categorical":
                    row.append("" if v is None else str(v))
                else:
                    row.append("" if math.isnan(v) else repr(float(v)))
            writer.writerow(row)


def impute_simple(data: StudyDataset) -> tuple[StudyDataset, dict[str, int]]:
    """Mean-impute continuous covariates, mode-impute binary/categorical.

    Ties in the mode break to the sorted-first level.  Outcome missingness is
    left untouched.  Returns the imputed dataset and per-covariate counts.
    """
    counts: dict[str, int] = {}
    new_cov = {}
    for spec in data.specs:
        values = data.covariates[spec.name]
        if spec.kind == "categorical":
            missing = np.array([v is None for v in values])
            observed = [v for v in values if v is not None]
            if missing.any():
                if not observed:
                    raise IngestionError(f"covariate {spec.name!r} entirely missing")
                levels, freq = np.unique(np.array(observed, dtype=str), return_counts=True)
                mode = sorted(levels[freq == freq.max()])[0]
                values = np.where(missing, mode, values.astype(str)).astype(object)
            counts[spec.name] = int(missing.sum())
        else:
            vals = np.asarray(values, dtype=float)
            missing = np.isnan(vals)
            if missing.any():
                if missing.all():
                    raise IngestionError(f"covariate {spec.name!r} entirely missing")
                if spec.kind == "binary":
                    observed = vals[~missing]
                    levels, freq = np.unique(observed, return_counts=True)
                    fill = float(sorted(levels[freq == freq.max()])[0])
                else:
                    fill = float(np.mean(vals[~missing]))
                vals = np.where(missing, fill, vals)
            counts[spec.name] = int(missing.sum())
            values = vals
        new_cov[spec.name] = values
    out = StudyDataset(
        study_id=data.study_id,
        subject_ids=list(data.subject_ids),
        outcome=data.outcome.copy(),
        arm=data.arm.copy(),
        covariates=new_cov,
        arm_treatments=list(data.arm_treatments),
        specs=list(data.specs),
        roles=data.roles,
    )
    return out, counts


@dataclass
class StudyConfig:
    study_id: str
    path: str
    arms: list[str]


@dataclass
class RunConfig:
    network: TreatmentNetwork
    specs: list[CovariateSpec]
    roles: FormulaRoles
    studies: list[StudyConfig]
    stage_one: BbConfig
    nma: NmaConfig
    output_dir: str = "."
    negate_outcome: bool = False


def _roles_from_dict(d: dict) -> FormulaRoles:
    return FormulaRoles(
        reference_terms=tuple(d["reference_terms"]),
        blip_terms=tuple(d["blip_terms"]),
        treatment_terms=tuple(d["treatment_terms"]),
        missingness_terms=tuple(d["missingness_terms"]),
    )


def load_run_config(path: str | Path) -> RunConfig:
    raw = load_json(path)
    base = Path(path).parent
    try:
        specs = [
            CovariateSpec(
                name=c["name"],
                kind=c.get("kind", "continuous"),
                levels=tuple(c.get("levels", ())),
            )
            for c in raw["covariates"]
        ]
        roles = _roles_from_dict(raw["roles"])
        studies = [
            StudyConfig(study_id=s["study_id"], path=s["path"], arms=list(s["arms"]))
            for s in raw["studies"]
        ]
        net = TreatmentNetwork(
            treatments=list(raw["network"]["treatments"]),
            study_arms={s.study_id: s.arms for s in studies},
            q=int(raw["network"]["n_effect_modifiers"]),
        )
        stage_one = BbConfig(**raw.get("stage_one", {}))
        nma = NmaConfig(**raw.get("nma", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad run config {path}: {exc}") from exc
    for s in studies:
        if not (base / s.path).exists():
            raise ConfigError(f"study file not found: {s.path}")
    return RunConfig(
        network=net,
        specs=specs,
        roles=roles,
        studies=studies,
        stage_one=stage_one,
        nma=nma,
        output_dir=raw.get("output_dir", "."),
        negate_outcome=bool(raw.get("negate_outcome", False)),
    )


def save_blip_posterior(post: BlipPosterior, path: str | Path, include_draws: bool = False):
    dump_json(post.to_dict(include_draws=include_draws), path)


def load_blip_posterior(path: str | Path) -> BlipPosterior:
    return BlipPosterior.from_dict(load_json(path))


def save_nma_posterior(post: NmaPosterior, path: str | Path, include_draws: bool = True):
    dump_json(post.to_dict(include_draws=include_draws), path)


def load_nma_posterior(path: str | Path) -> NmaPosterior:
    return NmaPosterior.from_dict(load_json(path))


def forest_plot_rows(post: NmaPosterior) -> list[dict]:
    """Point + 95% CrI per psi coordinate, for external plotting."""
    return [
        {
            "parameter": r["parameter"],
            "mean": r["mean"],
            "lower": r["q025"],
            "upper": r["q975"],
        }
        for r in post.summaries()
        if r["parameter"] != "tau"
    ]
