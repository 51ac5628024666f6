"""Domain types and design-matrix construction for study-level ITR models.

The outcome regression stacks a reference design (expected response on the
study reference arm) with one blip block per non-reference arm.  Rows outside
an arm get zeros in that arm's block, so a single weighted least squares solve
recovers reference and blip coefficients together.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateArmError, SchemaError

# Reserved term referring to the treatment-arm indicator in missingness models.
ARM_TERM = "arm"

_TERM_RE = re.compile(r"^(?P<a>[A-Za-z_]\w*)(\^(?P<pow>\d+)|\*(?P<b>[A-Za-z_]\w*))?$")


@dataclass(frozen=True)
class CovariateSpec:
    name: str
    kind: str = "continuous"  # continuous | binary | categorical
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("continuous", "binary", "categorical"):
            raise SchemaError(f"unknown covariate kind {self.kind!r}")
        if self.kind == "categorical" and not self.levels:
            raise SchemaError(f"categorical covariate {self.name!r} needs levels")


@dataclass(frozen=True)
class FormulaRoles:
    reference_terms: tuple[str, ...]
    blip_terms: tuple[str, ...]
    treatment_terms: tuple[str, ...]
    missingness_terms: tuple[str, ...]

    def validate(self, specs: list[CovariateSpec]) -> None:
        names = {s.name for s in specs}
        if len(names) != len(specs):
            raise SchemaError("duplicate covariate names in spec set")
        for role, terms in (
            ("reference", self.reference_terms),
            ("blip", self.blip_terms),
            ("treatment", self.treatment_terms),
            ("missingness", self.missingness_terms),
        ):
            for t in terms:
                if role == "missingness" and t == ARM_TERM:
                    continue
                for name in term_covariates(t):
                    if name not in names:
                        raise SchemaError(f"{role} term {t!r} uses unknown covariate {name!r}")
        ref_cov = {n for t in self.reference_terms for n in term_covariates(t)}
        blip_cov = {n for t in self.blip_terms for n in term_covariates(t)}
        if not blip_cov <= ref_cov:
            raise SchemaError(
                f"blip covariates {sorted(blip_cov - ref_cov)} missing from reference terms"
            )


def term_covariates(term: str) -> list[str]:
    """Covariate names referenced by a term expression."""
    m = _TERM_RE.match(term)
    if m is None:
        raise SchemaError(f"cannot parse term {term!r}")
    names = [m.group("a")]
    if m.group("b"):
        names.append(m.group("b"))
    return names


@dataclass
class StudyDataset:
    """One study's individual-level rows after ingestion/imputation.

    Outcome missingness is encoded as NaN; covariates must be complete.
    ``arm`` holds 1-based arm indices; ``arm_treatments[k-1]`` is the global
    treatment id of arm k, with arm 1 the study reference.
    """

    study_id: str
    subject_ids: list[str]
    outcome: np.ndarray
    arm: np.ndarray
    covariates: dict[str, np.ndarray]
    arm_treatments: list[str]
    specs: list[CovariateSpec]
    roles: FormulaRoles

    @property
    def n(self) -> int:
        return len(self.subject_ids)

    @property
    def n_arms(self) -> int:
        return len(self.arm_treatments)

    def spec_for(self, name: str) -> CovariateSpec:
        for s in self.specs:
            if s.name == name:
                return s
        raise SchemaError(f"unknown covariate {name!r}")


@dataclass
class ValidationReport:
    study_id: str
    n_rows: int
    n_arms: int
    arm_counts: dict[int, int]
    complete_case_counts: dict[int, int]
    missing_covariate_cells: list[tuple[str, int]]
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems and not self.missing_covariate_cells


@dataclass
class DesignMatrices:
    """Stacked designs for one study.

    ``X_blip_by_arm[k]`` (k = 2..G_i) is the N x (Q+1) blip block: rows in arm
    k carry [1, x_blip]; all other rows are zero.
    """

    X_ref: np.ndarray
    X_blip_by_arm: dict[int, np.ndarray]
    X_trt: np.ndarray
    X_miss: np.ndarray
    m: np.ndarray
    y: np.ndarray
    ref_columns: list[str]
    blip_columns: list[str]
    trt_columns: list[str]
    miss_columns: list[str]

    @property
    def q(self) -> int:
        """Number of effect modifiers (blip columns minus the leading one)."""
        return len(self.blip_columns) - 1

    def stacked(self) -> np.ndarray:
        """Full outcome-regression design [X_ref | blip blocks in arm order]."""
        blocks = [self.X_ref]
        for k in sorted(self.X_blip_by_arm):
            blocks.append(self.X_blip_by_arm[k])
        return np.hstack(blocks)

    @property
    def n_ref_cols(self) -> int:
        return self.X_ref.shape[1]


def _encode_covariate(spec: CovariateSpec, values: np.ndarray) -> list[tuple[str, np.ndarray]]:
    """Expand one covariate to numeric columns.

    Categorical: indicator per level after the first in sorted order.
    """
    if spec.kind == "categorical":
        levels = sorted(spec.levels)
        cols = []
        for lev in levels[1:]:
            cols.append((f"{spec.name}[{lev}]", (values.astype(str) == lev).astype(float)))
        return cols
    return [(spec.name, np.asarray(values, dtype=float))]


def _term_columns(term: str, data: StudyDataset) -> list[tuple[str, np.ndarray]]:
    m = _TERM_RE.match(term)
    if m is None:
        raise SchemaError(f"cannot parse term {term!r}")
    a = m.group("a")
    spec_a = data.spec_for(a)
    if m.group("pow"):
        p = int(m.group("pow"))
        if spec_a.kind == "categorical":
            raise SchemaError(f"cannot raise categorical {a!r} to a power")
        base = np.asarray(data.covariates[a], dtype=float)
        return [(f"{a}^{p}", base**p)]
    if m.group("b"):
        b = m.group("b")
        spec_b = data.spec_for(b)
        if spec_a.kind == "categorical" or spec_b.kind == "categorical":
            raise SchemaError(f"products with categorical covariates are unsupported: {term!r}")
        va = np.asarray(data.covariates[a], dtype=float)
        vb = np.asarray(data.covariates[b], dtype=float)
        return [(f"{a}*{b}", va * vb)]
    return _encode_covariate(spec_a, data.covariates[a])


def _build_block(terms: tuple[str, ...], data: StudyDataset, arm_indicators: bool = False):
    names = ["(intercept)"]
    cols = [np.ones(data.n)]
    for t in terms:
        if t == ARM_TERM:
            if not arm_indicators:
                raise SchemaError(f"term {ARM_TERM!r} only allowed in missingness models")
            for k in range(2, data.n_arms + 1):
                names.append(f"arm[{k}]")
                cols.append((data.arm == k).astype(float))
            continue
        for name, col in _term_columns(t, data):
            names.append(name)
            cols.append(col)
    return names, np.column_stack(cols)


def validate_dataset(data: StudyDataset) -> ValidationReport:
    problems: list[str] = []
    missing_cells: list[tuple[str, int]] = []
    if data.n == 0:
        problems.append("empty dataset")
    if data.n_arms < 2:
        problems.append("fewer than 2 arms")
    if len(set(data.subject_ids)) != data.n:
        problems.append("duplicate subject ids")
    arm = np.asarray(data.arm)
    if data.n and (arm.min() < 1 or arm.max() > data.n_arms):
        problems.append("arm index outside 1..G_i")
    for name, values in data.covariates.items():
        spec = data.spec_for(name)
        if spec.kind == "categorical":
            bad = np.where([v is None or (isinstance(v, float) and np.isnan(v)) for v in values])[0]
        else:
            bad = np.where(np.isnan(np.asarray(values, dtype=float)))[0]
        missing_cells.extend((name, int(j)) for j in bad)
    complete = ~np.isnan(np.asarray(data.outcome, dtype=float))
    arm_counts = {k: int(np.sum(arm == k)) for k in range(1, data.n_arms + 1)}
    cc_counts = {k: int(np.sum(complete & (arm == k))) for k in range(1, data.n_arms + 1)}
    for k, c in arm_counts.items():
        if c == 0:
            problems.append(f"arm {k} has no rows")
    for k, c in cc_counts.items():
        if arm_counts.get(k, 0) > 0 and c == 0:
            problems.append(f"arm {k} has no complete-case rows")
    return ValidationReport(
        study_id=data.study_id,
        n_rows=data.n,
        n_arms=data.n_arms,
        arm_counts=arm_counts,
        complete_case_counts=cc_counts,
        missing_covariate_cells=missing_cells,
        problems=problems,
    )


def build_design(data: StudyDataset) -> DesignMatrices:
    """Construct all design matrices for one study.

    Deterministic: identical datasets yield bit-identical matrices.
    """
    report = validate_dataset(data)
    if report.missing_covariate_cells:
        raise SchemaError(
            f"{len(report.missing_covariate_cells)} missing covariate cells; impute first"
        )
    if report.problems:
        if any("no rows" in p or "no complete-case" in p for p in report.problems):
            raise DegenerateArmError("; ".join(report.problems))
        raise SchemaError("; ".join(report.problems))
    data.roles.validate(data.specs)

    ref_names, X_ref = _build_block(data.roles.reference_terms, data)
    blip_names, blip_vals = _build_block(data.roles.blip_terms, data)
    trt_names, X_trt = _build_block(data.roles.treatment_terms, data)
    miss_names, X_miss = _build_block(data.roles.missingness_terms, data, arm_indicators=True)

    arm = np.asarray(data.arm)
    blocks: dict[int, np.ndarray] = {}
    for k in range(2, data.n_arms + 1):
        ind = (arm == k).astype(float)[:, None]
        blocks[k] = blip_vals * ind

    y = np.asarray(data.outcome, dtype=float)
    m = np.isnan(y).astype(int)
    return DesignMatrices(
        X_ref=X_ref,
        X_blip_by_arm=blocks,
        X_trt=X_trt,
        X_miss=X_miss,
        m=m,
        y=y,
        ref_columns=ref_names,
        blip_columns=blip_names,
        trt_columns=trt_names,
        miss_columns=miss_names,
    )
