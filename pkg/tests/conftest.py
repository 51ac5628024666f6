"""Shared fixtures for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from itrnma.core import CovariateSpec, FormulaRoles, StudyDataset, ARM_TERM


def make_dataset(
    n: int = 120,
    n_arms: int = 2,
    seed: int = 0,
    q: int = 1,
    missing_rate: float = 0.2,
    study_id: str = "s1",
    arm_treatments: list[str] | None = None,
) -> StudyDataset:
    """Small synthetic two-or-three arm study with MAR outcome missingness."""
    rng = np.random.default_rng(seed)
    names = [f"x{i}" for i in range(1, max(2, q) + 1)]
    cov = {name: rng.normal(size=n) for name in names}
    arm = rng.integers(1, n_arms + 1, size=n)
    # make sure every arm is populated
    arm[:n_arms] = np.arange(1, n_arms + 1)
    y = 1.0 + cov["x1"] + 0.5 * cov["x2"]
    for k in range(2, n_arms + 1):
        y = y + (arm == k) * (0.8 * k + 0.4 * cov["x1"])
    y = y + rng.normal(scale=0.7, size=n)
    if missing_rate > 0:
        miss = rng.uniform(size=n) < missing_rate
        # keep at least one complete case per arm
        miss[:n_arms] = False
        y = np.where(miss, np.nan, y)
    roles = FormulaRoles(
        reference_terms=tuple(names),
        blip_terms=tuple(names[:q]),
        treatment_terms=("x1", "x2"),
        missingness_terms=("x1", ARM_TERM),
    )
    treatments = arm_treatments or [str(k) for k in range(1, n_arms + 1)]
    return StudyDataset(
        study_id=study_id,
        subject_ids=[f"{study_id}-{j}" for j in range(n)],
        outcome=y,
        arm=arm,
        covariates=cov,
        arm_treatments=treatments,
        specs=[CovariateSpec(name) for name in names],
        roles=roles,
    )


@pytest.fixture
def two_arm_data() -> StudyDataset:
    return make_dataset()


@pytest.fixture
def three_arm_data() -> StudyDataset:
    return make_dataset(n=180, n_arms=3, seed=3)
