"""Stage one: Bayesian Bootstrap dWOLS with MAR outcome weights.

Each bootstrap iteration draws Dirichlet(1,...,1) weights, refits the
missingness and treatment-assignment models under those weights, forms
balancing weights, and solves a weighted least squares for the blip
parameters.  The L solutions are a posterior sample of the study's blip
vector; refitting the weight models inside every iteration propagates their
estimation uncertainty.  Plain Q-learning (unit probability weights) is the
comparator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import DesignMatrices, StudyDataset, build_design
from .errors import SingularDesignError
from . import glm

WEIGHT_MODES = ("treatment_mar", "treatment", "unit")


@dataclass
class BbConfig:
    n_iterations: int = 1999
    seed: int = 0
    weight_mode: str = "treatment_mar"
    trim_quantile: float | None = None
    point_estimate: str = "mean"  # mean | median
    # "observed": divide by Pr(M=0|x,a); "as_written": divide by Pr(M=1|x,a).
    miss_convention: str = "observed"

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.trim_quantile is not None and not 0 < self.trim_quantile <= 1:
            raise ValueError("trim_quantile must be in (0, 1]")
        if self.point_estimate not in ("mean", "median"):
            raise ValueError("point_estimate must be mean or median")
        if self.miss_convention not in ("observed", "as_written"):
            raise ValueError("miss_convention must be observed or as_written")


@dataclass
class BlipPosterior:
    study_id: str
    draws: np.ndarray  # L x (Q+1)(G_i-1)
    point: np.ndarray
    cov: np.ndarray
    labels: list[str]
    arm_treatments: list[str]
    q: int
    meta: dict = field(default_factory=dict)

    def to_dict(self, include_draws: bool = False) -> dict:
        out = {
            "schema_version": 1,
            "study_id": self.study_id,
            "labels": list(self.labels),
            "arm_treatments": list(self.arm_treatments),
            "n_effect_modifiers": self.q,
            "point": self.point.tolist(),
            "cov": self.cov.tolist(),
            "meta": self.meta,
        }
        if include_draws:
            out["draws"] = self.draws.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "BlipPosterior":
        draws = np.asarray(d.get("draws", []), dtype=float)
        point = np.asarray(d["point"], dtype=float)
        if draws.size == 0:
            draws = point[None, :]
        return cls(
            study_id=d["study_id"],
            draws=draws,
            point=point,
            cov=np.asarray(d["cov"], dtype=float),
            labels=list(d["labels"]),
            arm_treatments=list(d["arm_treatments"]),
            q=int(d["n_effect_modifiers"]),
            meta=dict(d.get("meta", {})),
        )


def draw_dirichlet(n: int, rng: np.random.Generator) -> np.ndarray:
    """Flat Dirichlet weights over n units (sums to 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = rng.standard_exponential(n)
    return g / g.sum()


def compute_weights(
    omega: np.ndarray,
    pi_t: np.ndarray,
    pi_obs: np.ndarray | None,
    cfg: BbConfig,
) -> np.ndarray:
    """Combine Dirichlet and inverse-probability weights, optionally trimming.

    Trimming caps weights at the empirical ``trim_quantile`` within the study
    and iteration, after the composite weight is formed.
    """
    if cfg.weight_mode == "unit":
        w = omega.copy()
    elif cfg.weight_mode == "treatment":
        w = omega / pi_t
    else:
        w = omega / (pi_t * pi_obs)
    if cfg.trim_quantile is not None and cfg.trim_quantile < 1:
        cap = np.quantile(w, cfg.trim_quantile)
        w = np.minimum(w, cap)
    return w


def weighted_wls(
    design: DesignMatrices, w: np.ndarray, complete_mask: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the weighted least squares for (beta, delta) on complete cases.

    Rows with missing outcomes are dropped via the mask, so arbitrary values
    in their outcome entries cannot affect the solution.
    """
    if complete_mask is None:
        complete_mask = design.m == 0
    x = design.stacked()[complete_mask]
    y = design.y[complete_mask]
    ww = np.asarray(w, dtype=float)[complete_mask]
    xw = x * ww[:, None]
    xtx = x.T @ xw
    xty = xw.T @ y
    try:
        c, low = scipy.linalg.cho_factor(xtx)
        sol = scipy.linalg.cho_solve((c, low), xty)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularDesignError("weighted design is rank deficient") from exc
    resid = xtx @ sol - xty
    denom = max(float(np.linalg.norm(xty)), 1e-12)
    if np.linalg.norm(resid) / denom > 1e-8:
        raise SingularDesignError("normal equations unsolvable to tolerance")
    p_ref = design.n_ref_cols
    return sol[:p_ref], sol[p_ref:]


def _blip_labels(design: DesignMatrices, arm_treatments: list[str]) -> list[str]:
    ref = arm_treatments[0]
    labels = []
    for k in sorted(design.X_blip_by_arm):
        t = arm_treatments[k - 1]
        for q in range(design.q + 1):
            labels.append(f"delta[{t} vs {ref}, q={q}]")
    return labels


def _iteration_rng(seed: int, l: int, attempt: int) -> np.random.Generator:
    # per-iteration substream keyed on (seed, l, attempt): schedule independent
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(l, attempt)))


def run_bbdwols(data: StudyDataset, cfg: BbConfig) -> BlipPosterior:
    """Full Bayesian Bootstrap dWOLS posterior for one study."""
    design = build_design(data)
    n = data.n
    arm = np.asarray(data.arm, dtype=int)
    complete = design.m == 0
    d = (design.q + 1) * (data.n_arms - 1)
    draws = np.empty((cfg.n_iterations, d))
    redraws = 0
    warn_separation = 0
    # warm starts from the unweighted fits
    miss_start = None
    trt_start = None
    if cfg.weight_mode == "treatment_mar":
        miss_start = glm.fit_weighted_logistic(
            design.X_miss, design.m.astype(float), np.ones(n)
        ).coefficients
    if cfg.weight_mode in ("treatment", "treatment_mar"):
        trt_start = glm.fit_weighted_multinomial(
            design.X_trt, arm, np.ones(n), n_categories=data.n_arms
        ).coefficients

    for l in range(cfg.n_iterations):
        attempt = 0
        while True:
            rng = _iteration_rng(cfg.seed, l, attempt)
            omega = draw_dirichlet(n, rng)
            try:
                pi_t = None
                pi_obs = None
                if cfg.weight_mode in ("treatment", "treatment_mar"):
                    tfit = glm.fit_weighted_multinomial(
                        design.X_trt, arm, omega, n_categories=data.n_arms, start=trt_start
                    )
                    warn_separation += int(tfit.separation)
                    pi_t = glm.predict_prob(tfit, design.X_trt, target=arm)
                if cfg.weight_mode == "treatment_mar":
                    mfit = glm.fit_weighted_logistic(
                        design.X_miss, design.m.astype(float), omega, start=miss_start
                    )
                    warn_separation += int(mfit.separation)
                    p_miss = glm.predict_prob(mfit, design.X_miss, target=2)
                    pi_obs = p_miss if cfg.miss_convention == "as_written" else 1.0 - p_miss
                w = compute_weights(omega, pi_t, pi_obs, cfg)
                _, delta = weighted_wls(design, w, complete)
                draws[l] = delta
                break
            except SingularDesignError:
                attempt += 1
                redraws += 1
                if attempt > 50:
                    raise

    point = np.median(draws, axis=0) if cfg.point_estimate == "median" else draws.mean(axis=0)
    if cfg.n_iterations > 1:
        cov = np.cov(draws, rowvar=False, ddof=1).reshape(d, d)
    else:
        cov = np.zeros((d, d))
    meta = {
        "method": "bbdwols",
        "weight_mode": cfg.weight_mode,
        "n_iterations": cfg.n_iterations,
        "seed": cfg.seed,
        "trim_quantile": cfg.trim_quantile,
        "miss_convention": cfg.miss_convention,
        "point_estimate": cfg.point_estimate,
        "redrawn_iterations": redraws,
        "separation_flags": warn_separation,
    }
    if redraws > 0.05 * cfg.n_iterations:
        meta["degraded_fit_warning"] = True
    return BlipPosterior(
        study_id=data.study_id,
        draws=draws,
        point=point,
        cov=cov,
        labels=_blip_labels(design, data.arm_treatments),
        arm_treatments=list(data.arm_treatments),
        q=design.q,
        meta=meta,
    )


def run_qlearning(data: StudyDataset, cfg: BbConfig | None = None) -> BlipPosterior:
    """Complete-case Q-learning comparator.

    Unweighted OLS gives the point estimate; the Bayesian Bootstrap with unit
    probability weights (Dirichlet weights only) gives the posterior spread.
    """
    base = cfg or BbConfig()
    qcfg = BbConfig(
        n_iterations=base.n_iterations,
        seed=base.seed,
        weight_mode="unit",
        trim_quantile=None,
        point_estimate=base.point_estimate,
    )
    post = run_bbdwols(data, qcfg)
    post.meta["method"] = "qlearning"
    return post
