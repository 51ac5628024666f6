"""Stage two: consistency-constrained Bayesian network meta-analysis.

Pools per-study blip posteriors under the hierarchical model

    delta_hat_i ~ MVN(delta_i, Sigma_hat_i)
    delta_i     ~ MVN(V_i psi, Sigma_i(tau))      (random effects)
    delta_i     = V_i psi                          (common effects)

with independent N(0, sd^2) priors on psi and a half-normal prior on tau.
The model is conditionally conjugate, so the sampler is Gibbs with exact
Gaussian blocks plus a slice sampler for tau; the common-effects posterior
is sampled in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bbdwols import BlipPosterior
from .diagnostics import ParamDiagnostics, diagnose
from .errors import IdentifiabilityError, ProfileError
from .netmap import TreatmentNetwork

RHAT_LIMIT = 1.01
ESS_FLOOR = 400.0


@dataclass
class NmaConfig:
    effects: str = "common"  # common | random
    covariance_mode: str = "full"  # full | sparse
    prior_psi_sd: float = 10.0
    prior_tau_scale: float = 0.51
    chains: int = 4
    iters: int = 2000
    warmup: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.effects not in ("common", "random"):
            raise ValueError("effects must be common or random")
        if self.covariance_mode not in ("full", "sparse"):
            raise ValueError("covariance_mode must be full or sparse")
        if self.prior_psi_sd <= 0 or self.prior_tau_scale <= 0:
            raise ValueError("prior scales must be positive")
        if self.warmup >= self.iters:
            raise ValueError("warmup must be < iters")
        if self.chains < 2:
            raise ValueError("need >= 2 chains for diagnostics")

    def to_dict(self) -> dict:
        return {
            "effects": self.effects,
            "covariance_mode": self.covariance_mode,
            "prior_psi_sd": self.prior_psi_sd,
            "prior_tau_scale": self.prior_tau_scale,
            "chains": self.chains,
            "iters": self.iters,
            "warmup": self.warmup,
            "seed": self.seed,
        }


class HeterogeneityStructure:
    """Common-variance between-study covariance: diag tau^2, off-diag tau^2/2.

    Equals (tau^2/2)(I_d + J_d); eigenvalues tau^2/2 and tau^2 (d+1)/2, so it
    is PSD for every tau >= 0, and Sherman-Morrison gives the inverse.
    """

    def __init__(self, tau: float, dim: int):
        if tau < 0:
            raise ValueError("tau must be >= 0")
        self.tau = tau
        self.dim = dim

    def matrix(self) -> np.ndarray:
        t2 = self.tau**2
        return t2 / 2 * (np.eye(self.dim) + np.ones((self.dim, self.dim)))

    def inverse(self) -> np.ndarray:
        t2 = self.tau**2
        d = self.dim
        return 2.0 / t2 * (np.eye(d) - np.ones((d, d)) / (d + 1))

    def log_det(self) -> float:
        d = self.dim
        return d * np.log(self.tau**2 / 2.0) + np.log(d + 1.0)

    def quad_form(self, r: np.ndarray) -> float:
        """r' Sigma^{-1} r without forming the inverse."""
        return 2.0 / self.tau**2 * (float(r @ r) - float(r.sum()) ** 2 / (self.dim + 1))


def sparsify_cov(sigma: np.ndarray, q: int, g_i: int) -> np.ndarray:
    """Zero covariances between coefficients of different covariate types.

    Coefficient (k, q) sits at flat index k*(Q+1)+q; entries with unequal q
    are zeroed (cross-arm same-covariate covariances survive), then the
    result is projected back to PSD by eigenvalue clipping if needed.
    """
    d = (q + 1) * (g_i - 1)
    if sigma.shape != (d, d):
        raise ValueError(f"expected {d}x{d} covariance, got {sigma.shape}")
    qidx = np.tile(np.arange(q + 1), g_i - 1)
    mask = qidx[:, None] == qidx[None, :]
    out = np.where(mask, sigma, 0.0)
    vals = np.linalg.eigvalsh(out)
    if vals.min() < 0:
        out = repair_psd(out)
    return out


def repair_psd(sigma: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    """Symmetrize and clip eigenvalues at a small positive floor."""
    s = (sigma + sigma.T) / 2
    vals, vecs = np.linalg.eigh(s)
    vals = np.clip(vals, floor, None)
    return (vecs * vals) @ vecs.T


@dataclass
class NmaPosterior:
    psi_chains: np.ndarray  # (chains, n_kept, n_psi)
    tau_chains: np.ndarray | None
    delta_chains: dict[str, np.ndarray]
    labels: list[str]
    treatments: list[str]
    q: int
    config: NmaConfig
    diagnostics: dict[str, ParamDiagnostics]
    converged: bool

    @property
    def psi_draws(self) -> np.ndarray:
        c, n, p = self.psi_chains.shape
        return self.psi_chains.reshape(c * n, p)

    @property
    def tau_draws(self) -> np.ndarray | None:
        return None if self.tau_chains is None else self.tau_chains.reshape(-1)

    def summaries(self) -> list[dict]:
        rows = []
        pooled = self.psi_draws
        for j, label in enumerate(self.labels):
            diag = self.diagnostics[label]
            col = pooled[:, j]
            rows.append(
                {
                    "parameter": label,
                    "mean": float(col.mean()),
                    "sd": float(col.std(ddof=1)),
                    "q025": float(np.quantile(col, 0.025)),
                    "q975": float(np.quantile(col, 0.975)),
                    "rhat": diag.rhat,
                    "ess": diag.ess,
                }
            )
        if self.tau_chains is not None:
            col = self.tau_draws
            diag = self.diagnostics["tau"]
            rows.append(
                {
                    "parameter": "tau",
                    "mean": float(col.mean()),
                    "sd": float(col.std(ddof=1)),
                    "q025": float(np.quantile(col, 0.025)),
                    "q975": float(np.quantile(col, 0.975)),
                    "rhat": diag.rhat,
                    "ess": diag.ess,
                }
            )
        return rows

    def to_dict(self, include_draws: bool = False) -> dict:
        out = {
            "schema_version": 1,
            "treatments": list(self.treatments),
            "n_effect_modifiers": self.q,
            "labels": list(self.labels),
            "config": self.config.to_dict(),
            "converged": self.converged,
            "summaries": self.summaries(),
        }
        if include_draws:
            out["psi_draws"] = self.psi_draws.tolist()
            if self.tau_chains is not None:
                out["tau_draws"] = self.tau_draws.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "NmaPosterior":
        if "psi_draws" not in d:
            raise ValueError("artifact was saved without draws; refit with draws enabled")
        draws = np.asarray(d["psi_draws"], dtype=float)
        cfg = NmaConfig(**d["config"])
        n = draws.shape[0] // cfg.chains
        psi_chains = draws[: n * cfg.chains].reshape(cfg.chains, n, draws.shape[1])
        tau_chains = None
        if "tau_draws" in d:
            tau = np.asarray(d["tau_draws"], dtype=float)
            tau_chains = tau[: n * cfg.chains].reshape(cfg.chains, n)
        diag = {}
        for row in d["summaries"]:
            diag[row["parameter"]] = ParamDiagnostics(rhat=row["rhat"], ess=row["ess"])
        return cls(
            psi_chains=psi_chains,
            tau_chains=tau_chains,
            delta_chains={},
            labels=list(d["labels"]),
            treatments=list(d["treatments"]),
            q=int(d["n_effect_modifiers"]),
            config=cfg,
            diagnostics=diag,
            converged=bool(d["converged"]),
        )


def _prepare_inputs(
    posteriors: list[BlipPosterior], net: TreatmentNetwork, cfg: NmaConfig
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per study: (delta_hat, Sigma_hat^{-1}, V), with sparsify/PSD repair."""
    out = []
    for post in posteriors:
        v = net.v_matrix(post.study_id)
        sigma = np.asarray(post.cov, dtype=float)
        if cfg.covariance_mode == "sparse":
            g_i = len(post.arm_treatments)
            sigma = sparsify_cov(sigma, post.q, g_i)
        vals = np.linalg.eigvalsh((sigma + sigma.T) / 2)
        if vals.min() <= 0:
            sigma = repair_psd(sigma) + 1e-8 * np.eye(sigma.shape[0])
        prec = np.linalg.inv(sigma)
        prec = (prec + prec.T) / 2
        out.append((np.asarray(post.point, dtype=float), prec, v))
    return out


def _data_precision(inputs) -> tuple[np.ndarray, np.ndarray]:
    n_psi = inputs[0][2].shape[1]
    prec = np.zeros((n_psi, n_psi))
    rhs = np.zeros(n_psi)
    for delta_hat, s_inv, v in inputs:
        prec += v.T @ s_inv @ v
        rhs += v.T @ s_inv @ delta_hat
    return prec, rhs


def _check_identifiable(data_prec: np.ndarray, labels: list[str]) -> None:
    vals, vecs = np.linalg.eigh(data_prec)
    tol = max(vals.max(), 1.0) * 1e-10
    bad = np.where(vals < tol)[0]
    if bad.size:
        names = set()
        for j in bad:
            top = np.argsort(-np.abs(vecs[:, j]))[:3]
            names.update(labels[t] for t in top)
        raise IdentifiabilityError(f"unestimable contrasts involve: {sorted(names)}")


def common_effects_moments(
    posteriors: list[BlipPosterior], net: TreatmentNetwork, cfg: NmaConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic posterior mean and covariance of psi under delta_i = V_i psi."""
    inputs = _prepare_inputs(posteriors, net, cfg)
    data_prec, rhs = _data_precision(inputs)
    _check_identifiable(data_prec, net.psi_labels())
    prec = data_prec + np.eye(net.n_psi) / cfg.prior_psi_sd**2
    cov = np.linalg.inv(prec)
    cov = (cov + cov.T) / 2
    return cov @ rhs, cov


def fit_common_effects(
    posteriors: list[BlipPosterior], net: TreatmentNetwork, cfg: NmaConfig
) -> NmaPosterior:
    """Exact conjugate Gaussian posterior of psi under delta_i = V_i psi."""
    labels = net.psi_labels()
    mean, cov = common_effects_moments(posteriors, net, cfg)
    chol = np.linalg.cholesky(cov + 1e-14 * np.eye(net.n_psi))
    n_kept = cfg.iters - cfg.warmup
    psi_chains = np.empty((cfg.chains, n_kept, net.n_psi))
    for c in range(cfg.chains):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(c,)))
        z = rng.standard_normal((n_kept, net.n_psi))
        psi_chains[c] = mean + z @ chol.T
    diag_list = diagnose(psi_chains)
    diagnostics = dict(zip(labels, diag_list))
    converged = all(d.rhat < RHAT_LIMIT and d.ess >= ESS_FLOOR for d in diag_list)
    return NmaPosterior(
        psi_chains=psi_chains,
        tau_chains=None,
        delta_chains={},
        labels=labels,
        treatments=list(net.treatments),
        q=net.q,
        config=cfg,
        diagnostics=diagnostics,
        converged=converged,
    )


def _slice_sample_tau(
    log_target, tau0: float, rng: np.random.Generator, width: float
) -> float:
    """Univariate slice sampler on (0, inf) with stepping out."""
    ly = log_target(tau0) + np.log(rng.uniform())
    u = rng.uniform()
    left = max(tau0 - u * width, 1e-12)
    right = tau0 + (1 - u) * width
    for _ in range(50):
        if left <= 1e-12 or log_target(left) < ly:
            break
        left = max(left - width, 1e-12)
    for _ in range(50):
        if log_target(right) < ly:
            break
        right += width
    for _ in range(100):
        cand = rng.uniform(left, right)
        if log_target(cand) >= ly:
            return cand
        if cand < tau0:
            left = cand
        else:
            right = cand
    return tau0


def _mvn_draw(mean: np.ndarray, prec: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw from MVN(mean, prec^{-1}) via Cholesky of the precision."""
    chol = np.linalg.cholesky(prec)
    z = rng.standard_normal(mean.size)
    return mean + np.linalg.solve(chol.T, z)


def fit_random_effects(
    posteriors: list[BlipPosterior], net: TreatmentNetwork, cfg: NmaConfig
) -> NmaPosterior:
    """Gibbs sampler over (psi, {delta_i}, tau) for the random-effects model."""
    inputs = _prepare_inputs(posteriors, net, cfg)
    labels = net.psi_labels()
    data_prec, rhs = _data_precision(inputs)
    _check_identifiable(data_prec, labels)
    n_psi = net.n_psi
    prior_prec = np.eye(n_psi) / cfg.prior_psi_sd**2
    sigma_tau = cfg.prior_tau_scale
    dims = [x[0].size for x in inputs]
    study_ids = [p.study_id for p in posteriors]
    # initial psi: common-effects posterior mean
    psi_init = np.linalg.solve(data_prec + prior_prec, rhs)

    n_kept = cfg.iters - cfg.warmup
    psi_chains = np.empty((cfg.chains, n_kept, n_psi))
    tau_chains = np.empty((cfg.chains, n_kept))
    delta_chains = {sid: np.empty((cfg.chains, n_kept, d)) for sid, d in zip(study_ids, dims)}

    for c in range(cfg.chains):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(c,)))
        psi = psi_init.copy()
        deltas = [x[0].copy() for x in inputs]
        tau = abs(rng.normal(0.0, sigma_tau)) + 1e-6
        for it in range(cfg.iters):
            # delta_i | psi, tau
            het = [HeterogeneityStructure(tau, d) for d in dims]
            for i, (delta_hat, s_inv, v) in enumerate(inputs):
                h_inv = het[i].inverse()
                prec_i = s_inv + h_inv
                mean_rhs = s_inv @ delta_hat + h_inv @ (v @ psi)
                mean_i = np.linalg.solve(prec_i, mean_rhs)
                deltas[i] = _mvn_draw(mean_i, prec_i, rng)
            # psi | delta, tau
            prec_psi = prior_prec.copy()
            rhs_psi = np.zeros(n_psi)
            for i, (_, _, v) in enumerate(inputs):
                h_inv = het[i].inverse()
                prec_psi += v.T @ h_inv @ v
                rhs_psi += v.T @ h_inv @ deltas[i]
            mean_psi = np.linalg.solve(prec_psi, rhs_psi)
            psi = _mvn_draw(mean_psi, prec_psi, rng)
            # tau | delta, psi
            resids = [deltas[i] - inputs[i][2] @ psi for i in range(len(inputs))]

            def log_target(t: float) -> float:
                if t <= 0:
                    return -np.inf
                val = -t**2 / (2 * sigma_tau**2)
                for i, r in enumerate(resids):
                    h = HeterogeneityStructure(t, dims[i])
                    val += -0.5 * h.log_det() - 0.5 * h.quad_form(r)
                return val

            tau = _slice_sample_tau(log_target, tau, rng, width=sigma_tau / 2)
            if it >= cfg.warmup:
                kept = it - cfg.warmup
                psi_chains[c, kept] = psi
                tau_chains[c, kept] = tau
                for i, sid in enumerate(study_ids):
                    delta_chains[sid][c, kept] = deltas[i]

    diag_list = diagnose(psi_chains)
    diagnostics = dict(zip(labels, diag_list))
    diagnostics["tau"] = diagnose(tau_chains[:, :, None])[0]
    converged = all(
        d.rhat < RHAT_LIMIT and d.ess >= ESS_FLOOR for d in diagnostics.values()
    )
    return NmaPosterior(
        psi_chains=psi_chains,
        tau_chains=tau_chains,
        delta_chains=delta_chains,
        labels=labels,
        treatments=list(net.treatments),
        q=net.q,
        config=cfg,
        diagnostics=diagnostics,
        converged=converged,
    )


def fit_nma(
    posteriors: list[BlipPosterior], net: TreatmentNetwork, cfg: NmaConfig
) -> NmaPosterior:
    if cfg.effects == "common":
        return fit_common_effects(posteriors, net, cfg)
    return fit_random_effects(posteriors, net, cfg)


@dataclass
class ProfileResult:
    treatments: list[str]
    effect_draws: dict[str, np.ndarray]  # reference maps to zeros
    optimal_probs: dict[str, float]
    optimal: str
    tie: bool


def profile_effects(post: NmaPosterior, x: np.ndarray | list[float]) -> ProfileResult:
    """Posterior of psi_g' [1, x] per treatment and the per-draw optimal arm.

    The reference treatment's effect is identically zero.  Argmax ties break
    to the lowest treatment index and raise the tie flag.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (post.q,):
        raise ProfileError(f"profile must have {post.q} entries, got {x.shape}")
    x_full = np.concatenate([[1.0], x])
    draws = post.psi_draws
    s = draws.shape[0]
    effects = {post.treatments[0]: np.zeros(s)}
    for gi, t in enumerate(post.treatments[1:]):
        block = draws[:, gi * (post.q + 1) : (gi + 1) * (post.q + 1)]
        effects[t] = block @ x_full
    stacked = np.column_stack([effects[t] for t in post.treatments])
    best = np.argmax(stacked, axis=1)
    n_best = np.sum(stacked == stacked[np.arange(s), best][:, None], axis=1)
    tie = bool(np.any(n_best > 1))
    probs = {t: float(np.mean(best == i)) for i, t in enumerate(post.treatments)}
    optimal = post.treatments[int(np.bincount(best, minlength=len(post.treatments)).argmax())]
    return ProfileResult(
        treatments=list(post.treatments),
        effect_draws=effects,
        optimal_probs=probs,
        optimal=optimal,
        tie=tie,
    )
