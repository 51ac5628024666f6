"""MCMC convergence diagnostics: rank-normalized split R-hat and bulk ESS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

ZERO_VAR_TOL = 1e-12


@dataclass
class ParamDiagnostics:
    rhat: float
    ess: float
    zero_variance: bool = False


def _split_chains(draws: np.ndarray) -> np.ndarray:
    """(chains, n) -> (2*chains, n//2), dropping an odd trailing draw."""
    m, n = draws.shape
    half = n // 2
    return np.vstack([draws[:, :half], draws[:, half : 2 * half]])


def _rank_normalize(draws: np.ndarray) -> np.ndarray:
    flat = draws.reshape(-1)
    ranks = stats.rankdata(flat, method="average")
    z = stats.norm.ppf((ranks - 3.0 / 8.0) / (flat.size + 1.0 / 4.0))
    return z.reshape(draws.shape)


def _rhat_from(z: np.ndarray) -> float:
    m, n = z.shape
    chain_means = z.mean(axis=1)
    b = n * np.var(chain_means, ddof=1)
    w = np.mean(np.var(z, axis=1, ddof=1))
    if w < ZERO_VAR_TOL:
        return 1.0
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocov_fft(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of one chain via FFT."""
    n = x.size
    xc = x - x.mean()
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n].real / n
    return acov


def _ess_from(z: np.ndarray) -> float:
    """Bulk ESS via Geyer's initial monotone positive sequence."""
    m, n = z.shape
    if n < 4:
        return float(m * n)
    acovs = np.array([_autocov_fft(z[c]) for c in range(m)])
    mean_acov = acovs.mean(axis=0)
    w = np.mean(np.var(z, axis=1, ddof=1))
    var_plus = (n - 1) / n * w + np.var(z.mean(axis=1), ddof=1)
    if var_plus < ZERO_VAR_TOL:
        return float(m * n)
    rho = 1.0 - (w - mean_acov) / var_plus
    # pair sums; truncate at first negative pair, enforce monotonicity
    max_t = n // 2
    pair_sums = []
    for t in range(max_t):
        s = rho[2 * t] + (rho[2 * t + 1] if 2 * t + 1 < n else 0.0)
        if s < 0:
            break
        pair_sums.append(s)
    for t in range(1, len(pair_sums)):
        pair_sums[t] = min(pair_sums[t], pair_sums[t - 1])
    tau = -1.0 + 2.0 * sum(pair_sums)
    tau = max(tau, 1.0 / np.log10(m * n + 10))
    return float(m * n / tau)


def diagnose_parameter(draws_by_chain: np.ndarray) -> ParamDiagnostics:
    """Diagnostics for one scalar parameter from a (chains, n) draw array."""
    draws = np.atleast_2d(np.asarray(draws_by_chain, dtype=float))
    if draws.shape[0] < 2 or draws.shape[1] < 4:
        raise ValueError("need >= 2 chains with >= 4 draws each")
    if np.var(draws) < ZERO_VAR_TOL:
        return ParamDiagnostics(rhat=1.0, ess=float(draws.size), zero_variance=True)
    z = _rank_normalize(_split_chains(draws))
    return ParamDiagnostics(rhat=_rhat_from(z), ess=_ess_from(z))


def diagnose(draws_by_chain: np.ndarray) -> list[ParamDiagnostics]:
    """Per-parameter diagnostics from a (chains, n, n_params) array."""
    arr = np.asarray(draws_by_chain, dtype=float)
    return [diagnose_parameter(arr[:, :, j]) for j in range(arr.shape[2])]
