"""HTTP service exposing a fitted NMA posterior for what-if profile queries.

The loaded posterior is immutable; requests are read-only and reloading swaps
the whole snapshot atomically.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import io as iolib
from .errors import MappingError
from .netmap import TreatmentNetwork, consistency_contrast
from .nma import NmaPosterior, profile_effects

MAX_DENSITY_DRAWS = 2000


class ProfileRequest(BaseModel):
    covariates: dict[str, float]


class ContrastRequest(BaseModel):
    g: str
    g_prime: str
    q: int = 0


class ModelSnapshot:
    def __init__(self, posterior: NmaPosterior, modifiers: list[dict], raw: dict):
        self.posterior = posterior
        self.modifiers = modifiers
        self.raw = raw
        self.network = TreatmentNetwork(
            treatments=list(posterior.treatments),
            study_arms={"__all__": list(posterior.treatments)},
            q=posterior.q,
        )


def _default_modifiers(q: int) -> list[dict]:
    return [
        {"name": f"x{i + 1}", "kind": "continuous", "min": -3.0, "max": 3.0}
        for i in range(q)
    ]


def load_snapshot(model_path: str | Path) -> ModelSnapshot:
    raw = iolib.load_json(model_path)
    posterior = NmaPosterior.from_dict(raw)
    modifiers = raw.get("modifiers") or _default_modifiers(posterior.q)
    if len(modifiers) != posterior.q:
        raise ValueError("modifier schema does not match the model's Q")
    return ModelSnapshot(posterior, modifiers, raw)


def _thin(draws: np.ndarray) -> list[float]:
    if draws.size <= MAX_DENSITY_DRAWS:
        return draws.tolist()
    idx = np.linspace(0, draws.size - 1, MAX_DENSITY_DRAWS).astype(int)
    return draws[idx].tolist()


def create_app(model_path: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="itrnma what-if service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.snapshot = load_snapshot(model_path) if model_path else None

    def snapshot() -> ModelSnapshot:
        snap = app.state.snapshot
        if snap is None:
            raise HTTPException(status_code=503, detail="no model loaded")
        return snap

    @app.get("/health")
    def health():
        return {"status": "ok", "model_loaded": app.state.snapshot is not None}

    @app.get("/model")
    def model():
        snap = snapshot()
        post = snap.posterior
        return {
            "treatments": post.treatments,
            "reference": post.treatments[0],
            "n_effect_modifiers": post.q,
            "modifiers": snap.modifiers,
            "config": post.config.to_dict(),
            "converged": post.converged,
        }

    @app.get("/summary")
    def summary():
        snap = snapshot()
        return {
            "summaries": snap.posterior.summaries(),
            "forest": iolib.forest_plot_rows(snap.posterior),
        }

    @app.post("/profile")
    def profile(req: ProfileRequest):
        snap = snapshot()
        names = [m["name"] for m in snap.modifiers]
        unknown = set(req.covariates) - set(names)
        if unknown:
            raise HTTPException(status_code=422, detail=f"unknown covariates {sorted(unknown)}")
        missing = set(names) - set(req.covariates)
        if missing:
            raise HTTPException(status_code=422, detail=f"missing covariates {sorted(missing)}")
        x = np.array([float(req.covariates[n]) for n in names])
        result = profile_effects(snap.posterior, x)
        return {
            "treatments": result.treatments,
            "reference": result.treatments[0],
            "effects": {
                t: {
                    "mean": float(d.mean()),
                    "q025": float(np.quantile(d, 0.025)),
                    "q975": float(np.quantile(d, 0.975)),
                    "samples": _thin(d),
                }
                for t, d in result.effect_draws.items()
            },
            "optimal": result.optimal,
            "optimal_probs": result.optimal_probs,
            "tie": result.tie,
        }

    @app.post("/contrast")
    def contrast(req: ContrastRequest):
        snap = snapshot()
        post = snap.posterior
        if not 0 <= req.q <= post.q:
            raise HTTPException(status_code=422, detail=f"q must be in 0..{post.q}")
        try:
            draws = consistency_contrast(
                post.psi_draws, snap.network, req.g, req.g_prime, req.q
            )
        except MappingError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        lo, hi = float(np.quantile(draws, 0.025)), float(np.quantile(draws, 0.975))
        return {
            "g": req.g,
            "g_prime": req.g_prime,
            "q": req.q,
            "mean": float(draws.mean()),
            "q025": lo,
            "q975": hi,
            "excludes_zero": bool(lo > 0 or hi < 0),
            "samples": _thin(draws),
        }

    return app
