#!/usr/bin/env python3
"""Capture real HTTP-service responses as fixtures for the frontend tests.

Builds a three-treatment model whose two non-reference effects are strongly
correlated (a direct 2-vs-3 comparison), so their individual credible
intervals overlap while the 3-vs-2 contrast excludes zero — the demo case
the contrast endpoint exists for.  Writes the model artifact and captured
JSON bodies under frontend/tests/fixtures/.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from itrnma import io as iolib
from itrnma.bbdwols import BlipPosterior
from itrnma.netmap import TreatmentNetwork
from itrnma.nma import NmaConfig, fit_common_effects
from itrnma.server import create_app

OUT = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def build_model(path: Path) -> None:
    net = TreatmentNetwork(
        treatments=["1", "2", "3"],
        study_arms={"s1": ["1", "2"], "s2": ["1", "3"], "s3": ["2", "3"]},
        q=1,
    )
    rng = np.random.default_rng(2026)

    def blip(study_id, arms, point, sd):
        d = len(point)
        cov = np.diag(np.full(d, sd**2))
        return BlipPosterior(
            study_id=study_id,
            draws=np.asarray(point)[None, :],
            point=np.asarray(point, dtype=float),
            cov=cov,
            labels=[f"delta[{t} vs {arms[0]}, q={q}]" for t in arms[1:] for q in (0, 1)],
            arm_treatments=list(arms),
            q=1,
        )

    posts = [
        # noisy absolute evidence for each effect...
        blip("s1", ["1", "2"], [1.00, 0.60], sd=0.45),
        blip("s2", ["1", "3"], [1.30, 0.10], sd=0.45),
        # ...but a precise direct 2-vs-3 comparison
        blip("s3", ["2", "3"], [0.30, -0.50], sd=0.07),
    ]
    cfg = NmaConfig(effects="common", chains=4, iters=2500, warmup=500, seed=404)
    fit = fit_common_effects(posts, net, cfg)
    iolib.save_nma_posterior(fit, path)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    model_path = OUT / "model_artifact.json"
    build_model(model_path)
    client = TestClient(create_app(model_path))

    captures = {
        "model.json": ("GET", "/model", None),
        "summary.json": ("GET", "/summary", None),
        "health.json": ("GET", "/health", None),
        "profile_zero.json": ("POST", "/profile", {"covariates": {"x1": 0.0}}),
        "profile_low.json": ("POST", "/profile", {"covariates": {"x1": 1.0}}),
        "profile_high.json": ("POST", "/profile", {"covariates": {"x1": 1.5}}),
        "contrast_32.json": ("POST", "/contrast", {"g": "3", "g_prime": "2", "q": 0}),
        "contrast_21.json": ("POST", "/contrast", {"g": "2", "g_prime": "1", "q": 0}),
    }
    for name, (method, url, body) in captures.items():
        r = client.get(url) if method == "GET" else client.post(url, json=body)
        r.raise_for_status()
        (OUT / name).write_text(json.dumps(r.json(), sort_keys=True, indent=2) + "\n")
        print(f"wrote {name}")

    # sanity: the demo property must hold in the captured fixtures
    p0 = json.loads((OUT / "profile_zero.json").read_text())
    e2, e3 = p0["effects"]["2"], p0["effects"]["3"]
    overlap = e2["q025"] <= e3["q975"] and e3["q025"] <= e2["q975"]
    c = json.loads((OUT / "contrast_32.json").read_text())
    assert overlap, "fixture CrIs do not overlap"
    assert c["excludes_zero"], "fixture contrast does not exclude zero"
    print("fixture property holds: overlapping CrIs, contrast excludes zero")


if __name__ == "__main__":
    main()
