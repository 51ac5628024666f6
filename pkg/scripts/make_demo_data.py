#!/usr/bin/env python3
"""Generate the bundled demo dataset and run configuration.

Writes three synthetic studies (two comparing treatments 1 vs 2, one
comparing 1 vs 3) plus a ready-to-run config under data/demo/.  Regenerate
with:  python3 scripts/make_demo_data.py
"""

from __future__ import annotations

from pathlib import Path

from itrnma import io as iolib
from itrnma.core import ARM_TERM
from itrnma.simlab import DgmSpec, simulate_network

OUT = Path(__file__).resolve().parent.parent / "data" / "demo"

STUDIES = {"s1": ["1", "2"], "s2": ["1", "2"], "s3": ["1", "3"]}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    spec = DgmSpec(n_per_study=300)
    datasets, _ = simulate_network(spec, rep_seed=20260823)
    kept = [d for d in datasets if d.study_id in STUDIES]
    for d in kept:
        iolib.write_csv(d, OUT / f"{d.study_id}.csv")
    config = {
        "covariates": [{"name": "x1"}, {"name": "x2"}],
        "roles": {
            "reference_terms": ["x1", "x2", "x1^2"],
            "blip_terms": ["x1"],
            "treatment_terms": ["x1", "x2"],
            "missingness_terms": ["x1", ARM_TERM],
        },
        "studies": [
            {"study_id": sid, "path": f"{sid}.csv", "arms": arms}
            for sid, arms in STUDIES.items()
        ],
        "network": {"treatments": ["1", "2", "3"], "n_effect_modifiers": 1},
        "stage_one": {"n_iterations": 1999, "seed": 1},
        "nma": {"effects": "common", "iters": 2000, "warmup": 1000, "seed": 1},
    }
    iolib.dump_json(config, OUT / "run.json")
    print(f"wrote {len(kept)} studies and run.json to {OUT}")


if __name__ == "__main__":
    main()
