"""Regenerate tests/fixtures/tuning_cache and tuning_expected.json.

The fixture records, through the replay cache, every completion the scaling
tuner asks for when scoring a small grid with the offline mock provider.
Tests then replay it with no live provider attached.

    python scripts/make_tuning_fixture.py
"""
import json
import shutil
from dataclasses import asdict
from pathlib import Path

import numpy as np

from llmtime_bench import codec, forecaster, llm, synth

ROOT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"
CACHE = ROOT / "tuning_cache"

SERIES = {"pattern": [10.0, 12.0, 15.0, 11.0], "repeats": 30, "noise_sigma": 0.05,
          "noise_seed": 7, "n_train": 100, "n_validation": 12}
GRID = [codec.ScalingConfig(a, b, 1) for a in (0.9, 0.99) for b in (0.0, 0.3)]
NUM_SAMPLES = 1


def fixture_series(spec=SERIES):
    base = np.tile(spec["pattern"], spec["repeats"])
    x = base + spec["noise_sigma"] * synth.standard_normals(spec["noise_seed"], base.size)
    n, v = spec["n_train"], spec["n_validation"]
    return x[:n], x[n:n + v]


def main():
    if CACHE.exists():
        shutil.rmtree(CACHE)
    train, validation = fixture_series()
    provider = llm.CachingProvider(llm.MockProvider(), CACHE)
    config = forecaster.LlmtimeConfig(num_samples=NUM_SAMPLES)
    scorer = forecaster.mae_scorer(provider, config)
    scores = {f"{c.alpha},{c.beta}": scorer(train, validation, c) for c in GRID}
    best = codec.tune_scaling(train, validation, GRID, scorer)
    doc = {
        "series": SERIES,
        "num_samples": NUM_SAMPLES,
        "grid": [asdict(c) for c in GRID],
        "scores": scores,
        "argmax": asdict(best),
    }
    (ROOT / "tuning_expected.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(json.dumps(doc, indent=2))


if __name__ == "__main__":
    main()
