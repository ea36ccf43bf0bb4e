"""ARIMA MSE on the almost-periodic signal across noise levels and seeds.

Prints one line per seed and a median row, the data behind a bar chart of
MSE against noise standard deviation.

    python scripts/sigma_sweep.py --seeds 10
"""
import argparse

import numpy as np

from llmtime_bench import synth
from llmtime_bench.core import mse, train_test_split
from llmtime_bench.forecaster import ArimaSettings, arima_forecast


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--max-p", type=int, default=12)
    ap.add_argument("--max-d", type=int, default=0)
    ap.add_argument("--max-q", type=int, default=1)
    args = ap.parse_args()

    sigmas = synth.ALMOST_PERIODIC_SIGMAS
    settings = ArimaSettings(max_p=args.max_p, max_d=args.max_d, max_q=args.max_q)
    table = np.empty((args.seeds, len(sigmas)))
    print("seed  " + "  ".join(f"s={s:<6g}" for s in sigmas))
    for seed in range(args.seeds):
        for j, sigma in enumerate(sigmas):
            series = synth.generate(synth.SynthSpec(sigma=sigma, seed=seed))
            split = train_test_split(series, 100)
            result = arima_forecast(split.train, 100, settings=settings)
            table[seed, j] = mse(result.point, split.test.values)
        print(f"{seed:<4d}  " + "  ".join(f"{v:<8.4f}" for v in table[seed]), flush=True)
    print("med   " + "  ".join(f"{v:<8.4f}" for v in np.median(table, axis=0)))


if __name__ == "__main__":
    main()
