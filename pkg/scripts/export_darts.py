"""Export the eight Darts benchmark series to CSV plus a bench config.

Needs the optional ``darts`` package (not a dependency of this repo):

    pip install darts
    python scripts/export_darts.py --out data/darts
    llmtime-bench run --config data/darts/config.json
"""
import argparse
import json
from pathlib import Path

NAMES = [
    "AirPassengersDataset", "AusBeerDataset", "GasRateCO2Dataset", "MonthlyMilkDataset",
    "SunspotsDataset", "WineDataset", "WoolyDataset", "HeartRateDataset",
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/darts")
    ap.add_argument("--models", default="arima,llmtime")
    args = ap.parse_args()

    import darts.datasets as dd

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in NAMES:
        series = getattr(dd, name)().load()
        df = series.pd_dataframe() if hasattr(series, "pd_dataframe") else series.to_dataframe()
        column = df.columns[0]
        frame = df[[column]].reset_index(drop=True)
        frame.columns = ["value"]
        path = out / f"{name.removesuffix('Dataset')}.csv"
        frame.to_csv(path, index_label="t")
        entries.append({"name": name.removesuffix("Dataset"), "path": path.name,
                        "value_column": "value", "time_column": "t",
                        "missing_policy": "forward_fill"})
        print(f"wrote {path} ({len(frame)} rows)")
    config = {
        "models": args.models.split(","),
        "datasets": entries,
        "output_dir": "results",
        "cache_dir": "completion_cache",
        "llmtime": {"provider": {"kind": "http"}},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
