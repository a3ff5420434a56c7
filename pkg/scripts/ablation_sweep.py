"""Source-ratio, neighbor-count and round ablations on a synthetic workload.

Writes one CSV per ablation axis into --out (default: results/ablations).
"""
import argparse
import json
import subprocess
import sys
import tempfile
from pathlib import Path

AXES = {
    "ratio": {"ratio": [0.1, 0.3, 0.5, 0.7, 1.0]},
    "neighbors": {"m": [1, 2, 5, 10, 20]},
    "rounds": {"rounds": [0, 1, 2, 3]},
    "signal": {"signal": ["decay", "enhanced", "evicted"]},
    "similarity": {"similarity": ["key_key", "key_value", "value_value"]},
}


def graphkv(*argv):
    return subprocess.run([sys.executable, "-m", "graphkv", *map(str, argv)],
                          check=True, capture_output=True, text=True).stdout


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--budget", type=int, default=10)
    ap.add_argument("--out", default="results/ablations")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        manifest = graphkv("synth", "--seed", args.seed, "--focus", "0.8,0.05,0.05,0.05,0.05",
                           "--out", Path(tmp) / "wl").strip()
        for axis, grid in AXES.items():
            cfg = {"manifest": manifest, "budget": args.budget, "neighbors": {"fixed": 5},
                   "scorer": {"kind": "window", "window": 32}, "grid": grid}
            path = Path(tmp) / f"{axis}.json"
            path.write_text(json.dumps(cfg))
            graphkv("sweep", "--config", path, "--out", out / f"{axis}.csv")
            print(f"--- {axis}")
            print((out / f"{axis}.csv").read_text(), end="")


if __name__ == "__main__":
    main()
