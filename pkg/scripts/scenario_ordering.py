"""Train rgb, rgbi and rgbism on one synthetic dataset and compare held-out metrics.

    python3 scripts/scenario_ordering.py --steps 1500 --dataset-seed 7 --seed 1

Writes a JSON summary per scenario to --out (default: stdout only).
"""
from __future__ import annotations

import argparse
import json
import tempfile
import time
from pathlib import Path

import numpy as np

from ntlgen.geo.dataset import load_examples
from ntlgen.metrics import d_eu, d_ma, r_ncc
from ntlgen.model import ScenarioConfig, TrainConfig, build_model, default_specs, predict, train
from ntlgen.synthetic import SceneParams, generate_dataset


def heldout(model, examples) -> dict:
    preds = predict(model, examples)
    pairs = [(p, e.target[0].astype(np.float64)) for p, e in zip(preds, examples)]
    return {
        "l1": float(np.mean([np.abs(p - t).mean() for p, t in pairs])),
        "d_eu": float(np.mean([d_eu(p, t) for p, t in pairs])),
        "d_ma": float(np.mean([d_ma(p, t) for p, t in pairs])),
        "r_ncc": float(np.mean([r_ncc(p, t) for p, t in pairs])),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--dataset-seed", type=int, default=7)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sm-share", type=float, default=0.3)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        generate_dataset(tmp, args.n, SceneParams(size=args.size, sm_signal_share=args.sm_share), seed=args.dataset_seed)
        rows = {}
        for name in ("rgb", "rgbi", "rgbism"):
            sc = ScenarioConfig.from_name(name)
            tr, va = load_examples(tmp, sc, "train"), load_examples(tmp, sc, "validation")
            unet, patchgan = default_specs(sc, args.size)
            config = TrainConfig(steps=args.steps, seed=args.seed, log_every=0)
            before = heldout(build_model(sc, unet, patchgan, args.seed), va)
            t0 = time.perf_counter()
            res = train(tr, sc, config, unet, patchgan)
            rows[name] = {"untrained": before, "trained": heldout(res.model, va), "seconds": time.perf_counter() - t0}
            t = rows[name]["trained"]
            print(f"{name:7s} l1 {before['l1']:.3f}->{t['l1']:.3f}  d_eu {t['d_eu']:.3f}  d_ma {t['d_ma']:.1f}  r_ncc {t['r_ncc']:.4f}", flush=True)

    deu = [rows[k]["trained"]["d_eu"] for k in ("rgbism", "rgbi", "rgb")]
    ncc = [rows[k]["trained"]["r_ncc"] for k in ("rgbism", "rgbi", "rgb")]
    print("ordering d_eu rgbism < rgbi < rgb:", deu[0] < deu[1] < deu[2])
    print("ordering r_ncc rgbism > rgbi > rgb:", ncc[0] > ncc[1] > ncc[2])
    if args.out:
        args.out.write_text(json.dumps({"args": {k: str(v) for k, v in vars(args).items()}, "results": rows}, indent=2) + "\n")


if __name__ == "__main__":
    main()
