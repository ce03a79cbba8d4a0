"""How much does the social-media channel help as its share of the night signal grows?

    python3 scripts/sm_share_sweep.py --shares 0 0.15 0.3 0.5 --steps 800

For each share, trains rgbi and rgbism on the same synthetic tiles and prints
the held-out D_eu gap.
"""
from __future__ import annotations

import argparse
import tempfile

import numpy as np

from ntlgen.geo.dataset import load_examples
from ntlgen.metrics import d_eu
from ntlgen.model import ScenarioConfig, TrainConfig, predict, train
from ntlgen.synthetic import SceneParams, generate_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shares", type=float, nargs="+", default=[0.0, 0.3])
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--steps", type=int, default=800)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for share in args.shares:
        with tempfile.TemporaryDirectory() as tmp:
            generate_dataset(tmp, args.n, SceneParams(size=64, sm_signal_share=share), seed=args.seed)
            scores = {}
            for name in ("rgbi", "rgbism"):
                sc = ScenarioConfig.from_name(name)
                res = train(load_examples(tmp, sc, "train"), sc, TrainConfig(steps=args.steps, seed=args.seed, log_every=0))
                va = load_examples(tmp, sc, "validation")
                scores[name] = float(np.mean([d_eu(p, e.target[0]) for p, e in zip(predict(res.model, va), va)]))
        gap = scores["rgbi"] - scores["rgbism"]
        print(f"share {share:.2f}  d_eu rgbi {scores['rgbi']:.3f}  rgbism {scores['rgbism']:.3f}  gap {gap:+.3f}", flush=True)


if __name__ == "__main__":
    main()
