"""Train the small classifier shipped in ``src/jacobound/data``.

Four Gaussian classes in 8 dimensions, an 8-16-16-4 relu network, full-batch
gradient descent on softmax cross-entropy. Deterministic for a given seed.

    python scripts/make_fixture.py [--seed 0] [--out src/jacobound/data]
"""

import argparse
import json
from pathlib import Path

import numpy as np

from jacobound import Layer, Network, RELU, forward, save_network


def make_data(rng, n_per_class=200, dim=8, classes=4, spread=0.6):
    means = rng.standard_normal((classes, dim))
    X = np.concatenate([m + spread * rng.standard_normal((n_per_class, dim)) for m in means])
    y = np.repeat(np.arange(classes), n_per_class)
    return X, y


def train(X, y, widths, rng, steps=3000, lr=0.05):
    ws = [rng.standard_normal((o, i)) * np.sqrt(2.0 / i) for i, o in zip(widths[:-1], widths[1:])]
    bs = [np.zeros(o) for o in widths[1:]]
    Y = np.eye(widths[-1])[y]
    for _ in range(steps):
        hs, zs = [X], []
        for l, (w, b) in enumerate(zip(ws, bs)):
            z = hs[-1] @ w.T + b
            zs.append(z)
            hs.append(np.maximum(z, 0.0) if l < len(ws) - 1 else z)
        logits = hs[-1] - hs[-1].max(axis=1, keepdims=True)
        prob = np.exp(logits)
        prob /= prob.sum(axis=1, keepdims=True)
        delta = (prob - Y) / len(X)
        for l in range(len(ws) - 1, -1, -1):
            gw, gb = delta.T @ hs[l], delta.sum(axis=0)
            if l:
                delta = (delta @ ws[l]) * (zs[l - 1] > 0)
            ws[l] -= lr * gw
            bs[l] -= lr * gb
    return ws, bs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src" / "jacobound" / "data"))
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    X, y = make_data(rng)
    Xt, yt = make_data(np.random.default_rng(args.seed), n_per_class=20)
    Xt += 0.3 * rng.standard_normal(Xt.shape)
    ws, bs = train(X, y, [8, 16, 16, 4], rng)
    net = Network([Layer(w, b, RELU if l < len(ws) - 1 else None) for l, (w, b) in enumerate(zip(ws, bs))])

    acc = float((forward(net, X)[0].argmax(axis=1) == y).mean())
    pred = forward(net, Xt)[0].argmax(axis=1)
    keep = np.flatnonzero(pred == yt)
    picks = rng.choice(keep, size=10, replace=False)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_network(net, out / "fixture_model.json")
    inputs = [{"x": Xt[i].round(6).tolist(), "label": int(yt[i])} for i in sorted(picks)]
    (out / "fixture_inputs.json").write_text(json.dumps(inputs, indent=1) + "\n")
    print(f"train accuracy {acc:.3f}, test accuracy {(pred == yt).mean():.3f}, wrote {out}")


if __name__ == "__main__":
    main()
