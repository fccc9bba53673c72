"""Anti-cheat classifier: normalized 51-dim shot features -> 2 x 512 ReLU -> 2 logits."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .core import FEATURE_DIM, FeatureSet, Normalizer, fit_normalizer
from .nn import Adam, Mlp, inverse_prior_weights, load_mlp, save_mlp, weighted_cross_entropy


@dataclass(frozen=True)
class DetectorConfig:
    hidden: int = 512
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    l2: float = 0.01
    val_fraction: float = 0.1

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class DetectorModel:
    normalizer: Normalizer
    net: Mlp
    manifest: dict

    def logits(self, features: FeatureSet) -> np.ndarray:
        return self.net.forward(self.normalizer.apply(features.x, features.is_hit))

    def score(self, features: FeatureSet) -> np.ndarray:
        """logit(cheat) - logit(bona fide); positive means the argmax class is cheat."""
        out = self.logits(features)
        return out[:, 1] - out[:, 0]

    def predict(self, features: FeatureSet) -> np.ndarray:
        return (self.score(features) > 0).astype(np.int64)


def l2_penalty(net: Mlp, weight: float):
    """(weight / 2) * sum of squared weight matrices (biases excluded) and its gradients."""
    loss = 0.0
    grads = []
    for layer in net.layers:
        loss += 0.5 * weight * float(np.sum(layer.weight ** 2))
        grads.extend((weight * layer.weight, np.zeros_like(layer.bias)))
    return loss, grads


def detector_loss_and_grads(net: Mlp, x, y, class_weights, l2: float):
    out, cache = net.forward(x, cache=True)
    ce, g = weighted_cross_entropy(out, y, class_weights)
    grads, _ = net.backward(cache, g)
    reg, rgrads = l2_penalty(net, l2)
    return ce + reg, [a + b for a, b in zip(grads, rgrads)], ce


def train_detector(train: FeatureSet, config: DetectorConfig = DetectorConfig(), seed: int = 0,
                   manifest: dict | None = None, progress=None) -> tuple:
    """Train on ``train``; the last ``val_fraction`` of a seeded shuffle is held out for the
    validation loss. Returns (DetectorModel, log dict)."""
    labels = np.asarray(train.label)
    if len(np.unique(labels)) < 2:
        raise ValueError("detector training data must contain both labels")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(train))
    n_val = int(round(config.val_fraction * len(train)))
    fit_idx, val_idx = order[:len(train) - n_val], order[len(train) - n_val:]
    fit = train.subset(fit_idx)
    if len(np.unique(fit.label)) < 2:
        raise ValueError("training split lost a class; need more data")
    normalizer = fit_normalizer(fit)
    x_fit = normalizer.apply(fit.x, fit.is_hit)
    y_fit = fit.label
    weights = inverse_prior_weights(y_fit)
    val = train.subset(val_idx) if n_val else None
    x_val = normalizer.apply(val.x, val.is_hit) if val is not None else None

    net = Mlp.build([FEATURE_DIM + 1, config.hidden, config.hidden, 2], ["relu", "relu", "linear"], rng,
                    meta={"role": "detector"})
    opt = Adam(lr=config.learning_rate)
    log = {"class_weights": weights.tolist(), "epochs": []}
    bs = config.batch_size
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(len(y_fit))
        ce_sum = 0.0
        for start in range(0, len(perm), bs):
            idx = perm[start:start + bs]
            loss, grads, ce = detector_loss_and_grads(net, x_fit[idx], y_fit[idx], weights, config.l2)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite detector loss (seed={seed}, epoch={epoch})")
            opt.step(net.params(), grads)
            ce_sum += ce * len(idx)
        entry = {"epoch": epoch, "train_loss": ce_sum / len(perm)}
        if x_val is not None and len(val):
            entry["val_loss"] = weighted_cross_entropy(net.forward(x_val), val.label, weights)[0]
        log["epochs"].append(entry)
        if progress:
            progress(entry)
    model = DetectorModel(normalizer, net, dict(manifest or {}))
    final = log["epochs"][-1]
    log["final_train_loss"] = weighted_cross_entropy(net.forward(x_fit), y_fit, weights)[0]
    log["final_val_loss"] = final.get("val_loss")
    return model, log


def save_detector(model: DetectorModel, stem, config: DetectorConfig | None = None, log: dict | None = None) -> None:
    stem = Path(stem)
    save_mlp(model.net, stem.with_suffix(".ckpt"))
    sidecar = {"normalizer": model.normalizer.to_json(), "manifest": model.manifest,
               "config": asdict(config) if config else None, "log": log}
    stem.with_suffix(".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True) + "\n")


def load_detector(stem) -> DetectorModel:
    stem = Path(stem)
    sidecar = json.loads(stem.with_suffix(".json").read_text())
    return DetectorModel(Normalizer.from_json(sidecar["normalizer"]), load_mlp(stem.with_suffix(".ckpt")),
                         sidecar["manifest"])
