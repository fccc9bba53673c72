"""Acceptance checks shared by ``aimlab evaluate`` (embedded verdict) and the test suite.

Each check returns a ``Check`` with a pass flag and the measured numbers. Criteria 1 to 3
are self-contained; 4 to 7 read a finished report dict; 8 needs two pipeline runs and is
checked by the test suite only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import FEATURE_DIM
from .detector import detector_loss_and_grads
from .gan import GanConfig, build_pair, critic_loss_and_grads, generator_loss_and_grads
from .heuristic import LIGHT, STRONG, heuristic_step
from .metrics import DcfParams, balanced_accuracy, det_points, eer, min_dcf
from .nn import Mlp, gradient_check, inverse_prior_weights

CALIBRATION_BANDS = {
    "step_corr_yaw": (0.60, 0.85),
    "avg_abs_pitch": (0.08, 0.25),
    "axis_corr": (0.30, 0.50),
}


@dataclass
class Check:
    id: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"criterion {self.id} [{'PASS' if self.passed else 'FAIL'}] {self.name}"

    def to_json(self) -> dict:
        return {"id": self.id, "name": self.name, "passed": bool(self.passed), "detail": self.detail}


# ---------------------------------------------------------------------------
# 1. gradients


def _small_gan(rng):
    cfg = GanConfig(gen_hidden=16, disc_hidden=24)
    pair = build_pair(cfg, rng, condition_scale=rng.uniform(0.5, 2.0, cfg.condition_dim),
                      steps_scale=rng.uniform(0.5, 2.0, cfg.steps_dim))
    # unclipped weights give gradients well above finite-difference round-off
    for p in pair.discriminator.params():
        p[...] = rng.normal(0.0, 0.3, p.shape)
    n = 6
    cond = rng.normal(0.0, 1.0, (n, cfg.condition_dim))
    z = rng.standard_normal((n, cfg.latent_dim_k))
    real = rng.normal(0.0, 1.0, (n, cfg.steps_dim))
    fake = rng.normal(0.0, 1.0, (n, cfg.steps_dim))
    return pair, cond, z, real, fake


def gradient_errors(probes: int = 100, seed: int = 0, h: float = 1e-4) -> dict:
    """Max relative analytic-vs-central-difference error for generator, critic and detector."""
    rng = np.random.default_rng(seed)
    pair, cond, z, real, fake = _small_gan(rng)
    target = rng.normal(0.0, 3.0, (len(cond), 2))

    def gen_loss(model):
        pair.generator = model
        loss, grads, _, _ = generator_loss_and_grads(pair, z, cond, target, 1.0)
        return loss, grads

    def critic_loss(model):
        pair.discriminator = model
        return critic_loss_and_grads(pair, real, fake, cond)

    det = Mlp.build([FEATURE_DIM + 1, 24, 24, 2], ["relu", "relu", "linear"], rng)
    x = rng.normal(0.0, 1.0, (12, FEATURE_DIM + 1))
    y = np.array([0, 1] * 6)
    w = inverse_prior_weights(np.array([0, 0, 0, 1]))

    def det_loss(model):
        loss, grads, _ = detector_loss_and_grads(model, x, y, w, 0.01)
        return loss, grads

    return {
        "generator": gradient_check(pair.generator, gen_loss, probes, rng, h),
        "discriminator": gradient_check(pair.discriminator, critic_loss, probes, rng, h),
        "detector": gradient_check(det, det_loss, probes, rng, h),
    }


def check_gradients(probes: int = 100, seed: int = 0) -> Check:
    errs = gradient_errors(probes, seed)
    return Check(1, "gradient oracle", all(e < 1e-4 for e in errs.values()),
                 {"max_rel_error": errs, "probes": probes})


# ---------------------------------------------------------------------------
# 2. metrics against brute force


def brute_rates(scores, labels, thr):
    flagged = scores >= thr
    pos, neg = labels == 1, labels == 0
    return float(np.mean(flagged[neg])), float(np.mean(~flagged[pos]))


def brute_force(scores, labels, p: float = 0.5) -> dict:
    """Enumerate every candidate threshold directly (no sorting tricks)."""
    cands = sorted(set(scores.tolist())) + [np.inf]
    pts = [brute_rates(scores, labels, t) for t in [-np.inf] + cands]
    a, b = p, 1.0 - p
    # the FPR = FNR crossing lies between the last point with FPR > FNR and the next one
    i = next(j for j, (f, m) in enumerate(pts) if f <= m)
    (f0, m0), (f1, m1) = pts[i - 1], pts[i]
    return {
        "points": pts,
        "minmax": min(max(f, m) for f, m in pts),
        "eer_bracket": (max(f1, m0), min(f0, m1)),
        "min_dcf": min(a * m + b * f for f, m in pts) / min(a, b),
    }


def metric_errors(sets: int = 50, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    worst = {"det_points": 0.0, "eer": 0.0, "min_dcf": 0.0, "balanced_accuracy": 0.0}
    slack_ok = True
    for _ in range(sets):
        n = int(rng.integers(4, 1001))
        labels = rng.integers(0, 2, n)
        labels[:2] = (0, 1)
        shift = rng.uniform(0.0, 3.0)
        scores = rng.normal(0.0, 1.0, n) + shift * labels
        if rng.random() < 0.3:
            scores = np.round(scores, 1)  # ties
        bf = brute_force(scores, labels, p=0.25)
        _, fpr, fnr = det_points(scores, labels)
        worst["det_points"] = max(worst["det_points"],
                                  max(abs(f - g) + abs(m - k) for (f, m), g, k in zip(bf["points"], fpr, fnr)))
        e = eer(scores, labels)
        lo, hi = bf["eer_bracket"]
        worst["eer"] = max(worst["eer"], lo - e, e - hi)
        if len(np.unique(scores)) == n:
            # without ties every staircase step is one sample
            slack = 1.0 / (2 * min(int(labels.sum()), int((1 - labels).sum())))
            slack_ok &= abs(e - bf["minmax"]) <= slack
        worst["min_dcf"] = max(worst["min_dcf"], abs(min_dcf(scores, labels, DcfParams(0.25)) - bf["min_dcf"]))
        pred = (scores > shift / 2).astype(int)
        tp = np.sum((pred == 1) & (labels == 1)) / np.sum(labels == 1)
        tn = np.sum((pred == 0) & (labels == 0)) / np.sum(labels == 0)
        worst["balanced_accuracy"] = max(worst["balanced_accuracy"],
                                         abs(balanced_accuracy(pred, labels) - (tp + tn) / 2))
    constant = min_dcf(np.zeros(10), np.array([0, 1] * 5), DcfParams(0.1))
    return {"worst": worst, "eer_within_slack": bool(slack_ok), "uninformative_min_dcf": constant}


def check_metrics(sets: int = 50, seed: int = 0) -> Check:
    r = metric_errors(sets, seed)
    w = r["worst"]
    ok = (w["det_points"] < 1e-12 and w["eer"] < 1e-12 and r["eer_within_slack"] and w["min_dcf"] < 1e-12
          and w["balanced_accuracy"] < 1e-12 and r["uninformative_min_dcf"] == 1.0)
    return Check(2, "metric oracles", ok, r)


# ---------------------------------------------------------------------------
# 3. heuristic arithmetic


def check_heuristic() -> Check:
    out = heuristic_step((10.0, 0.0), STRONG, None)
    boundary = {}
    for params, r in ((LIGHT, 5.0), (STRONG, 15.0)):
        for sy, sp in itertools.product((-1, 1), (-1, 1)):
            inside = heuristic_step((sy * r, sp * r), params, None) is not None
            outside = heuristic_step((sy * np.nextafter(r, np.inf), 0.0), params, None) is None
            boundary[f"{r:g}:{sy:+d}{sp:+d}"] = inside and outside
    ok = out == (6.0, 0.0) and all(boundary.values())
    return Check(3, "heuristic arithmetic", ok, {"strong_at_10_0": list(out) if out else None,
                                                 "boundaries_honored": all(boundary.values())})


# ---------------------------------------------------------------------------
# 4 to 7 from a report


def check_performance(report: dict, margin: float = 0.05) -> Check:
    acc = {k: v["mean"] for k, v in report["accuracy"].items()}
    ok = (acc["none"] + margin <= acc["light"] <= acc["strong"]) and acc["gan"] >= acc["none"] + margin
    return Check(4, "performance uplift", ok, {"accuracy": acc, "margin": margin})


def _row(report, scenario, aimbot):
    for r in report["scenarios"]:
        if r["scenario"] == scenario and r["aimbot"] == aimbot:
            return r
    return None


def check_detectability(report: dict, gap: float = 0.05) -> Check:
    o = {a: _row(report, "oracle", a) for a in ("light", "strong", "gan1")}
    w = _row(report, "worst-case", "gan1")
    if any(r is None or r.get("absent") for r in o.values()) or w is None or w.get("absent"):
        return Check(5, "detectability gap", False, {"error": "oracle or worst-case rows missing"})
    e = {a: r["eer"] for a, r in o.items()}
    ok = e["strong"] < e["light"] < e["gan1"] and e["gan1"] - e["strong"] >= gap and w["eer"] > e["gan1"]
    return Check(5, "detectability gap", ok, {"oracle_eer": e, "worst_case_eer_gan1": w["eer"]})


def check_aggregation(report: dict, target: float = 0.05, at_n: int = 10) -> Check:
    curves = report["aggregation"]["curves"]
    detail = {}
    ok = True
    for a in ("light", "strong"):
        pt = next((p for p in curves[a] if p["n"] == at_n), None)
        reach = pt is not None and pt["mean_eer"] is not None and pt["mean_eer"] <= target
        detail[f"{a}_eer_at_{at_n}"] = None if pt is None else pt["mean_eer"]
        ok &= reach
    above = True
    for i, pg in enumerate(curves["gan1"]):
        if pg["n"] > 30:
            continue
        hs = [curves[a][i]["mean_eer"] for a in ("light", "strong")]
        if pg["mean_eer"] is None or any(h is None for h in hs) or pg["mean_eer"] <= max(hs):
            above = False
    detail["gan_above_heuristic"] = above
    mono = True
    for a, pts in curves.items():
        best = None
        for p in pts:
            if p["mean_eer"] is None:
                continue
            if best is not None and p["mean_eer"] > best + p["std_eer"]:
                mono = False
            best = p["mean_eer"] if best is None else min(best, p["mean_eer"])
    detail["non_increasing_within_std"] = mono
    return Check(6, "aggregation curve", ok and above and mono, detail)


def calibration(stats: dict) -> dict:
    return {k: {"value": stats[k], "band": list(b), "passed": b[0] <= stats[k] <= b[1]}
            for k, b in CALIBRATION_BANDS.items()}


def check_movement(report: dict) -> Check:
    m = report["movement"]
    detail = {f"{k}_step_corr_pitch": m[k]["step_corr_pitch"] for k in ("human", "light", "strong", "gan1", "gan2")}
    heur = all(abs(m[k]["step_corr_pitch"]) < 0.15 for k in ("light", "strong"))
    human = all(m[k]["step_corr_pitch"] > 0.4 for k in ("human", "gan1", "gan2"))
    cal = calibration(m["human"])
    detail["calibration"] = cal
    return Check(7, "movement signature", heur and human and all(c["passed"] for c in cal.values()), detail)


def report_checks(report: dict, include_static: bool = True) -> list:
    checks = []
    if include_static:
        checks += [check_gradients(), check_metrics(), check_heuristic()]
    checks += [check_performance(report), check_detectability(report), check_aggregation(report),
               check_movement(report)]
    return checks
