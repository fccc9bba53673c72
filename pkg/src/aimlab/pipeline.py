"""End-to-end pipeline stages behind the CLI: datasets, GAN training, detectors, evaluation.

Every stage reads and writes files under a workspace root and records sha256 digests of
its inputs in a manifest, so a later stage can refuse stale or missing prerequisites.

Seeds. Episode ``i`` of dataset stream ``s`` uses rng seed ``master_seed * 1_000_000 +
STREAMS[s] * 10_000 + i``. Player archetypes are fixed integer ranges per collection (see
``Roster``), so changing the master seed resamples games but keeps the player split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import config_hash, human_params, sim_config
from .core import Controller, FeatureSet, file_digest, make_gan_windows, read_episodes, write_episodes
from .detector import DetectorConfig, load_detector, save_detector, train_detector
from .gan import GanBot, GanConfig, load_pair, save_pair, train_gan
from .heuristic import PRESETS
from .sim import HeuristicBot, archetype_params, run_episode

BASE_DATASETS = ("human_g1", "human_g2", "human", "light", "strong")
GAN_DATASETS = ("human_gc", "gan1", "gan2")
PERF_DATASETS = ("perf_none", "perf_light", "perf_strong", "perf_gan")
GAN_GROUPS = (1, 2)

STREAMS = {"human_g1": 1, "human_g2": 2, "human": 3, "light": 4, "strong": 5,
           "human_gc": 6, "gan1": 7, "gan2": 8, "perf": 9}

# detector name -> (collection, attack datasets in training set)
DETECTORS = {
    "oracle_light": ("heuristic", ("light",)),
    "oracle_strong": ("heuristic", ("strong",)),
    "oracle_gan1": ("gan", ("gan1",)),
    "oracle_gan2": ("gan", ("gan2",)),
    "worst_case": ("heuristic", ("light", "strong")),
    "tot_heuristic": ("heuristic", ("light", "strong")),
    "tot_gan": ("gan", ("gan1", "gan2")),
}
SCENARIO_DETECTORS = {
    "oracle": ("oracle_light", "oracle_strong", "oracle_gan1", "oracle_gan2"),
    "known-attack": ("oracle_light", "oracle_strong", "oracle_gan1", "oracle_gan2"),
    "worst-case": ("worst_case",),
    "train-on-test": ("tot_heuristic", "tot_gan"),
}
AIMBOTS = ("light", "strong", "gan1", "gan2")
AIMBOT_NAMES = {"light": "Light", "strong": "Strong", "gan1": "GanGroup1", "gan2": "GanGroup2"}
BONA_FIDE = {"heuristic": "human", "gan": "human_gc"}
COLLECTION_OF = {"light": "heuristic", "strong": "heuristic", "gan1": "gan", "gan2": "gan"}


class MissingArtifact(RuntimeError):
    """A prerequisite file is absent or was produced from different inputs."""

    def __init__(self, message: str, command: str):
        super().__init__(f"{message}; run `{command}` first")
        self.command = command


class LeakageError(RuntimeError):
    pass


def episode_seed(master_seed: int, stream: str, index: int) -> int:
    return master_seed * 1_000_000 + STREAMS[stream] * 10_000 + index


@dataclass(frozen=True)
class Roster:
    """Archetype seeds (players) of every collection; train and test are disjoint."""

    group_players: dict
    heuristic_train: tuple
    heuristic_test: tuple
    gan_train: tuple
    gan_test: tuple
    performance: tuple

    @classmethod
    def from_config(cls, cfg: dict) -> "Roster":
        r = cfg["roster"]
        groups = {g: tuple(10_000 * g + i for i in range(r["gan_group_players"])) for g in GAN_GROUPS}
        nh = r["heuristic_train_players"]
        heur = tuple(30_000 + i for i in range(nh + r["heuristic_test_players"]))
        ng = r["gan_train_players"]
        gan = tuple(40_000 + i for i in range(ng + r["gan_test_players"]))
        perf = tuple(50_000 + i for i in range(r["performance_players"]))
        return cls(groups, heur[:nh], heur[nh:], gan[:ng], gan[ng:], perf)

    def split(self, collection: str) -> tuple:
        if collection == "heuristic":
            return self.heuristic_train, self.heuristic_test
        return self.gan_train, self.gan_test


class Workspace:
    def __init__(self, cfg: dict, root="."):
        self.cfg = cfg
        self.root = Path(root)
        self.data = self.root / cfg["paths"]["data"]
        self.models = self.root / cfg["paths"]["models"]
        self.reports = self.root / cfg["paths"]["reports"]
        self.roster = Roster.from_config(cfg)
        self.hash = config_hash(cfg)

    def dataset(self, name: str) -> Path:
        return self.data / f"{name}.jsonl"

    def gan_stem(self, group: int) -> Path:
        return self.models / f"gan_g{group}"

    def detector_stem(self, name: str) -> Path:
        return self.models / f"det_{name}"

    def stamp(self) -> dict:
        return {"config_hash": self.hash, "master_seed": self.cfg["master_seed"]}

    # -- manifests ----------------------------------------------------------

    def write_json(self, path: Path, obj) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")

    def data_manifest_path(self) -> Path:
        return self.data / "manifest.json"

    def read_data_manifest(self) -> dict:
        p = self.data_manifest_path()
        return json.loads(p.read_text()) if p.exists() else {"datasets": {}}

    def require_datasets(self, names, command: str) -> dict:
        """Digests of ``names``, checked against the data manifest and the current config."""
        manifest = self.read_data_manifest()
        out = {}
        for name in names:
            path = self.dataset(name)
            entry = manifest["datasets"].get(name)
            if not path.exists() or entry is None:
                raise MissingArtifact(f"dataset {path} is missing", command)
            if entry["config_hash"] != self.hash:
                raise MissingArtifact(f"dataset {path} was built from a different config", command)
            digest = file_digest(path)
            if digest != entry["sha256"]:
                raise MissingArtifact(f"dataset {path} does not match its manifest hash", command)
            out[name] = digest
        return out

    def register_datasets(self, written: dict) -> None:
        manifest = self.read_data_manifest()
        for name, extra in written.items():
            manifest["datasets"][name] = {"sha256": file_digest(self.dataset(name)), **self.stamp(), **extra}
        self.write_json(self.data_manifest_path(), manifest)

    def require_sidecar(self, json_path: Path, command: str) -> dict:
        if not json_path.exists():
            raise MissingArtifact(f"{json_path} is missing", command)
        sidecar = json.loads(json_path.read_text())
        stamp = sidecar.get("manifest", {})
        if stamp.get("config_hash") != self.hash:
            raise MissingArtifact(f"{json_path} was built from a different config", command)
        for name, digest in stamp.get("inputs", {}).items():
            path = self.dataset(name)
            if not path.exists() or file_digest(path) != digest:
                raise MissingArtifact(f"{json_path} was trained on a different {name} dataset", command)
        return sidecar


# ---------------------------------------------------------------------------
# simulation


def _human(cfg: dict, archetype: int):
    return archetype_params(human_params(cfg), archetype, cfg["roster"]["archetype_spread"])


def _episodes(ws: Workspace, stream: str, controller: Controller, players, per_player: int,
              bot=None, seed_stream: str | None = None) -> list:
    master = ws.cfg["master_seed"]
    out = []
    i = 0
    for player in players:
        for _ in range(per_player):
            seed = episode_seed(master, seed_stream or stream, i)
            out.append(run_episode(sim_config(ws.cfg, seed), controller, _human(ws.cfg, player), bot, player))
            i += 1
    return out


def _summary(episodes) -> dict:
    hits = sum(int(e.hit.sum()) for e in episodes)
    shots = sum(int(e.fired.sum()) for e in episodes)
    return {"episodes": len(episodes), "hits": hits, "shots": shots,
            "accuracy": hits / shots if shots else 0.0}


def simulate_base(ws: Workspace, log=print) -> dict:
    """Human GAN-training groups and the heuristic collection (bona fide, light, strong)."""
    ws.data.mkdir(parents=True, exist_ok=True)
    r = ws.cfg["roster"]
    sets = {}
    for g in GAN_GROUPS:
        sets[f"human_g{g}"] = _episodes(ws, f"human_g{g}", Controller.HUMAN, ws.roster.group_players[g],
                                        r["gan_group_episodes"])
    players = ws.roster.heuristic_train + ws.roster.heuristic_test
    sets["human"] = _episodes(ws, "human", Controller.HUMAN, players, r["bona_fide_episodes"])
    sets["light"] = _episodes(ws, "light", Controller.LIGHT, players, 1, HeuristicBot(PRESETS["light"]))
    sets["strong"] = _episodes(ws, "strong", Controller.STRONG, players, 1, HeuristicBot(PRESETS["strong"]))
    return _write_sets(ws, sets, log)


def simulate_gan(ws: Workspace, log=print) -> dict:
    """GAN collection (bona fide, GanGroup1, GanGroup2) and the paired performance set."""
    pairs = {g: load_gan(ws, g) for g in GAN_GROUPS}
    r = ws.cfg["roster"]
    players = ws.roster.gan_train + ws.roster.gan_test
    sets = {
        "human_gc": _episodes(ws, "human_gc", Controller.HUMAN, players, r["bona_fide_episodes"]),
        "gan1": _episodes(ws, "gan1", Controller.GAN1, players, 1, GanBot(pairs[1])),
        "gan2": _episodes(ws, "gan2", Controller.GAN2, players, 1, GanBot(pairs[2])),
    }
    # same players and seeds under each controller, so accuracy differences are paired
    perf = ws.roster.performance
    sets["perf_none"] = _episodes(ws, "perf_none", Controller.HUMAN, perf, 1, seed_stream="perf")
    sets["perf_light"] = _episodes(ws, "perf_light", Controller.LIGHT, perf, 1, HeuristicBot(PRESETS["light"]),
                                   seed_stream="perf")
    sets["perf_strong"] = _episodes(ws, "perf_strong", Controller.STRONG, perf, 1,
                                    HeuristicBot(PRESETS["strong"]), seed_stream="perf")
    sets["perf_gan"] = _episodes(ws, "perf_gan", Controller.GAN1, perf, 1, GanBot(pairs[1]), seed_stream="perf")
    return _write_sets(ws, sets, log)


def _write_sets(ws: Workspace, sets: dict, log) -> dict:
    summaries = {}
    for name, episodes in sets.items():
        write_episodes(ws.dataset(name), episodes)
        summaries[name] = _summary(episodes)
        s = summaries[name]
        log(f"{name:12s} {s['episodes']:4d} episodes  accuracy {100 * s['accuracy']:5.1f}%")
    ws.register_datasets({k: {"summary": v} for k, v in summaries.items()})
    return summaries


# ---------------------------------------------------------------------------
# GAN training


def gan_config(cfg: dict) -> GanConfig:
    return GanConfig.from_dict(cfg["gan"])


def train_gan_group(ws: Workspace, group: int, log=print) -> dict:
    name = f"human_g{group}"
    inputs = ws.require_datasets([name], "aimlab simulate")
    config = gan_config(ws.cfg)
    episodes = read_episodes(ws.dataset(name))
    windows = make_gan_windows(episodes, stride=config.window_stride, context=config.context_c,
                               steps=config.gen_steps_g)
    seed = ws.cfg["master_seed"] * 1_000_000 + 900_000 + group

    def progress(entry):
        if entry["epoch"] == 1 or entry["epoch"] % 10 == 0 or entry["epoch"] == config.epochs:
            log(f"gan g{group} epoch {entry['epoch']:3d}  L_D {entry['loss_d']:+.4f}  "
                f"L_G {entry['loss_g']:+.4f}  dist {entry['dist']:.3f}")

    pair, tlog = train_gan(windows, config, seed=seed, group=f"Group{group}", progress=progress)
    ws.models.mkdir(parents=True, exist_ok=True)
    manifest = {**ws.stamp(), "inputs": inputs, "seed": seed, "windows": len(windows),
                "log": tlog.to_json()}
    save_pair(pair, ws.gan_stem(group), manifest)
    return manifest


def load_gan(ws: Workspace, group: int):
    stem = ws.gan_stem(group)
    ws.require_sidecar(stem.with_suffix(".json"), f"aimlab train-gan --group {group}")
    for suffix in (".gen.ckpt", ".disc.ckpt"):
        if not stem.with_suffix(suffix).exists():
            raise MissingArtifact(f"{stem.with_suffix(suffix)} is missing", f"aimlab train-gan --group {group}")
    return load_pair(stem)


# ---------------------------------------------------------------------------
# detectors


def _collection_sets(ws: Workspace, collection: str, attacks, players) -> FeatureSet:
    players = set(players)
    names = (BONA_FIDE[collection],) + tuple(attacks)
    sets = []
    for name in names:
        episodes = [e for e in read_episodes(ws.dataset(name)) if e.seed in players]
        sets.append(FeatureSet.from_episodes(episodes))
    return FeatureSet.concat(sets)


def _simulate_command(collection: str) -> str:
    return "aimlab simulate" if collection == "heuristic" else "aimlab simulate --stage gan"


def detector_training_players(ws: Workspace, name: str) -> tuple:
    collection, _ = DETECTORS[name]
    train, test = ws.roster.split(collection)
    return train + test if name.startswith("tot_") else train


def train_detector_named(ws: Workspace, name: str, log=print) -> dict:
    collection, attacks = DETECTORS[name]
    names = (BONA_FIDE[collection],) + attacks
    inputs = ws.require_datasets(names, _simulate_command(collection))
    players = detector_training_players(ws, name)
    train = _collection_sets(ws, collection, attacks, players)
    config = DetectorConfig.from_dict(ws.cfg["detector"])
    seed = ws.cfg["master_seed"] * 1_000_000 + 800_000 + sorted(DETECTORS).index(name)
    manifest = {**ws.stamp(), "name": name, "inputs": inputs, "attacks": list(attacks),
                "train_players": sorted(players), "seed": seed, "n_train": len(train)}
    model, tlog = train_detector(train, config, seed=seed, manifest=manifest)
    ws.models.mkdir(parents=True, exist_ok=True)
    save_detector(model, ws.detector_stem(name), config, tlog)
    log(f"detector {name:14s} n={len(train):6d}  train loss {tlog['final_train_loss']:.4f}  "
        f"val loss {tlog['final_val_loss']:.4f}")
    return manifest


def detectors_for(scenarios) -> list:
    out = []
    for s in scenarios:
        for d in SCENARIO_DETECTORS[s]:
            if d not in out:
                out.append(d)
    return out


def load_detector_named(ws: Workspace, name: str):
    stem = ws.detector_stem(name)
    scenario = next(s for s, ds in SCENARIO_DETECTORS.items() if name in ds)
    command = f"aimlab train-detector --scenario {scenario}"
    ws.require_sidecar(stem.with_suffix(".json"), command)
    if not stem.with_suffix(".ckpt").exists():
        raise MissingArtifact(f"{stem.with_suffix('.ckpt')} is missing", command)
    return load_detector(stem)


# ---------------------------------------------------------------------------
# scenario protocol


def scenario_rows() -> list:
    """(scenario, aimbot, detector name or None when the row is absent)."""
    rows = []
    for a in AIMBOTS:
        rows.append(("worst-case", a, "worst_case" if a.startswith("gan") else None))
    swap = {"light": "oracle_strong", "strong": "oracle_light", "gan1": "oracle_gan2", "gan2": "oracle_gan1"}
    for a in AIMBOTS:
        rows.append(("known-attack", a, swap[a]))
    for a in AIMBOTS:
        rows.append(("oracle", a, f"oracle_{a}"))
    for a in AIMBOTS:
        rows.append(("train-on-test", a, "tot_heuristic" if COLLECTION_OF[a] == "heuristic" else "tot_gan"))
    return rows


def check_leakage(ws: Workspace, detector_name: str, manifest: dict, test_players) -> None:
    if detector_name.startswith("tot_"):
        return
    shared = set(manifest["train_players"]) & set(test_players)
    if shared:
        raise LeakageError(f"detector {detector_name} shares players {sorted(shared)[:5]} with its test set")


def test_set(ws: Workspace, aimbot: str) -> FeatureSet:
    collection = COLLECTION_OF[aimbot]
    _, test = ws.roster.split(collection)
    return _collection_sets(ws, collection, (aimbot,), test)
