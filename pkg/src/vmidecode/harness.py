"""Cross-validation, channel-count sweeps and the reproducible pipeline.

Leakage control: channel ranking is recomputed on training folds only,
sliding-window augmentation happens after the fold split, and all windows
of a trial stay in the fold of their source trial.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import connectivity as conn_mod
from . import dsp, io, stats
from .core import EpochSet, SynthSpec, epoch_recording, synth_dataset
from .csp import CspLdaClassifier
from .errors import ConfigError, RangeError, StratificationError
from .neural import CnnClassifier, TrainConfig, predict_trial, slide_windows
from .seeding import child_rng

CHANNEL_COUNTS = (2, 4, 8, 16, 20, 32, 64)


def format_cell(mean_pct: float, std_pct: float) -> str:
    """Accuracy cell in the report table style, e.g. '67.50% (±1.52)'."""
    return f"{mean_pct:.2f}% (±{std_pct:.2f})"


@dataclass
class EvalEntry:
    method: str
    k_channels: int
    fold_accuracies: list
    confusion: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def mean_pct(self) -> float:
        return float(np.mean(self.fold_accuracies) * 100.0)

    @property
    def std_pct(self) -> float:
        return float(np.std(self.fold_accuracies) * 100.0)

    def cell(self) -> str:
        return format_cell(self.mean_pct, self.std_pct)


@dataclass
class EvalReport:
    entries: list = field(default_factory=list)

    def entry(self, method: str, k_channels: int) -> EvalEntry:
        for e in self.entries:
            if e.method == method and e.k_channels == k_channels:
                return e
        raise KeyError((method, k_channels))

    def to_csv(self, path, channel_counts=None) -> None:
        """Rows = methods, columns = channel counts, cells = 'mean% (±std)'."""
        if channel_counts is None:
            channel_counts = sorted({e.k_channels for e in self.entries})
        methods = []
        for e in self.entries:
            if e.method not in methods:
                methods.append(e.method)
        rows = ["method," + ",".join(f"{k}ch" for k in channel_counts)]
        for m in methods:
            cells = []
            for k in channel_counts:
                try:
                    cells.append(self.entry(m, k).cell())
                except KeyError:
                    cells.append("")
            rows.append(m + "," + ",".join(f'"{c}"' for c in cells))
        with open(path, "w") as f:
            f.write("\n".join(rows) + "\n")

    def to_json(self, path) -> None:
        blob = []
        for e in self.entries:
            blob.append({
                "method": e.method,
                "k_channels": e.k_channels,
                "fold_accuracies": [float(a) for a in e.fold_accuracies],
                "mean_pct": e.mean_pct,
                "std_pct": e.std_pct,
                "confusion": e.confusion.tolist(),
                "config": e.config,
            })
        with open(path, "w") as f:
            json.dump(blob, f, indent=2, sort_keys=True)


def stratified_folds(labels, n_folds: int, seed: int = 0) -> list:
    """Deterministic stratified fold assignment; returns a list of index arrays."""
    labels = np.asarray(labels)
    rng = child_rng(seed, "folds")
    folds = [[] for _ in range(n_folds)]
    for c in np.unique(labels):
        idx = np.nonzero(labels == c)[0]
        if idx.size < n_folds:
            raise StratificationError(
                f"class {c} has {idx.size} trials for {n_folds} folds"
            )
        idx = rng.permutation(idx)
        for f, chunk in enumerate(np.array_split(idx, n_folds)):
            folds[f].extend(chunk.tolist())
    return [np.sort(np.asarray(f)) for f in folds]


def _make_classifier(method: str, seed: int, csp_m: int,
                     train_config: TrainConfig):
    if method == "cnn":
        cfg = train_config or TrainConfig()
        cfg = TrainConfig(**{**cfg.__dict__, "seed": seed})
        return CnnClassifier(cfg)
    if method == "csp_lda":
        return CspLdaClassifier(m=csp_m)
    raise ConfigError("method", f"unknown method {method!r}")


def _trial_predictions(clf, test_windows: EpochSet) -> dict:
    """Map source trial id -> predicted class from mean window scores."""
    scores = clf.predict_scores(test_windows)
    preds = {}
    for trial in np.unique(test_windows.source_trials):
        mask = test_windows.source_trials == trial
        preds[int(trial)] = predict_trial(scores[mask])
    return preds


def fold_channel_ranking(train_epochs: EpochSet):
    """Train-fold-only channel ranking from per-class PLV matrices."""
    per_class = conn_mod.per_class_plv(train_epochs)
    return conn_mod.rank_channels(per_class.values())


def cross_validate(dataset: EpochSet, method: str, k_channels: int = None,
                   folds: int = 5, seeds=(0,), csp_m: int = 2,
                   train_config: TrainConfig = None, win_s: float = 2.0,
                   overlap: float = 0.5, precomputed_rankings=None) -> EvalEntry:
    """Stratified cross-validation with in-fold channel selection.

    k_channels=None (or the full montage) skips selection. seeds re-run the
    whole CV with fresh fold shuffles and model seeds; the reported spread
    is over folds x seeds. precomputed_rankings, when given, maps
    (seed, fold) -> ChannelRanking computed on that fold's training trials.
    """
    n_classes = len(np.unique(dataset.labels))
    accs = []
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for seed in seeds:
        fold_idx = stratified_folds(dataset.labels, folds, seed=seed)
        for f, test_idx in enumerate(fold_idx):
            train_idx = np.setdiff1d(np.arange(dataset.n_trials), test_idx)
            train_ep = dataset.select(trial_idx=train_idx)
            test_ep = dataset.select(trial_idx=test_idx)
            if k_channels is not None and k_channels < dataset.n_channels:
                if precomputed_rankings is not None:
                    ranking = precomputed_rankings[(seed, f)]
                else:
                    ranking = fold_channel_ranking(train_ep)
                sel = conn_mod.select_channels(ranking, k_channels)
                train_ep = train_ep.select(channel_idx=sel)
                test_ep = test_ep.select(channel_idx=sel)
            elif k_channels is not None and k_channels > dataset.n_channels:
                raise RangeError(f"k_channels {k_channels} exceeds montage")
            train_w = slide_windows(train_ep, win_s=win_s, overlap=overlap)
            test_w = slide_windows(test_ep, win_s=win_s, overlap=overlap)
            clf = _make_classifier(method, seed, csp_m, train_config)
            clf.fit(train_w)
            preds = _trial_predictions(clf, test_w)
            truth = {int(t): int(l) for t, l in
                     zip(test_ep.source_trials, test_ep.labels)}
            correct = sum(preds[t] == truth[t] for t in truth)
            accs.append(correct / len(truth))
            for t in truth:
                confusion[truth[t], preds[t]] += 1
    k_eff = k_channels if k_channels is not None else dataset.n_channels
    return EvalEntry(method, int(k_eff), accs, confusion,
                     config={"folds": folds, "seeds": list(seeds),
                             "csp_m": csp_m, "win_s": win_s,
                             "overlap": overlap})


def sweep(dataset: EpochSet, methods=("cnn", "csp_lda"),
          channel_counts=CHANNEL_COUNTS, folds: int = 5, seeds=(0,),
          csp_m: int = 2, train_config: TrainConfig = None) -> EvalReport:
    """Full method x channel-count grid; rankings are shared across cells."""
    counts = [k for k in channel_counts if k <= dataset.n_channels]
    rankings = {}
    if any(k < dataset.n_channels for k in counts):
        for seed in seeds:
            fold_idx = stratified_folds(dataset.labels, folds, seed=seed)
            for f, test_idx in enumerate(fold_idx):
                train_idx = np.setdiff1d(np.arange(dataset.n_trials), test_idx)
                rankings[(seed, f)] = fold_channel_ranking(
                    dataset.select(trial_idx=train_idx))
    report = EvalReport()
    for method in methods:
        for k in counts:
            report.entries.append(cross_validate(
                dataset, method, k_channels=k, folds=folds, seeds=seeds,
                csp_m=csp_m, train_config=train_config,
                precomputed_rankings=rankings))
    return report


# ---------------------------------------------------------------------------
# Config-driven pipeline

DEFAULT_CONFIG = {
    "preprocess": {"band": [0.5, 13.0], "downsample_factor": None},
    "epoch": {"imagery_window_ms": [500, 4500],
              "rest_window_ms": [-4500, -500]},
    "connectivity": {"threshold": 0.9},
    "stats": {"band": [0.5, 13.0], "n_perm": 10000, "alpha": 0.01},
    "ersp": {"channel": "Oz", "baseline_ms": [-500, 0], "f_range": [3, 50]},
    "cnn": {"lr": 1e-3, "batch_size": 16, "epochs": 100, "dropout": 0.5,
            "patience": 10},
    "csp": {"m": 2},
    "cv": {"folds": 5, "seeds": [0]},
    "sweep": {"channel_counts": list(CHANNEL_COUNTS),
              "methods": ["cnn", "csp_lda"]},
}


def load_config(path) -> dict:
    with open(path) as f:
        try:
            cfg = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"config is not valid JSON: {e}") from e
    return validate_config(cfg)


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    if "seed" not in cfg:
        raise ConfigError("seed")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed", "seed must be an integer")
    known = {"seed", "out", "synth", "input", "preprocess", "epoch",
             "connectivity", "stats", "ersp", "cnn", "csp", "cv", "sweep"}
    for key in cfg:
        if key not in known:
            raise ConfigError(key, f"unknown config key {key!r}")
    merged = {}
    for key, default in DEFAULT_CONFIG.items():
        merged[key] = {**default, **cfg.get(key, {})}
    merged["seed"] = cfg["seed"]
    for key in ("out", "synth", "input"):
        if key in cfg:
            merged[key] = cfg[key]
    return merged


def synth_from_config(cfg: dict) -> SynthSpec:
    s = cfg.get("synth")
    if s is None:
        raise ConfigError("synth")
    from .core import Montage
    montage = (Montage(tuple(s["channels"])) if "channels" in s
               else Montage.default())
    try:
        return SynthSpec(
            n_trials_per_class=s["n_trials_per_class"],
            montage=montage,
            planted_channels={int(k): v for k, v in s["planted_channels"].items()},
            carrier_hz={int(k): float(v) for k, v in s["carrier_hz"].items()},
            coupling=float(s.get("coupling", 1.0)),
            snr_db=float(s.get("snr_db", 10.0)),
            seed=cfg["seed"],
            fs=int(s.get("fs", 250)),
        )
    except KeyError as e:
        raise ConfigError(f"synth.{e.args[0]}") from e


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, cfg: dict, artifacts: list) -> str:
    """Write manifest.json listing config hash, seed and artifact hashes."""
    import vmidecode
    out_dir = str(out_dir)
    manifest = {
        "config_sha256": hashlib.sha256(
            json.dumps(cfg, sort_keys=True).encode()).hexdigest(),
        "seed": cfg.get("seed"),
        "versions": {"vmidecode": vmidecode.__version__,
                     "numpy": np.__version__},
        "artifacts": {name: sha256_file(f"{out_dir}/{name}")
                      for name in sorted(artifacts)},
    }
    path = f"{out_dir}/manifest.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def run_pipeline(cfg: dict, out_dir) -> list:
    """Synth/load -> preprocess -> connectivity -> stats -> sweep, on disk.

    Returns the list of artifact names written under out_dir; finishes by
    writing manifest.json with their hashes.
    """
    import os
    cfg = validate_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    artifacts = []

    def emit(name):
        artifacts.append(name)
        return os.path.join(str(out_dir), name)

    # 1. data
    if "input" in cfg:
        rec = io.load_recording(cfg["input"])
    else:
        rec = synth_dataset(synth_from_config(cfg))
        io.save_recording(rec, emit("recording.eegb"))

    # 2. preprocess
    pp = cfg["preprocess"]
    factor = pp["downsample_factor"]
    if factor is None:
        factor = max(1, rec.fs // 250)
    rec = dsp.preprocess_recording(rec, band=tuple(pp["band"]), factor=factor)
    io.save_recording(rec, emit("preprocessed.eegb"))

    # 3. epochs
    ep = cfg["epoch"]
    imagery = epoch_recording(rec, "imagery", tuple(ep["imagery_window_ms"]))
    rest = epoch_recording(rec, "rest", tuple(ep["rest_window_ms"]))
    io.save_epochs(imagery, emit("imagery_epochs.eegb"))
    io.save_epochs(rest, emit("rest_epochs.eegb"))

    # 4. connectivity + channel ranking (full data; per-fold selection is
    #    redone inside the sweep)
    per_class = conn_mod.per_class_plv(imagery)
    for c, cm in per_class.items():
        cm.to_csv(emit(f"plv_class{c}.csv"))
        conn_mod.edges_to_csv(
            conn_mod.strong_edges(cm, cfg["connectivity"]["threshold"]),
            emit(f"edges_class{c}.csv"), montage=cm.montage)
    ranking = conn_mod.rank_channels(per_class.values())
    ranking.to_csv(emit("channel_ranking.csv"))

    # 5. statistics
    st = cfg["stats"]
    smap = stats.stat_map(imagery, rest, band=tuple(st["band"]),
                          n_perm=st["n_perm"], seed=cfg["seed"],
                          alpha=st["alpha"])
    smap.to_csv(emit("stat_map.csv"))

    # 6. PSD of the imagery phase, channel-averaged per class
    for c in sorted(set(int(l) for l in imagery.labels)):
        idx = np.nonzero(imagery.labels == c)[0]
        x = np.asarray(imagery.tensor[idx], dtype=np.float64).mean(axis=(0, 1))
        dsp.welch_psd(x, imagery.fs).to_csv(emit(f"psd_class{c}.csv"))

    # 7. sweep
    cv = cfg["cv"]
    sw = cfg["sweep"]
    train_config = TrainConfig(seed=cfg["seed"], **cfg["cnn"])
    report = sweep(imagery, methods=tuple(sw["methods"]),
                   channel_counts=tuple(sw["channel_counts"]),
                   folds=cv["folds"], seeds=tuple(cv["seeds"]),
                   csp_m=cfg["csp"]["m"], train_config=train_config)
    report.to_csv(emit("sweep.csv"),
                  channel_counts=tuple(sw["channel_counts"]))
    report.to_json(emit("report.json"))

    write_manifest(out_dir, cfg, artifacts)
    return artifacts + ["manifest.json"]
