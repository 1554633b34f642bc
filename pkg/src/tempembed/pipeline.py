"""Run configuration and the snapshot -> train -> evaluate stages.

Every stage writes its outputs into one run directory. Each file echoes the
configuration it was produced under plus the tool version, and the manifest
ties the checkpoint to the exact snapshot file by content hash.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from tempembed import __version__
from tempembed.alignment import align_series
from tempembed.errors import ConfigError, DataError, TempEmbedError
from tempembed.evaluation import evaluate_model, scored_pairs_csv
from tempembed.graph_store import SnapshotSeries, bin_snapshots, parse_edge_list, temporal_split
from tempembed.model import ModelState, TrainConfig, fit
from tempembed.static_embed import EmbeddingSeries, embed_series

log = logging.getLogger(__name__)

SNAPSHOTS_FILE = "snapshots.json"
CHECKPOINT_FILE = "checkpoint.json"
MANIFEST_FILE = "manifest.json"
LOSS_FILE = "loss.csv"
REPORT_FILE = "report.json"
SCORES_FILE = "scores.csv"
TIMING_FILE = "timing.json"


@dataclass
class RunConfig:
    edges: str | None = None
    out: str | None = None
    directed: bool = False
    symmetrize: bool = True
    granularity: str | None = None
    snapshots: int = 10
    dim: int | None = None
    layers: int = 3
    tau: float = 1.0
    cell: str = "gru"
    hidden: int | None = None
    head_hidden: int | None = None
    epochs: int = 100
    batch: int = 512
    lr: float = 1e-3
    seed: int = 0
    train_fraction: float = 0.7
    align_direction: str = "q"
    align_reference: str = "aligned"
    scalar_decay: bool = False
    zero_tol: float = 1e-12
    ablation: str = "none"
    scorer: str = "model"
    figures: bool = True

    def validate(self) -> "RunConfig":
        if self.snapshots < 1:
            raise ConfigError("snapshots must be >= 1")
        if self.dim is not None and self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.layers < 1:
            raise ConfigError("layers must be >= 1")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.align_direction not in ("q", "qt"):
            raise ConfigError("align_direction must be 'q' or 'qt'")
        if self.align_reference not in ("aligned", "raw"):
            raise ConfigError("align_reference must be 'aligned' or 'raw'")
        if self.ablation not in ("none", "static"):
            raise ConfigError("ablation must be 'none' or 'static'")
        if self.scorer not in ("model", "random", "oracle"):
            raise ConfigError("scorer must be 'model', 'random' or 'oracle'")
        self.train_config().validate()
        return self

    @property
    def resolved_granularity(self) -> str:
        return self.granularity or f"count:{self.snapshots}"

    def train_config(self, symmetric: bool = True) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch, lr=self.lr, seed=self.seed,
            cell=self.cell, hidden=self.hidden, head_hidden=self.head_hidden,
            symmetric=symmetric,
        )

    def snapshot_echo(self) -> dict:
        return {"directed": self.directed, "symmetrize": self.symmetrize, "granularity": self.resolved_granularity}

    def train_echo(self) -> dict:
        keys = (
            "dim", "layers", "tau", "cell", "hidden", "head_hidden", "epochs", "batch", "lr", "seed",
            "train_fraction", "align_direction", "align_reference", "scalar_decay", "zero_tol", "ablation",
        )
        return {k: getattr(self, k) for k in keys}


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    kind = _FIELD_TYPES[key]
    text = value.strip()
    if "None" in kind and text.lower() in ("", "none", "auto"):
        return None
    try:
        if kind.startswith("bool"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return text


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Unknown keys are rejected."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key: {key}")
        out[key] = _coerce(key, value)
    return out


def build_config(file_values: dict | None = None, overrides: dict | None = None, required=()) -> RunConfig:
    values = dict(file_values or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config key: {sorted(unknown)[0]}")
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    for key in required:
        if getattr(cfg, key) in (None, ""):
            raise ConfigError(f"missing required config key: {key}")
    return cfg.validate()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


class StageError(TempEmbedError):
    """Wraps a library error with the stage that raised it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exit_code = getattr(exc, "exit_code", 2)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (TempEmbedError, ValueError, ArithmeticError, OSError) as exc:
        raise StageError(name, exc) from exc


# -------------------------------------------------------------------- stages


def run_snapshots(cfg: RunConfig) -> Path:
    """Parse the edge list, bin it and write ``snapshots.json``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(cfg.edges) as fh:
        graph = _stage("parse", parse_edge_list, fh, cfg.directed)
    stats = graph.stats()
    if cfg.directed and cfg.symmetrize:
        graph = graph.symmetrized()
    series = _stage("snapshots", bin_snapshots, graph, cfg.resolved_granularity)
    path = out / SNAPSHOTS_FILE
    doc = {"tool_version": __version__, "config": cfg.snapshot_echo(), "stats": stats,
           "num_snapshots": series.num_snapshots}
    doc.update(series.to_json())
    path.write_text(json.dumps(doc, separators=(",", ":")) + "\n")
    log.info("wrote %s (N=%d, |E|=%d, T=%d)", path, stats["num_nodes"], stats["num_edges"], series.num_snapshots)
    return path


def load_snapshots(path) -> tuple[SnapshotSeries, dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    return SnapshotSeries.from_json(doc), doc


def resolve_dim(cfg: RunConfig, num_nodes: int) -> int:
    if cfg.dim is not None:
        return cfg.dim
    return max(1, min(128, num_nodes // 2))


@dataclass
class Prepared:
    series: SnapshotSeries
    split: object
    static: EmbeddingSeries
    inputs: EmbeddingSeries
    dim: int


def prepare(cfg: RunConfig, series: SnapshotSeries) -> Prepared:
    """Split, embed the training-period snapshots and align them.

    Only edges at or before the pivot time enter the embeddings, so test
    links cannot leak into the model inputs.
    """
    split = _stage("split", temporal_split, series, cfg.train_fraction, cfg.seed)
    history = series.truncate(split.pivot_time)
    dim = resolve_dim(cfg, series.num_nodes)
    static = _stage(
        "embed", embed_series, history, dim=dim, tau=cfg.tau, seed=cfg.seed,
        num_layers=cfg.layers, scalar_decay=cfg.scalar_decay,
    )
    if cfg.ablation == "static" or static.num_snapshots < 2:
        inputs = EmbeddingSeries(static.data[-1:])
    else:
        inputs = _stage(
            "align", align_series, static, zero_tol=cfg.zero_tol,
            direction=cfg.align_direction, reference=cfg.align_reference,
        )
    return Prepared(series, split, static, inputs, dim)


def run_train(cfg: RunConfig, snapshots_path=None) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    snapshots_path = Path(snapshots_path or out / SNAPSHOTS_FILE)
    started = time.perf_counter()
    series, snap_doc = _stage("load", load_snapshots, snapshots_path)
    prep = prepare(cfg, series)
    train_cfg = cfg.train_config(symmetric=not series.graph.directed)
    state = _stage("train", fit, prep.inputs, prep.split, train_cfg)

    echo = {"snapshots": snap_doc.get("config", {}), "train": cfg.train_echo(), "resolved_dim": prep.dim}
    ckpt = out / CHECKPOINT_FILE
    ckpt.write_text(state.dumps(run_config=echo) + "\n")

    loss_lines = [f"# tool_version={__version__}", f"# config={json.dumps(echo, sort_keys=True)}", "epoch,loss"]
    loss_lines += [f"{i},{v!r}" for i, v in enumerate(state.loss_history)]
    (out / LOSS_FILE).write_text("\n".join(loss_lines) + "\n")

    manifest = {
        "tool_version": __version__,
        "config": echo,
        "seeds": {"run": cfg.seed},
        "inputs": {"snapshots_file": snapshots_path.name, "snapshots_sha256": sha256_file(snapshots_path)},
        "outputs": {"checkpoint_file": ckpt.name, "checkpoint_sha256": sha256_file(ckpt)},
        "split": {
            "pivot_time": prep.split.pivot_time,
            "train_positives": len(prep.split.train_positives),
            "test_positives": len(prep.split.test_positives),
        },
        "num_snapshots_used": prep.inputs.num_snapshots,
    }
    _write_json(out / MANIFEST_FILE, manifest)
    if cfg.figures:
        from tempembed.plotting import plot_loss

        plot_loss(state.loss_history, out / "loss.png", meta=echo)
    _write_json(out / TIMING_FILE, {"train_seconds": time.perf_counter() - started})
    log.info("trained %d epochs, final loss %.4f", cfg.epochs, state.loss_history[-1])
    return ckpt


def config_from_manifest(manifest: dict, base: RunConfig) -> RunConfig:
    values = asdict(base)
    values.update(manifest["config"]["train"])
    snap = manifest["config"].get("snapshots", {})
    values["directed"] = snap.get("directed", values["directed"])
    values["symmetrize"] = snap.get("symmetrize", values["symmetrize"])
    values["granularity"] = snap.get("granularity", values["granularity"])
    return RunConfig(**values).validate()


def run_evaluate(cfg: RunConfig) -> dict:
    """Rebuild the split and inputs from the manifest, score, write the report."""
    out = Path(cfg.out)
    started = time.perf_counter()
    try:
        manifest = json.loads((out / MANIFEST_FILE).read_text())
    except FileNotFoundError as exc:
        raise StageError("evaluate", DataError(f"no manifest in {out}")) from exc
    ckpt = out / manifest["outputs"]["checkpoint_file"]
    snaps = out / manifest["inputs"]["snapshots_file"]
    if not ckpt.exists() or sha256_file(ckpt) != manifest["outputs"]["checkpoint_sha256"]:
        raise StageError("evaluate", DataError("checkpoint does not match manifest (hash mismatch)"))
    if not snaps.exists() or sha256_file(snaps) != manifest["inputs"]["snapshots_sha256"]:
        raise StageError("evaluate", DataError("snapshot file does not match manifest (hash mismatch)"))

    run_cfg = config_from_manifest(manifest, cfg)
    series, _ = _stage("load", load_snapshots, snaps)
    prep = prepare(run_cfg, series)
    model = None
    if cfg.scorer == "model":
        model = _stage("load", lambda: ModelState.from_json(json.loads(ckpt.read_text())))
    report, scored = _stage(
        "evaluate", evaluate_model, model, prep.inputs, prep.split,
        scorer=cfg.scorer, seed=run_cfg.seed, config=manifest["config"],
    )
    doc = report.to_json()
    doc["inputs"] = {
        "snapshots_sha256": manifest["inputs"]["snapshots_sha256"],
        "checkpoint_sha256": manifest["outputs"]["checkpoint_sha256"],
    }
    _write_json(out / REPORT_FILE, doc)
    (out / SCORES_FILE).write_text(scored_pairs_csv(scored))
    if cfg.figures:
        from tempembed.plotting import plot_roc_pr

        labels = np.array([p.label for p in scored], dtype=float)
        scores = np.array([p.score for p in scored])
        plot_roc_pr(labels, scores, out / "roc_pr.png", report=doc)
    timing = {}
    if (out / TIMING_FILE).exists():
        timing = json.loads((out / TIMING_FILE).read_text())
    timing["evaluate_seconds"] = time.perf_counter() - started
    _write_json(out / TIMING_FILE, timing)
    return doc


def run_pipeline(cfg: RunConfig) -> dict:
    run_snapshots(cfg)
    run_train(cfg)
    return run_evaluate(cfg)
