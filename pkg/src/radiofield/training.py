"""Training loop, metrics, evaluation, the no-probe ablation, and the MLP
baseline.

Batches are grouped by (transmitter, pattern): probe-side features depend only
on that pair, so each batch pays for the point encoder and probe attention
once.  Shuffling of group order and of records within each group is seeded,
making runs bit-reproducible.  Validation metrics are computed on parameters
rounded through float32 (the checkpoint precision), so a saved checkpoint
reproduces its logged metrics exactly.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import Dataset
from .errors import NumericalError, ValidationError
from .geometry import (PointCloudScene, default_probe_spacing, normalize_scene,
                       place_probes, sample_point_cloud)
from .links import ProbeGraph, build_links
from .model import (ModelConfig, Predictor, forward_group, init_params,
                    param_count, params_from_arrays, quantize_params)

DEFAULT_DENSITY = 0.05
DEFAULT_SAMPLE_SEED = 1


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 1000
    learning_rate: float = 1e-4
    epochs: int = 100          # paper-scale runs use 500
    seed: int = 0
    patience: int = 20         # early stop on validation MSE; 0 disables
    checkpoint_interval: int = 0  # periodic snapshot cadence; 0 disables

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")


@dataclass(frozen=True)
class Metrics:
    mse: float
    psnr: float


def compute_metrics(predictions, targets) -> Metrics:
    """MSE (mean of squared errors) and PSNR = 20 log10(max(pred)/sqrt(MSE)).
    Zero MSE reports PSNR as +inf."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValidationError("metrics need at least one sample")
    if p.size != t.size:
        raise ValidationError(f"prediction/target length mismatch: {p.size} vs {t.size}")
    mse = float(np.mean((p - t) ** 2))
    if mse == 0.0:
        return Metrics(mse=0.0, psnr=math.inf)
    peak = float(p.max())
    psnr = 20.0 * math.log10(peak / math.sqrt(mse)) if peak > 0 else -math.inf
    return Metrics(mse=mse, psnr=psnr)


# ---------------------------------------------------------------------------
# Data pipeline
# ---------------------------------------------------------------------------


@dataclass
class Pipeline:
    scene: PointCloudScene
    probes: np.ndarray           # normalized probe positions
    graph: ProbeGraph
    prep: dict                   # density, sample_seed, probe_spacing


def prepare_pipeline(dataset: Dataset, model_cfg: ModelConfig,
                     density: float | None = None,
                     sample_seed: int | None = None,
                     probe_spacing: float | None = None) -> Pipeline:
    """Rebuild the scene point cloud, probes, and link graph for a dataset.
    Prep values default to those recorded in the dataset header."""
    hdr_prep = dataset.header.get("prep", {})
    density = density if density is not None else hdr_prep.get("density", DEFAULT_DENSITY)
    sample_seed = sample_seed if sample_seed is not None else hdr_prep.get(
        "sample_seed", DEFAULT_SAMPLE_SEED)
    scene = dataset.scene()
    sample_point_cloud(scene, density, sample_seed)
    normalize_scene(scene)
    spacing = probe_spacing if probe_spacing is not None else hdr_prep.get("probe_spacing")
    if spacing is None:
        spacing = default_probe_spacing(scene)
    probes = place_probes(scene, spacing)
    graph = build_links(
        scene.points, probes,
        scene.to_unit(dataset.tx_positions), scene.to_unit(dataset.rx_positions),
        model_cfg.n, model_cfg.K,
        with_rx_point_links=not model_cfg.use_probes,
    )
    prep = {"density": float(density), "sample_seed": int(sample_seed),
            "probe_spacing": float(spacing)}
    return Pipeline(scene=scene, probes=probes, graph=graph, prep=prep)


def training_groups(dataset: Dataset) -> list[tuple[int, int]]:
    """(tx index, pattern index) pairs drawn from the training split only."""
    return [(t, p) for t in dataset.train_tx for p in range(len(dataset.pattern_ids))]


def predict_dataset(arrays: dict, model_cfg: ModelConfig, pipeline: Pipeline,
                    dataset: Dataset, tx_indices, eval_batch: int = 4096):
    """Model predictions and targets over all (tx, pattern) groups of the given
    transmitters; returns flat (predictions, targets)."""
    params = params_from_arrays(arrays)
    n_rx = len(dataset.rx_positions)
    n_pat = len(dataset.pattern_ids)
    preds = np.empty((len(tx_indices), n_pat, n_rx))
    for ti, t in enumerate(tx_indices):
        for p in range(n_pat):
            for s in range(0, n_rx, eval_batch):
                idx = np.arange(s, min(s + eval_batch, n_rx))
                out = forward_group(params, model_cfg, pipeline.scene.points,
                                    pipeline.graph, t, int(dataset.pattern_ids[p]), idx)
                preds[ti, p, idx] = out.data
    targets = dataset.p_norm[np.asarray(tx_indices, dtype=int)]
    return preds.ravel(), targets.ravel()


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    params: dict                 # best-validation parameters, float32-exact
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    best_epoch: int
    best_val: Metrics
    history: list = field(default_factory=list)
    pipeline: Pipeline | None = None
    elapsed_s: float = 0.0


def train(dataset: Dataset, model_cfg: ModelConfig, train_cfg: TrainConfig,
          pipeline: Pipeline | None = None, history_path=None,
          log=None, snapshot_callback=None) -> TrainResult:
    """Adam/MSE training with per-epoch validation; retains the best-validation
    checkpoint.  Deterministic for a fixed seed.  When checkpoint_interval > 0,
    snapshot_callback(epoch, float32-exact arrays) fires every interval epochs."""
    if "split" not in dataset.header:
        raise ValidationError("dataset header lacks a train/validation split")
    t_start = time.perf_counter()
    if pipeline is None:
        pipeline = prepare_pipeline(dataset, model_cfg)
    params = init_params(model_cfg, train_cfg.seed)
    opt = ad.Adam(params, train_cfg.learning_rate)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([train_cfg.seed, 23])))
    groups = training_groups(dataset)
    n_rx = len(dataset.rx_positions)
    val_tx = dataset.val_tx

    history = []
    best_arrays = None
    best_epoch = -1
    best_val = Metrics(mse=math.inf, psnr=-math.inf)
    hist_fh = open(history_path, "w") if history_path else None
    try:
        for epoch in range(train_cfg.epochs):
            sq_sum = 0.0
            seen = 0
            for gi in rng.permutation(len(groups)):
                t, p = groups[gi]
                perm = rng.permutation(n_rx)
                for s in range(0, n_rx, train_cfg.batch_size):
                    ridx = perm[s:s + train_cfg.batch_size]
                    opt.zero_grad()
                    out = forward_group(params, model_cfg, pipeline.scene.points,
                                        pipeline.graph, t, int(dataset.pattern_ids[p]), ridx)
                    loss = ad.mse_loss(out, dataset.p_norm[t, p, ridx])
                    if not np.isfinite(loss.data):
                        raise NumericalError(
                            f"non-finite loss at epoch {epoch}, group (tx={t}, pattern={p}), "
                            f"batch offset {s}"
                        )
                    ad.backward(loss)
                    opt.step()
                    sq_sum += float(loss.data) * len(ridx)
                    seen += len(ridx)
            train_mse = sq_sum / seen

            snap = quantize_params(params)
            val_pred, val_tgt = predict_dataset(snap, model_cfg, pipeline, dataset, val_tx)
            vm = compute_metrics(val_pred, val_tgt)
            row = {"epoch": epoch, "train_mse": train_mse,
                   "val_mse": vm.mse, "val_psnr": vm.psnr}
            history.append(row)
            if hist_fh:
                hist_fh.write(json.dumps(row) + "\n")
                hist_fh.flush()
            if log:
                log(f"epoch {epoch}: train_mse={train_mse:.3e} "
                    f"val_mse={vm.mse:.3e} val_psnr={vm.psnr:.2f}")
            if snapshot_callback and train_cfg.checkpoint_interval > 0 \
                    and (epoch + 1) % train_cfg.checkpoint_interval == 0:
                snapshot_callback(epoch, snap)
            if vm.mse < best_val.mse:
                best_val = vm
                best_epoch = epoch
                best_arrays = snap
            elif train_cfg.patience and epoch - best_epoch >= train_cfg.patience:
                break
    finally:
        if hist_fh:
            hist_fh.close()

    return TrainResult(params=best_arrays, model_cfg=model_cfg, train_cfg=train_cfg,
                       best_epoch=best_epoch, best_val=best_val, history=history,
                       pipeline=pipeline, elapsed_s=time.perf_counter() - t_start)


def save_trained(path, result: TrainResult, dataset: Dataset) -> None:
    save_checkpoint(
        path, result.params, result.model_cfg,
        train_config=asdict(result.train_cfg),
        p_min_db=dataset.header["P_min_db"],
        p_max_db=dataset.header["P_max_db"],
        scene_hash=dataset.header["scene_hash"],
        scene=dataset.header["scene"],
        prep=result.pipeline.prep,
        extra={"best_epoch": result.best_epoch, "best_val_mse": result.best_val.mse},
    )


def evaluate_checkpoint(ckpt_path, dataset: Dataset,
                        pipeline: Pipeline | None = None) -> Metrics:
    """Validation metrics of a stored checkpoint against a dataset's val split."""
    arrays, header = load_checkpoint(ckpt_path)
    if header["scene_hash"] != dataset.header["scene_hash"]:
        raise ValidationError("checkpoint and dataset were built from different scenes")
    cfg = ModelConfig.from_dict(header["model_config"])
    if pipeline is None:
        prep = header.get("prep", {})
        pipeline = prepare_pipeline(dataset, cfg,
                                    density=prep.get("density"),
                                    sample_seed=prep.get("sample_seed"),
                                    probe_spacing=prep.get("probe_spacing"))
    pred, tgt = predict_dataset(arrays, cfg, pipeline, dataset, dataset.val_tx)
    return compute_metrics(pred, tgt)


def predictor_from_checkpoint(ckpt_path) -> tuple[Predictor, dict]:
    """Rebuild an inference snapshot from a checkpoint alone."""
    from .geometry import scene_from_dict
    arrays, header = load_checkpoint(ckpt_path)
    cfg = ModelConfig.from_dict(header["model_config"])
    prep = header.get("prep", {})
    scene = scene_from_dict(header["scene"])
    sample_point_cloud(scene, prep.get("density", DEFAULT_DENSITY),
                       prep.get("sample_seed", DEFAULT_SAMPLE_SEED))
    normalize_scene(scene)
    spacing = prep.get("probe_spacing") or default_probe_spacing(scene)
    probes = place_probes(scene, spacing)
    predictor = Predictor(scene, probes, cfg, params_from_arrays(arrays),
                          header["P_min_db"], header["P_max_db"])
    return predictor, header


# ---------------------------------------------------------------------------
# Ablation: remove the probe stage, attend straight to the K nearest points
# ---------------------------------------------------------------------------


def run_ablation(dataset: Dataset, model_cfg: ModelConfig,
                 train_cfg: TrainConfig, log=None) -> dict:
    """Train the full and no-probe variants with an equal budget."""
    full = train(dataset, model_cfg, train_cfg, log=log)
    ab_cfg = replace(model_cfg, use_probes=False)
    ablated = train(dataset, ab_cfg, train_cfg, log=log)
    return {
        "full": full,
        "no_probes": ablated,
        "full_param_count": param_count(params_from_arrays(full.params)),
        "ablated_param_count": param_count(params_from_arrays(ablated.params)),
    }


# ---------------------------------------------------------------------------
# Baseline: plain MLP on raw (tx, pattern one-hot, rx) inputs
# ---------------------------------------------------------------------------

MLP_HIDDEN = [64, 64, 32, 64]
MLP_INPUT = 10  # tx(3) + pattern one-hot(4) + rx(3), coordinates normalized


def init_mlp_params(seed: int) -> dict:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 31])))
    dims = [MLP_INPUT] + MLP_HIDDEN + [1]
    params = {}
    for i in range(len(dims) - 1):
        params[f"mlp.l{i}.w"] = ad.parameter(ad.init_uniform(rng, (dims[i], dims[i + 1]), dims[i]))
        params[f"mlp.l{i}.b"] = ad.parameter(ad.init_uniform(rng, (dims[i + 1],), dims[i]))
    return params


def forward_mlp(params: dict, features: np.ndarray) -> ad.Tensor:
    h = ad.constant(features)
    n_layers = len(MLP_HIDDEN) + 1
    for i in range(n_layers - 1):
        h = ad.leaky_relu(ad.add(ad.matmul(h, params[f"mlp.l{i}.w"]), params[f"mlp.l{i}.b"]))
    out = ad.add(ad.matmul(h, params[f"mlp.l{n_layers - 1}.w"]), params[f"mlp.l{n_layers - 1}.b"])
    return ad.sigmoid(ad.reshape(out, (len(features),)))


def _mlp_group_features(pipeline: Pipeline, dataset: Dataset, t: int, p: int,
                        rx_idx: np.ndarray) -> np.ndarray:
    tx_n = pipeline.scene.to_unit(dataset.tx_positions[t])
    rx_n = pipeline.scene.to_unit(dataset.rx_positions[rx_idx])
    onehot = np.zeros(4)
    onehot[int(dataset.pattern_ids[p])] = 1.0
    feats = np.empty((len(rx_idx), MLP_INPUT))
    feats[:, 0:3] = tx_n
    feats[:, 3:7] = onehot
    feats[:, 7:10] = rx_n
    return feats


def run_baseline_mlp(dataset: Dataset, train_cfg: TrainConfig,
                     pipeline: Pipeline | None = None, log=None):
    """Train the comparison MLP with the same budget and batching; returns
    (Metrics at best epoch, history)."""
    if pipeline is None:
        pipeline = prepare_pipeline(dataset, ModelConfig())
    params = init_mlp_params(train_cfg.seed)
    opt = ad.Adam(params, train_cfg.learning_rate)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([train_cfg.seed, 23])))
    groups = training_groups(dataset)
    n_rx = len(dataset.rx_positions)
    val_tx = dataset.val_tx

    def evaluate(snapshot: dict) -> Metrics:
        p_eval = params_from_arrays(snapshot)
        preds = []
        tgts = []
        for t in val_tx:
            for p in range(len(dataset.pattern_ids)):
                feats = _mlp_group_features(pipeline, dataset, t, p, np.arange(n_rx))
                preds.append(forward_mlp(p_eval, feats).data)
                tgts.append(dataset.p_norm[t, p])
        return compute_metrics(np.concatenate(preds), np.concatenate(tgts))

    history = []
    best = Metrics(mse=math.inf, psnr=-math.inf)
    best_epoch = -1
    for epoch in range(train_cfg.epochs):
        sq_sum = 0.0
        seen = 0
        for gi in rng.permutation(len(groups)):
            t, p = groups[gi]
            perm = rng.permutation(n_rx)
            for s in range(0, n_rx, train_cfg.batch_size):
                ridx = perm[s:s + train_cfg.batch_size]
                opt.zero_grad()
                out = forward_mlp(params, _mlp_group_features(pipeline, dataset, t, p, ridx))
                loss = ad.mse_loss(out, dataset.p_norm[t, p, ridx])
                if not np.isfinite(loss.data):
                    raise NumericalError(f"non-finite baseline loss at epoch {epoch}")
                ad.backward(loss)
                opt.step()
                sq_sum += float(loss.data) * len(ridx)
                seen += len(ridx)
        vm = evaluate(quantize_params(params))
        history.append({"epoch": epoch, "train_mse": sq_sum / seen,
                        "val_mse": vm.mse, "val_psnr": vm.psnr})
        if log:
            log(f"baseline epoch {epoch}: val_mse={vm.mse:.3e}")
        if vm.mse < best.mse:
            best = vm
            best_epoch = epoch
        elif train_cfg.patience and epoch - best_epoch >= train_cfg.patience:
            break
    return best, history
