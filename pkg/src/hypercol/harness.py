"""Monte Carlo experiment runner over HCF datasets.

A manifest names the train/test split; each run samples a training subset,
builds the stratified sparse hypercolumn, fits the requested models on that
identical matrix, streams full-resolution predictions for every test image
and records per-image metrics.  Everything is a pure function of (manifest
contents, config): rerunning writes byte-identical result files.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classifiers import (count_parameters, fit_classifier, lr_config,
                          predict_scores, rbf_svc_config, rf_config)
from .ensembles import (StackingConfig, VotingConfig, fit_stacking, fit_voting)
from .hcf import Sample, read_container_file, read_header, read_mask, validate_sample
from .hypercolumn import (HypercolumnConfig, LabeledPixels,
                          build_dense_hypercolumn, select_stratified_indices)
from .model_io import save_model_file
from .metrics import (METRIC_NAMES, MetricVector, RunSummary, aggregate_runs,
                      confusion_counts, segmentation_metrics)
from .seeding import derive_seed, rng_for, thread_count
from .stats import DegenerateSampleError, relative_gain, wilcoxon_signed_rank

MODEL_NAMES = ("LR", "RF", "SVC", "stacking", "voting")
_SVC_BEARING = {"SVC", "voting"}  # models whose training includes the RBF kernel


class ExperimentError(RuntimeError):
    """A pipeline stage failed; names the run/model/image for triage."""

    def __init__(self, run, model, image, cause):
        self.run, self.model, self.image, self.cause = run, model, image, cause
        where = f"run {run}"
        if model is not None:
            where += f", model {model}"
        if image is not None:
            where += f", image {image}"
        super().__init__(f"{where}: {cause}")


@dataclass(frozen=True)
class ExperimentConfig:
    manifest_path: str
    models: tuple[str, ...] = MODEL_NAMES
    n: int = 10
    rate: float = 0.1
    runs: int = 5
    base_seed: int = 42
    threshold: float = 0.5
    out_dir: str = "results"
    block_rows: int = 8192
    svc_row_cap: int = 20_000
    save_models: bool = False

    def __post_init__(self):
        bad = [m for m in self.models if m not in MODEL_NAMES]
        if bad:
            raise ValueError(f"unknown models {bad}; choose from {MODEL_NAMES}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not (0.0 < self.rate <= 1.0):
            raise ValueError("rate must be in (0, 1]")
        if not (0.0 <= self.threshold <= 1.0):
            raise ValueError("threshold must lie in [0, 1]")
        if self.block_rows < 1:
            raise ValueError("block_rows must be >= 1")


@dataclass(frozen=True)
class Manifest:
    """Train/test file lists plus geometry echoed from the first container."""

    train_paths: tuple[str, ...]
    test_paths: tuple[str, ...]
    input_h: int
    input_w: int
    tap_channels: tuple[int, ...]

    @property
    def expected_channels(self) -> int:
        return sum(self.tap_channels)

    def hyper_config(self, rate: float = 1.0) -> HypercolumnConfig:
        return HypercolumnConfig(
            input_h=self.input_h, input_w=self.input_w,
            expected_taps=len(self.tap_channels),
            expected_channels=self.expected_channels,
            subsample_rate=rate,
        )


def load_manifest(path) -> Manifest:
    """Parse ``train <path>`` / ``test <path>`` lines (relative to the file)."""
    base = os.path.dirname(os.path.abspath(path))
    train, test = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                split, rel = line.split(None, 1)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected '<split> <path>'")
            full = rel if os.path.isabs(rel) else os.path.join(base, rel)
            if split == "train":
                train.append(full)
            elif split == "test":
                test.append(full)
            else:
                raise ValueError(f"{path}:{lineno}: unknown split {split!r}")
    if not train or not test:
        raise ValueError(f"{path}: manifest needs at least one train and one test entry")
    head = read_header(train[0])
    shapes = head["shapes"]
    taps = [shapes[f"tap{k}"] for k in range(len(shapes) - 1)]
    mask_h, mask_w = shapes["mask"]
    return Manifest(
        train_paths=tuple(train),
        test_paths=tuple(test),
        input_h=int(mask_h),
        input_w=int(mask_w),
        tap_channels=tuple(int(t[0]) for t in taps),
    )


def validate_manifest(manifest: Manifest) -> list[str]:
    """Existence, split disjointness and per-file sample validation."""
    problems = []
    overlap = set(manifest.train_paths) & set(manifest.test_paths)
    for p in sorted(overlap):
        problems.append(f"{p}: listed in both train and test splits")
    cfg = manifest.hyper_config()
    for path in list(manifest.train_paths) + list(manifest.test_paths):
        if not os.path.exists(path):
            problems.append(f"{path}: file missing")
            continue
        try:
            sample = read_container_file(path)
        except Exception as exc:
            problems.append(f"{path}: {exc}")
            continue
        for v in validate_sample(sample, cfg):
            problems.append(f"{path}: {v}")
    return problems


def sample_training_subset(manifest: Manifest, n: int, run_index: int,
                           base_seed: int) -> tuple[str, ...]:
    """Uniform without-replacement draw of n training paths for one run."""
    size = len(manifest.train_paths)
    if n > size:
        raise ValueError(f"requested {n} training images, manifest has {size}")
    rng = rng_for("subset", base_seed, run_index)
    order = rng.permutation(size)[:n]
    return tuple(manifest.train_paths[i] for i in order)


def build_sparse_training(paths, hcfg: HypercolumnConfig, rate: float,
                          seed: int) -> LabeledPixels:
    """Stratified sparse hypercolumn over N images without holding all N dense.

    Equivalent to dense-build + concat + stratified_subsample: labels for all
    images are read first (masks are cheap), the global row selection is made,
    then each image's dense matrix is materialized alone and only its selected
    rows are copied out.
    """
    paths = list(paths)
    px = hcfg.input_h * hcfg.input_w
    masks = [read_mask(p) for p in paths]
    labels = np.concatenate([m.reshape(px) for m in masks])
    idx = select_stratified_indices(labels, rate, seed)

    feats = np.empty((idx.size, hcfg.expected_channels), dtype=np.float32)
    row_image = np.empty(idx.size, dtype=np.int32)
    row_pixel = np.empty(idx.size, dtype=np.int32)
    image_ids = []
    cursor = 0
    for i, path in enumerate(paths):
        lo = np.searchsorted(idx, i * px, side="left")
        hi = np.searchsorted(idx, (i + 1) * px, side="left")
        sample = read_container_file(path)
        image_ids.append(sample.image_id)
        if hi == lo:
            continue
        local = (idx[lo:hi] - i * px).astype(np.int64)
        dense = build_dense_hypercolumn(sample, hcfg)
        feats[cursor : cursor + local.size] = dense.features[local]
        row_image[cursor : cursor + local.size] = i
        row_pixel[cursor : cursor + local.size] = local
        cursor += local.size
    return LabeledPixels(
        features=feats,
        labels=labels[idx],
        image_ids=tuple(image_ids),
        row_image=row_image,
        row_pixel=row_pixel,
    )


def cap_rows(lp: LabeledPixels, cap: int, seed: int) -> LabeledPixels:
    """Stratified reduction of a training matrix to at most ``cap`` rows."""
    if lp.rows <= cap:
        return lp
    rate = cap / lp.rows
    idx = select_stratified_indices(lp.labels, rate, seed)
    if idx.size > cap:
        # rounding overshoot: trim highest-index rows of the majority class
        neg, pos = lp.class_counts()
        major = 0 if neg >= pos else 1
        extra = idx.size - cap
        drop = np.flatnonzero(lp.labels[idx] == major)[-extra:]
        idx = np.delete(idx, drop)
    return lp.take(idx)


def _fit_roster_model(name: str, lp: LabeledPixels, cfg: ExperimentConfig,
                      run: int):
    seed = derive_seed(cfg.base_seed, "fit", run, name)
    train = lp
    if name in _SVC_BEARING and lp.rows > cfg.svc_row_cap:
        train = cap_rows(lp, cfg.svc_row_cap,
                         derive_seed(cfg.base_seed, "svccap", run, name))
    X, y = train.features, train.labels
    if name == "LR":
        return fit_classifier(X, y, lr_config(seed=seed))
    if name == "RF":
        return fit_classifier(X, y, rf_config(seed=seed))
    if name == "SVC":
        return fit_classifier(X, y, rbf_svc_config(seed=seed),
                              row_cap=cfg.svc_row_cap)
    if name == "voting":
        return fit_voting(X, y, VotingConfig(seed=seed), row_cap=cfg.svc_row_cap)
    if name == "stacking":
        return fit_stacking(X, y, StackingConfig(seed=seed), row_cap=cfg.svc_row_cap)
    raise ValueError(f"unknown model {name!r}")


def score_pixels(model, features: np.ndarray, block_rows: int) -> np.ndarray:
    """Scores over a pixel matrix, computed in row blocks of ``block_rows``."""
    out = np.empty(features.shape[0], dtype=np.float64)
    for lo in range(0, features.shape[0], block_rows):
        hi = min(lo + block_rows, features.shape[0])
        out[lo:hi] = predict_scores(model, features[lo:hi])
    return out


def predict_image(model, sample: Sample, hcfg: HypercolumnConfig,
                  block_rows: int = 8192, threshold: float = 0.5) -> np.ndarray:
    """Classify every pixel of one image; returns an (H, W) uint8 mask."""
    dense = build_dense_hypercolumn(sample, hcfg)
    if dense.cols != model.dim:
        raise ValueError(
            f"hypercolumn width {dense.cols} does not match model dim {model.dim}"
        )
    scores = score_pixels(model, dense.features, block_rows)
    mask = (scores >= threshold).astype(np.uint8)
    return mask.reshape(hcfg.input_h, hcfg.input_w)


@dataclass
class ExperimentResult:
    """Per-run, per-model, per-image metric rows plus config echo."""

    models: tuple[str, ...]
    out_dir: str
    test_ids: tuple[str, ...]
    rows: list[list[tuple[str, str, MetricVector]]]  # run -> (model, image, metrics)

    def per_image_metrics(self, model: str) -> list[list[MetricVector]]:
        out = []
        for run_rows in self.rows:
            out.append([mv for m, _, mv in run_rows if m == model])
        return out

    def summary(self, model: str) -> RunSummary:
        return aggregate_runs(self.per_image_metrics(model))

    def dice_pairs(self, model: str) -> np.ndarray:
        """Per-image Dice pooled across runs, in run-major image order."""
        return np.array(
            [mv.dice for run_rows in self.rows for m, _, mv in run_rows if m == model]
        )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Execute the full pipeline and persist result tables under cfg.out_dir."""
    manifest = load_manifest(cfg.manifest_path)
    if cfg.n > len(manifest.train_paths):
        raise ValueError(
            f"n={cfg.n} exceeds training-set size {len(manifest.train_paths)}"
        )
    hcfg = manifest.hyper_config(cfg.rate)
    test_ids = tuple(read_header(p)["image_id"] for p in manifest.test_paths)

    rows: list[list[tuple[str, str, MetricVector]]] = []
    for run in range(cfg.runs):
        try:
            subset = sample_training_subset(manifest, cfg.n, run, cfg.base_seed)
            sparse = build_sparse_training(
                subset, hcfg, cfg.rate, derive_seed(cfg.base_seed, "subsample", run)
            )
        except Exception as exc:
            raise ExperimentError(run, None, None, exc) from exc

        models = {}
        for name in cfg.models:
            try:
                models[name] = _fit_roster_model(name, sparse, cfg, run)
            except Exception as exc:
                raise ExperimentError(run, name, None, exc) from exc

        def eval_one(path_id):
            path, image_id = path_id
            sample = read_container_file(path)
            dense = build_dense_hypercolumn(sample, hcfg)
            gt = sample.mask
            out = []
            for name in cfg.models:
                scores = score_pixels(models[name], dense.features, cfg.block_rows)
                pred = (scores >= cfg.threshold).astype(np.uint8)
                pred = pred.reshape(hcfg.input_h, hcfg.input_w)
                out.append((name, image_id,
                            segmentation_metrics(confusion_counts(pred, gt))))
            return out

        jobs = list(zip(manifest.test_paths, test_ids))
        run_rows: list[tuple[str, str, MetricVector]] = []
        workers = min(thread_count(), len(jobs)) or 1
        try:
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    per_image = list(pool.map(eval_one, jobs))
            else:
                per_image = [eval_one(j) for j in jobs]
        except Exception as exc:
            raise ExperimentError(run, None, "test evaluation", exc) from exc
        # regroup image-major results into model-major row order
        for name in cfg.models:
            for image_result in per_image:
                for m, image_id, mv in image_result:
                    if m == name:
                        run_rows.append((m, image_id, mv))
        rows.append(run_rows)

        if cfg.save_models:
            mdir = os.path.join(cfg.out_dir, "models", f"run{run}")
            os.makedirs(mdir, exist_ok=True)
            for name in cfg.models:
                save_model_file(models[name], os.path.join(mdir, f"{name}.hcm"))

    result = ExperimentResult(models=cfg.models, out_dir=cfg.out_dir,
                              test_ids=test_ids, rows=rows)
    write_result_files(result)
    return result


# ---------------------------------------------------------------------------
# result persistence and reporting

_CONVENTION_NOTES = (
    "# std is the population standard deviation of per-run means",
    "# training subsets depend on (seed, run) only, so subsampling rates share subsets",
    "# RBF-kernel training rows are capped (stratified) at svc_row_cap for SVC/voting",
    "# Wilcoxon pairs are per-test-image Dice values pooled over runs",
)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_result_files(result: ExperimentResult) -> None:
    """One machine-readable TSV per run plus a rendered summary table."""
    os.makedirs(result.out_dir, exist_ok=True)
    for run, run_rows in enumerate(result.rows):
        path = os.path.join(result.out_dir, f"run_{run}.tsv")
        with open(path, "w") as fh:
            fh.write("model\timage_id\t" + "\t".join(METRIC_NAMES) + "\n")
            for model, image_id, mv in run_rows:
                cells = "\t".join(_fmt(v) for v in mv.as_tuple())
                fh.write(f"{model}\t{image_id}\t{cells}\n")
    write_summary(result)


def write_summary(result: ExperimentResult) -> str:
    path = os.path.join(result.out_dir, "summary.tsv")
    with open(path, "w") as fh:
        fh.write("model\t" + "\t".join(METRIC_NAMES) + "\n")
        for model in result.models:
            s = result.summary(model)
            cells = [
                f"{mean:.2f} ± {std:.2f}"
                for mean, std in zip(s.mean.as_tuple(), s.std.as_tuple())
            ]
            fh.write(model + "\t" + "\t".join(cells) + "\n")
        for note in _CONVENTION_NOTES:
            fh.write(note + "\n")
    return path


def write_comparisons(result: ExperimentResult, pairs: list[tuple[str, str]]) -> str:
    """Pairwise Dice gains and Wilcoxon signed-rank p-values."""
    path = os.path.join(result.out_dir, "comparisons.tsv")
    with open(path, "w") as fh:
        fh.write("candidate\tbaseline\tdice_gain_pct\twilcoxon_w\tp_value\tpairs\n")
        for cand, base in pairs:
            a = result.dice_pairs(cand)
            b = result.dice_pairs(base)
            gain = relative_gain(result.summary(cand).mean.dice,
                                 result.summary(base).mean.dice)
            try:
                w, p = wilcoxon_signed_rank(a, b)
                w_cell, p_cell = _fmt(w), f"{p:.2e}"
            except DegenerateSampleError:
                w_cell, p_cell = "degenerate", "degenerate"
            fh.write(f"{cand}\t{base}\t{gain:.2f}\t{w_cell}\t{p_cell}\t{a.size}\n")
    return path


def load_results(out_dir, models: tuple[str, ...] = ()) -> ExperimentResult:
    """Rebuild a result bundle from the run_*.tsv files in a directory."""
    run_files = sorted(
        f for f in os.listdir(out_dir) if f.startswith("run_") and f.endswith(".tsv")
    )
    if not run_files:
        raise FileNotFoundError(f"no run_*.tsv files in {out_dir}")
    rows = []
    model_order: list[str] = []
    image_order: list[str] = []
    for fname in run_files:
        run_rows = []
        with open(os.path.join(out_dir, fname)) as fh:
            header = fh.readline()
            if not header.startswith("model\timage_id"):
                raise ValueError(f"{fname}: unexpected header {header!r}")
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                model, image_id = parts[0], parts[1]
                mv = MetricVector(*(float(v) for v in parts[2:7]))
                run_rows.append((model, image_id, mv))
                if model not in model_order:
                    model_order.append(model)
                if image_id not in image_order:
                    image_order.append(image_id)
        rows.append(run_rows)
    return ExperimentResult(models=tuple(model_order), out_dir=str(out_dir),
                            test_ids=tuple(image_order), rows=rows)
