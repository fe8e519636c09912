"""Evaluation protocol: subject-disjoint random splits and pipeline ablations.

Four pipeline variants are compared: {multi-ROI + selection, single ROI}
crossed with {bandpass only, bandpass + graph denoising}. The single-ROI
variant keeps only the chest-minus-pelvis channel. All variants are scored
on the same train/test splits so differences come from the pipeline alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .data_io import DepthSample, RawChannels
from .errors import ParameterError
from .features import extract_features
from .graph_denoise import denoise
from .preprocess import CleanChannels, preprocess_matrix
from .roi import build_rois, extract_raw_channels
from .selection import select_informative
from .svm import Metrics, evaluate, predict, train_svm

EXTRACTIONS = ("multi_roi_selection", "single_roi")
PROCESSINGS = ("bandpass_gsa", "bandpass")
FULL_PIPELINE = ("multi_roi_selection", "bandpass_gsa")

_METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass
class FeatureTable:
    """Per-sample features and bookkeeping for one pipeline variant."""

    X: np.ndarray  # (n_samples, 15)
    labels: np.ndarray  # (n_samples,) str
    subjects: np.ndarray  # (n_samples,) str
    sample_ids: np.ndarray  # (n_samples,) str
    objective_traces: list = field(default_factory=list)  # one per denoised sample


@dataclass
class ProtocolResult:
    metrics: dict  # name -> {"mean": float, "std": float}
    n_splits: int
    resampled: int
    per_split: list = field(default_factory=list)  # Metrics per split

    def as_dict(self) -> dict:
        return {
            "metrics": self.metrics,
            "n_splits": self.n_splits,
            "resampled_splits": self.resampled,
        }


@dataclass
class AblationReport:
    rows: list  # [{"extraction", "processing", "metrics"}]
    n_splits: int
    seed: int

    def row(self, extraction: str, processing: str) -> dict:
        for row in self.rows:
            if row["extraction"] == extraction and row["processing"] == processing:
                return row
        raise KeyError((extraction, processing))

    def as_dict(self) -> dict:
        return {"rows": self.rows, "n_splits": self.n_splits, "seed": self.seed}


def extract_sample(sample: DepthSample, cfg: PipelineConfig) -> RawChannels:
    rois = build_rois(sample.joints, sample.depth.width, sample.depth.height, cfg.chestwall_side)
    return extract_raw_channels(sample.depth, rois)


def clean_for_variant(raw: RawChannels, cfg: PipelineConfig, extraction: str) -> CleanChannels:
    values, valid = raw.values, raw.valid
    if extraction == "single_roi":
        values, valid = values[:1], valid[:1]  # chest-minus-pelvis channel only
    elif extraction != "multi_roi_selection":
        raise ParameterError(f"unknown extraction '{extraction}'")
    return preprocess_matrix(
        values,
        valid,
        raw.frame_rate,
        z_thresh=cfg.z_thresh,
        order=cfg.filter_order,
        band=cfg.band,
        pad_seconds=cfg.pad_seconds,
    )


def variant_signal(clean: CleanChannels, cfg: PipelineConfig, processing: str):
    """Denoise (optionally) and select; returns (signal, objective_trace_or_None)."""
    trace = None
    if processing == "bandpass_gsa":
        result = denoise(
            clean,
            mu=cfg.mu,
            window=cfg.window,
            alpha0=cfg.alpha0,
            step_up=cfg.step_up,
            max_iters=cfg.gsa_max_iters,
            tol=cfg.gsa_tol,
            dense=cfg.gsa_dense,
        )
        matrix = result.denoised
        trace = result.objective_trace
    elif processing == "bandpass":
        matrix = clean.values
    else:
        raise ParameterError(f"unknown processing '{processing}'")
    fs = clean.frame_rate
    chosen = select_informative(
        matrix,
        fs,
        usable=clean.usable,
        band=cfg.band,
        nperseg=cfg.nperseg(matrix.shape[1], fs),
        overlap=cfg.welch_overlap,
        window=cfg.welch_window,
    )
    return chosen.signal, trace


def sample_signal(sample: DepthSample, cfg: PipelineConfig, extraction: str, processing: str):
    """Full per-sample front end: extract -> preprocess -> denoise -> select."""
    raw = extract_sample(sample, cfg)
    clean = clean_for_variant(raw, cfg, extraction)
    signal, trace = variant_signal(clean, cfg, processing)
    return signal, raw.frame_rate, trace


def prepare_features(samples, cfg: PipelineConfig, variants=None) -> dict:
    """Feature tables per variant, sharing extraction and preprocessing work."""
    if variants is None:
        variants = [(e, p) for e in EXTRACTIONS for p in PROCESSINGS]
    n = len(samples)
    tables = {
        v: FeatureTable(
            X=np.zeros((n, 15)),
            labels=np.empty(n, dtype=object),
            subjects=np.empty(n, dtype=object),
            sample_ids=np.empty(n, dtype=object),
        )
        for v in variants
    }
    extractions = {e for e, _ in variants}
    for k, sample in enumerate(samples):
        raw = extract_sample(sample, cfg)
        cleans = {e: clean_for_variant(raw, cfg, e) for e in extractions}
        for extraction, processing in variants:
            signal, trace = variant_signal(cleans[extraction], cfg, processing)
            table = tables[(extraction, processing)]
            table.X[k] = extract_features(
                signal,
                raw.frame_rate,
                band=cfg.band,
                nperseg=cfg.nperseg(signal.size, raw.frame_rate),
                overlap=cfg.welch_overlap,
                window=cfg.welch_window,
            )
            table.labels[k] = sample.label
            table.subjects[k] = sample.subject_id
            table.sample_ids[k] = sample.id
            if trace is not None:
                table.objective_traces.append(trace)
    return tables


def _train_count(n_subjects: int) -> int:
    if n_subjects == 15:
        return 10
    return min(max(int(round(n_subjects * 2 / 3)), 1), n_subjects - 1)


def make_splits(subjects, n_splits: int, seed: int, labels=None):
    """Subject-disjoint random splits; degenerate draws are resampled and counted.

    Returns (splits, resampled) where each split is (train, test) frozensets of
    subject ids. A draw is degenerate when the train side misses a class or
    the test side is empty of samples.
    """
    subjects = np.asarray(subjects)
    unique = sorted(set(subjects.tolist()))
    if len(unique) < 2:
        raise ParameterError("need at least 2 subjects for a subject-disjoint split")
    n_train = _train_count(len(unique))
    rng = np.random.default_rng(seed)
    splits = []
    resampled = 0
    attempts_cap = max(100 * n_splits, 100)
    attempts = 0
    while len(splits) < n_splits:
        attempts += 1
        if attempts > attempts_cap:
            raise ParameterError("could not draw enough non-degenerate subject splits")
        perm = rng.permutation(unique)
        train = frozenset(perm[:n_train])
        test = frozenset(perm[n_train:])
        if labels is not None:
            train_labels = {l for l, s in zip(labels, subjects) if s in train}
            test_count = sum(s in test for s in subjects)
            if len(train_labels) < 2 or test_count == 0:
                resampled += 1
                continue
        splits.append((train, test))
    return splits, resampled


def _aggregate(per_split) -> dict:
    # sort before reducing so aggregation is invariant to split execution order
    out = {}
    for name in _METRIC_NAMES:
        vals = np.sort(np.array([getattr(m, name) for m in per_split]))
        out[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def evaluate_splits(table: FeatureTable, splits, C: float = 1.0, tol: float = 1e-4) -> list[Metrics]:
    """Train on each split's train subjects and score its test subjects."""
    results = []
    for train_subjects, test_subjects in splits:
        if train_subjects & test_subjects:
            raise ParameterError("subject leak: train and test subjects overlap")
        in_train = np.array([s in train_subjects for s in table.subjects])
        in_test = np.array([s in test_subjects for s in table.subjects])
        if (in_train & in_test).any():
            raise ParameterError("subject leak: a sample landed in both train and test")
        model = train_svm(table.X[in_train], table.labels[in_train], C=C, tol=tol)
        preds = [predict(model, x)[0] for x in table.X[in_test]]
        results.append(evaluate(preds, table.labels[in_test]))
    return results


def run_protocol(
    table: FeatureTable, n_splits: int, seed: int, C: float = 1.0, tol: float = 1e-4
) -> ProtocolResult:
    splits, resampled = make_splits(table.subjects, n_splits, seed, labels=table.labels)
    per_split = evaluate_splits(table, splits, C=C, tol=tol)
    return ProtocolResult(
        metrics=_aggregate(per_split), n_splits=n_splits, resampled=resampled, per_split=per_split
    )


def run_ablation(samples, cfg: PipelineConfig, n_splits: int, seed: int) -> AblationReport:
    """Score all four variants on identical subject-disjoint splits."""
    tables = prepare_features(samples, cfg)
    return ablation_from_tables(tables, cfg, n_splits, seed)


def ablation_from_tables(tables: dict, cfg: PipelineConfig, n_splits: int, seed: int) -> AblationReport:
    any_table = next(iter(tables.values()))
    splits, _ = make_splits(any_table.subjects, n_splits, seed, labels=any_table.labels)
    rows = []
    for extraction, processing in tables:
        per_split = evaluate_splits(tables[(extraction, processing)], splits, C=cfg.svm_c, tol=cfg.svm_tol)
        rows.append(
            {"extraction": extraction, "processing": processing, "metrics": _aggregate(per_split)}
        )
    return AblationReport(rows=rows, n_splits=n_splits, seed=seed)
