"""Command-line entry point: per-stage subcommands plus the end-to-end run.

Exit codes: 0 success, 2 format error, 3 parameter/config error, 4 numerical
error, 5 unusable data, 1 anything else. All JSON outputs embed the
configuration hash; identical inputs, config and seed give byte-identical
outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import data_io, graph_denoise, preprocess, selection, svm, synth
from .config import PipelineConfig
from .errors import FormatError, GaitBreathError, ParameterError
from .features import FEATURE_NAMES, extract_features, feature_dict
from .roi import build_rois, extract_raw_channels

STAGES = ("extract", "preprocess", "denoise", "select", "features", "predict")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GaitBreathError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitbreath",
        description="Identify deep breathing from depth-camera recordings of a walking person.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute the six raw channels from a sample directory")
    p.add_argument("--sample", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--chestwall-side", choices=("left", "right"), default=None)
    _add_config(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("preprocess", help="repair outliers, detrend and bandpass the channels")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--zthresh", type=float, default=None)
    _add_config(p)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("denoise", help="graph spatial-temporal smoothing with a learned metric")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--trace", default=None, help="write the per-iteration objective as CSV")
    _add_config(p)
    p.set_defaults(func=_cmd_denoise)

    p = sub.add_parser("select", help="pick the most periodic channel")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None, help="write per-channel indices as JSON")
    _add_config(p)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("features", help="compute the 15-dimensional descriptor")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_config(p)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train the linear SVM from per-sample feature files")
    p.add_argument("--features", required=True, help="directory of <sample_id>.json feature files")
    p.add_argument("--labels", required=True, help="dataset manifest supplying labels")
    p.add_argument("--out", required=True)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_config(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="classify one feature file with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", default=None)
    _add_config(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("run", help="run the full pipeline on a sample or a dataset manifest")
    p.add_argument("--sample", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default=None, help="existing model for prediction")
    p.add_argument("--stop-after", choices=STAGES, default=None)
    _add_config(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    p.add_argument("--config", default=None, help="synth config JSON (defaults when omitted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bench", help="run the subject-disjoint split protocol on the full pipeline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--splits", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_config(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("ablate", help="compare the four extraction/processing variants")
    p.add_argument("--dataset", required=True)
    p.add_argument("--splits", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_config(p)
    p.set_defaults(func=_cmd_ablate)

    return parser


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="pipeline config JSON overriding defaults")


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig() if getattr(args, "config", None) is None else PipelineConfig.from_file(args.config)
    overrides = {
        "chestwall_side": getattr(args, "chestwall_side", None),
        "filter_order": getattr(args, "order", None),
        "z_thresh": getattr(args, "zthresh", None),
        "mu": getattr(args, "mu", None),
        "window": getattr(args, "window", None),
        "gsa_max_iters": getattr(args, "max_iters", None),
        "svm_c": getattr(args, "C", None),
        "seed": getattr(args, "seed", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg.validate()


# ---------------------------------------------------------------------------
# stage commands


def _cmd_extract(args) -> int:
    cfg = _load_config(args)
    sample = data_io.read_depth_sample(args.sample)
    rois = build_rois(sample.joints, sample.depth.width, sample.depth.height, cfg.chestwall_side)
    raw = extract_raw_channels(sample.depth, rois)
    data_io.write_channels(raw, args.out)
    return 0


def _cmd_preprocess(args) -> int:
    cfg = _load_config(args)
    raw = data_io.read_channels(args.infile)
    clean = preprocess.preprocess_all(
        raw, z_thresh=cfg.z_thresh, order=cfg.filter_order, band=cfg.band, pad_seconds=cfg.pad_seconds
    )
    data_io.write_channels(data_io.matrix_to_channels(
        data_io.ChannelMatrix(frame_rate=clean.frame_rate, values=clean.values, usable=clean.usable)
    ), args.out)
    return 0


def _cmd_denoise(args) -> int:
    cfg = _load_config(args)
    matrix = data_io.channels_to_matrix(data_io.read_channels(args.infile))
    clean = preprocess.CleanChannels(
        frame_rate=matrix.frame_rate, values=matrix.values, usable=matrix.usable
    )
    result = graph_denoise.denoise(
        clean,
        mu=cfg.mu,
        window=cfg.window,
        alpha0=cfg.alpha0,
        step_up=cfg.step_up,
        max_iters=cfg.gsa_max_iters,
        tol=cfg.gsa_tol,
        dense=cfg.gsa_dense,
    )
    data_io.write_channels(data_io.matrix_to_channels(
        data_io.ChannelMatrix(frame_rate=clean.frame_rate, values=result.denoised, usable=clean.usable)
    ), args.out)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write("iteration,objective\n")
            for k, value in enumerate(result.objective_trace):
                f.write(f"{k},{format(value, '.17g')}\n")
    return 0


def _cmd_select(args) -> int:
    cfg = _load_config(args)
    matrix = data_io.channels_to_matrix(data_io.read_channels(args.infile))
    fs = matrix.frame_rate
    chosen = selection.select_informative(
        matrix.values,
        fs,
        usable=matrix.usable,
        band=cfg.band,
        nperseg=cfg.nperseg(matrix.values.shape[1], fs),
        overlap=cfg.welch_overlap,
        window=cfg.welch_window,
    )
    t = np.arange(chosen.signal.size) / fs
    data_io.write_signal(t, chosen.signal, args.out)
    if args.report:
        data_io.write_json(
            args.report,
            {
                "chosen": chosen.channel_name,
                "indices": {
                    name: float(v) for name, v in zip(data_io.CHANNEL_NAMES, chosen.indices)
                },
                "config_sha256": cfg.hash(),
            },
        )
    return 0


def _cmd_features(args) -> int:
    cfg = _load_config(args)
    values, fs = data_io.read_signal(args.infile)
    vec = extract_features(
        values,
        fs,
        band=cfg.band,
        nperseg=cfg.nperseg(values.size, fs),
        overlap=cfg.welch_overlap,
        window=cfg.welch_window,
    )
    data_io.write_json(
        args.out,
        {"features": feature_dict(vec), "order": list(FEATURE_NAMES), "config_sha256": cfg.hash()},
    )
    return 0


def _read_feature_file(path) -> np.ndarray:
    doc = data_io.read_json(path)
    if "features" not in doc:
        raise FormatError(f"{path} has no 'features' object")
    order = doc.get("order", list(FEATURE_NAMES))
    missing = [name for name in order if name not in doc["features"]]
    if missing:
        raise FormatError(f"{path} missing feature values for {missing}")
    return np.array([float(doc["features"][name]) for name in order])


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    feature_dir = Path(args.features)
    rows, labels = [], []
    for sample_dir in data_io.read_manifest(args.labels):
        meta = data_io.read_json(Path(sample_dir) / "meta.json")
        if "label" not in meta:
            raise FormatError(f"{sample_dir}/meta.json has no label")
        feature_file = feature_dir / f"{Path(sample_dir).name}.json"
        rows.append(_read_feature_file(feature_file))
        labels.append(meta["label"])
    model = svm.train_svm(np.vstack(rows), labels, C=cfg.svm_c, tol=cfg.svm_tol, seed=cfg.seed)
    model.extras["config_sha256"] = cfg.hash()
    svm.save_model(model, args.out)
    return 0


def _cmd_predict(args) -> int:
    cfg = _load_config(args)
    model = svm.load_model(args.model)
    vec = _read_feature_file(args.features)
    label, margin = svm.predict(model, vec)
    result = {"label": label, "margin": margin, "config_sha256": cfg.hash()}
    if args.out:
        data_io.write_json(args.out, result)
    else:
        print(f"{label} margin={margin:.6f}")
    return 0


# ---------------------------------------------------------------------------
# pipeline run


def _cmd_run(args) -> int:
    if (args.sample is None) == (args.manifest is None):
        raise ParameterError("run needs exactly one of --sample or --manifest")
    cfg = _load_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.sample is not None:
        return _run_one(Path(args.sample), out_dir, cfg, args.model, args.stop_after)
    return _run_dataset(Path(args.manifest), out_dir, cfg, args.model, args.stop_after)


def _run_one(sample_dir: Path, out_dir: Path, cfg: PipelineConfig, model_path, stop_after) -> int:
    stage = "extract"
    try:
        sample = data_io.read_depth_sample(sample_dir)
        rois = build_rois(sample.joints, sample.depth.width, sample.depth.height, cfg.chestwall_side)
        raw = extract_raw_channels(sample.depth, rois)
        data_io.write_channels(raw, out_dir / "channels.csv")
        if stop_after == "extract":
            return 0

        stage = "preprocess"
        clean = preprocess.preprocess_all(
            raw, z_thresh=cfg.z_thresh, order=cfg.filter_order, band=cfg.band, pad_seconds=cfg.pad_seconds
        )
        data_io.write_channels(data_io.matrix_to_channels(
            data_io.ChannelMatrix(frame_rate=clean.frame_rate, values=clean.values, usable=clean.usable)
        ), out_dir / "clean.csv")
        if stop_after == "preprocess":
            return 0

        stage = "denoise"
        result = graph_denoise.denoise(
            clean,
            mu=cfg.mu,
            window=cfg.window,
            alpha0=cfg.alpha0,
            step_up=cfg.step_up,
            max_iters=cfg.gsa_max_iters,
            tol=cfg.gsa_tol,
            dense=cfg.gsa_dense,
        )
        data_io.write_channels(data_io.matrix_to_channels(
            data_io.ChannelMatrix(frame_rate=clean.frame_rate, values=result.denoised, usable=clean.usable)
        ), out_dir / "denoised.csv")
        if stop_after == "denoise":
            return 0

        stage = "select"
        fs = clean.frame_rate
        chosen = selection.select_informative(
            result.denoised,
            fs,
            usable=clean.usable,
            band=cfg.band,
            nperseg=cfg.nperseg(result.denoised.shape[1], fs),
            overlap=cfg.welch_overlap,
            window=cfg.welch_window,
        )
        t = np.arange(chosen.signal.size) / fs
        data_io.write_signal(t, chosen.signal, out_dir / "selected.csv")
        data_io.write_json(
            out_dir / "indices.json",
            {
                "chosen": chosen.channel_name,
                "indices": {n: float(v) for n, v in zip(data_io.CHANNEL_NAMES, chosen.indices)},
                "config_sha256": cfg.hash(),
            },
        )
        if stop_after == "select":
            return 0

        stage = "features"
        vec = extract_features(
            chosen.signal,
            fs,
            band=cfg.band,
            nperseg=cfg.nperseg(chosen.signal.size, fs),
            overlap=cfg.welch_overlap,
            window=cfg.welch_window,
        )
        data_io.write_json(
            out_dir / "features.json",
            {"features": feature_dict(vec), "order": list(FEATURE_NAMES), "config_sha256": cfg.hash()},
        )
        if stop_after == "features" or model_path is None:
            return 0

        stage = "predict"
        model = svm.load_model(model_path)
        label, margin = svm.predict(model, vec)
        data_io.write_json(
            out_dir / "prediction.json",
            {
                "sample": sample.id,
                "true_label": sample.label,
                "label": label,
                "margin": margin,
                "config_sha256": cfg.hash(),
            },
        )
        return 0
    except GaitBreathError as e:
        data_io.write_json(out_dir / "failure.json", {"stage": stage, "error": str(e)})
        raise type(e)(f"stage '{stage}' failed: {e}") from e


def _run_dataset(manifest: Path, out_dir: Path, cfg: PipelineConfig, model_path, stop_after) -> int:
    sample_dirs = data_io.read_manifest(manifest)
    classify = stop_after in (None, "predict")
    features_dir = out_dir / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    rows, labels, ids = [], [], []
    for sample_dir in sample_dirs:
        sample_out = out_dir / "samples" / Path(sample_dir).name
        sample_out.mkdir(parents=True, exist_ok=True)
        code = _run_one(Path(sample_dir), sample_out, cfg, None, stop_after)
        if code != 0:
            return code
        if not classify:
            continue
        doc = data_io.read_json(sample_out / "features.json")
        data_io.write_json(features_dir / f"{Path(sample_dir).name}.json", doc)
        rows.append(_read_feature_file(sample_out / "features.json"))
        labels.append(data_io.read_json(Path(sample_dir) / "meta.json")["label"])
        ids.append(Path(sample_dir).name)
    if not classify or not rows:
        return 0

    X = np.vstack(rows)
    if model_path is not None:
        model = svm.load_model(model_path)
    else:
        model = svm.train_svm(X, labels, C=cfg.svm_c, tol=cfg.svm_tol, seed=cfg.seed)
        model.extras["config_sha256"] = cfg.hash()
        svm.save_model(model, out_dir / "model.json")
    predictions = []
    for sample_id, truth, vec in zip(ids, labels, X):
        label, margin = svm.predict(model, vec)
        predictions.append(
            {"sample": sample_id, "true_label": truth, "label": label, "margin": margin}
        )
    data_io.write_json(
        out_dir / "predictions.json",
        {"predictions": predictions, "config_sha256": cfg.hash()},
    )
    return 0


# ---------------------------------------------------------------------------
# synthetic benchmark


def _cmd_synth(args) -> int:
    cfg = synth.SynthConfig() if args.config is None else synth.SynthConfig.from_dict(
        data_io.read_json(args.config)
    )
    samples = synth.generate_dataset(cfg)
    synth.write_dataset(samples, args.out, config=cfg)
    return 0


def _load_dataset(dataset_arg: str):
    path = Path(dataset_arg)
    manifest = path / "manifest.json" if path.is_dir() else path
    return [data_io.read_depth_sample(p) for p in data_io.read_manifest(manifest)]


def _cmd_bench(args) -> int:
    cfg = _load_config(args)
    samples = _load_dataset(args.dataset)
    tables = bench_mod.prepare_features(samples, cfg, variants=[bench_mod.FULL_PIPELINE])
    result = bench_mod.run_protocol(
        tables[bench_mod.FULL_PIPELINE], args.splits, cfg.seed, C=cfg.svm_c, tol=cfg.svm_tol
    )
    extraction, processing = bench_mod.FULL_PIPELINE
    report = {
        "rows": [
            {"extraction": extraction, "processing": processing, "metrics": result.metrics}
        ],
        "n_splits": result.n_splits,
        "resampled_splits": result.resampled,
        "seed": cfg.seed,
        "config_sha256": cfg.hash(),
    }
    data_io.write_json(args.out, report)
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_config(args)
    samples = _load_dataset(args.dataset)
    report = bench_mod.run_ablation(samples, cfg, args.splits, cfg.seed)
    doc = report.as_dict()
    doc["config_sha256"] = cfg.hash()
    data_io.write_json(args.out, doc)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
