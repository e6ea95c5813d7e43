"""Command-line pipeline: synth | build-graph | train | detect | evaluate |
report, driven by a key=value config file with per-field overrides."""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import causal, config as cfgmod, evaluation, forecaster, reports, scoring, series, synth
from .config import PipelineConfig
from .errors import CgadError, ConfigError, DataError, DimensionError


def _out_path(cfg: PipelineConfig, name: str) -> str:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def _require_file(path: str, what: str) -> str:
    if not path:
        raise ConfigError(f"no {what} configured")
    if not os.path.exists(path):
        raise DataError(f"{what} not found: {path}")
    return path


def _meta(cfg: PipelineConfig) -> dict[str, str]:
    return {"config-hash": cfg.config_hash()}


def cmd_synth(cfg: PipelineConfig) -> None:
    spec = cfg.synthetic_spec()
    train, test = synth.generate(spec)
    series.save_csv(train, _out_path(cfg, cfgmod.TRAIN_CSV))
    series.save_csv(test, _out_path(cfg, cfgmod.TEST_CSV))
    series.save_labels(test.labels, _out_path(cfg, cfgmod.TEST_LABELS))
    causal.save_graph(synth.truth_graph(spec), _out_path(cfg, cfgmod.TRUTH_GRAPH_FILE), _meta(cfg))
    print(f"synth: wrote train/test/labels/truth to {cfg.output_dir}")


def _train_series(cfg: PipelineConfig) -> series.MultivariateSeries:
    path = cfg.text("data", "train_csv") or os.path.join(cfg.output_dir, cfgmod.TRAIN_CSV)
    return series.load_csv(_require_file(path, "training CSV"))


def _test_series(cfg: PipelineConfig) -> series.MultivariateSeries:
    path = cfg.text("data", "test_csv") or os.path.join(cfg.output_dir, cfgmod.TEST_CSV)
    return series.load_csv(_require_file(path, "test CSV"))


def _labels_path(cfg: PipelineConfig) -> str:
    return cfg.text("data", "test_labels") or os.path.join(cfg.output_dir, cfgmod.TEST_LABELS)


def cmd_build_graph(cfg: PipelineConfig) -> None:
    train = _train_series(cfg)
    spec = series.fit_minmax(train)
    normalized = series.apply_minmax(train, spec)
    graph = causal.generate_graph(normalized, cfg.te_config())
    graph_path = _out_path(cfg, cfgmod.GRAPH_FILE)
    causal.save_graph(graph, graph_path, _meta(cfg))
    histograms = reports.reference_histograms(graph, cfg.seed)
    reports.write_degree_histogram_csv(_out_path(cfg, cfgmod.DEGREE_HIST_CSV), histograms)
    if cfg.value("report", "emit_svg"):
        reports.save_figure(
            reports.degree_histogram_figure(histograms), _out_path(cfg, cfgmod.DEGREE_HIST_SVG)
        )
    edges = int((graph.adjacency > 0).sum())
    print(f"build-graph: {graph.n_nodes} nodes, {edges} edges -> {graph_path}")


def cmd_train(cfg: PipelineConfig) -> None:
    train_full = _train_series(cfg)
    graph = causal.load_graph(
        _require_file(_out_path(cfg, cfgmod.GRAPH_FILE), "graph file")
    )
    if graph.node_names != train_full.sensor_names:
        raise DimensionError(
            "graph node names do not match the training CSV sensors"
        )
    norm = series.fit_minmax(train_full)
    normalized = series.apply_minmax(train_full, norm)
    train_part, val_part = series.split_train_val(
        normalized, cfg.value("train", "val_fraction")
    )
    mcfg = cfg.model_config()
    tcfg = cfg.train_config()
    train_batches = series.make_windows(train_part, mcfg.window_w, tcfg.batch_size)
    val_batches = series.make_windows(val_part, mcfg.window_w, tcfg.batch_size)
    model = forecaster.build_model(graph.adjacency, mcfg, norm)
    model, history = forecaster.train(model, train_batches, val_batches, tcfg)
    forecaster.save_model(model, _out_path(cfg, cfgmod.MODEL_FILE), _meta(cfg))
    with open(_out_path(cfg, cfgmod.LOSS_HISTORY_FILE), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "val_mse"])
        for row in history:
            writer.writerow([row.epoch, f"{row.train_mse:.17g}", f"{row.val_mse:.17g}"])
    best = min(history, key=lambda r: r.val_mse)
    print(
        f"train: {len(history)} epochs, best val MSE {best.val_mse:.6g} "
        f"at epoch {best.epoch}"
    )


def _forecast(model, batches) -> tuple[np.ndarray, np.ndarray]:
    preds = []
    times = []
    for batch in batches:
        preds.append(forecaster.model_forward(model, batch.inputs).data)
        times.append(batch.end_times)
    return np.concatenate(preds, axis=0), np.concatenate(times)


def cmd_detect(cfg: PipelineConfig) -> None:
    model = forecaster.load_model(
        _require_file(_out_path(cfg, cfgmod.MODEL_FILE), "model checkpoint")
    )
    test = _test_series(cfg)
    if test.n_sensors != model.n_nodes:
        raise DimensionError(
            f"test CSV has {test.n_sensors} sensors, model expects {model.n_nodes}"
        )
    if model.normalization is None:
        raise ConfigError("model checkpoint carries no normalization statistics")
    normalized = series.apply_minmax(test, model.normalization)
    tcfg = cfg.train_config()
    batches = series.make_windows(normalized, model.config.window_w, tcfg.batch_size)
    preds, time_index = _forecast(model, batches)
    actual = normalized.values[:, time_index].T

    median = mad = None
    if cfg.value("scoring", "stats_source") == "validation":
        median, mad = _validation_stats(cfg, model)
    elif cfg.value("scoring", "stats_source") != "test":
        raise ConfigError("scoring.stats_source must be 'test' or 'validation'")
    result = scoring.score_and_detect(preds.T, actual.T, cfg.pot_config(), median, mad)
    scores_path = _out_path(cfg, cfgmod.SCORES_FILE)
    scoring.save_scores(result, test.sensor_names, time_index, scores_path, _meta(cfg))
    print(
        f"detect: threshold {result.threshold:.6g}, "
        f"{int(result.decisions.sum())}/{result.decisions.size} anomalous -> {scores_path}"
    )


def _validation_stats(cfg: PipelineConfig, model) -> tuple[np.ndarray, np.ndarray]:
    """Median/MAD taken from forecast errors on the validation split."""
    train_full = _train_series(cfg)
    normalized = series.apply_minmax(train_full, model.normalization)
    _, val_part = series.split_train_val(normalized, cfg.value("train", "val_fraction"))
    batches = series.make_windows(
        val_part, model.config.window_w, cfg.train_config().batch_size
    )
    preds, time_index = _forecast(model, batches)
    errors = scoring.forecast_errors(preds.T, val_part.values[:, time_index])
    _, median, mad = scoring.mad_zscore(errors)
    return median, mad


def _aligned_labels(labels: np.ndarray, time_index: np.ndarray, count: int) -> np.ndarray:
    if labels.size == count:
        return labels
    if time_index.max() < labels.size:
        return labels[time_index]
    raise DimensionError(
        f"label file has {labels.size} entries; cannot align with {count} decisions"
    )


def cmd_evaluate(cfg: PipelineConfig, scores_path=None, labels_path=None) -> None:
    scores_path = _require_file(
        scores_path or _out_path(cfg, cfgmod.SCORES_FILE), "score file"
    )
    labels_path = _require_file(labels_path or _labels_path(cfg), "label file")
    result, _, time_index = scoring.load_scores(scores_path)
    labels = series.load_labels(labels_path)
    aligned = _aligned_labels(labels, time_index, result.decisions.size)
    report = evaluation.evaluate(result.decisions, aligned)
    evaluation.save_report(
        report, _out_path(cfg, cfgmod.REPORT_TEXT_FILE), _out_path(cfg, cfgmod.REPORT_CSV_FILE)
    )
    print(
        f"evaluate: F1={report.f1:.4f} F1c={report.f1_composite:.4f} "
        f"F1pa={report.f1_point_adjusted:.4f}"
    )


def cmd_report(cfg: PipelineConfig) -> None:
    scores_path = _require_file(_out_path(cfg, cfgmod.SCORES_FILE), "score file")
    labels_path = _require_file(_labels_path(cfg), "label file")
    result, names, time_index = scoring.load_scores(scores_path)
    labels = series.load_labels(labels_path)
    aligned = _aligned_labels(labels, time_index, result.decisions.size)

    fig = reports.per_node_scores_figure(result.per_node_scores, names, aligned)
    reports.save_figure(fig, _out_path(cfg, "per_node_scores.svg"))
    fig = reports.collective_figure(result.collective, result.threshold, aligned)
    reports.save_figure(fig, _out_path(cfg, "collective_scores.svg"))

    test = _test_series(cfg)
    pair = cfg.value("report", "node_pair")
    if len(pair) != 2 or not all(0 <= p < test.n_sensors for p in pair):
        raise ConfigError(f"report.node_pair {pair} invalid for {test.n_sensors} sensors")
    target_idx, source_idx = pair
    block_size = cfg.value("report", "te_block_size")
    block_te = reports.windowed_te(
        test.values[target_idx], test.values[source_idx], cfg.te_config(), block_size
    )
    highlighted = reports.highlighted_blocks(block_te, cfg.value("report", "top_events"))
    fig = reports.causal_events_figure(
        test.values[target_idx],
        test.values[source_idx],
        block_te,
        highlighted,
        block_size,
        (test.sensor_names[target_idx], test.sensor_names[source_idx]),
    )
    reports.save_figure(fig, _out_path(cfg, "causal_events.svg"))
    print(f"report: wrote 3 SVG files to {cfg.output_dir}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgad",
        description="Causal-graph anomaly detection for multivariate time series",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "synth": "generate a seeded synthetic benchmark",
        "build-graph": "estimate the causal graph from training data",
        "train": "train the forecaster on the training data and saved graph",
        "detect": "score the test data and emit decisions",
        "evaluate": "compute detection metrics from scores and labels",
        "report": "emit SVG score and causal-event plots",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value config file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override one config field (repeatable; wins over the file)",
        )
        p.add_argument("--seed", type=int, help="override the pipeline seed")
        if name == "evaluate":
            p.add_argument("--scores", help="score file (default: <output_dir>/scores.csv)")
            p.add_argument("--labels", help="label file (default: configured test labels)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config, args.overrides, args.seed)
        if args.command == "synth":
            cmd_synth(cfg)
        elif args.command == "build-graph":
            cmd_build_graph(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "detect":
            cmd_detect(cfg)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.scores, args.labels)
        elif args.command == "report":
            cmd_report(cfg)
    except CgadError as exc:
        print(f"cgad {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"cgad {args.command}: i/o error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
