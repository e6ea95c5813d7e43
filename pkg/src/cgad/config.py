"""Pipeline configuration: flat key=value sections in a single text file,
overridable by repeated ``--set section.key=value`` flags (flags win over the
file) and by the CGAD_OUTPUT_DIR environment variable."""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass

from .causal import TEConfig
from .errors import ConfigError
from .forecaster import ModelConfig, TrainConfig
from .scoring import PotConfig
from .synth import AnomalyWindow, Coupling, SyntheticSpec

OUTPUT_DIR_ENV = "CGAD_OUTPUT_DIR"

GRAPH_FILE = "graph.txt"
MODEL_FILE = "model.txt"
SCORES_FILE = "scores.csv"
LOSS_HISTORY_FILE = "loss_history.csv"
REPORT_TEXT_FILE = "report.txt"
REPORT_CSV_FILE = "report_row.csv"
DEGREE_HIST_CSV = "degree_histogram.csv"
DEGREE_HIST_SVG = "degree_histogram.svg"
TRAIN_CSV = "train.csv"
TEST_CSV = "test.csv"
TEST_LABELS = "test_labels.txt"
TRUTH_GRAPH_FILE = "truth_graph.txt"


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _parse_couplings(text: str) -> tuple[Coupling, ...]:
    out = []
    for group in text.split(";"):
        group = group.strip()
        if not group:
            continue
        parts = [p.strip() for p in group.split(",")]
        if len(parts) != 4:
            raise ValueError(f"coupling needs source,target,lag,gain: {group!r}")
        out.append(Coupling(int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])))
    return tuple(out)


def _parse_anomalies(text: str) -> tuple[AnomalyWindow, ...]:
    out = []
    for group in text.split(";"):
        group = group.strip()
        if not group:
            continue
        parts = [p.strip() for p in group.split(",")]
        if len(parts) != 4:
            raise ValueError(f"anomaly needs start,end,node,offset: {group!r}")
        out.append(
            AnomalyWindow(int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3]))
        )
    return tuple(out)


# section -> key -> (parser, default as text)
SCHEMA: dict[str, dict[str, tuple] ] = {
    "pipeline": {
        "seed": (int, "0"),
    },
    "data": {
        "train_csv": (str, ""),
        "test_csv": (str, ""),
        "test_labels": (str, ""),
        "output_dir": (str, "out"),
    },
    "graph": {
        "estimator": (str, "histogram-plugin"),
        "bin_count": (int, "8"),
        "q": (int, "1"),
        "o": (int, "1"),
        "knn_k": (int, "4"),
        "chunk_window": (int, "2000"),
        "sample_count": (int, "5"),
        "prune_threshold": (float, "0.01"),
    },
    "model": {
        "window_w": (int, "15"),
        "blocks": (int, "3"),
        "residual_channels": (int, "16"),
        "skip_channels": (int, "32"),
        "gcn_hidden": (int, "32"),
        "output_hidden": (int, "64"),
        "kernel_sizes": (_parse_int_tuple, "2,3,5,6"),
    },
    "train": {
        "learning_rate": (float, "1e-3"),
        "batch_size": (int, "32"),
        "epochs": (int, "10"),
        "adam_beta1": (float, "0.9"),
        "adam_beta2": (float, "0.999"),
        "adam_eps": (float, "1e-8"),
        "val_fraction": (float, "0.2"),
    },
    "scoring": {
        "initial_quantile": (float, "0.98"),
        "risk_q": (float, "1e-4"),
        "min_peaks": (int, "10"),
        "stats_source": (str, "test"),
    },
    "report": {
        "node_pair": (_parse_int_tuple, "0,1"),
        "te_block_size": (int, "500"),
        "top_events": (int, "10"),
        "emit_svg": (_parse_bool, "true"),
    },
    "synth": {
        "n_nodes": (int, "4"),
        "timesteps": (int, "2000"),
        "couplings": (_parse_couplings, "0,0,1,0.9; 1,1,1,0.9; 2,2,1,0.9; 3,3,1,0.9; 0,1,1,0.6"),
        "noise_sigma": (float, "0.3"),
        "anomalies": (_parse_anomalies, ""),
    },
}


@dataclass(frozen=True)
class PipelineConfig:
    """Effective settings for one pipeline run, after all overrides."""

    raw: dict[str, dict[str, str]]

    def text(self, section: str, key: str) -> str:
        return self.raw[section][key]

    def value(self, section: str, key: str):
        parser = SCHEMA[section][key][0]
        text = self.raw[section][key]
        try:
            return parser(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {exc}") from None

    @property
    def seed(self) -> int:
        return self.value("pipeline", "seed")

    @property
    def output_dir(self) -> str:
        return self.value("data", "output_dir")

    def te_config(self) -> TEConfig:
        return TEConfig(
            estimator=self.value("graph", "estimator"),
            bin_count=self.value("graph", "bin_count"),
            q=self.value("graph", "q"),
            o=self.value("graph", "o"),
            knn_k=self.value("graph", "knn_k"),
            chunk_window=self.value("graph", "chunk_window"),
            sample_count=self.value("graph", "sample_count"),
            prune_threshold=self.value("graph", "prune_threshold"),
            rng_seed=self.seed,
        )

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            window_w=self.value("model", "window_w"),
            blocks=self.value("model", "blocks"),
            residual_channels=self.value("model", "residual_channels"),
            skip_channels=self.value("model", "skip_channels"),
            gcn_hidden=self.value("model", "gcn_hidden"),
            output_hidden=self.value("model", "output_hidden"),
            kernel_sizes=self.value("model", "kernel_sizes"),
            rng_seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.value("train", "learning_rate"),
            batch_size=self.value("train", "batch_size"),
            epochs=self.value("train", "epochs"),
            adam_beta1=self.value("train", "adam_beta1"),
            adam_beta2=self.value("train", "adam_beta2"),
            adam_eps=self.value("train", "adam_eps"),
        )

    def pot_config(self) -> PotConfig:
        return PotConfig(
            initial_quantile=self.value("scoring", "initial_quantile"),
            risk_q=self.value("scoring", "risk_q"),
            min_peaks=self.value("scoring", "min_peaks"),
        )

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n_nodes=self.value("synth", "n_nodes"),
            timesteps=self.value("synth", "timesteps"),
            couplings=self.value("synth", "couplings"),
            noise_sigma=self.value("synth", "noise_sigma"),
            anomalies=self.value("synth", "anomalies"),
            rng_seed=self.seed,
        )

    def config_hash(self) -> str:
        """Digest of the algorithmic settings; file locations are excluded so
        identical runs hash identically wherever their artifacts live."""
        canonical = "\n".join(
            f"{section}.{key}={self.raw[section][key]}"
            for section in sorted(self.raw)
            if section != "data"
            for key in sorted(self.raw[section])
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def load_config(
    path: str | None = None,
    overrides: list[str] | None = None,
    seed: int | None = None,
) -> PipelineConfig:
    """Assemble the effective config: defaults, then file, then environment,
    then ``--set`` overrides and the ``--seed`` flag."""
    raw = {
        section: {key: default for key, (_, default) in keys.items()}
        for section, keys in SCHEMA.items()
    }
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from None
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"{path}: unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{path}: unknown key {section}.{key}")
                raw[section][key] = value
    env_out = os.environ.get(OUTPUT_DIR_ENV)
    if env_out:
        raw["data"]["output_dir"] = env_out
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        target, value = item.split("=", 1)
        if "." not in target:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        section, key = target.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config field {section}.{key}")
        raw[section][key] = value
    if seed is not None:
        raw["pipeline"]["seed"] = str(seed)
    cfg = PipelineConfig(raw)
    # surface bad values at load time rather than mid-pipeline
    for section, keys in SCHEMA.items():
        for key in keys:
            cfg.value(section, key)
    return cfg
