"""Command-line entry point: fetch, synth, extract, train, evaluate, bench, predict."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .audio import FRAME_LEN, HOP, load_clip
from .classifiers import ALGORITHMS, ClassifierSpec, canonical_name
from .dataset import CLASSES, load_manifest
from .errors import ParameterError, SerBenchError
from .evaluate import EvalConfig, benchmark_all, render_report
from .featurestore import extract_manifest, load_features, save_features
from .features import extract
from .fetch import fetch_dataset
from .ioutil import atomic_write
from .pipeline import DEFAULT_PCA_ENERGY, DEFAULT_VAR_THRESHOLD, fit_pipeline, load_model, save_model
from .synth import synth_corpus

log = logging.getLogger("serbench")

CONFIG_ENV = "SER_BENCH_CONFIG"
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
BENCH_MIN_REPEATS = 5


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    data: str | None = None
    out: str = "out"
    features: str | None = None
    dump_format: str = "bin"
    model: str | None = None
    frame_len: int = FRAME_LEN
    hop: int = HOP
    var_threshold: float = DEFAULT_VAR_THRESHOLD
    pca_energy: float = DEFAULT_PCA_ENERGY
    seed: int = 0
    classifiers: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    classifier: str = "sgd"  # used by train
    granularity: str = "frame"
    scoring: str = "test"
    format: str = "md"
    timing_repeats: int = 1
    folds: int = 3
    dataset_url: str | None = None
    dataset_sha256: str | None = None
    train_per_class: int = 30
    test_per_class: int = 10
    hyperparams: dict[str, dict] = field(default_factory=dict)

    def features_path(self) -> Path:
        if self.features:
            return Path(self.features)
        return Path(self.out) / ("features.csv" if self.dump_format == "csv" else "features.bin")

    def spec(self, name: str) -> ClassifierSpec:
        key = canonical_name(name)
        return ClassifierSpec(key, dict(self.hyperparams.get(key, {})), self.seed)

    def validate(self):
        if not 0 < self.pca_energy <= 1:
            raise UsageError(f"pca_energy must lie in (0, 1], got {self.pca_energy}")
        if self.var_threshold < 0:
            raise UsageError("var_threshold must be non-negative")
        if self.frame_len <= 0 or not 0 < self.hop <= self.frame_len:
            raise UsageError("need frame_len > 0 and 0 < hop <= frame_len")
        if self.granularity not in ("frame", "file"):
            raise UsageError("granularity must be frame or file")
        if self.scoring not in ("test", "validation"):
            raise UsageError("scoring must be test or validation")
        if self.dump_format not in ("csv", "bin"):
            raise UsageError("dump_format must be csv or bin")
        if self.format not in ("json", "md"):
            raise UsageError("format must be json or md")
        if self.timing_repeats < 1 or self.folds < 2:
            raise UsageError("timing_repeats must be >= 1 and folds >= 2")
        try:
            for name in self.classifiers + [self.classifier]:
                self.spec(name)
        except ParameterError as exc:
            raise UsageError(str(exc)) from exc


def _coerce(raw: str, like):
    raw = raw.strip()
    if isinstance(like, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, list):
        return [t.strip() for t in raw.split(",") if t.strip()]
    return raw or None


def _literal(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config(text: str, cfg: RunConfig | None = None) -> RunConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment; ``algo.param = value`` sets hyperparameters."""
    cfg = cfg or RunConfig()
    known = {f.name: f for f in fields(RunConfig) if f.name != "hyperparams"}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if "." in key:
            algo, param = key.split(".", 1)
            try:
                algo = canonical_name(algo)
            except ParameterError as exc:
                raise UsageError(f"config line {lineno}: {exc}") from exc
            if param not in ALGORITHMS[algo].defaults:
                raise UsageError(f"config line {lineno}: {algo} has no hyperparameter {param!r}")
            cfg.hyperparams.setdefault(algo, {})[param] = _literal(value)
        elif key in known:
            try:
                setattr(cfg, key, _coerce(value, getattr(cfg, key) if getattr(cfg, key) is not None else ""))
            except ValueError as exc:
                raise UsageError(f"config line {lineno}: bad value for {key}: {value!r}") from exc
        else:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
    return cfg


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"config file {path} not found")
        parse_config(p.read_text(encoding="utf-8"), cfg)
    overrides = {
        "data": args.data,
        "out": args.out,
        "seed": args.seed,
        "pca_energy": args.pca_energy,
        "var_threshold": args.var_threshold,
        "granularity": args.granularity,
        "format": args.format,
        "features": getattr(args, "features", None),
        "model": getattr(args, "model", None),
        "scoring": getattr(args, "scoring", None),
        "dump_format": getattr(args, "dump_format", None),
        "timing_repeats": getattr(args, "repeats", None),
        "dataset_url": getattr(args, "url", None),
        "dataset_sha256": getattr(args, "checksum", None),
        "train_per_class": getattr(args, "train_per_class", None),
        "test_per_class": getattr(args, "test_per_class", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if args.classifier:
        names = [n for item in args.classifier for n in item.split(",") if n]
        cfg.classifiers = names
        cfg.classifier = names[0]
    cfg.validate()
    return cfg


# -- commands --

def cmd_fetch(cfg: RunConfig) -> int:
    if not cfg.data:
        raise UsageError("fetch needs --data DEST")
    if not cfg.dataset_url or not cfg.dataset_sha256:
        raise UsageError("fetch needs --url and --checksum (or dataset_url / dataset_sha256 in the config)")
    manifest = fetch_dataset(cfg.dataset_url, cfg.data, cfg.dataset_sha256)
    print(f"{len(manifest.entries)} files ready under {manifest.root}")
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    dest = cfg.data or cfg.out
    counts = {c: (cfg.train_per_class, cfg.test_per_class) for c in CLASSES}
    manifest = synth_corpus(dest, cfg.seed, counts)
    print(f"wrote {len(manifest.entries)} files to {dest}")
    return EXIT_OK


def cmd_extract(cfg: RunConfig) -> int:
    if not cfg.data:
        raise UsageError("extract needs --data ROOT")
    manifest = load_manifest(cfg.data)
    fm, failures = extract_manifest(manifest, cfg.frame_len, cfg.hop)
    for path, reason in failures:
        print(f"failed: {path}: {reason}", file=sys.stderr)
    out = save_features(fm, cfg.features_path(), cfg.dump_format)
    for label, n in sorted(fm.frame_counts().items()):
        print(f"{label}\t{n}")
    print(f"{len(fm)} frames from {len(manifest.entries) - len(failures)} files -> {out}")
    return EXIT_OK


def _load_dump(cfg: RunConfig):
    path = cfg.features_path()
    if not path.is_file():
        raise UsageError(f"feature dump {path} not found; run `serbench extract` first")
    return load_features(path)


def cmd_evaluate(cfg: RunConfig, repeats: int | None = None) -> int:
    fm = _load_dump(cfg)
    eval_cfg = EvalConfig(
        var_threshold=cfg.var_threshold,
        pca_energy=cfg.pca_energy,
        k=cfg.folds,
        seed=cfg.seed,
        scoring=cfg.scoring,
        granularity=cfg.granularity,
        timing_repeats=repeats or cfg.timing_repeats,
    )
    specs = [cfg.spec(n) for n in cfg.classifiers]
    report = benchmark_all(fm, specs, eval_cfg, progress=lambda msg: log.info(msg))
    out = Path(cfg.out)
    atomic_write(out / "report.json", render_report(report, "json"))
    atomic_write(out / "report.md", render_report(report, "md"))
    print(render_report(report, cfg.format), end="")
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    return cmd_evaluate(cfg, repeats=max(BENCH_MIN_REPEATS, cfg.timing_repeats))


def cmd_train(cfg: RunConfig) -> int:
    if cfg.features or cfg.features_path().is_file():
        fm = _load_dump(cfg)
    elif cfg.data:
        fm, _ = extract_manifest(load_manifest(cfg.data), cfg.frame_len, cfg.hop)
    else:
        raise UsageError("train needs a feature dump (--features) or a dataset (--data)")
    tr = fm.split("train")
    if len(tr) == 0:
        raise UsageError("no training rows available")
    model = fit_pipeline(tr.X, tr.labels, cfg.spec(cfg.classifier), cfg.var_threshold, cfg.pca_energy, splits=tr.splits)
    path = Path(cfg.model) if cfg.model else Path(cfg.out) / "model.sesa"
    save_model(model, path)
    n_in, n_kept, n_pc = model.dims
    print(f"{cfg.classifier}: {len(tr)} frames, features {n_in} -> {n_kept} -> {n_pc}; saved {path}")
    return EXIT_OK


def predict_file(model, wav: str | Path, frame_len: int = FRAME_LEN, hop: int = HOP) -> dict:
    X = extract(load_clip(wav), frame_len, hop)
    scores = model.decision_scores(X)
    idx = np.argmax(scores, axis=1)
    classes = list(model.classifier.classes)
    counts = np.bincount(idx, minlength=len(classes))
    return {
        "file": str(wav),
        "label": classes[int(np.argmax(counts))],
        "frames": int(len(idx)),
        "frame_counts": {c: int(n) for c, n in zip(classes, counts)},
        "scores": {c: float(s) for c, s in zip(classes, scores.mean(axis=0))},
    }


def cmd_predict(cfg: RunConfig, wavs: list[str]) -> int:
    path = Path(cfg.model) if cfg.model else Path(cfg.out) / "model.sesa"
    if not path.is_file():
        raise UsageError(f"model file {path} not found")
    if not wavs:
        raise UsageError("predict needs at least one WAV file")
    model = load_model(path)
    for wav in wavs:
        try:
            result = predict_file(model, wav, cfg.frame_len, cfg.hop)
        except SerBenchError as exc:
            raise type(exc)(f"{wav}: {exc}") from exc
        print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help="dataset root (train/ and test/ folders)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help=f"key=value config file (fallback: ${CONFIG_ENV})")
    common.add_argument("--seed", type=int)
    common.add_argument("--classifier", action="append", help="classifier name(s); repeat or comma-separate")
    common.add_argument("--pca-energy", type=float, dest="pca_energy")
    common.add_argument("--var-threshold", type=float, dest="var_threshold")
    common.add_argument("--granularity", choices=("frame", "file"))
    common.add_argument("--format", choices=("json", "md"))
    common.add_argument("--features", help="feature dump path")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="serbench", description=__doc__)
    p.add_argument("--version", action="version", version=f"serbench {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fetch", parents=[common], help="download and verify the dataset archive")
    f.add_argument("--url")
    f.add_argument("--checksum", help="expected SHA-256 of the archive")

    s = sub.add_parser("synth", parents=[common], help="write a seeded synthetic corpus")
    s.add_argument("--train-per-class", type=int, dest="train_per_class")
    s.add_argument("--test-per-class", type=int, dest="test_per_class")

    e = sub.add_parser("extract", parents=[common], help="extract the 149-column features to a dump")
    e.add_argument("--dump-format", choices=("csv", "bin"), dest="dump_format")

    t = sub.add_parser("train", parents=[common], help="fit the pipeline and one classifier")
    t.add_argument("--model", help="model output path")

    for name, help_text in (("evaluate", "cross-validated benchmark"), ("bench", "evaluate with >= 5 timing repeats")):
        ev = sub.add_parser(name, parents=[common], help=help_text)
        ev.add_argument("--scoring", choices=("test", "validation"))
        ev.add_argument("--repeats", type=int, help="timed predict calls per fold")

    pr = sub.add_parser("predict", parents=[common], help="classify WAV files with a saved model")
    pr.add_argument("--model", help="model file")
    pr.add_argument("wav", nargs="*")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "fetch":
            return cmd_fetch(cfg)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "extract":
            return cmd_extract(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "bench":
            return cmd_bench(cfg)
        if args.command == "predict":
            return cmd_predict(cfg, args.wav)
    except UsageError as exc:
        print(f"serbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SerBenchError, OSError) as exc:
        print(f"serbench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
