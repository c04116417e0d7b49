"""Command-line entry point for the full pipeline.

One JSON config file can drive fetch/featurize/train/evaluate/serve so a run
is reproducible from a single artifact; flags override file values.  Exit
codes: 0 success, 1 usage error, 2 runtime failure.
"""

import argparse
import json
import sys
import zlib
from pathlib import Path

import numpy as np

from . import geo, images, nn, training
from .features import (
    ChannelStats,
    compute_channel_stats,
    featurize,
    load_stack,
    record_image,
    save_stack,
)
from .edges import canny
from .hog import hog_channel
from .hough import HoughConfig, hough_accumulate, hough_channel
from .manifest import flip_augment, read_manifest, write_manifest
from .training import EpochRecord, evaluate, preset_config, select_top_k


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(message)


def _load_config(path, section: str) -> dict:
    if not path:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return data.get(section, {})


def _cfg(args, file_cfg: dict, key: str, default=None):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    return file_cfg.get(key, default)


def _record_seed(base_seed: int, sample_id: str) -> int:
    return (base_seed * 2_654_435_761 + zlib.crc32(sample_id.encode())) % (2**31)


def _hough_cfg(mode: str, seed: int) -> HoughConfig:
    return HoughConfig(mode=mode, rng_seed=seed)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_fetch(args):
    cfg = _load_config(args.config, "fetch")
    streets_path = _cfg(args, cfg, "streets")
    out = Path(_cfg(args, cfg, "out", "data"))
    if not streets_path:
        raise CliUsageError("fetch needs --streets or a config entry")
    specs = []
    for entry in json.loads(Path(streets_path).read_text(encoding="utf-8")):
        specs.append(
            geo.StreetSpec(
                start=tuple(entry["start"]),
                end=tuple(entry["end"]),
                interval=entry.get("interval", 10.0),
                label=entry.get("label", 0),
            )
        )
    provider_cfg = cfg.get("provider", {})
    kind = provider_cfg.get("kind", "fixture")
    if args.fixtures:
        provider = geo.FixtureProvider(sorted(Path(args.fixtures).glob("*")))
    elif kind == "fixture":
        provider = geo.FixtureProvider(provider_cfg.get("paths", []))
    else:
        provider = geo.HttpProvider(
            base_url=provider_cfg["base_url"],
            api_key_env=provider_cfg.get("api_key_env", "STREET_IMAGERY_KEY"),
        )
    fixed_heading = cfg.get("fixed_heading")
    jobs = _cfg(args, cfg, "jobs", 4)

    all_records = []
    all_failures = []
    for spec in specs:
        requests = geo.interpolate_street(spec, fixed_heading=fixed_heading)
        report = geo.fetch_images(provider, requests, out / "images", label=spec.label, jobs=jobs)
        all_records.extend(report.records)
        all_failures.extend(report.failures)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.jsonl", all_records)
    (out / "fetch_failures.json").write_text(json.dumps(all_failures, indent=2), encoding="utf-8")
    print(f"fetched {len(all_records)} images ({len(all_failures)} failures) -> {out}")
    return 0


def _cmd_featurize(args):
    cfg = _load_config(args.config, "featurize")
    manifest_path = _cfg(args, cfg, "manifest")
    out = Path(_cfg(args, cfg, "out", "features"))
    seed = int(_cfg(args, cfg, "seed", 0))
    hough_mode = _cfg(args, cfg, "hough_mode", "probabilistic")
    if not manifest_path:
        raise CliUsageError("featurize needs --manifest or a config entry")

    records = read_manifest(manifest_path)
    records = training.split_dataset(records, seed=seed)
    records = flip_augment(records)
    stats = compute_channel_stats(records, record_image, split="train")

    out.mkdir(parents=True, exist_ok=True)
    for rec in records:
        stack = featurize(
            record_image(rec),
            stats,
            hough_cfg=_hough_cfg(hough_mode, _record_seed(seed, rec.id)),
        )
        save_stack(out, rec.id, stack, stats)
    write_manifest(out / "manifest.jsonl", records)
    (out / "stats.json").write_text(json.dumps(stats.to_json(), indent=2), encoding="utf-8")
    print(f"featurized {len(records)} records -> {out}")
    return 0


def _load_split(features_dir: Path, split: str):
    records = [r for r in read_manifest(features_dir / "manifest.jsonl") if r.split == split]
    records.sort(key=lambda r: r.id)
    stacks = np.stack([load_stack(features_dir, r.id) for r in records]) if records else np.zeros((0, 5, 224, 224))
    labels = np.array([r.label for r in records], dtype=int)
    return records, stacks, labels


def _cmd_train(args):
    cfg = _load_config(args.config, "train")
    features_dir = Path(_cfg(args, cfg, "features", "features"))
    out = Path(_cfg(args, cfg, "out", "run"))
    preset = _cfg(args, cfg, "preset", "smallnet")
    seed = int(_cfg(args, cfg, "seed", 0))

    overrides = {k: cfg[k] for k in ("batch_size", "alpha0", "tau_max", "tau_start", "weight_decay", "epochs", "risk_multiplier") if k in cfg}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    config = preset_config(preset, seed=seed, **overrides)

    _, X_train, y_train = _load_split(features_dir, "train")
    _, X_dev, y_dev = _load_split(features_dir, "dev")
    if not len(X_train):
        raise RuntimeError(f"no cached training stacks under {features_dir}; run featurize first")

    out.mkdir(parents=True, exist_ok=True)
    records, _ = training.train_arrays(
        X_train,
        y_train,
        X_dev,
        y_dev,
        config,
        checkpoint_dir=out / "checkpoints",
        metrics_path=out / "metrics.jsonl",
    )
    best = max(records, key=lambda r: (r.dev_accuracy, -r.epoch))
    print(f"trained {len(records)} epochs; best dev accuracy {best.dev_accuracy:.4f} at epoch {best.epoch}")
    return 0


def _read_metrics(path) -> list[EpochRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(EpochRecord(**json.loads(line)))
    return records


def _write_report(report: dict, out_path: Path):
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")


def _cmd_evaluate(args):
    cfg = _load_config(args.config, "evaluate")
    features_dir = Path(_cfg(args, cfg, "features", "features"))
    split = _cfg(args, cfg, "split", "test")
    out = Path(_cfg(args, cfg, "out", "report.json"))
    ckpts = args.checkpoints or cfg.get("checkpoints", [])
    if not ckpts:
        raise CliUsageError("evaluate needs at least one --checkpoint")
    models = [training.load_predictor(p) for p in ckpts]
    records, stacks, labels = _load_split(features_dir, split)
    if not len(stacks):
        raise RuntimeError(f"split {split!r} is empty")
    report = evaluate(models, stacks, labels, records)
    report["split"] = split
    _write_report(report, out)
    print(f"evaluated {len(records)} {split} samples; overall accuracy {report['overall']:.4f} -> {out}")
    return 0


def _cmd_ensemble(args):
    cfg = _load_config(args.config, "ensemble")
    metrics_path = _cfg(args, cfg, "metrics")
    features_dir = Path(_cfg(args, cfg, "features", "features"))
    split = _cfg(args, cfg, "split", "test")
    out = Path(_cfg(args, cfg, "out", "ensemble_report.json"))
    k = int(_cfg(args, cfg, "k", 10))
    min_gap = int(_cfg(args, cfg, "min_gap", 5))
    if not metrics_path:
        raise CliUsageError("ensemble needs --metrics (the training metrics JSONL)")
    epoch_records = _read_metrics(metrics_path)
    chosen = select_top_k(epoch_records, k=k, min_gap=min_gap)
    run_dir = Path(metrics_path).parent
    models = [
        training.load_predictor(p if Path(p).is_absolute() else run_dir / p)
        for p in (r.checkpoint_path for r in chosen)
        if p
    ]
    if not models:
        raise RuntimeError("selected records carry no checkpoint paths")
    records, stacks, labels = _load_split(features_dir, split)
    report = evaluate(models, stacks, labels, records)
    report["split"] = split
    report["ensemble_epochs"] = [r.epoch for r in chosen]
    _write_report(report, out)
    print(f"ensemble of {len(models)} checkpoints; overall accuracy {report['overall']:.4f} -> {out}")
    return 0


def _cmd_salience(args):
    cfg = _load_config(args.config, "salience")
    ckpt = _cfg(args, cfg, "checkpoint")
    image_path = _cfg(args, cfg, "image")
    out = Path(_cfg(args, cfg, "out", "salience.png"))
    stats_path = _cfg(args, cfg, "stats")
    if not ckpt or not image_path:
        raise CliUsageError("salience needs --checkpoint and --image")
    predictor = training.load_predictor(ckpt)
    stats = ChannelStats.from_json(json.loads(Path(stats_path).read_text())) if stats_path else ChannelStats()
    stack = featurize(images.load_image(image_path), stats, hough_cfg=_hough_cfg("probabilistic", args.seed or 0))
    class_idx = args.class_index
    if class_idx is None:
        class_idx = int(predictor.predict(stack[None])[0])
    sal = nn.salience_map(predictor.spec, predictor.params, stack, class_idx)
    out.parent.mkdir(parents=True, exist_ok=True)
    images.save_unit_png(out, sal)
    print(f"salience for class {class_idx} -> {out}")
    return 0


def _cmd_dump_features(args):
    cfg = _load_config(args.config, "dump_features")
    image_path = _cfg(args, cfg, "image")
    out = Path(_cfg(args, cfg, "out", "features_dump"))
    if not image_path:
        raise CliUsageError("dump-features needs --image")
    img = images.load_image(image_path)
    gray = images.to_grayscale(images.resize_bilinear(img, 224, 224))
    out.mkdir(parents=True, exist_ok=True)
    images.save_unit_png(out / "hog.png", hog_channel(gray))
    images.save_unit_png(out / "hough.png", hough_channel(gray, _hough_cfg("probabilistic", args.seed or 0)))
    edge_map = canny(gray)
    images.save_unit_png(out / "edges.png", edge_map.astype(float))
    acc = hough_accumulate(edge_map, HoughConfig())
    peak = acc.bins.max()
    images.save_unit_png(out / "hough_accumulator.png", acc.bins / peak if peak else acc.bins)
    print(f"wrote HOG/Hough channels, edge map, accumulator -> {out}")
    return 0


def _cmd_serve(args):
    from .service import ServiceConfig, create_app

    cfg = _load_config(args.config, "serve")
    manifest_path = _cfg(args, cfg, "manifest")
    report_path = _cfg(args, cfg, "report")
    out = _cfg(args, cfg, "out", "triage")
    port = int(_cfg(args, cfg, "port", 8008))
    host = _cfg(args, cfg, "host", "127.0.0.1")
    frontend = _cfg(args, cfg, "frontend")
    if not manifest_path or not report_path:
        raise CliUsageError("serve needs --manifest and --report")
    app = create_app(
        ServiceConfig(manifest_path=manifest_path, report_path=report_path, out_dir=out, frontend_dir=frontend)
    )
    import uvicorn

    uvicorn.run(app, host=host, port=port)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="gridsight", description="street imagery utility/vegetation classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--out", help="output directory or file")
        p.add_argument("--jobs", type=int, help="parallel worker cap")

    p = sub.add_parser("fetch", help="interpolate streets and download imagery")
    common(p)
    p.add_argument("--streets", help="JSON array of street specs")
    p.add_argument("--fixtures", help="directory of canned images to use as the provider")
    p.set_defaults(func=_cmd_fetch)

    p = sub.add_parser("featurize", help="split, augment, and cache feature stacks")
    common(p)
    p.add_argument("--manifest", help="input manifest JSONL")
    p.add_argument("--hough-mode", dest="hough_mode", choices=["probabilistic", "classical"])
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train the classifier on cached stacks")
    common(p)
    p.add_argument("--features", help="featurize output directory")
    p.add_argument("--preset", choices=sorted(training.PRESETS), help="hyperparameter preset")
    p.add_argument("--epochs", type=int, help="override the training epoch count")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate checkpoints on a split")
    common(p)
    p.add_argument("--features", help="featurize output directory")
    p.add_argument("--split", choices=["train", "dev", "test"])
    p.add_argument("--checkpoint", dest="checkpoints", action="append", help="checkpoint path (repeatable)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("ensemble", help="select top-k checkpoints and evaluate their vote")
    common(p)
    p.add_argument("--features", help="featurize output directory")
    p.add_argument("--metrics", help="training metrics JSONL")
    p.add_argument("--split", choices=["train", "dev", "test"])
    p.add_argument("--k", type=int)
    p.add_argument("--min-gap", dest="min_gap", type=int)
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("salience", help="render a class-score salience heatmap")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--image")
    p.add_argument("--stats", help="stats.json from featurize")
    p.add_argument("--class", dest="class_index", type=int, help="class index (default: predicted)")
    p.set_defaults(func=_cmd_salience)

    p = sub.add_parser("dump-features", help="write the HOG and Hough channels of one image")
    common(p)
    p.add_argument("--image")
    p.set_defaults(func=_cmd_dump_features)

    p = sub.add_parser("serve", help="run the triage review service")
    common(p)
    p.add_argument("--manifest")
    p.add_argument("--report")
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.add_argument("--frontend", help="static UI bundle to host at /")
    p.set_defaults(func=_cmd_serve)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliUsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help exits with 0
        return int(exc.code or 0)
    try:
        return int(args.func(args) or 0)
    except CliUsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
