"""Command-line entry point.

Subcommands:
  synth  generate a synthetic corpus (tweets + timelines)
  dist   export the per-user activity distribution as TSV
  fuse   merge a base dataset with a donor's hate tweets into a binary set
  train  fit the two-phase model on a whole dataset and write checkpoints
  eval   run a cross-validated experiment and write the reports
  bins   recompute the timeline-length bin report from a predictions file

A run is captured by a JSON config file; --seed and --output-dir override
the file. All outputs are written atomically (temp file + rename), so an
interrupted run never leaves a partial report. Exit status: 0 on success,
2 for usage/config-file problems, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

from . import corpus, evaluation, profiles, recurrent, text
from .errors import TweetprofError
from .gbdt import GBDTConfig, fit_gbdt, model_to_json
from .profiles import ProfileMode
from .recurrent import RecurrentConfig, save_checkpoint
from .evaluation import SplitMode


class UsageError(Exception):
    """Problem with the invocation itself (missing/ill-formed config)."""


def atomic_write_text(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc.msg}") from None


def _scheme_from_config(spec) -> corpus.LabelScheme:
    if isinstance(spec, str):
        if spec not in corpus.SCHEMES:
            known = ", ".join(sorted(corpus.SCHEMES))
            raise TweetprofError(f"unknown scheme {spec!r} (known: {known})")
        return corpus.SCHEMES[spec]
    return corpus.LabelScheme(spec["name"], tuple(spec["classes"]))


def _dataclass_from(cls, payload: dict, what: str):
    try:
        return cls(**payload)
    except TypeError as exc:
        raise TweetprofError(f"bad {what} config: {exc}") from None


def _jsonl_dataset(config: dict) -> corpus.Dataset:
    scheme = _scheme_from_config(config["scheme"])
    dataset = corpus.load_dataset(config["dataset"], scheme)
    timelines = {}
    if config.get("timelines"):
        timelines = corpus.load_timelines(config["timelines"])
    return corpus.Dataset(scheme=dataset.scheme, tweets=dataset.tweets, timelines=timelines)


def _cmd_synth(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    out_dir = Path(args.output_dir or config.pop("output_dir", "."))
    config.pop("output_dir", None)
    synth_config = _dataclass_from(corpus.SynthConfig, config, "synth")
    dataset = corpus.synth_corpus(synth_config)

    tweets_path = out_dir / "tweets.jsonl"
    timelines_path = out_dir / "timelines.jsonl"
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = Path(str(tweets_path) + ".tmp")
    corpus.write_dataset(dataset, tmp)
    os.replace(tmp, tweets_path)
    tmp = Path(str(timelines_path) + ".tmp")
    corpus.write_timelines(dataset.timelines, tmp)
    os.replace(tmp, timelines_path)
    print(f"wrote {tweets_path} ({len(dataset)} tweets) and {timelines_path} "
          f"({len(dataset.timelines)} users)")
    return 0


def _infer_scheme(path: str) -> corpus.LabelScheme:
    """Ad-hoc scheme from the distinct label names found in the file."""
    labels: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                labels.add(json.loads(line).get("label", ""))
    if len(labels) < 2:
        labels |= {"_pad_class"}
    return corpus.LabelScheme("inferred", tuple(sorted(labels)))


def _cmd_dist(args) -> int:
    scheme = corpus.SCHEMES[args.scheme] if args.scheme else _infer_scheme(args.input)
    dataset = corpus.load_dataset(args.input, scheme)
    rows = corpus.activity_distribution(
        dataset, only_hate=args.hate_only, hate_class=args.hate_class
    )
    atomic_write_text(Path(args.output), corpus.distribution_to_tsv(rows))
    print(f"wrote {args.output} ({len(rows)} users)")
    return 0


def _cmd_fuse(args) -> int:
    base = corpus.load_dataset(args.base, corpus.SCHEMES[args.base_scheme])
    donor = corpus.load_dataset(args.donor, corpus.SCHEMES[args.donor_scheme])
    fused = corpus.fuse_datasets(base, donor, args.hate_class, args.cap)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(str(out) + ".tmp")
    corpus.write_dataset(fused, tmp)
    os.replace(tmp, out)
    print(f"wrote {out} ({len(fused)} tweets, scheme {fused.scheme.name})")
    return 0


def _experiment_pieces(config: dict, seed_override, out_override):
    dataset = _jsonl_dataset(config)
    mode = ProfileMode(config.get("mode", "baseline"))
    seed = seed_override if seed_override is not None else config.get("seed", 0)
    out_dir = Path(out_override or config.get("output_dir", "."))
    rc = _dataclass_from(RecurrentConfig, config.get("recurrent", {}), "recurrent")
    gc = _dataclass_from(GBDTConfig, config.get("gbdt", {}), "gbdt")
    return dataset, mode, seed, out_dir, rc, gc


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    dataset, mode, seed, out_dir, rc, gc = _experiment_pieces(
        config, args.seed, args.output_dir
    )
    from dataclasses import replace

    rc = replace(rc, seed=seed, n_classes=dataset.scheme.n_classes)
    vocab = text.build_vocab(
        [t.text for t in dataset.tweets], config.get("min_count", 1)
    )
    if config.get("embeddings"):
        emb0 = text.load_pretrained_embeddings(
            config["embeddings"], vocab, rc.embed_dim, seed
        )
    else:
        emb0 = text.init_embeddings(vocab, rc.embed_dim, seed)
    encoded = [
        (vocab.encode(text.tokenize(t.text)), t.label) for t in dataset.tweets
    ]
    model = recurrent.train_recurrent(encoded, rc, emb0)
    emb = recurrent.extract_embeddings(model)
    X = profiles.feature_matrix(dataset.tweets, dataset.timelines, mode, vocab, emb)
    gbdt_model = fit_gbdt(
        X, [t.label for t in dataset.tweets], gc, n_classes=dataset.scheme.n_classes
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint = out_dir / "checkpoint.json"
    tmp = Path(str(checkpoint) + ".tmp")
    save_checkpoint(model, vocab, tmp)
    os.replace(tmp, checkpoint)
    atomic_write_text(out_dir / "gbdt.json", model_to_json(gbdt_model))
    print(f"wrote {checkpoint} and {out_dir / 'gbdt.json'}")
    return 0


def _cmd_eval(args) -> int:
    config = _load_config(args.config)
    dataset, mode, seed, out_dir, rc, gc = _experiment_pieces(
        config, args.seed, args.output_dir
    )
    split = SplitMode(config.get("split", "by-tweet"))
    k = int(config.get("k", 10))

    result = evaluation.run_experiment(
        dataset,
        mode,
        split,
        k,
        rc,
        gc,
        seed,
        min_count=config.get("min_count", 1),
        embeddings_path=config.get("embeddings"),
    )

    atomic_write_text(out_dir / "metrics.txt", result.metrics.to_text())
    payload = {
        "scheme": result.scheme.name,
        "classes": list(result.scheme.classes),
        "mode": mode.value,
        "split": split.value,
        "k": k,
        "seed": seed,
        "overall": result.metrics.to_json_dict(),
        "folds": [r.to_json_dict() for r in result.fold_reports],
        "confusion": result.confusion.counts.tolist(),
    }
    atomic_write_text(out_dir / "metrics.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")
    atomic_write_text(out_dir / "bins.tsv", result.bins.to_tsv())

    lines = []
    for r in result.results:
        timeline = dataset.timelines.get(r.user_id)
        lines.append(
            json.dumps(
                {
                    "tweet_id": r.tweet_id,
                    "user_id": r.user_id,
                    "gold": result.scheme.classes[r.gold],
                    "predicted": result.scheme.classes[r.predicted],
                    "fold": r.fold,
                    "timeline_len": len(timeline) if timeline else 0,
                },
                sort_keys=True,
            )
        )
    atomic_write_text(out_dir / "predictions.jsonl", "\n".join(lines) + "\n")
    print(result.metrics.to_text(), end="")
    print(f"reports written to {out_dir}")
    return 0


def _cmd_bins(args) -> int:
    timelines = corpus.load_timelines(args.timelines) if args.timelines else {}
    results = []
    names: set[str] = set()
    with open(args.predictions, "r", encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    for r in records:
        names.add(r["gold"])
        names.add(r["predicted"])
    classes = args.classes.split(",") if args.classes else sorted(names)
    index = {name: i for i, name in enumerate(classes)}
    for r in records:
        results.append(
            evaluation.TweetResult(
                r["tweet_id"], r["user_id"], index[r["gold"]], index[r["predicted"]], r.get("fold", 0)
            )
        )
    report = evaluation.bin_by_timeline_length(results, timelines, classes)
    atomic_write_text(Path(args.output), report.to_tsv())
    print(f"wrote {args.output}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tweetprof",
        description="Two-phase tweet classifier with user-timeline profiles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("dist", help="export the user activity distribution")
    p.add_argument("--input", required=True)
    p.add_argument("--scheme", choices=sorted(corpus.SCHEMES))
    p.add_argument("--hate-only", action="store_true")
    p.add_argument("--hate-class")
    p.add_argument("--output", default="dist.tsv")
    p.set_defaults(func=_cmd_dist)

    p = sub.add_parser("fuse", help="fuse base + donor hate tweets to binary")
    p.add_argument("--base", required=True)
    p.add_argument("--base-scheme", required=True, choices=sorted(corpus.SCHEMES))
    p.add_argument("--donor", required=True)
    p.add_argument("--donor-scheme", required=True, choices=sorted(corpus.SCHEMES))
    p.add_argument("--hate-class", required=True)
    p.add_argument("--cap", type=int, default=corpus.FUSE_DEFAULT_CAP)
    p.add_argument("--output", default="fused.jsonl")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("train", help="train on a full dataset, write checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="cross-validated experiment with reports")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bins", help="bin report from a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--timelines")
    p.add_argument("--classes", help="comma-separated class order")
    p.add_argument("--output", default="bins.tsv")
    p.set_defaults(func=_cmd_bins)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tweetprof: {exc}", file=sys.stderr)
        return 2
    except (TweetprofError, OSError, KeyError, ValueError) as exc:
        print(f"tweetprof: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
