"""Command-line entry point.

Exit codes: 0 success, 2 bad input or usage, 1 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import clustering, harness, markov, metrics, sampler
from .novelty import NoveltyModel
from .patterns import ConsumptionPattern, InputError, SimulationConfig, check_seed, make_rng, read_pattern

log = logging.getLogger("patternsim")

SEED_ENV = "PATTERN_SIM_SEED"


def _common(parser):
    parser.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (falls back to --config, then ${SEED_ENV}, then 0)")
    parser.add_argument("--config", type=Path, default=None, help="JSON file of option defaults")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patternsim",
                                     description="Simulate and evaluate categorical consumption patterns.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="extend an initial pattern into a trace")
    _common(p)
    p.add_argument("--initial", type=Path, required=True)
    p.add_argument("--method", choices=("original", "modified", "random_baseline"), default=None)
    p.add_argument("--length", type=int, default=None, help="number of generated steps (default 100)")
    p.add_argument("--new-classes", action="store_true", default=None, help="allow never-seen classes")
    p.add_argument("--manifest", type=Path, default=None, help="dataset manifest; names new classes")
    p.add_argument("--reset-weighting", choices=("initial", "uniform"), default=None)

    p = sub.add_parser("cluster", help="cluster images of each class from embeddings")
    _common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--embeddings", type=Path, required=True)
    p.add_argument("--classes", default=None, help="comma-separated subset of classes")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--bandwidth", type=float, default=None)

    p = sub.add_parser("sample", help="sample images for a simulated trace")
    _common(p)
    p.add_argument("--trace", type=Path, required=True, help="JSON-lines trace or pattern text")
    p.add_argument("--assignments", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--initial-images", type=Path, default=None, help="class,image_id CSV")

    p = sub.add_parser("evaluate", help="DTW and KL between two patterns")
    _common(p)
    p.add_argument("--a", type=Path, required=True, help="initial pattern")
    p.add_argument("--b", type=Path, required=True, help="simulated pattern or trace")

    p = sub.add_parser("experiment", help="run the evaluation grid")
    _common(p)
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--embeddings", type=Path, default=None)
    p.add_argument("--lengths", default=None, help="comma-separated initial lengths")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--methods", default=None, help="comma-separated methods")
    p.add_argument("--novelty", choices=tuple(harness.NOVELTY_SETTINGS), default=None)
    p.add_argument("--generated-length", type=int, default=None)
    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: config must be a JSON object")
    return data


def _resolve_seed(args, config) -> int:
    if args.seed is not None:
        return check_seed(args.seed)
    if "seed" in config:
        return check_seed(config["seed"])
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return check_seed(int(env))
        except ValueError:
            raise InputError(f"${SEED_ENV} is not an integer: {env!r}") from None
    return 0


def _opt(args, config, name, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def _read_sequence(path: Path, alphabet=None) -> ConsumptionPattern:
    """Pattern text, or a JSON-lines trace (``class_name`` per record)."""
    if path.suffix == ".jsonl":
        names = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    names.append(json.loads(line)["class_name"])
                except (json.JSONDecodeError, KeyError, TypeError):
                    raise InputError(f"{path}:{lineno}: expected a trace record with class_name") from None
        if not names:
            raise InputError("empty pattern")
        return ConsumptionPattern.from_names(names, alphabet)
    return read_pattern(path, alphabet)


def _emit(text: str, out_dir, filename: str):
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / filename).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args, config):
    initial = read_pattern(args.initial)
    sim_config = SimulationConfig(
        target_generated_length=int(_opt(args, config, "length", 100)),
        allow_new_classes=bool(_opt(args, config, "new_classes", False)),
        method=_opt(args, config, "method", "modified"),
        seed=_resolve_seed(args, config),
        reset_weighting=_opt(args, config, "reset_weighting", "initial"),
    )
    novelty = None
    if sim_config.allow_new_classes:
        pool = []
        manifest_path = _opt(args, config, "manifest")
        if manifest_path:
            pool = [c for c in sampler.read_manifest(manifest_path).class_names if c not in initial.alphabet]
            pool = [pool[i] for i in make_rng(sim_config.seed, 1).permutation(len(pool))]
        novelty = NoveltyModel(pool)
    trace = markov.simulate(initial, sim_config, novelty)

    if (_opt(args, config, "format", "json")) == "csv":
        text = "t,class_name,tag\n" + "".join(f"{r['t']},{r['class_name']},{r['tag']}\n" for r in trace.records())
        name = "trace.csv"
    else:
        text, name = trace.to_jsonl(), "trace.jsonl"
    _emit(text, args.out, name)
    if args.out is not None and trace.matrix is not None:
        (args.out / "matrix.csv").write_text(markov.matrix_to_csv(trace.matrix, trace.pattern.alphabet),
                                             encoding="utf-8")


def cmd_cluster(args, config):
    manifest = sampler.read_manifest(args.manifest)
    embeddings = clustering.read_embeddings(args.embeddings)
    wanted = _opt(args, config, "classes")
    names = manifest.class_names
    if wanted:
        wanted = wanted.split(",") if isinstance(wanted, str) else list(wanted)
        unknown = [c for c in wanted if c not in manifest.classes]
        if unknown:
            raise InputError(f"classes not in manifest: {', '.join(unknown)}")
        names = wanted
    k = int(_opt(args, config, "k", clustering.DEFAULT_K))
    bandwidth = float(_opt(args, config, "bandwidth", clustering.DEFAULT_BANDWIDTH))
    results = [clustering.cluster_class(c, manifest.classes[c], embeddings, k=k, sigma=bandwidth) for c in names]

    if _opt(args, config, "format", "csv") == "json":
        text = json.dumps({a.class_name: {"n_clusters": a.n_clusters,
                                          "labels": dict(zip(a.ids, a.labels.tolist()))} for a in results},
                          indent=2) + "\n"
        _emit(text, args.out, "assignments.json")
    else:
        import io
        buf = io.StringIO()
        clustering.write_assignments(buf, results)
        _emit(buf.getvalue(), args.out, "assignments.csv")


def cmd_sample(args, config):
    manifest = sampler.read_manifest(args.manifest)
    assignments = clustering.read_assignments(args.assignments)
    pattern = _read_sequence(args.trace)
    start_t = 0
    if args.trace.suffix == ".jsonl":
        with open(args.trace, encoding="utf-8") as fh:
            first = json.loads(fh.readline())
        start_t = int(first.get("t", 0))
    initial_images = sampler.read_initial_images(args.initial_images) if args.initial_images else None
    rng = make_rng(_resolve_seed(args, config))
    needed = [pattern.alphabet.name(c) for c in pattern.distinct()]
    profile = sampler.fit_preference(initial_images, assignments, rng, classes=needed)
    timeline = sampler.sample_images(pattern, manifest, assignments, profile, rng, start_t=start_t)

    if _opt(args, config, "format", "csv") == "json":
        text = json.dumps([{"t": t, "class": c, "image_id": i} for t, c, i in timeline.entries], indent=2) + "\n"
        _emit(text, args.out, "timeline.json")
    else:
        _emit(timeline.to_csv(), args.out, "timeline.csv")


def cmd_evaluate(args, config):
    a = _read_sequence(args.a)
    b = _read_sequence(args.b)
    result = metrics.evaluate(a, b)
    if _opt(args, config, "format", "json") == "csv":
        text = f"dtw,kl\n{result['dtw']!r},{result['kl']!r}\n"
        _emit(text, args.out, "metrics.csv")
    else:
        _emit(json.dumps(result) + "\n", args.out, "metrics.json")


def cmd_experiment(args, config):
    fields = dict(config)
    manifest_path = fields.pop("manifest", None) or None
    embeddings_path = fields.pop("embeddings", None) or None
    fields.pop("format", None)
    fields.pop("out", None)
    if args.lengths:
        try:
            fields["initial_lengths"] = [int(x) for x in args.lengths.split(",")]
        except ValueError:
            raise InputError(f"bad --lengths {args.lengths!r}") from None
    if args.trials is not None:
        fields["trials_per_length"] = args.trials
    if args.methods:
        fields["methods"] = args.methods.split(",")
    if args.novelty is not None:
        fields["novelty"] = args.novelty
    if args.generated_length is not None:
        fields["generated_length"] = args.generated_length
    fields["seed"] = _resolve_seed(args, config)
    spec = harness.ExperimentSpec.from_dict(fields)

    manifest_path = args.manifest or manifest_path
    embeddings_path = args.embeddings or embeddings_path
    manifest = sampler.read_manifest(manifest_path) if manifest_path else None
    embeddings = clustering.read_embeddings(embeddings_path) if embeddings_path else None
    if embeddings is not None and manifest is None:
        raise InputError("--embeddings needs --manifest")
    out_dir = args.out or (Path(config["out"]) if config.get("out") else None)
    report = harness.run_experiment(spec, manifest, embeddings, out_dir=out_dir)

    fmt = _opt(args, config, "format", "csv")
    sys.stdout.write(report.to_json() if fmt == "json" else report.to_csv())


COMMANDS = {
    "simulate": cmd_simulate,
    "cluster": cmd_cluster,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args.config)
        COMMANDS[args.command](args, config)
    except (InputError, FileNotFoundError, IsADirectoryError, harness.TrialError) as exc:
        if isinstance(exc, harness.TrialError) and not isinstance(exc.__cause__, InputError):
            log.exception("internal error")
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
