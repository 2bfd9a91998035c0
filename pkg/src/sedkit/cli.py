"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 internal error.
Verbosity comes from the ``SEDKIT_LOG`` environment variable (e.g. ``DEBUG``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import augment, classmap, core, ensemble, ingest, metrics, postprocess, tune
from .core import ClassVocabulary, ValidationError
from .losses import COMPONENTS, LossWeights, pseudo_loss_active, total_loss

log = logging.getLogger("sedkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class RunConfig:
    manifest: str | None = None
    posteriors: str | None = None
    gt: str | None = None
    durations: str | None = None
    ir_dir: str | None = None
    pseudo_labels: str | None = None
    augment: dict = field(default_factory=dict)
    loss_weights: dict = field(default_factory=dict)
    psds: dict = field(default_factory=dict)
    iteration: int = 1
    stage: int = 1

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if path is None:
            return cls()
        doc = json.loads(Path(path).read_text())
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**doc)


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.json or text is None:
        print(json.dumps(payload, indent=1, sort_keys=True, default=_jsonable))
    else:
        print(text)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(type(x))


def _write_json(path: str | Path, payload: Any) -> None:
    ingest.atomic_write(path, (json.dumps(payload, indent=1, sort_keys=True, default=_jsonable) + "\n").encode())


def _vocab(args) -> ClassVocabulary:
    return ClassVocabulary.from_json(args.vocab) if args.vocab else ClassVocabulary()


def _psds_params(args, cfg: RunConfig | None = None) -> metrics.PsdsParams:
    doc = dict(cfg.psds) if cfg else {}
    if getattr(args, "psds_config", None):
        doc.update(json.loads(Path(args.psds_config).read_text()))
    if "thresholds" in doc:
        doc["thresholds"] = tuple(doc["thresholds"])
    return metrics.PsdsParams(**doc)


def _jobs(args) -> int:
    return args.jobs if args.jobs else (os.cpu_count() or 1)


# -- subcommands --------------------------------------------------------------


def cmd_dedup(args) -> int:
    manifest = core.Manifest.from_json(args.manifest)
    pairs = []
    for spec in args.overlap:
        try:
            a, b, path = spec.split(":", 2)
        except ValueError:
            raise UsageError(f"--overlap expects SUBSET_A:SUBSET_B:IDS_FILE, got {spec!r}") from None
        pairs.append((a, b, core.read_id_list(path)))
    out, report = core.dedup(manifest, pairs)
    buf = io.StringIO()
    rows = [
        {"clip_id": e.clip_id, "duration_sec": e.duration, "subset": e.subset, "domain": e.domain}
        for e in out.entries
    ]
    buf.write(json.dumps(rows, indent=1) + "\n")
    ingest.atomic_write(args.out, buf.getvalue().encode())
    counts = {k: v for k, v in report.removed.items() if v}
    _emit(args, report.to_dict(), "removed: " + (", ".join(f"{k}={v}" for k, v in counts.items()) or "nothing"))
    return EXIT_OK


def cmd_map_labels(args) -> int:
    vocab = _vocab(args)
    cmap = classmap.CrossMap.from_json(args.crossmap) if args.crossmap else classmap.CrossMap()
    cmap.check(vocab)
    to_desed = args.direction == "maestro_to_desed"
    source_domain = "maestro" if to_desed else "desed"
    changed = 0
    if args.in_dir:
        if not args.manifest or not args.out:
            raise UsageError("posterior mapping needs --manifest and --out")
        domains = {e.clip_id: e.domain for e in core.Manifest.from_json(args.manifest).entries}
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for cid in ingest.list_posterior_dir(args.in_dir):
            grid = ingest.read_posteriors(ingest.posterior_path(args.in_dir, cid))
            if cid not in domains:
                raise ValidationError(f"clip {cid!r} missing from manifest")
            if domains[cid] == source_domain:
                if to_desed:
                    grid = classmap.map_maestro_to_desed(grid, cmap, domain=source_domain)
                else:
                    grid = classmap.map_desed_to_maestro(grid, cmap, args.threshold, domain=source_domain)
                changed += 1
            ingest.write_posteriors(grid, ingest.posterior_path(out_dir, cid))
    if args.weak_in:
        if not args.weak_out:
            raise UsageError("--weak-in needs --weak-out")
        weak = ingest.read_weak_labels(args.weak_in, vocab)
        fn = classmap.map_weak_maestro_to_desed if to_desed else classmap.map_weak_desed_to_maestro
        mapped = {cid: fn(w, cmap, vocab) for cid, w in weak.items()}
        changed += sum(mapped[c] != weak[c] for c in weak)
        ingest.write_weak_labels(mapped, args.weak_out, vocab)
    if not args.in_dir and not args.weak_in:
        raise UsageError("nothing to map: give --in and/or --weak-in")
    _emit(args, {"mapped": changed, "direction": args.direction}, f"mapped {changed} items ({args.direction})")
    return EXIT_OK


def _strong_targets(events, vocab, n_frames: int, hop: float) -> np.ndarray:
    out = np.zeros((n_frames, len(vocab)))
    for ev in events:
        lo = int(np.floor(ev.onset / hop))
        hi = int(np.ceil(ev.offset / hop))
        out[lo:hi, ev.class_id] = np.maximum(out[lo:hi, ev.class_id], ev.confidence)
    return out


def cmd_augment(args) -> int:
    from .dsp import MEL_PRESETS, read_wav

    vocab = _vocab(args)
    cfg = augment.AugConfig.from_json(args.config) if args.config else augment.AugConfig()
    if args.ir_dir:
        irs = tuple(read_wav(p) for p in sorted(Path(args.ir_dir).glob("*.wav")))
        cfg = augment.AugConfig(cfg.methods, irs, cfg.time_mask_subsets)
    manifest = core.Manifest.from_json(args.manifest)
    gts = ingest.read_events(args.gt, vocab) if args.gt else {}
    weak = ingest.read_weak_labels(args.weak, vocab) if args.weak else {}
    cmap = classmap.CrossMap()
    hop = MEL_PRESETS["cnn"].hop
    pools: dict[str, list] = {}
    for entry in manifest.entries:
        if entry.subset not in augment.BATCH_SUBSETS:
            continue
        wav = Path(args.wav_dir) / entry.clip_id
        if not wav.exists():
            continue
        pools.setdefault(entry.subset, []).append(entry)
    comp = (
        augment.BatchComposition(*[int(v) for v in args.counts.split(",")])
        if args.counts
        else augment.BatchComposition.preset(args.stage)
    )
    rng = np.random.default_rng(args.seed)
    entries, tags = augment.compose_batch(pools, comp, rng)
    batch = []
    for entry in entries:
        w = read_wav(Path(args.wav_dir) / entry.clip_id)
        n_frames = w.samples.size // MEL_PRESETS["cnn"].hop_samples() + 1
        mask = classmap.extend_class_mask(core.ClassMask.for_domain(vocab, entry.domain), entry.domain, cmap).valid
        strong = weak_t = None
        if entry.subset in augment.STRONG_TAGS:
            strong = _strong_targets(gts.get(entry.clip_id, ()), vocab, n_frames, hop)
        elif entry.subset == "desed_weak":
            weak_t = np.zeros(len(vocab))
            if entry.clip_id in weak:
                weak_t[list(weak[entry.clip_id].classes)] = 1.0
        batch.append(augment.LabeledExample(w.samples, mask, entry.domain, strong, weak_t, subset=entry.subset))
    applied: list = []
    out = augment.apply_pipeline(batch, cfg, args.stage, args.iteration, rng, applied=applied)
    arrays = {"features": np.stack([ex.features for ex in out]), "mask": np.stack([ex.mask for ex in out])}
    for i, ex in enumerate(out):
        if ex.strong is not None:
            arrays[f"strong_{i}"] = ex.strong
        if ex.weak is not None:
            arrays[f"weak_{i}"] = ex.weak
    arrays["tags"] = np.array(tags)
    arrays["clip_ids"] = np.array([e.clip_id for e in entries])
    arrays["applied"] = np.array(json.dumps(applied))
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    ingest.atomic_write(args.out, buf.getvalue())
    summary = {"batch_size": len(out), "enabled": cfg.enabled(args.iteration, args.stage), "applied": len(applied)}
    _emit(args, summary, f"batch of {len(out)}; methods {', '.join(summary['enabled'])}; {len(applied)} applications")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    members = tuple(m for m in args.members.split(",") if m)
    weights = tuple(float(w) for w in args.weights.split(",")) if args.weights else None
    spec = ensemble.EnsembleSpec(members, weights)
    if args.manifest:
        clip_ids = [e.clip_id for e in core.Manifest.from_json(args.manifest).entries]
    else:
        clip_ids = sorted(set().union(*(ingest.list_posterior_dir(m) for m in members)))
    paths = ensemble.make_pseudo_labels(spec, clip_ids, args.out, jobs=_jobs(args))
    _emit(args, {"written": len(paths), "out": args.out}, f"wrote {len(paths)} ensembled grids to {args.out}")
    return EXIT_OK


def _postprocess_clip(job):
    grid, method, params, threshold, class_ids = job
    if method == "median":
        per_class = postprocess.median_filter_events(grid, threshold, params)
    else:
        per_class = postprocess.sebb_events(grid, params)
    return grid.clip_id, postprocess.flatten(per_class, class_ids)


def cmd_postprocess(args) -> int:
    vocab = _vocab(args)
    params = postprocess.load_params(args.params)
    if args.method == "median" and not isinstance(params, postprocess.MedianFilterParams):
        raise ValidationError("median method needs {class: {filter_len}} parameters")
    if args.method == "sebb" and not isinstance(params, postprocess.SebbParams):
        raise ValidationError("sebb method needs step_filter_len/merge_thre_rel/merge_thre_abs parameters")
    jobs = []
    for cid in ingest.list_posterior_dir(args.in_dir):
        grid = ingest.read_posteriors(ingest.posterior_path(args.in_dir, cid))
        class_ids = [vocab.index(n) for n in grid.class_names]
        jobs.append((grid, args.method, params, args.threshold, class_ids))
    n_jobs = _jobs(args)
    if n_jobs > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_postprocess_clip, jobs))
    else:
        results = [_postprocess_clip(j) for j in jobs]
    events = dict(results)
    ingest.write_events(events, args.out, vocab, scored=True)
    n = sum(len(v) for v in events.values())
    _emit(args, {"clips": len(events), "events": n}, f"{n} events from {len(events)} clips -> {args.out}")
    return EXIT_OK


def _load_eval_inputs(args, vocab):
    gts = ingest.read_events(args.gt, vocab)
    durations = ingest.read_durations(args.durations)
    missing = sorted(set(gts) - set(durations))
    if missing:
        raise ValidationError(f"clips without duration: {missing[:5]}")
    gts = {clip: gts.get(clip, []) for clip in durations}
    return gts, durations


def _mpauc_report(args, vocab, gts, durations, dets):
    classes = args.classes.split(",") if args.classes else None
    if args.posteriors:
        grids = ingest.read_posterior_dir(args.posteriors)
        grids = {c: g for c, g in grids.items() if c in durations}
        seg = metrics.segmentize(gts, grids, vocab, args.segment_len, durations)
    else:
        names = classes or list(vocab.names)
        seg = metrics.segmentize_events(gts, dets, names, vocab, durations, args.segment_len)
    if classes is None:
        # challenge classes when the data has them, otherwise every class with positives
        has_pos = {n for n, (_, labels) in seg.items() if labels.any()}
        classes = [n for n in core.MAESTRO_EVAL_CLASSES if n in has_pos] or sorted(has_pos)
    return metrics.mpauc(seg, args.max_fpr, classes, standardize=args.pauc_standardize == "on")


def cmd_evaluate(args) -> int:
    vocab = _vocab(args)
    gts, durations = _load_eval_inputs(args, vocab)
    dets = ingest.read_events(args.dets, vocab) if args.dets else {}
    params = _psds_params(args)
    report: dict[str, Any] = {"metric": args.metric}
    if args.metric in ("psds1", "rank"):
        if not args.dets:
            raise UsageError("psds1 needs --dets")
        res = metrics.psds_from_scored(dets, gts, durations, len(vocab), params)
        report["psds1"] = res.score
        report["psds1_per_class"] = {
            vocab.name(c): metrics.staircase_area([res.curves[c]], params.e_max) for c in res.included
        }
        report["params"] = asdict(params)
    if args.metric in ("mpauc", "rank"):
        res_m = _mpauc_report(args, vocab, gts, durations, dets)
        report["mpauc"] = res_m.score
        report["mpauc_per_class"] = res_m.per_class
        report["mpauc_excluded"] = res_m.excluded
        report["mpauc_params"] = {"max_fpr": args.max_fpr, "standardize": args.pauc_standardize}
    if args.metric == "rank":
        report["rank_score"] = metrics.rank_score(report["mpauc"], report["psds1"])
    report["score"] = report[{"psds1": "psds1", "mpauc": "mpauc", "rank": "rank_score"}[args.metric]]
    if args.metric == "psds1":
        report["per_class"] = report["psds1_per_class"]
    elif args.metric == "mpauc":
        report["per_class"] = report["mpauc_per_class"]
        report["params"] = report["mpauc_params"]
    else:
        report["per_class"] = {"psds1": report["psds1_per_class"], "mpauc": report["mpauc_per_class"]}
    label = {"psds1": "PSDS", "mpauc": "mpAUC", "rank": "Rank"}[args.metric]
    if args.out:
        _write_json(args.out, report)
    _emit(args, report, f"{label}={round(report['score'], 6)}")
    return EXIT_OK


def cmd_tune(args) -> int:
    vocab = _vocab(args)
    if args.split == "test":
        log.warning("tuning on the test split: reported scores on this split are optimistic")
        print("warning: tuning on the test split leaks into test scores", file=sys.stderr)
    gts, durations = _load_eval_inputs(args, vocab)
    grids = {c: g for c, g in ingest.read_posterior_dir(args.in_dir).items() if c in durations}
    if not grids:
        raise ValidationError("no posterior grids match the duration table")
    params = _psds_params(args)
    if args.method == "median":
        lens = [float(v) for v in args.filter_lens.split(",")]
        chosen, table = tune.tune_median(grids, gts, vocab, lens, durations, params)
        _write_json(args.out, {c: {"filter_len": v} for c, v in sorted(chosen.filter_len.items())})
        fields = ["class", "filter_len", "score"]
    else:
        grid = tune.TuneGrid.from_json(args.grid) if args.grid else tune.TuneGrid()
        result = tune.tune_sebb(grids, gts, vocab, durations, grid, params, jobs=_jobs(args))
        _write_json(args.out, result.params.to_dict())
        table = result.table
        fields = ["class", "step_filter_len", "merge_thre_rel", "merge_thre_abs", "score"]
    if args.table:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in table:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        ingest.atomic_write(args.table, buf.getvalue().encode())
    _emit(args, {"out": args.out, "rows": len(table), "split": args.split}, f"tuned params -> {args.out} ({len(table)} table rows)")
    return EXIT_OK


def cmd_rank(args) -> int:
    with open(args.results, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"model_id", "mpauc", "psds1"}
        if not reader.fieldnames or not need <= set(reader.fieldnames):
            raise ValidationError(f"{args.results}: need columns {sorted(need)}")
        try:
            rows = [(r["model_id"], float(r["mpauc"]), float(r["psds1"])) for r in reader]
        except ValueError:
            raise ValidationError(f"{args.results}: malformed number") from None
    board = tune.rank_models(rows)
    text = "\n".join(f"{i + 1:>3}  {r.model_id:<24} {r.rank_score:.4f}  (mpAUC {r.mpauc:.4f}, PSDS1 {r.psds1:.4f})" for i, r in enumerate(board))
    _emit(args, {"leaderboard": [asdict(r) for r in board]}, text)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = RunConfig.load(args.config)
    iteration = args.iteration or cfg.iteration
    stage = args.stage or cfg.stage
    if iteration not in (1, 2) or stage not in (1, 2):
        raise UsageError("iteration and stage must be 1 or 2")
    for key in ("manifest", "pseudo_labels", "ir_dir", "gt", "durations", "posteriors"):
        value = getattr(args, key, None)
        if value:
            setattr(cfg, key, value)
    problems = []
    for key in ("manifest", "posteriors", "gt", "durations", "ir_dir", "pseudo_labels"):
        value = getattr(cfg, key)
        if value and not Path(value).exists():
            problems.append(f"{key}: {value} does not exist")
    aug_cfg = augment.AugConfig.from_dict(cfg.augment)
    enabled = aug_cfg.enabled(iteration, stage)
    if "dir" in enabled and not cfg.ir_dir:
        problems.append("DIR augmentation is enabled at this stage but no ir_dir is configured")
    needs_pseudo = pseudo_loss_active(iteration, stage)
    if needs_pseudo:
        if not cfg.pseudo_labels:
            problems.append(f"I{iteration}.S{stage} trains on pseudo-labels but none are configured")
        elif Path(cfg.pseudo_labels).is_dir() and cfg.manifest and Path(cfg.manifest).exists():
            have = set(ingest.list_posterior_dir(cfg.pseudo_labels))
            manifest = core.Manifest.from_json(cfg.manifest)
            train = {e.clip_id for e in manifest.entries if e.subset in augment.BATCH_SUBSETS}
            missing = sorted(train - have)
            if missing:
                problems.append(f"pseudo-labels missing for {len(missing)} training clips, e.g. {missing[:3]}")
    weights = LossWeights.from_dict(cfg.loss_weights) if cfg.loss_weights else LossWeights()
    breakdown = total_loss({c: 0.0 for c in COMPONENTS}, weights, stage, iteration)
    comp = augment.BatchComposition.preset(stage)
    report = {
        "iteration": iteration,
        "stage": stage,
        "augmentations": enabled,
        "batch_composition": comp.counts(),
        "batch_size": comp.size,
        "loss_terms": sorted(breakdown.terms),
        "loss_warnings": breakdown.warnings,
        "problems": problems,
        "ok": not problems,
    }
    text = [f"I{iteration}.S{stage}: batch {comp.size} {tuple(comp.counts().values())}",
            f"  augmentations: {', '.join(enabled)}",
            f"  loss terms: {', '.join(sorted(breakdown.terms))}"]
    text += [f"  warning: {w}" for w in breakdown.warnings]
    text += [f"  problem: {p}" for p in problems]
    _emit(args, report, "\n".join(text))
    return EXIT_OK if not problems else EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    common.add_argument("--vocab", help="JSON with desed_classes and maestro_classes")

    p = _Parser(prog="sedkit", description="Sound event detection tooling")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("dedup", parents=[common], help="remove clips shared between subsets")
    s.add_argument("--manifest", required=True)
    s.add_argument("--overlap", action="append", default=[], metavar="A:B:IDS")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_dedup)

    s = sub.add_parser("map-labels", parents=[common], help="apply the DESED/MAESTRO class mapping")
    s.add_argument("--direction", required=True, choices=["maestro_to_desed", "desed_to_maestro"])
    s.add_argument("--in", dest="in_dir")
    s.add_argument("--out")
    s.add_argument("--manifest")
    s.add_argument("--weak-in")
    s.add_argument("--weak-out")
    s.add_argument("--crossmap")
    s.add_argument("--threshold", type=float, default=0.5)
    s.set_defaults(fn=cmd_map_labels)

    s = sub.add_parser("augment", parents=[common], help="compose and augment one demo batch")
    s.add_argument("--manifest", required=True)
    s.add_argument("--wav-dir", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--stage", type=int, choices=[1, 2], default=1)
    s.add_argument("--iteration", type=int, choices=[1, 2], default=1)
    s.add_argument("--counts", help="comma separated counts for the five subsets")
    s.add_argument("--config")
    s.add_argument("--ir-dir")
    s.add_argument("--gt")
    s.add_argument("--weak")
    s.set_defaults(fn=cmd_augment)

    s = sub.add_parser("ensemble", parents=[common], help="logit-average member posteriors")
    s.add_argument("--members", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--weights")
    s.add_argument("--manifest")
    s.set_defaults(fn=cmd_ensemble)

    s = sub.add_parser("postprocess", parents=[common], help="posteriors to events")
    s.add_argument("--method", required=True, choices=["median", "sebb"])
    s.add_argument("--params", required=True)
    s.add_argument("--in", dest="in_dir", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threshold", type=float, default=0.5)
    s.set_defaults(fn=cmd_postprocess)

    def eval_args(s):
        s.add_argument("--gt", required=True)
        s.add_argument("--durations", required=True)
        s.add_argument("--psds-config", help="JSON overriding PSDS parameters")

    s = sub.add_parser("evaluate", parents=[common], help="PSDS1 / mpAUC / rank score")
    eval_args(s)
    s.add_argument("--dets")
    s.add_argument("--metric", choices=["psds1", "mpauc", "rank"], default="psds1")
    s.add_argument("--posteriors", help="SEDP directory for segment scores")
    s.add_argument("--classes", help="comma separated classes for mpAUC")
    s.add_argument("--max-fpr", type=float, default=0.1)
    s.add_argument("--segment-len", type=float, default=1.0)
    s.add_argument("--pauc-standardize", choices=["on", "off"], default="on")
    s.add_argument("--out", help="also write the JSON report here")
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("tune", parents=[common], help="per-class post-processing search")
    eval_args(s)
    s.add_argument("--in", dest="in_dir", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--grid")
    s.add_argument("--table")
    s.add_argument("--split", required=True, choices=["dev", "test"])
    s.add_argument("--method", choices=["sebb", "median"], default="sebb")
    s.add_argument("--filter-lens", default="0.1,0.3,0.5,0.7,0.9")
    s.set_defaults(fn=cmd_tune)

    s = sub.add_parser("rank", parents=[common], help="leaderboard by mpAUC + PSDS1")
    s.add_argument("--results", required=True)
    s.set_defaults(fn=cmd_rank)

    s = sub.add_parser("pipeline", parents=[common], help="check stage/iteration setup and inputs")
    s.add_argument("--iteration", type=int, choices=[1, 2])
    s.add_argument("--stage", type=int, choices=[1, 2])
    s.add_argument("--config")
    s.add_argument("--manifest")
    s.add_argument("--pseudo-labels")
    s.add_argument("--ir-dir")
    s.set_defaults(fn=cmd_pipeline)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("SEDKIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"sedkit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"sedkit: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:
        # --help exits through argparse
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"sedkit: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
