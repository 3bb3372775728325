"""Command-line entry point: ``tarpo-lab {score,train-sim,compare,parse-region}``.

Every output file is JSON lines. The first line is a header carrying the
timestamp and the full configuration; everything after it is a pure function
of the inputs and seeds.

Exit codes: 0 success, 2 input/schema/config error, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .dataset import dumps, load_dataset, load_transcripts, read_jsonl, write_jsonl
from .errors import (
    ConfigError, DivergenceDetected, IncompatibleRuns, MissingRecord, SchemaError, TarpoLabError,
)
from .reward import RewardConfig, answer_reward, mixed_reward, region_reward
from .sim.training import train
from .table import (
    RegionSyntaxError, canonicalize_region, find_answer, iter_region_declarations, parse_response,
    serialize_raw_region, serialize_region,
)

log = logging.getLogger("tarpo_lab")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DIVERGED = 3


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _header(command: str, **extra) -> dict:
    return {"type": "header", "command": command, "created": _now(), **extra}


def _emit(records: list[dict], out: str | None, filename: str) -> Path | None:
    if out is None:
        for r in records:
            print(dumps(r))
        return None
    path = Path(out) / filename
    write_jsonl(path, records)
    return path


# --- score --------------------------------------------------------------------

def cmd_score(dataset_path, transcripts_path, config: RewardConfig, alpha: float | None = None) -> list[dict]:
    """Score transcripts offline against gold regions and answers.

    Returns report records: header, one per transcript, then the aggregate.
    """
    alpha = config.gamma if alpha is None else alpha
    dataset = load_dataset(dataset_path)
    transcripts = load_transcripts(transcripts_path)
    rows = []
    for tr in transcripts:
        rec = dataset.get(tr.id)
        if rec is None:
            raise MissingRecord(tr.id)
        resp = parse_response(tr.response, rec.table, rec.reasoning_kind)
        if resp.region is not None:
            status = "found"
        elif resp.region_error is None:
            status = "absent"
        elif resp.raw_region is None:
            status = "syntax-error"
        else:
            status = "invalid"
        r_t = region_reward(resp.region, rec.gold_region)
        r_a = answer_reward(resp.answer_text, rec.gold_answer, config)
        rows.append({
            "type": "record", "id": tr.id, "reasoning_kind": rec.reasoning_kind,
            "region_status": status, "answer": resp.answer_text,
            "r_t": r_t, "r_a": r_a, "mixed": mixed_reward(r_t, r_a, alpha),
        })

    def summarize(items):
        n = len(items)
        totals = {k: float(sum(r[k] for r in items)) for k in ("r_t", "r_a", "mixed")}
        means = {f"mean_{k}": (v / n if n else 0.0) for k, v in totals.items()}
        return {"n": n, **{f"total_{k}": v for k, v in totals.items()}, **means}

    by_kind = {}
    for kind in sorted({r["reasoning_kind"] for r in rows}):
        by_kind[kind] = summarize([r for r in rows if r["reasoning_kind"] == kind])
    aggregate = {"type": "aggregate", "alpha": alpha, **summarize(rows), "by_kind": by_kind}
    header = _header("score", alpha=alpha, reward=config.as_dict(),
                     dataset=str(dataset_path), transcripts=str(transcripts_path))
    return [header, *rows, aggregate]


# --- train-sim ----------------------------------------------------------------

def _run_one(args):
    run_config, seed = args
    stats, _ = train(run_config.for_seed(seed))
    return seed, stats


def cmd_train_sim(run_config: RunConfig, out: str | Path | None = None) -> dict[int, Path]:
    """Train one arm for every configured seed and write one stats file per seed."""
    out_dir = Path(out if out is not None else run_config.out)
    threads = max(1, int(os.environ.get("TARPO_LAB_THREADS", "1") or 1))
    jobs = [(run_config, s) for s in run_config.seeds]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    algorithm = run_config.train.algorithm
    written = {}
    for seed, stats in results:
        header = _header("train-sim", algorithm=algorithm, seed=seed, config=run_config.to_dict())
        records = [header]
        records += [{"type": "step", **r} for r in stats.step_records()]
        records.append({"type": "summary", **stats.summary})
        path = out_dir / f"{algorithm}_seed{seed}.jsonl"
        write_jsonl(path, records)
        written[seed] = path
        s = stats.summary
        print(f"{algorithm} seed={seed} val_acc={s['val_acc']:.4f} mean_len={s['mean_len']:.2f} -> {path}")
    return written


# --- compare ------------------------------------------------------------------

def _read_run(path: Path) -> tuple[dict, dict]:
    header = summary = None
    for lineno, obj in read_jsonl(path):
        if obj.get("type") == "header":
            header = obj
        elif obj.get("type") == "summary":
            summary = obj
    if header is None or summary is None:
        raise SchemaError(path, 0, "stats file needs a header and a summary record")
    return header, summary


def _task_identity(header: dict) -> tuple:
    cfg = header.get("config", {})
    run = cfg.get("run", {})
    return (run.get("task_seed"), run.get("n_tasks"), run.get("val_fraction"),
            json.dumps(cfg.get("shape"), sort_keys=True))


COMPARE_METRICS = ("val_acc", "val_region_reward", "mean_len")


def cmd_compare(paths) -> list[dict]:
    """Average each arm (a stats file or a directory of them) and report deltas vs the first arm."""
    if len(paths) < 2:
        raise IncompatibleRuns("compare needs at least two runs")
    arms = []
    for p in map(Path, paths):
        files = sorted(p.glob("*.jsonl")) if p.is_dir() else [p]
        if not files:
            raise SchemaError(p, 0, "no stats files found")
        runs = [_read_run(f) for f in files]
        identities = {_task_identity(h) for h, _ in runs}
        if len(identities) != 1:
            raise IncompatibleRuns(f"{p}: runs use different task seeds or shapes")
        algorithms = sorted({h.get("algorithm", "?") for h, _ in runs})
        metrics = {m: float(np.mean([s[m] for _, s in runs])) for m in COMPARE_METRICS}
        arms.append({
            "arm": str(p), "algorithm": ",".join(algorithms),
            "seeds": sorted(s.get("seed") for _, s in runs), "identity": identities.pop(), **metrics,
        })
    base = arms[0]
    for arm in arms[1:]:
        if arm["identity"] != base["identity"]:
            raise IncompatibleRuns(f"{arm['arm']} and {base['arm']} were trained on different tasks")
    rows = []
    for arm in arms:
        arm.pop("identity")
        rows.append({**arm, **{f"delta_{m}": arm[m] - base[m] for m in COMPARE_METRICS}})
    return rows


def format_compare(rows: list[dict]) -> str:
    cols = ["arm", "algorithm", *COMPARE_METRICS, *(f"delta_{m}" for m in COMPARE_METRICS)]
    cells = [[r["arm"], r["algorithm"], *(f"{r[c]:.4f}" for c in cols[2:])] for r in rows]
    widths = [max(len(c), *(len(x[i]) for x in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(x.ljust(w) for x, w in zip(line, widths)) for line in cells]
    return "\n".join(lines)


# --- parse-region -------------------------------------------------------------

def cmd_parse_region(transcripts_path, dataset_path=None) -> list[dict]:
    """Diagnose region declarations in transcripts; never fails on a bad declaration."""
    dataset = load_dataset(dataset_path) if dataset_path else {}
    report = []
    for tr in load_transcripts(transcripts_path):
        decls = list(iter_region_declarations(tr.response))
        entry = {"id": tr.id, "count": len(decls), "status": "absent",
                 "canonical": None, "position": None, "error": None}
        if decls:
            first, span = decls[0]
            if isinstance(first, RegionSyntaxError):
                entry.update(status="syntax-error", error=str(first))
            else:
                entry["status"] = "found"
                rec = dataset.get(tr.id)
                if rec is None:
                    entry["canonical"] = serialize_raw_region(first)
                else:
                    try:
                        entry["canonical"] = serialize_region(canonicalize_region(first, rec.table), rec.table)
                    except TarpoLabError as exc:
                        entry.update(status="invalid", error=str(exc))
            answer = find_answer(tr.response)
            if answer is None:
                entry["position"] = "no-answer-marker"
            else:
                entry["position"] = "pre-answer" if span[0] < answer[1] else "post-answer"
        report.append(entry)
    return report


# --- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tarpo-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score transcripts against a dataset")
    p.add_argument("dataset")
    p.add_argument("transcripts")
    p.add_argument("--config")
    p.add_argument("--alpha", type=float, help="region weight for the mixed reward (default: gamma)")
    p.add_argument("--out", help="directory for score.jsonl (default: stdout)")

    p = sub.add_parser("train-sim", help="train on the synthetic benchmark")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, help="run this single seed instead of the configured list")
    p.add_argument("--out")
    p.add_argument("--algorithm", choices=("grpo", "tarpo", "tarpo-fixed"))
    p.add_argument("--alpha-fixed", type=float)

    p = sub.add_parser("compare", help="side-by-side deltas between finished runs")
    p.add_argument("runs", nargs="+", help="stats files or directories of stats files (one arm each)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("parse-region", help="report region declarations found in transcripts")
    p.add_argument("transcripts")
    p.add_argument("--dataset", help="bind regions to dataset tables for canonical output")
    p.add_argument("--out")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    train_cfg = cfg.train
    try:
        if args.algorithm:
            train_cfg = replace(train_cfg, algorithm=args.algorithm)
        if args.alpha_fixed is not None:
            train_cfg = replace(train_cfg, alpha_fixed=args.alpha_fixed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seeds = (args.seed,) if args.seed is not None else cfg.seeds
    out = args.out if args.out is not None else cfg.out
    return RunConfig(train_cfg, seeds, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "score":
            cfg = load_config(args.config)
            records = cmd_score(args.dataset, args.transcripts, cfg.train.reward, args.alpha)
            path = _emit(records, args.out, "score.jsonl")
            if path is not None:
                agg = records[-1]
                print(f"n={agg['n']} mean_r_t={agg['mean_r_t']:.4f} mean_r_a={agg['mean_r_a']:.4f} "
                      f"mean_mixed={agg['mean_mixed']:.4f} -> {path}")
        elif args.command == "train-sim":
            cfg = _apply_overrides(load_config(args.config), args)
            cmd_train_sim(cfg)
        elif args.command == "compare":
            rows = cmd_compare(args.runs)
            if args.json:
                for r in rows:
                    print(dumps(r))
            else:
                print(format_compare(rows))
        elif args.command == "parse-region":
            report = cmd_parse_region(args.transcripts, args.dataset)
            records = [_header("parse-region", transcripts=str(args.transcripts)),
                       *({"type": "transcript", **r} for r in report)]
            _emit(records, args.out, "regions.jsonl")
    except DivergenceDetected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (TarpoLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
