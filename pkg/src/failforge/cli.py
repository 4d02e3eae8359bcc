"""Command-line entry point: every pipeline stage as a subcommand.

Exit codes: 0 success, 1 partial failure (some items skipped or invalid),
2 fatal error, 64 usage error. Logs go to stderr, artifacts to disk; every
artifact gets a `<name>.meta.json` sidecar recording tool version, master
seed, and config hash so `verify-provenance` can replay it later.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import PipelineConfig, load_config
from .cot import annotate_samples
from .episode import Episode, load_corpus, load_episode, validate_episode
from .errors import FailforgeError, NotApplicable, SchemaError
from .gateway import ModelGateway
from .harness.evaluate import evaluate_split
from .harness.export import export_training_set
from .harness.stats import dataset_stats, render_stats
from .imaging import compose_grid, load_image_part, select_views
from .lexicon import Lexicon, load_lexicon
from .perturb.execution import (
    emit_sim_directive,
    generate_execution_samples,
    ingest_sim_rollout,
    perturb_revert_action,
    perturb_semantic_mismatch,
    read_directives,
    success_execution_sample,
    write_directives,
)
from .perturb.planning import (
    generate_planning_samples,
    perturb_contradictory,
    perturb_missing_subtask,
    perturb_wrong_object,
    perturb_wrong_order,
    perturb_wrong_state_or_placement,
    success_planning_sample,
)
from .samples import PlanningSample, Sample, read_shard, write_shard
from .seeding import canonical_dumps, hash64
from .service.backend import GatewayBackend

log = logging.getLogger("failforge")

EX_OK = 0
EX_PARTIAL = 1
EX_FATAL = 2
EX_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 64, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _write_meta(artifact: Path, cfg: PipelineConfig) -> None:
    meta = {
        "tool_version": f"failforge-{__version__}",
        "master_seed": cfg.master_seed,
        "config_hash": cfg.config_hash(),
    }
    artifact.with_name(artifact.name + ".meta.json").write_text(
        canonical_dumps(meta) + "\n", encoding="utf-8"
    )


def _load_cfg(args) -> PipelineConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "corpus", None):
        overrides["corpus"] = tuple(args.corpus)
    return load_config(getattr(args, "config", None), overrides)


def _corpus_roots(cfg: PipelineConfig, args) -> list[Path]:
    roots = [Path(p) for p in (getattr(args, "corpus", None) or cfg.corpus)]
    if not roots:
        raise SchemaError("no corpus given; pass --corpus or set it in the config")
    for r in roots:
        if not r.exists():
            raise SchemaError(f"corpus root does not exist: {r}")
    return roots


def _load_episodes(cfg: PipelineConfig, args) -> list[Episode]:
    jobs = getattr(args, "jobs", 1) or 1
    episodes: list[Episode] = []
    seen: dict[str, Path] = {}
    for root in _corpus_roots(cfg, args):
        for ep in load_corpus(root, jobs=jobs):
            if ep.episode_id in seen:
                raise SchemaError(f"duplicate episode id across roots: {ep.episode_id}")
            seen[ep.episode_id] = root
            episodes.append(ep)
    return sorted(episodes, key=lambda e: e.episode_id)


def _lexicon(cfg: PipelineConfig) -> Lexicon:
    return load_lexicon(cfg.lexicon) if cfg.lexicon else load_lexicon()


def _gateway(cfg: PipelineConfig) -> ModelGateway:
    if cfg.gateway is None:
        raise SchemaError("command needs a [gateway] block with base_url in the config")
    return ModelGateway(cfg.gateway)


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(canonical_dumps(payload))
    else:
        print(text)


# -- subcommands --------------------------------------------------------


def cmd_validate(args) -> int:
    cfg = _load_cfg(args)
    roots = _corpus_roots(cfg, args)
    bad = total = 0
    findings = []
    for root in roots:
        for ep in load_corpus(root, jobs=args.jobs):
            total += 1
            report = validate_episode(ep, corpus_root=root)
            for w in report.warnings:
                log.warning("%s: %s", ep.episode_id, w)
            if not report.ok:
                bad += 1
                for e in report.errors:
                    log.error("%s: %s", ep.episode_id, e)
            findings.append(
                {"episode_id": ep.episode_id, "ok": report.ok, "errors": list(report.errors)}
            )
    _emit(
        args,
        {"episodes": total, "invalid": bad, "reports": findings},
        f"validated {total} episodes, {bad} invalid",
    )
    return EX_OK if bad == 0 else EX_PARTIAL


def _cmd_gen(args, kind: str) -> int:
    cfg = _load_cfg(args)
    episodes = _load_episodes(cfg, args)
    lex = _lexicon(cfg)
    gw = _gateway(cfg) if args.llm else None
    gen_cfg = cfg.planning if kind == "plan" else cfg.execution
    if args.target is not None:
        gen_cfg = type(gen_cfg)(
            target=args.target, master_seed=gen_cfg.master_seed, weights=gen_cfg.weights
        )
    if gen_cfg.target <= 0:
        raise SchemaError(f"[{'planning' if kind == 'plan' else 'execution'}] target must be > 0")
    if kind == "plan":
        samples = generate_planning_samples(episodes, gen_cfg, lex, gateway=gw)
    else:
        samples = generate_execution_samples(episodes, gen_cfg, lex, gateway=gw)
    out = Path(args.out or Path(cfg.out_root) / f"{kind}.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    n = write_shard(samples, out, check_traces=False)
    _write_meta(out, cfg)
    log.info("wrote %d %s samples to %s", n, kind, out)
    _emit(args, {"out": str(out), "samples": n}, f"{out}: {n} samples")
    return EX_OK


def cmd_gen_plan(args) -> int:
    return _cmd_gen(args, "plan")


def cmd_gen_exec(args) -> int:
    return _cmd_gen(args, "exec")


def cmd_emit_directives(args) -> int:
    cfg = _load_cfg(args)
    episodes = [ep for ep in _load_episodes(cfg, args) if ep.source == "sim"]
    if not episodes:
        raise SchemaError("no sim episodes in the corpus")
    directives = []
    skipped = 0
    for ep in episodes:
        for i in range(args.per_episode):
            seed = hash64(cfg.master_seed, ep.episode_id, "directive", i)
            try:
                directives.append(emit_sim_directive(ep, seed))
            except NotApplicable as e:
                skipped += 1
                log.warning("skipped: %s", e)
    out = Path(args.out or Path(cfg.out_root) / "directives.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    n = write_directives(directives, out)
    _write_meta(out, cfg)
    _emit(
        args,
        {"out": str(out), "directives": n, "skipped": skipped},
        f"{out}: {n} directives ({skipped} skipped)",
    )
    return EX_OK if skipped == 0 else EX_PARTIAL


def cmd_ingest_rollouts(args) -> int:
    cfg = _load_cfg(args)
    directives = {d.directive_id: d for d in read_directives(args.directives)}
    rollout_root = Path(args.rollouts)
    samples = []
    failures = 0
    for path in sorted(rollout_root.rglob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            continue
        did = (doc.get("extensions") or {}).get("directive_id")
        if did is None:
            continue
        directive = directives.get(did)
        if directive is None:
            failures += 1
            log.error("%s: rollout names unknown directive %s", path, did)
            continue
        try:
            samples.append(ingest_sim_rollout(directive, path))
        except FailforgeError as e:
            failures += 1
            log.error("%s: %s", path, e)
    out = Path(args.out or Path(cfg.out_root) / "sim-exec.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    n = write_shard(samples, out, check_traces=False)
    _write_meta(out, cfg)
    _emit(
        args,
        {"out": str(out), "samples": n, "failed": failures},
        f"{out}: {n} samples ingested ({failures} failed)",
    )
    return EX_OK if failures == 0 else EX_PARTIAL


def cmd_gen_cot(args) -> int:
    cfg = _load_cfg(args)
    samples = read_shard(args.shard)
    episodes = {ep.episode_id: ep for ep in _load_episodes(cfg, args)}
    corpus_root = args.corpus_root or (cfg.corpus[0] if cfg.corpus else None)
    kwargs = {}
    if cfg.cot.get("max_regen") is not None:
        kwargs["max_regen"] = int(cfg.cot["max_regen"])
    if cfg.cot.get("model_id"):
        kwargs["model_id"] = str(cfg.cot["model_id"])
    with _gateway(cfg) as gw:
        annotated, failures = annotate_samples(
            samples, episodes, gw, corpus_root=corpus_root, **kwargs
        )
    kept = [s for s in annotated if s.cot is not None]
    out = Path(args.out or Path(cfg.out_root) / "cot.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    n = write_shard(kept, out)
    _write_meta(out, cfg)
    for sid, err in failures:
        log.error("%s: %s", sid, err)
    _emit(
        args,
        {"out": str(out), "annotated": n, "failed": len(failures)},
        f"{out}: {n} annotated ({len(failures)} failed)",
    )
    return EX_OK if not failures else EX_PARTIAL


def cmd_stats(args) -> int:
    stats = dataset_stats(args.paths)
    if args.json:
        print(canonical_dumps(stats.to_dict()))
    else:
        print(render_stats(stats))
    return EX_OK


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    samples = read_shard(args.shard)
    opts = cfg.eval_options
    if args.audit or args.jobs or args.corpus_root:
        from dataclasses import replace

        opts = replace(
            opts,
            audit_path=args.audit or opts.audit_path,
            jobs=args.jobs or opts.jobs,
            corpus_root=args.corpus_root or opts.corpus_root,
            split_name=Path(args.shard).stem,
        )
    model_id = args.model or cfg.cot.get("detector_model_id", "detector")
    with _gateway(cfg) as gw:
        backend = GatewayBackend(gw, model_id=model_id)
        report = evaluate_split(samples, backend.complete, opts)
    if args.audit:
        _write_meta(Path(args.audit), cfg)
    if args.json:
        print(canonical_dumps(report.to_dict()))
    else:
        print(report.render_text())
    return EX_OK


def cmd_export_train(args) -> int:
    cfg = _load_cfg(args)
    export_cfg = cfg.export
    if args.strategy or args.view_policy:
        from dataclasses import replace

        export_cfg = replace(
            export_cfg,
            strategy=args.strategy or export_cfg.strategy,
            view_policy=args.view_policy or export_cfg.view_policy,
        )
    samples = read_shard(args.shard)
    out = Path(args.out or Path(cfg.out_root) / f"train-{export_cfg.strategy}.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    n = export_training_set(samples, export_cfg, out)
    _write_meta(out, cfg)
    _emit(args, {"out": str(out), "examples": n}, f"{out}: {n} training examples")
    return EX_OK


def cmd_compose_grid(args) -> int:
    cfg = _load_cfg(args)
    ep = load_episode(args.episode)
    st = ep.step(args.step)
    root = Path(args.corpus_root) if args.corpus_root else Path(args.episode).parent
    cams = sorted({f.camera_id for f in st.start_frames})
    if args.views:
        seed = hash64(cfg.master_seed, "grid", ep.episode_id, st.index)
        cams = select_views(cams, args.views, seed)
    by_cam_start = {f.camera_id: f for f in st.start_frames}
    by_cam_end = {f.camera_id: f for f in st.end_frames}
    cells = []
    for cam in cams:
        for t, ref in enumerate((by_cam_start[cam], by_cam_end[cam])):
            cells.append((cam, t, load_image_part(root / ref.path).decode()))
    grid = compose_grid(cells, views=len(cams), timesteps=2)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    grid.save(out, format="PNG")
    _write_meta(out, cfg)
    _emit(
        args,
        {"out": str(out), "views": len(cams), "size": list(grid.size)},
        f"{out}: {len(cams)}x2 grid, {grid.size[0]}x{grid.size[1]} px",
    )
    return EX_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    cfg = _load_cfg(args)
    app = create_app(cfg.service)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EX_OK


_PLAN_OPS = {
    "contradictory_subtasks": perturb_contradictory,
    "missing_subtask": perturb_missing_subtask,
    "wrong_object_manipulated": perturb_wrong_object,
    "wrong_order": perturb_wrong_order,
    "wrong_state_or_placement": perturb_wrong_state_or_placement,
}


def _replay(sample: Sample, episodes: dict[str, Episode], lex: Lexicon) -> Sample:
    prov = sample.provenance
    ep = episodes.get(prov.episode_id)
    if ep is None:
        raise SchemaError(f"episode {prov.episode_id} not in corpus")
    base = prov.base_mode
    if isinstance(sample, PlanningSample):
        if base == "success":
            return success_planning_sample(ep, prov.seed)
        op = _PLAN_OPS.get(base)
        if op is None:
            raise SchemaError(f"unknown planning mode {base!r}")
        return op(ep, prov.seed, lex, None)
    step = int(prov.mode.split("@", 1)[1]) if "@" in prov.mode else 0
    if base == "success":
        return success_execution_sample(ep, prov.seed)
    if base == "semantic_mismatch":
        return perturb_semantic_mismatch(ep, step, prov.seed, lex, None)
    if base == "revert_action":
        return perturb_revert_action(ep, step)
    raise SchemaError(f"unknown execution mode {base!r}")


def cmd_verify_provenance(args) -> int:
    cfg = _load_cfg(args)
    episodes = {ep.episode_id: ep for ep in _load_episodes(cfg, args)}
    lex = _lexicon(cfg)
    checked = skipped = 0
    mismatches = []
    for sample in read_shard(args.shard):
        prov = sample.provenance
        if prov.generator != "rule" or prov.mode.startswith("sim:"):
            skipped += 1  # llm output and sim rollouts are not replayable
            continue
        try:
            fresh = _replay(sample, episodes, lex)
        except FailforgeError as e:
            mismatches.append((sample.sample_id, f"replay failed: {e}"))
            continue
        recorded = dict(sample.to_dict())
        recomputed = dict(fresh.to_dict())
        recorded.pop("cot", None)  # annotation happens after generation
        recomputed.pop("cot", None)
        checked += 1
        if canonical_dumps(recorded) != canonical_dumps(recomputed):
            mismatches.append((sample.sample_id, "bytes differ"))
    for sid, why in mismatches:
        log.error("%s: %s", sid, why)
    _emit(
        args,
        {"checked": checked, "skipped": skipped, "mismatches": len(mismatches)},
        f"checked {checked} samples ({skipped} skipped): {len(mismatches)} mismatches",
    )
    return EX_OK if not mismatches else EX_PARTIAL


# -- parser -------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, corpus: bool = True) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--jobs", type=int, default=1, help="worker cap")
    if corpus:
        p.add_argument("--corpus", action="append", help="corpus root (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="failforge", description=__doc__)
    parser.add_argument("--version", action="version", version=f"failforge {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("validate", help="check corpus manifests and frame files")
    _add_common(p)
    p.set_defaults(fn=cmd_validate)

    for name, fn in (("gen-plan", cmd_gen_plan), ("gen-exec", cmd_gen_exec)):
        p = sub.add_parser(name, help=f"generate {name.split('-')[1]} samples")
        _add_common(p)
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--target", type=int, help="sample count override")
        p.add_argument("--out", help="output shard path")
        p.add_argument("--llm", action="store_true", help="route perturbations through the model")
        p.set_defaults(fn=fn)

    p = sub.add_parser("emit-directives", help="emit sim failure directives")
    _add_common(p)
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--per-episode", type=int, default=1)
    p.add_argument("--out", help="output path")
    p.set_defaults(fn=cmd_emit_directives)

    p = sub.add_parser("ingest-rollouts", help="turn sim rollouts into execution samples")
    _add_common(p)
    p.add_argument("--directives", required=True, help="directives.jsonl from emit-directives")
    p.add_argument("--rollouts", required=True, help="directory of rollout manifests")
    p.add_argument("--out", help="output shard path")
    p.set_defaults(fn=cmd_ingest_rollouts)

    p = sub.add_parser("gen-cot", help="annotate a shard with reasoning traces")
    _add_common(p)
    p.add_argument("--shard", required=True)
    p.add_argument("--corpus-root", help="root for resolving frame paths")
    p.add_argument("--out", help="output shard path")
    p.set_defaults(fn=cmd_gen_cot)

    p = sub.add_parser("stats", help="dataset composition table")
    p.add_argument("paths", nargs="+", help="shard files or dataset roots")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("eval", help="score a detector on a shard")
    _add_common(p, corpus=False)
    p.add_argument("--shard", required=True)
    p.add_argument("--model", help="detector model id")
    p.add_argument("--audit", help="write per-sample audit JSONL here")
    p.add_argument("--corpus-root", help="root for resolving frame paths")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("export-train", help="write a training-ready conversation file")
    _add_common(p, corpus=False)
    p.add_argument("--shard", required=True)
    p.add_argument("--strategy", choices=("vanilla", "thinking", "dropout"))
    p.add_argument("--view-policy", choices=("one", "four", "random_one_or_four"))
    p.add_argument("--out", help="output path")
    p.set_defaults(fn=cmd_export_train)

    p = sub.add_parser("compose-grid", help="render one subtask as a views-by-time grid")
    _add_common(p, corpus=False)
    p.add_argument("--episode", required=True, help="episode manifest path")
    p.add_argument("--step", type=int, default=0, help="subtask index")
    p.add_argument("--views", type=int, default=0, help="view limit (0 = all)")
    p.add_argument("--corpus-root", help="root for resolving frame paths")
    p.add_argument("--out", required=True, help="output PNG")
    p.set_defaults(fn=cmd_compose_grid)

    p = sub.add_parser("serve", help="run the verification service")
    _add_common(p, corpus=False)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("verify-provenance", help="replay rule-generated samples and byte-compare")
    _add_common(p)
    p.add_argument("--shard", required=True)
    p.set_defaults(fn=cmd_verify_provenance)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EX_USAGE
    try:
        return args.fn(args)
    except FailforgeError as e:
        log.error("%s", e)
        return EX_FATAL
    except OSError as e:
        log.error("%s", e)
        return EX_FATAL


if __name__ == "__main__":
    sys.exit(main())
