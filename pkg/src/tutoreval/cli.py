"""Command line entry point.

Exit codes: 0 success, 2 input or config error, 3 judge backend error,
4 pipeline-state error (missing annotations or a failed model fit).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from tutoreval.config import ConfigError, RunConfig, load_config
from tutoreval.corpus import CorpusError, parse_corpus
from tutoreval.judge import AgreementError, BackendError, FixtureBackend, RemoteBackend, ReplyCache, agreement_report
from tutoreval.judge.runner import annotate_corpus, load_engagement, load_pedagogy, write_annotations
from tutoreval.pipeline import EvaluateSettings, evaluate
from tutoreval.report import clean_json, render
from tutoreval.rubric import DesiredLabelRubric
from tutoreval.synthgen import GeneratorConfig, SynthError, TutorProfile, generate

logger = logging.getLogger("tutoreval")

EXIT_OK, EXIT_INPUT, EXIT_BACKEND, EXIT_STATE = 0, 2, 3, 4


class PipelineStateError(RuntimeError):
    pass


def _emit(cfg: RunConfig, name: str, payload: dict) -> None:
    text = json.dumps(clean_json(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / name).write_text(text, encoding="utf-8", newline="\n")
    sys.stdout.write(text)


def _require_inputs(cfg: RunConfig):
    if cfg.inputs is None:
        raise ConfigError("config has no 'inputs' section")
    return cfg.inputs


def _load_corpus(cfg: RunConfig):
    inputs = _require_inputs(cfg)
    return parse_corpus(inputs.submissions, inputs.feedback, inputs.ratings)


def _load_problems(cfg: RunConfig) -> dict[str, str]:
    path = cfg.inputs.problems if cfg.inputs else None
    if path is None:
        return {}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[str(rec["problem_id"])] = str(rec["statement"])
            except (json.JSONDecodeError, KeyError, TypeError):
                raise CorpusError(f"{path}:{lineno}: expected {{problem_id, statement}}") from None
    return out


def make_backend(cfg: RunConfig):
    j = cfg.judge
    if j.backend == "fixture":
        if j.transcript is None:
            raise ConfigError("judge.transcript is required for the fixture backend")
        return FixtureBackend.from_jsonl(j.transcript)
    return RemoteBackend.from_env(j.url, j.model, j.api_key_env, max_retries=j.max_retries, timeout=j.timeout)


# -- commands ------------------------------------------------------------------------

def cmd_validate(cfg: RunConfig, args) -> int:
    corpus = _load_corpus(cfg)
    report = corpus.report.to_dict()
    report["streams"] = len(corpus.streams)
    _emit(cfg, "validate.json", report)
    return EXIT_OK


def cmd_annotate(cfg: RunConfig, args) -> int:
    corpus = _load_corpus(cfg)
    backend = make_backend(cfg)
    cache = ReplyCache(cfg.cache_dir or cfg.out_dir / "cache")
    run = annotate_corpus(
        corpus, backend, cache, which=args.which, parallelism=cfg.parallelism,
        problems=_load_problems(cfg), prompt_dir=cfg.judge.prompt_dir,
    )
    ann_dir = cfg.out_dir / "annotations"
    if args.which in ("pedagogy", "both"):
        write_annotations(ann_dir / "pedagogy.jsonl", run.pedagogy.values())
    if args.which in ("engagement", "both"):
        write_annotations(ann_dir / "engagement.jsonl", run.engagement.values())
    log = run.log()
    log["backend"] = backend.identity
    log["requests"] = getattr(backend, "requests", None)
    log["prompt_tokens"] = getattr(backend, "prompt_tokens", None)
    log["completion_tokens"] = getattr(backend, "completion_tokens", None)
    _emit(cfg, "annotate.json", log)
    return EXIT_OK


def settings_from(cfg: RunConfig) -> EvaluateSettings:
    return EvaluateSettings(
        baseline_tutor=cfg.baseline_tutor,
        rubric=DesiredLabelRubric.with_overrides(cfg.rubric),
        min_undesired_n=cfg.thresholds.min_undesired_n,
        likert_cutoff=cfg.thresholds.likert_cutoff,
    )


def cmd_evaluate(cfg: RunConfig, args) -> int:
    corpus = _load_corpus(cfg)
    ann_dir = cfg.out_dir / "annotations"
    ped_path, eng_path = ann_dir / "pedagogy.jsonl", ann_dir / "engagement.jsonl"
    missing = [str(p) for p in (ped_path, eng_path) if not p.exists()]
    if missing:
        raise PipelineStateError(f"annotations missing: {', '.join(missing)}; run 'tutoreval annotate' first")
    inputs = _require_inputs(cfg)
    result = evaluate(
        corpus, load_pedagogy(ped_path), load_engagement(eng_path), settings_from(cfg),
        inputs={"submissions": inputs.submissions, "feedback": inputs.feedback, "ratings": inputs.ratings,
                "pedagogy_annotations": ped_path, "engagement_annotations": eng_path},
        config_snapshot=_portable_snapshot(cfg),
    )
    written = render(result.summary, cfg.out_dir)
    print(json.dumps({"written": sorted(written), "warnings": len(result.summary["warnings"]), "model_errors": result.model_errors}, indent=2))
    if result.model_errors:
        for e in result.model_errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_STATE
    return EXIT_OK


def _portable_snapshot(cfg: RunConfig) -> dict:
    # absolute paths differ between machines; keep file names only so summaries compare
    snap = cfg.snapshot()

    def strip(obj):
        if isinstance(obj, dict):
            return {k: strip(v) for k, v in obj.items()}
        if isinstance(obj, str) and ("/" in obj or "\\" in obj):
            return Path(obj).name
        return obj

    return strip(snap)


def cmd_synth(cfg: RunConfig, args) -> int:
    s = cfg.synth
    kwargs = {f.name: getattr(s, f.name) for f in fields(GeneratorConfig) if hasattr(s, f.name) and getattr(s, f.name) is not None}
    if s.tutors is not None:
        kwargs["tutors"] = {k: TutorProfile(**v.model_dump()) for k, v in s.tutors.items()}
    if s.beta is not None:
        kwargs["beta"] = s.beta
    kwargs.update(seed=cfg.seed, baseline_tutor=cfg.baseline_tutor, likert_cutoff=cfg.thresholds.likert_cutoff)
    gen = GeneratorConfig.from_dict(kwargs)
    paths = generate(gen, cfg.out_dir)
    print(json.dumps({k: str(v) for k, v in sorted(paths.items())}, indent=2))
    return EXIT_OK


def cmd_agreement(cfg: RunConfig, args) -> int:
    report = agreement_report(Path(args.file_a), Path(args.file_b))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "agreement.md").write_text(report.to_markdown(), encoding="utf-8")
    _emit(cfg, "agreement.json", report.to_dict())
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "annotate": cmd_annotate,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "agreement": cmd_agreement,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tutoreval", description="Evaluate AI tutor feedback: pedagogy, engagement and perceived helpfulness.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out-dir", type=Path, help="output directory (overrides config)")
    common.add_argument("--backend", choices=("remote", "fixture"), help="judge backend (overrides config)")
    common.add_argument("--seed", type=int, help="generator seed (overrides config)")
    common.add_argument("--parallelism", type=int, help="concurrent judge requests (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="parse and validate the corpus")
    p = sub.add_parser("annotate", parents=[common], help="label feedback with the judge")
    p.add_argument("--which", choices=("pedagogy", "engagement", "both"), default="both")
    sub.add_parser("evaluate", parents=[common], help="compute metrics, tests and the report")
    sub.add_parser("synth", parents=[common], help="write a synthetic corpus with planted labels")
    p = sub.add_parser("agreement", parents=[common], help="Cohen's kappa between two label files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    update = {}
    if args.out_dir is not None:
        update["out_dir"] = args.out_dir.resolve()
    if args.seed is not None:
        update["seed"] = args.seed
    if args.parallelism is not None:
        update["parallelism"] = args.parallelism
    data = cfg.model_dump()
    data.update(update)
    if args.backend is not None:
        data["judge"]["backend"] = args.backend
    try:
        return RunConfig.model_validate(data)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, CorpusError, SynthError, AgreementError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except PipelineStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STATE


if __name__ == "__main__":
    sys.exit(main())
