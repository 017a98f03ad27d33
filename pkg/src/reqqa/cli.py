"""Operator command line: import, generate, evaluate, serve, ground-truth, report.

Configuration precedence is flags > environment > config file. Script-facing
output goes to stdout as key=value lines; diagnostics and the effective
configuration (secrets redacted) go to stderr.

Exit codes: 0 ok, 2 usage, 3 validation, 4 backend, 5 incomplete data.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .errors import (
    GatewayError,
    ParseError,
    PipelineError,
    ProtocolError,
    PromptError,
    ReqQaError,
    StoreError,
)
from .gateway import (
    Cassette,
    CompletionParams,
    Gateway,
    LiveBackend,
    ReplayBackend,
    ScriptedBackend,
)
from .model import Phase, validate_project
from .pipeline import Pipeline
from .protocol import DEFAULT_MIN_REVIEWERS, ReviewProtocol
from .reports import render_csv, render_markdown
from .store import Store, import_native, import_plaintext

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_BACKEND = 4
EXIT_INCOMPLETE = 5

ENV_PREFIX = "REQQA_"
API_KEY_ENV = "REQQA_API_KEY"


def _emit(**pairs: object) -> None:
    print(" ".join(f"{key}={value}" for key, value in pairs.items()))


def _diag(message: str) -> None:
    print(message, file=sys.stderr)


class Config:
    """flags > environment > config file, with secrets kept out of logs."""

    def __init__(self, args: argparse.Namespace) -> None:
        self._file: dict = {}
        config_path = getattr(args, "config", None) or os.environ.get(ENV_PREFIX + "CONFIG")
        if config_path:
            self._file = json.loads(Path(config_path).read_text("utf-8"))
        self._args = args

    def get(self, name: str, default: Optional[str] = None) -> Optional[str]:
        flag = getattr(self._args, name, None)
        if flag is not None:
            return str(flag)
        env = os.environ.get(ENV_PREFIX + name.upper())
        if env is not None:
            return env
        value = self._file.get(name)
        return str(value) if value is not None else default

    def describe(self, names: list[str]) -> str:
        parts = []
        for name in names:
            value = self.get(name)
            parts.append(f"{name}={value!r}")
        api_key = os.environ.get(API_KEY_ENV)
        parts.append(f"api_key={'<redacted>' if api_key else None}")
        return " ".join(parts)


def _store(config: Config) -> Store:
    return Store(Path(config.get("store", "./reqqa-store")))


def _build_gateway(config: Config, args: argparse.Namespace) -> tuple[Gateway, Optional[Cassette]]:
    backend_name = config.get("backend", "live")
    cassette_path = config.get("cassette")
    record = bool(getattr(args, "record", False))
    parallel = int(config.get("parallel", "4"))
    cassette: Optional[Cassette] = None
    if backend_name == "replay":
        if not cassette_path:
            raise GatewayError("backend-unconfigured", "replay backend needs --cassette")
        backend = ReplayBackend(Cassette.load(Path(cassette_path)))
    elif backend_name == "scripted":
        script_path = config.get("script")
        if not script_path:
            raise GatewayError("backend-unconfigured", "scripted backend needs --script")
        backend = ScriptedBackend(json.loads(Path(script_path).read_text("utf-8")))
    elif backend_name == "live":
        endpoint = config.get("endpoint")
        if not endpoint:
            raise GatewayError("backend-unconfigured", "live backend needs --endpoint")
        backend = LiveBackend(
            endpoint,
            api_key=os.environ.get(API_KEY_ENV),
            adapter=config.get("adapter", "openai-chat"),
        )
    else:
        raise GatewayError("backend-unconfigured", f"unknown backend {backend_name!r}")
    if record:
        if not cassette_path:
            raise GatewayError("backend-unconfigured", "--record needs --cassette")
        path = Path(cassette_path)
        cassette = Cassette.load(path) if path.exists() else Cassette(path=path)
    return Gateway(backend=backend, record_cassette=cassette, parallelism=parallel), cassette


def _params(config: Config) -> CompletionParams:
    return CompletionParams(
        model_id=config.get("model", CompletionParams().model_id),
        temperature=float(config.get("temperature", str(CompletionParams().temperature))),
        max_new_tokens=int(config.get("max_new_tokens", str(CompletionParams().max_new_tokens))),
        timeout=float(config.get("timeout", str(CompletionParams().timeout))),
        retries=int(config.get("retries", str(CompletionParams().retries))),
    )


def cmd_import(args: argparse.Namespace) -> int:
    config = Config(args)
    _diag(f"config: {config.describe(['store'])}")
    store = _store(config)
    raw = Path(args.file).read_bytes()
    if args.plaintext:
        if not args.scope or not args.name:
            _diag("error=usage plaintext import needs --scope and --name")
            return EXIT_USAGE
        project = import_plaintext(
            raw.decode("utf-8"), scope=args.scope, name=args.name, project_id=args.project_id
        )
    else:
        project = import_native(raw)
    store.save_project(project)
    _emit(project_id=project.id, requirements=len(project.requirements))
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    config = Config(args)
    _diag(f"config: {config.describe(['store', 'backend', 'cassette', 'model'])}")
    store = _store(config)
    gateway, cassette = _build_gateway(config, args)
    pipeline = Pipeline(gateway=gateway, store=store, params=_params(config))
    project = pipeline.generate_project(
        scope=args.scope,
        n_functional=args.functional,
        n_nonfunctional=args.nonfunctional,
        name=args.name,
        project_id=args.project_id,
    )
    store.save_project(project)
    if cassette is not None:
        cassette.save()
    _emit(project_id=project.id, requirements=len(project.requirements))
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = Config(args)
    _diag(f"config: {config.describe(['store', 'backend', 'cassette', 'model', 'parallel'])}")
    store = _store(config)
    project = store.load_project(args.project)
    violations = validate_project(project)
    if violations:
        _emit(error="validation-failed", codes=",".join(v.code for v in violations))
        return EXIT_VALIDATION
    gateway, cassette = _build_gateway(config, args)
    pipeline = Pipeline(gateway=gateway, store=store, params=_params(config))
    total = len(project.requirements) * 9
    try:
        matrix = pipeline.evaluate_project(project)
    except PipelineError as exc:
        if exc.code != "partial-failure":
            raise
        done = len(exc.context["matrix"].cells)
        _emit(cells_total=total, cells_ok=done, cells_failed=total - done)
        _diag(f"{done}/{total} cells evaluated; failed: {exc.context['failed_cells']}")
        return EXIT_BACKEND
    finally:
        if cassette is not None:
            cassette.save()
    _emit(cells_total=total, cells_ok=len(matrix), cells_failed=0)
    _diag(f"{len(matrix)}/{total} cells evaluated")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = Config(args)
    _diag(f"config: {config.describe(['store', 'port'])}")
    store = _store(config)
    token_map = None
    if args.tokens:
        token_map = json.loads(Path(args.tokens).read_text("utf-8"))
    ui_dir = Path(args.ui_dir) if args.ui_dir else None
    app = create_app(
        store, token_map=token_map, ui_dir=ui_dir, randomize_order=args.randomize_order
    )
    uvicorn.run(app, host=args.host, port=int(config.get("port", "8000")))
    return EXIT_OK


def cmd_ground_truth(args: argparse.Namespace) -> int:
    config = Config(args)
    _diag(f"config: {config.describe(['store'])}")
    store = _store(config)
    protocol = ReviewProtocol(store, min_reviewers=args.min_reviewers)
    phase = Phase.INDEPENDENT if args.phase == "independent" else Phase.BOUND
    labels = protocol.ground_truth(args.project, phase)
    store.save_ground_truth(args.project, phase, labels.values())
    flawed = sum(1 for label in labels.values() if label.label.value == "Violates")
    _emit(project_id=args.project, phase=args.phase, cells=len(labels), flawed=flawed)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    config = Config(args)
    _diag(f"config: {config.describe(['store'])}")
    store = _store(config)
    project = store.load_project(args.project)
    matrix = store.load_matrix(args.project)
    ground_truths = {}
    for phase in (Phase.INDEPENDENT, Phase.BOUND):
        labels = store.load_ground_truth(args.project, phase)
        if labels:
            ground_truths[phase] = {
                (label.requirement_id, label.characteristic): label for label in labels
            }
    written = []
    if args.format in ("md", "both"):
        bound_votes = [v for v in store.load_votes(args.project) if v.phase is Phase.BOUND]
        path = store.write_report(
            args.project,
            "report.md",
            render_markdown(project, matrix, ground_truths, bound_votes),
        )
        written.append(path)
    if args.format in ("csv", "both"):
        path = store.write_report(
            args.project, "cells.csv", render_csv(project, matrix, ground_truths)
        )
        written.append(path)
    for path in written:
        _emit(report=path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reqqa",
        description="Requirements quality workbench: model-based assessment, "
        "two-phase human review, agreement metrics.",
    )
    parser.add_argument("--store", help="store directory (default ./reqqa-store)")
    parser.add_argument("--config", help="JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_import = sub.add_parser("import", help="import a project document")
    p_import.add_argument("--file", required=True)
    p_import.add_argument("--plaintext", action="store_true", help="line-oriented text import")
    p_import.add_argument("--scope", help="scope description (plaintext import)")
    p_import.add_argument("--name", help="project name (plaintext import)")
    p_import.add_argument("--project-id", dest="project_id")
    p_import.set_defaults(func=cmd_import)

    p_generate = sub.add_parser("generate", help="generate a requirement set for a scope")
    p_generate.add_argument("--scope", required=True)
    p_generate.add_argument("--functional", type=int, required=True)
    p_generate.add_argument("--nonfunctional", type=int, required=True)
    p_generate.add_argument("--name", required=True)
    p_generate.add_argument("--project-id", dest="project_id")
    _add_backend_flags(p_generate)
    p_generate.set_defaults(func=cmd_generate)

    p_evaluate = sub.add_parser("evaluate", help="evaluate every cell of a project")
    p_evaluate.add_argument("--project", required=True)
    _add_backend_flags(p_evaluate)
    p_evaluate.add_argument("--parallel", type=int, help="max in-flight completions")
    p_evaluate.set_defaults(func=cmd_evaluate)

    p_serve = sub.add_parser("serve", help="run the review service")
    p_serve.add_argument("--port", type=int)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--tokens", help="JSON file mapping bearer tokens to reviewer ids")
    p_serve.add_argument("--ui-dir", dest="ui_dir", help="static review UI directory")
    p_serve.add_argument(
        "--randomize-order",
        dest="randomize_order",
        action="store_true",
        help="give each reviewer a stable per-reviewer task order instead of the shared one",
    )
    p_serve.set_defaults(func=cmd_serve)

    p_gt = sub.add_parser("ground-truth", help="derive majority-vote labels")
    p_gt.add_argument("--project", required=True)
    p_gt.add_argument("--phase", choices=["independent", "bound"], required=True)
    p_gt.add_argument("--min-reviewers", type=int, default=DEFAULT_MIN_REVIEWERS)
    p_gt.set_defaults(func=cmd_ground_truth)

    p_report = sub.add_parser("report", help="render report files")
    p_report.add_argument("--project", required=True)
    p_report.add_argument("--format", choices=["md", "csv", "both"], default="both")
    p_report.set_defaults(func=cmd_report)

    return parser


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=["live", "replay", "scripted"])
    parser.add_argument("--cassette", help="cassette file (replay source or record target)")
    parser.add_argument("--record", action="store_true", help="record completions to --cassette")
    parser.add_argument("--script", help="JSON list of scripted responses")
    parser.add_argument("--endpoint", help="chat-completion URL (live backend)")
    parser.add_argument("--adapter", choices=["openai-chat", "plain"])
    parser.add_argument("--model", help="model identifier")
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--max-new-tokens", dest="max_new_tokens", type=int)
    parser.add_argument("--timeout", type=float)
    parser.add_argument("--retries", type=int)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GatewayError,) as exc:
        _emit(error=exc.code)
        _diag(str(exc))
        return EXIT_BACKEND
    except PipelineError as exc:
        _emit(error=exc.code)
        _diag(str(exc))
        return EXIT_BACKEND
    except (ParseError, PromptError) as exc:
        _emit(error=exc.code)
        _diag(str(exc))
        return EXIT_VALIDATION
    except ProtocolError as exc:
        _emit(error=exc.code)
        _diag(str(exc))
        code = EXIT_INCOMPLETE if exc.code in ("incomplete-coverage", "project-not-evaluated", "insufficient-reviewers") else EXIT_VALIDATION
        return code
    except StoreError as exc:
        _emit(error=exc.code)
        _diag(str(exc))
        if exc.code in ("unknown-project",):
            return EXIT_INCOMPLETE
        return EXIT_VALIDATION
    except ReqQaError as exc:
        _emit(error=exc.code)
        _diag(str(exc))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
