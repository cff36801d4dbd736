"""Command-line surface: ingest, chat, serve, replay, score-predictions.

Configuration precedence is CLI flags, then environment variables, then an
optional JSON config file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import evaluation, ingest
from .errors import IstodError
from .nlu import LanguageModelBackend, LanguageModelExtractor
from .strategy import advance

logger = logging.getLogger(__name__)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text("utf-8"))


def _resolve(flag_value, env_name: str, config: dict, config_key: str, default=None):
    if flag_value is not None:
        return flag_value
    if env_name and os.environ.get(env_name):
        return os.environ[env_name]
    if config_key in config:
        return config[config_key]
    return default


def _domains_arg(value: str | None) -> list[str]:
    if not value:
        return list(ingest.SUPPORTED_DOMAINS)
    return [d.strip() for d in value.split(",") if d.strip()]


def _make_extractor(choice: str, dictionary: ingest.DomainDictionary):
    if choice == "llm":
        backend = LanguageModelBackend.from_environment()
        return LanguageModelExtractor(dictionary.schema, backend)
    return None  # session default: the rule-based extractor


def cmd_ingest(args: argparse.Namespace) -> int:
    dictionaries = ingest.load_domains(args.data_dir, _domains_arg(args.domains))
    output = {domain: d.to_dict() for domain, d in dictionaries.items()}
    text = json.dumps(output, indent=2, ensure_ascii=False, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text)
    for domain, dictionary in sorted(dictionaries.items()):
        print(
            f"{domain}: {len(dictionary.database.rows)} entities, "
            f"{len(dictionary.schema.slots)} slots, digest {dictionary.digest()[:12]}",
            file=sys.stderr,
        )
    return 0


def cmd_chat(args: argparse.Namespace) -> int:
    from .strategy import accept_silently

    dictionary = ingest.load_domain(args.data_dir, args.domain)
    session = dictionary.new_session(extractor=_make_extractor(args.extractor, dictionary))
    print(f"TOD: {session.state.utterance_to_update_predefined_slot}")
    try:
        for line in sys.stdin:
            utterance = line.rstrip("\n")
            if not utterance.strip():
                continue
            result = advance(session, utterance)
            print(f"TOD: {result.tod_utterance}")
            if result.completed:
                return 0
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    result = accept_silently(session)
    if result is not None:
        print(f"TOD: {result.tod_utterance}")
        if result.completed:
            return 0
    print("TOD: (end of input; session incomplete)")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    dictionaries = ingest.load_domains(args.data_dir, _domains_arg(args.domains))
    app = create_app(dictionaries, idle_timeout=args.idle_timeout)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _load_split(data_dir: str, split: str, domains: list[str]):
    conversations = ingest.load_conversations(Path(data_dir) / "dialogues" / split)
    return ingest.filter_single_domain(conversations, domains)


def _load_goal_overrides(data_dir: str) -> dict:
    path = Path(data_dir) / "corrected_goals.json"
    if path.exists():
        return json.loads(path.read_text("utf-8"))
    return {}


def cmd_replay(args: argparse.Namespace) -> int:
    domains = _domains_arg(args.domains)
    dictionaries = ingest.load_domains(args.data_dir, domains)
    conversations = _load_split(args.data_dir, args.split, domains)
    if args.limit:
        conversations = conversations[: args.limit]
    if not conversations:
        print("no single-domain conversations to replay", file=sys.stderr)
        return 1
    session_kwargs = {}
    reports = []
    overrides = _load_goal_overrides(args.data_dir)
    for conversation in conversations:
        dictionary = dictionaries[conversation.domain]
        extractor = _make_extractor(args.extractor, dictionary)
        reports.append(
            evaluation.replay_conversation(
                conversation,
                dictionary,
                session_factory=lambda d=dictionary, e=extractor: d.new_session(extractor=e),
                goal_override=overrides.get(conversation.id),
                strict=args.strict,
            )
        )
    summary = evaluation.summarize(reports)
    text = evaluation.render_report(reports, summary)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text if not args.out else f"report written to {args.out}")
    return 0


def cmd_score_predictions(args: argparse.Namespace) -> int:
    domains = _domains_arg(args.domains)
    conversations = _load_split(args.data_dir, args.split, domains)
    summary, reports = evaluation.score_predictions(args.pred, conversations)
    text = evaluation.render_report(reports, summary)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text if not args.out else f"summary written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="istod", description="information-state task-oriented dialogue engine"
    )
    parser.add_argument("--config", help="JSON config file (lowest precedence)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_dir(p):
        p.add_argument("--data-dir", help="dataset directory (schema, db and dialogue files)")

    p = sub.add_parser("ingest", help="load and dump the per-domain dictionaries")
    add_data_dir(p)
    p.add_argument("--domains", help="comma-separated domain list")
    p.add_argument("--out", help="write the dictionary dump to this file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("chat", help="interactive terminal conversation")
    add_data_dir(p)
    p.add_argument("--domain", required=True)
    p.add_argument("--extractor", choices=["rule", "llm"], default="rule")
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("serve", help="run the HTTP session API")
    add_data_dir(p)
    p.add_argument("--domains", help="comma-separated domain list")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8470)
    p.add_argument("--idle-timeout", type=float, default=3600.0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="scripted replay with inform/success scoring")
    add_data_dir(p)
    p.add_argument("--split", default="test")
    p.add_argument("--domains", help="comma-separated domain list")
    p.add_argument("--extractor", choices=["rule", "llm"], default="rule")
    p.add_argument("--strict", action="store_true", help="strict goal equality instead of no-contradiction")
    p.add_argument("--limit", type=int)
    p.add_argument("--out", help="write the report to this file")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("score-predictions", help="re-score an external prediction file")
    add_data_dir(p)
    p.add_argument("--split", default="test")
    p.add_argument("--domains", help="comma-separated domain list")
    p.add_argument("--pred", required=True, help="prediction file")
    p.add_argument("--out", help="write the summary to this file")
    p.set_defaults(func=cmd_score_predictions)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _load_config(args.config)
    if hasattr(args, "data_dir"):
        args.data_dir = _resolve(args.data_dir, "ISTOD_DATA_DIR", config, "data_dir")
        if not args.data_dir:
            parser.error("--data-dir is required (or set ISTOD_DATA_DIR / config data_dir)")
    try:
        return args.func(args)
    except IstodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
