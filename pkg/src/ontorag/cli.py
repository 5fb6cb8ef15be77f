"""Operator command line: ingest sources, ask questions, grade pairs, run
evaluations, and serve the review API.

Exit codes: 0 success, 1 runtime failure, 2 usage error. With --format json
the only thing on stdout is a single JSON document; diagnostics go to stderr.
Option precedence: built-in defaults < config file < ONTORAG_* environment
variables < command-line flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from ontorag.errors import OntoragError
from ontorag.evaluation import (
    RunSpec,
    SweepSpec,
    evaluate_direct,
    evaluate_levels,
    load_direct_dataset,
    load_pair_dataset,
    render_report,
    run_sweep,
)
from ontorag.ingest import SourceManifest, ingest, manifest_from_dict
from ontorag.llm import ENV_ENDPOINT, ProviderConfig, make_provider
from ontorag.nl2sparql import (
    ExhaustedAttempts,
    Nl2SparqlConfig,
    answer,
    load_example_bank,
)
from ontorag.reasoning import LabeledCode, assess_pairs, make_strategy
from ontorag.review import ReviewState, ServiceSettings, create_app
from ontorag.store.engine import QuadStore
from ontorag.store.terms import term_text

CONFIG_KEYS = {
    "store", "manifest", "provider", "strategy", "temperature", "format",
    "decision_log", "example_bank",
}

ENV_PREFIX = "ONTORAG_"


def _load_config(path: str | None) -> dict:
    """Key-value lines: `key = value`, '#' comments; unknown keys rejected."""
    if not path:
        return {}
    config: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{line_no}: expected key = value")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{line_no}: unknown config key {key!r}")
            config[key] = value.strip()
    return config


def _resolve(flag_value, env_name: str, config: dict, config_key: str, default=None):
    if flag_value is not None:
        return flag_value
    env = os.environ.get(ENV_PREFIX + env_name)
    if env is not None:
        return env
    if config_key in config:
        return config[config_key]
    return default


def _provider_config(path: str | None) -> ProviderConfig:
    if path:
        return ProviderConfig.from_json_file(path)
    if os.environ.get(ENV_ENDPOINT):
        return ProviderConfig.from_env()
    raise OntoragError(
        "no provider configured: pass --provider FILE or set ONTORAG_LLM_ENDPOINT"
    )


def _emit(payload: dict, fmt: str, text_renderer=None):
    if fmt == "json":
        print(json.dumps(payload, indent=2))
    elif text_renderer is not None:
        text_renderer(payload)
    else:
        print(json.dumps(payload, indent=2))


# -- subcommands -----------------------------------------------------------------


def _cmd_ingest(args, config: dict) -> int:
    manifest_path = _resolve(args.manifest, "MANIFEST", config, "manifest")
    store_path = _resolve(args.store, "STORE", config, "store")
    if not manifest_path or not store_path:
        print("ingest needs --manifest and --store", file=sys.stderr)
        return 2
    with open(manifest_path, encoding="utf-8") as fh:
        manifest: SourceManifest = manifest_from_dict(json.load(fh))
    base = os.path.dirname(os.path.abspath(manifest_path))
    for entry in manifest.entries:
        if not os.path.isabs(entry.path):
            entry.path = os.path.join(base, entry.path)
    store = QuadStore()
    report = ingest(manifest, store)
    store.export_nquads(store_path)
    _emit(report.to_json(), args.format)
    if args.strict and report.dangling_refs:
        print(f"{len(report.dangling_refs)} dangling mapping refs", file=sys.stderr)
        return 1
    return 0


def _cmd_query(args, config: dict) -> int:
    store_path = _resolve(args.store, "STORE", config, "store")
    if not store_path:
        print("query needs --store", file=sys.stderr)
        return 2
    store = QuadStore()
    store.load_nquads(store_path)
    provider = make_provider(
        _provider_config(_resolve(args.provider, "PROVIDER", config, "provider"))
    )
    bank = load_example_bank(
        _resolve(args.example_bank, "EXAMPLE_BANK", config, "example_bank")
    )
    cfg = Nl2SparqlConfig(max_attempts=args.max_attempts)
    try:
        result = answer(args.nlq, store, provider, cfg, bank)
    except ExhaustedAttempts as exc:
        payload = {"error": "exhausted attempts", "trace": exc.trace.to_json()}
        print(json.dumps(payload, indent=2), file=sys.stderr)
        return 1
    payload = result.to_json()
    if not args.show_trace:
        payload.pop("trace")

    def _text(_payload):
        print(f"SPARQL: {result.sparql}", file=sys.stderr)
        table = result.result
        if table.boolean is not None:
            print(str(table.boolean).lower())
            return
        print("\t".join(table.columns))
        for row in table.rows:
            print("\t".join(term_text(c) if c is not None else "" for c in row))
        if args.show_trace:
            print(json.dumps(result.trace.to_json(), indent=2), file=sys.stderr)

    _emit(payload, args.format, _text)
    return 0


def _cmd_assess(args, config: dict) -> int:
    with open(args.pairs, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    pairs = []
    for line in lines:
        parts = line.split("\t")
        if len(parts) < 2:
            print(f"bad pair line: {line!r}", file=sys.stderr)
            return 2
        queried = LabeledCode(parts[0], parts[2] if len(parts) > 2 else None)
        retrieved = LabeledCode(parts[1], parts[3] if len(parts) > 3 else None)
        pairs.append((queried, retrieved))
    if not pairs:
        print("pairs file is empty", file=sys.stderr)
        return 2
    provider = make_provider(
        _provider_config(_resolve(args.provider, "PROVIDER", config, "provider"))
    )
    strategy = make_strategy(args.strategy, args.temperature, args.example_bank)
    assessments, failures = assess_pairs(pairs, strategy, provider)
    payload = {
        "assessments": [a.to_json() for a in assessments],
        "failures": [
            {"index": f.index, "error": f.error} for f in failures
        ],
    }
    _emit(payload, args.format)
    return 1 if failures and not assessments else 0


def _cmd_eval(args, config: dict) -> int:
    provider_cfg = _provider_config(
        _resolve(args.provider, "PROVIDER", config, "provider")
    )
    os.makedirs(args.out, exist_ok=True)
    if args.mode == "direct":
        dataset = load_direct_dataset(args.dataset)
        spec = RunSpec(
            provider=provider_cfg,
            temperature=args.temperature,
            repeats=args.repeats,
            dataset=args.dataset,
        )
        report = evaluate_direct(dataset, spec)
    else:
        pairs = load_pair_dataset(args.dataset)
        if args.sweep:
            sweep = SweepSpec.from_json_file(args.sweep)
            report = run_sweep(pairs, provider_cfg, sweep, args.example_bank)
        else:
            spec = RunSpec(
                provider=provider_cfg,
                strategy=args.strategy,
                temperature=args.temperature,
                repeats=args.repeats,
                dataset=args.dataset,
                bank_path=args.example_bank,
            )
            report = evaluate_levels(pairs, spec)
    written = []
    for fmt, suffix in (("json", "json"), ("csv", "csv"), ("markdown", "md")):
        path = os.path.join(args.out, f"report.{suffix}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render_report(report, fmt))
        written.append(path)
    _emit({"reports": written}, args.format)
    return 0


def _cmd_serve(args, config: dict) -> int:
    import uvicorn

    store_path = _resolve(args.store, "STORE", config, "store")
    if not store_path:
        print("serve needs --store", file=sys.stderr)
        return 2
    provider_path = _resolve(args.provider, "PROVIDER", config, "provider")
    provider_cfg = None
    if provider_path or os.environ.get(ENV_ENDPOINT):
        provider_cfg = _provider_config(provider_path)
    settings = ServiceSettings(
        store_paths=[store_path],
        decision_log=_resolve(
            args.decision_log, "DECISION_LOG", config, "decision_log", "decisions.log"
        ),
        provider=provider_cfg,
        strategy=_resolve(args.strategy, "STRATEGY", config, "strategy", "few-shot"),
        temperature=args.temperature,
        example_bank_path=_resolve(
            args.example_bank, "EXAMPLE_BANK", config, "example_bank"
        ),
        static_dir=args.static_dir,
    )
    store = QuadStore()
    store.load_nquads(store_path)
    state = ReviewState(store, settings)
    app = create_app(state)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"server failed: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ontorag",
        description="Biomedical code-mapping pipeline over RDF named graphs.",
    )
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse sources and build a store file")
    p_ingest.add_argument("--manifest", help="manifest JSON file")
    p_ingest.add_argument("--store", help="output N-Quads store file")
    p_ingest.add_argument("--strict", action="store_true",
                          help="exit 1 when mapping refs dangle")
    p_ingest.add_argument("--format", choices=["json"], default="json")

    p_query = sub.add_parser("query", help="answer a natural-language question")
    p_query.add_argument("--nlq", required=True)
    p_query.add_argument("--store")
    p_query.add_argument("--provider")
    p_query.add_argument("--example-bank", dest="example_bank")
    p_query.add_argument("--max-attempts", type=int, default=5)
    p_query.add_argument("--show-trace", action="store_true")
    p_query.add_argument("--format", choices=["json", "text"], default="text")

    p_assess = sub.add_parser("assess", help="grade description pairs")
    p_assess.add_argument("--pairs", required=True,
                          help="TSV: desc1<TAB>desc2[<TAB>code1[<TAB>code2]]")
    p_assess.add_argument("--strategy", required=True,
                          choices=["zero-shot", "few-shot", "enhanced-few-shot", "cot"])
    p_assess.add_argument("--temperature", type=float, default=0.2)
    p_assess.add_argument("--provider")
    p_assess.add_argument("--example-bank", dest="example_bank")
    p_assess.add_argument("--format", choices=["json"], default="json")

    p_eval = sub.add_parser("eval", help="run metric evaluations")
    p_eval.add_argument("--mode", required=True, choices=["direct", "levels"])
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--sweep", help="sweep spec JSON (levels mode)")
    p_eval.add_argument("--strategy", default="zero-shot",
                        choices=["zero-shot", "few-shot", "enhanced-few-shot", "cot"])
    p_eval.add_argument("--temperature", type=float, default=0.2)
    p_eval.add_argument("--repeats", type=int, default=3)
    p_eval.add_argument("--provider")
    p_eval.add_argument("--example-bank", dest="example_bank")
    p_eval.add_argument("--out", default=".", help="report output directory")
    p_eval.add_argument("--format", choices=["json"], default="json")

    p_serve = sub.add_parser("serve", help="run the review service")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--store")
    p_serve.add_argument("--provider")
    p_serve.add_argument("--decision-log", dest="decision_log")
    p_serve.add_argument("--strategy")
    p_serve.add_argument("--temperature", type=float, default=0.2)
    p_serve.add_argument("--example-bank", dest="example_bank")
    p_serve.add_argument("--static-dir", dest="static_dir")

    return parser


_HANDLERS = {
    "ingest": _cmd_ingest,
    "query": _cmd_query,
    "assess": _cmd_assess,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
    except (OSError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 2
    try:
        return _HANDLERS[args.command](args, config)
    except OntoragError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
