"""Command-line entry point: ``llmexp generate | run | analyze | report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .llm_runtime.agents import scripted_agent
from .llm_runtime.campaign import generate_tasks, run_campaign
from .llm_runtime.client import ChatClient, ConfigurationError
from .report import ConfigError, ProviderEntry, analyze, config_summary, load_config, write_report

log = logging.getLogger("llmexp")


def _campaign_dir(args, cfg=None) -> Path:
    if args.campaign:
        return Path(args.campaign)
    if cfg is not None:
        return Path(cfg.output_dir)
    raise SystemExit("error: --campaign or --config is required")


def _load(args):
    if not args.config:
        raise SystemExit("error: --config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.campaign_seed = args.seed
    if getattr(args, "parallelism", None):
        cfg.parallelism = args.parallelism
    return cfg


def cmd_generate(args) -> int:
    cfg = _load(args)
    out = _campaign_dir(args, cfg)
    domains = [m for m in cfg.measures if cfg.case == "budget"]
    if not domains:
        print("games campaigns have no generated tasks")
        return 0
    paths = generate_tasks(out, domains, cfg.n_sims, cfg.campaign_seed, cfg.task)
    print(f"wrote {len(paths)} task files under {out / 'tasks'}")
    return 0


def _mock_factory(policy: str):
    def factory(condition, sim_index, seed):
        return scripted_agent(policy, seed=seed)
    return factory


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _campaign_dir(args, cfg)
    providers = cfg.providers
    if args.provider:
        providers = [cfg.provider(args.provider)]
    if args.mock:
        # a mock policy replaces the selected providers' endpoints
        providers = [ProviderEntry(p.name, mock=args.mock) for p in providers] or [
            ProviderEntry(f"mock-{args.mock.split('(')[0]}", mock=args.mock)]
    if not providers:
        raise SystemExit("error: no providers configured (add providers or pass --mock)")

    # construct live clients first so a missing credential stops the run before any request
    runners = []
    for p in providers:
        if p.mock is not None:
            scripted_agent(p.mock)  # validates the policy string
            runners.append((p.name, _mock_factory(p.mock), None))
        else:
            client = ChatClient(p.provider)
            runners.append((p.name, lambda c, i, s, client=client: client, p.provider.temperature))

    extra = {"config_hash": cfg.config_hash, "config": config_summary(cfg)}
    status = 0
    for name, factory, temperature in runners:
        outcome = run_campaign(
            cfg.conditions, factory, cfg.n_sims,
            campaign_seed=cfg.campaign_seed, model_id=name, out_dir=out, parallelism=cfg.parallelism,
            task_config=cfg.task, temperature=temperature, max_retries_per_round=cfg.max_retries_per_round,
            keep_invalid_context=cfg.keep_invalid_context, manifest_extra=extra,
        )
        print(f"{name}: {len(outcome.executed)} run, {len(outcome.loaded)} resumed, "
              f"{len(outcome.incomplete)} incomplete")
        for sim in outcome.incomplete:
            print(f"  incomplete: {sim}")
        status = status or (1 if outcome.incomplete else 0)
    return status


def cmd_analyze(args) -> int:
    cfg = load_config(args.config) if args.config else None
    out = _campaign_dir(args, cfg)
    refs = cfg.references if cfg else {}
    report = analyze(out, refs, seed=args.seed if args.seed is not None else 0)
    paths = write_report(report, out / "analysis")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_report(args) -> int:
    cfg = load_config(args.config) if args.config else None
    out = _campaign_dir(args, cfg)
    md = out / "analysis" / "report.md"
    if not md.exists():
        cmd_analyze(args)
    sys.stdout.write(md.read_text(encoding="utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llmexp", description="Economic-experiment harness for chat models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "generate": (cmd_generate, "write budget rounds for every simulation"),
        "run": (cmd_run, "run (or resume) a campaign"),
        "analyze": (cmd_analyze, "compute the analysis report from persisted transcripts"),
        "report": (cmd_report, "print the markdown report, analyzing first if needed"),
    }
    for name, (fn, help_) in commands.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="campaign config (YAML)")
        p.add_argument("--campaign", help="campaign directory (default: output_dir from the config)")
        p.add_argument("--seed", type=int, help="override campaign_seed / analysis seed")
        if name == "run":
            p.add_argument("--parallelism", type=int, help="worker threads")
            p.add_argument("--provider", help="run only the named provider")
            p.add_argument("--mock", metavar="POLICY",
                           help="use a scripted agent, e.g. uniform_random or cobb_douglas(0.3)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
