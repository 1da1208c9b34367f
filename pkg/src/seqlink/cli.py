"""Command-line pipeline: generate -> embed -> train -> eval, plus run-all.

Every command resolves its configuration (defaults, then config file, then
flags), echoes it into the output directory, and writes deterministic
artifacts there. `run-all` chains the four stages and, with --assert, exits
nonzero unless the trained agent clears its convergence and precision bars.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace

from . import ddpg, evaluation
from .config import ConfigError, RunConfig, echo_resolved, load_config
from .embedding import load_embeddings, pretrain_embeddings, save_embeddings
from .environment import write_episode_trace
from .evaluation import MetricsReport
from .graphs import (
    generate_synthetic,
    load_anchors,
    load_edge_list,
    split_anchors,
    write_anchors,
    write_edge_list,
)
from .seeding import derive_seed


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    cfg.apply_global_seed()
    echo_resolved(cfg)
    return cfg


def cmd_generate(cfg: RunConfig) -> None:
    spec = replace(cfg.synthetic)
    g_o, g_t, anchors = generate_synthetic(spec)
    write_edge_list(g_o, cfg.path(RunConfig.GRAPH_ORIGINAL))
    write_edge_list(g_t, cfg.path(RunConfig.GRAPH_TARGET))
    write_anchors(anchors, cfg.path(RunConfig.ANCHORS))
    print(f"generate: {g_o.node_count}+{g_t.node_count} nodes, "
          f"{g_o.edge_count}/{g_t.edge_count} edges, {len(anchors)} anchors "
          f"-> {cfg.out_dir}")


def cmd_embed(cfg: RunConfig) -> None:
    g_o = load_edge_list(cfg.path(RunConfig.GRAPH_ORIGINAL))
    g_t = load_edge_list(cfg.path(RunConfig.GRAPH_TARGET))
    m_o = pretrain_embeddings(g_o, cfg.walk_config_for("original"))
    m_t = pretrain_embeddings(g_t, cfg.walk_config_for("target"))
    save_embeddings(m_o, cfg.path(RunConfig.EMB_ORIGINAL))
    save_embeddings(m_t, cfg.path(RunConfig.EMB_TARGET))
    print(f"embed: {m_o.node_count}+{m_t.node_count} rows of dim {m_o.dim} "
          f"-> {cfg.out_dir}")


def _load_world(cfg: RunConfig):
    g_o = load_edge_list(cfg.path(RunConfig.GRAPH_ORIGINAL))
    g_t = load_edge_list(cfg.path(RunConfig.GRAPH_TARGET))
    anchors = load_anchors(cfg.path(RunConfig.ANCHORS), g_o, g_t)
    m_o = load_embeddings(cfg.path(RunConfig.EMB_ORIGINAL))
    m_t = load_embeddings(cfg.path(RunConfig.EMB_TARGET))
    m_o.check_aligned(g_o)
    m_t.check_aligned(g_t)
    train_anchors, test_anchors = split_anchors(anchors, cfg.train_ratio)
    return g_o, g_t, anchors, m_o, m_t, train_anchors, test_anchors


def cmd_train(cfg: RunConfig) -> None:
    g_o, g_t, _, m_o, m_t, train_anchors, _ = _load_world(cfg)
    result = ddpg.train(g_o, g_t, m_o, m_t, train_anchors, cfg.training,
                        checkpoint_dir=cfg.out_dir)
    ddpg.save_checkpoint(result, cfg.path(RunConfig.CHECKPOINT))
    ddpg.write_training_log(cfg.path(RunConfig.TRAIN_LOG), result.log)
    write_episode_trace(cfg.path(RunConfig.EPISODE_TRACE), result.traces, g_o, g_t)
    rewards = [row.total_reward for row in result.log]
    tail = rewards[-max(len(rewards) // 10, 1):] if rewards else [0.0]
    print(f"train: {len(result.log)} episodes, "
          f"final-decile mean reward {sum(tail) / len(tail):.3f} -> {cfg.out_dir}")


def cmd_eval(cfg: RunConfig, baselines: list[str]) -> dict:
    g_o, g_t, _, m_o, m_t, train_anchors, test_anchors = _load_world(cfg)
    actor = ddpg.load_actor(cfg.path(RunConfig.CHECKPOINT))
    linkage = ddpg.evaluate_policy(actor, g_o, g_t, m_o, m_t, test_anchors,
                                   zeta=cfg.training.zeta)
    agent_ranks = evaluation.RankedCandidates(
        linkage.ranks, linkage.n_test, linkage.candidate_count)
    reports = [MetricsReport.from_ranks("agent", cfg.seed, agent_ranks, cfg.k_list,
                                        matched_correct=linkage.correct)]
    for name in baselines:
        if name == "greedy":
            _, ranks = evaluation.greedy_cosine_baseline(m_o, m_t, test_anchors)
            reports.append(MetricsReport.from_ranks("greedy", cfg.seed, ranks, cfg.k_list))
        elif name == "random":
            ranks = evaluation.random_baseline(test_anchors, g_t.node_count,
                                               derive_seed(cfg.seed, "baseline:random"))
            reports.append(MetricsReport.from_ranks("random", cfg.seed, ranks, cfg.k_list))
        elif name == "sdm":
            sdm_cfg = evaluation.SdmConfig(seed=derive_seed(cfg.seed, "baseline:sdm"))
            ranks = evaluation.sdm_baseline(m_o, m_t, train_anchors, test_anchors, sdm_cfg)
            reports.append(MetricsReport.from_ranks("sdm", cfg.seed, ranks, cfg.k_list))
        else:
            raise ConfigError(f"unknown baseline {name!r} "
                              "(choose from greedy, random, sdm)")
    document = {
        "candidate_count": g_t.node_count,
        "reports": [rep.to_json() for rep in reports],
    }
    with open(cfg.path(RunConfig.METRICS), "w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for rep in reports:
        print(f"eval[{rep.method}]: P@1={rep.p_at.get(1, float('nan')):.4f} "
              f"MAP={rep.map:.4f} recall={rep.recall:.4f} (n={rep.n})")
    return document


def _assert_thresholds(cfg: RunConfig, document: dict) -> list[str]:
    """Convergence and precision bars for --assert; returns failure messages."""
    failures = []
    rewards = []
    with open(cfg.path(RunConfig.TRAIN_LOG), encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            rewards.append(float(line.split(",")[1]))
    decile = max(len(rewards) // 10, 1)
    first, last = rewards[:decile], rewards[-decile:]
    if not sum(last) / len(last) > sum(first) / len(first):
        failures.append("training reward did not improve from first to last decile")
    by_method = {rep["method"]: rep for rep in document["reports"]}
    agent_p1 = by_method["agent"]["p_at"]["1"]
    if "greedy" in by_method and agent_p1 < by_method["greedy"]["p_at"]["1"]:
        failures.append("agent P@1 fell below the greedy baseline")
    chance = 1.0 / document["candidate_count"]
    if agent_p1 < 5.0 * chance:
        failures.append(f"agent P@1 {agent_p1:.4f} below 5x chance {5 * chance:.4f}")
    return failures


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="seqlink",
        description="sequential cross-network identity linking pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("generate", "write a synthetic graph pair plus ground-truth anchors"),
        ("embed", "pretrain per-identity embeddings for both graphs"),
        ("train", "train the linking agent on the training anchor split"),
        ("eval", "score the trained agent (and baselines) on held-out anchors"),
        ("run-all", "run generate, embed, train, and eval in sequence"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="global seed override")
        p.add_argument("--out", default=None, help="output directory override")
        if name in ("eval", "run-all"):
            p.add_argument("--baselines", default="",
                           help="comma list from: greedy,random,sdm")
            p.add_argument("--assert", dest="check", action="store_true",
                           help="exit nonzero if acceptance thresholds fail")
    args = parser.parse_args(argv)

    try:
        cfg = _resolve(args)
        baselines = [tok for tok in getattr(args, "baselines", "").split(",") if tok]
        if args.command == "generate":
            cmd_generate(cfg)
        elif args.command == "embed":
            cmd_embed(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "eval":
            document = cmd_eval(cfg, baselines)
            if getattr(args, "check", False):
                failures = _assert_thresholds(cfg, document)
                for message in failures:
                    print(f"ASSERT FAIL: {message}", file=sys.stderr)
                if failures:
                    return 1
        else:  # run-all
            started = time.perf_counter()
            cmd_generate(cfg)
            cmd_embed(cfg)
            cmd_train(cfg)
            document = cmd_eval(cfg, baselines)
            print(f"run-all: finished in {time.perf_counter() - started:.1f}s")
            if getattr(args, "check", False):
                failures = _assert_thresholds(cfg, document)
                for message in failures:
                    print(f"ASSERT FAIL: {message}", file=sys.stderr)
                if failures:
                    return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
