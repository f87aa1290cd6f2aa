"""Command-line interface: train, eval, bench, replay."""
from __future__ import annotations

import argparse
import sys

from .config import RunConfig, load_config, smoke_config


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.total_steps is not None:
        cfg.total_steps = args.total_steps
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    if args.num_envs is not None:
        cfg.num_envs = args.num_envs
    if args.fusion is not None:
        cfg.model.backbone.fusion_mode = args.fusion
    if args.distill is not None:
        cfg.model.distill = args.distill
    if args.scene_graph is not None:
        cfg.model.scene_graph = args.scene_graph
    return cfg.validate()


def cmd_train(args):
    from .train import run_training
    if args.config:
        cfg = load_config(args.config)
    elif args.smoke:
        cfg = smoke_config()
    else:
        cfg = RunConfig()
    cfg = _apply_overrides(cfg, args)
    summary = run_training(cfg, resume_from=args.resume)
    print(f"run complete: {summary['env_steps']} env steps, "
          f"final SR {summary['final_sr']:.3f}, SPL {summary['final_spl']:.3f} "
          f"({summary['wall_clock_s']:.0f}s, kernels={summary['kernel_backend']})")
    return 0


def cmd_eval(args):
    from .evaluate import eval_checkpoint, eval_oracle
    from .checkpoint import load_checkpoint
    from .config import config_from_dict
    if args.oracle:
        payload = load_checkpoint(args.checkpoint)
        cfg = config_from_dict(payload["config"])
        sr, spl, _ = eval_oracle(cfg, args.episodes,
                                 args.seed_base or cfg.heldout_seed_base,
                                 out_csv=args.out)
    else:
        sr, spl, _ = eval_checkpoint(args.checkpoint, args.episodes,
                                     seed_base=args.seed_base, out_csv=args.out)
    print(f"episodes {args.episodes}  SR {sr:.4f}  SPL {spl:.4f}")
    return 0


def cmd_bench(args):
    from .bench import format_rows, run_bench
    rows = run_bench(ckpt_path=args.checkpoint, iters=args.iters,
                     device_label=args.device_label, out_csv=args.out)
    print(format_rows(rows))
    return 0


def cmd_replay(args):
    from .replay import run_replay
    record, visited = run_replay(args.file, args.out, resolution=args.resolution)
    print(f"replayed {record.steps} steps, path {record.path_cells} cells, "
          f"success={record.success}; wrote {args.out}/topdown.png and "
          f"{len(visited)} path cells")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="goalnav",
                                description="image-goal gridworld navigation")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a policy with PPO")
    t.add_argument("--config", help="YAML run config")
    t.add_argument("--smoke", action="store_true",
                   help="use the small fast-training preset")
    t.add_argument("--seed", type=int)
    t.add_argument("--total-steps", type=int, dest="total_steps")
    t.add_argument("--num-envs", type=int, dest="num_envs")
    t.add_argument("--out-dir", dest="out_dir")
    t.add_argument("--fusion", choices=["sca_wdm", "film", "none"])
    t.add_argument("--distill", action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--scene-graph", dest="scene_graph",
                   action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--resume", help="checkpoint to resume from")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on held-out seeds")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed-base", type=int, dest="seed_base")
    e.add_argument("--out", help="per-episode CSV path")
    e.add_argument("--oracle", action="store_true",
                   help="run the shortest-path oracle instead of the policy")
    e.set_defaults(fn=cmd_eval)

    b = sub.add_parser("bench", help="per-component latency table")
    b.add_argument("--checkpoint")
    b.add_argument("--iters", type=int, default=200)
    b.add_argument("--device-label", dest="device_label", default="cpu")
    b.add_argument("--out", help="CSV output path")
    b.set_defaults(fn=cmd_bench)

    r = sub.add_parser("replay", help="re-render a recorded episode")
    r.add_argument("--file", required=True, help="replay file (seed + actions)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--resolution", type=int, default=128)
    r.set_defaults(fn=cmd_replay)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
