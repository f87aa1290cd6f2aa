from .config import MapConfig, RunConfig, load_config, save_config, smoke_config
from .train import Trainer, run_training
from .evaluate import eval_checkpoint, eval_oracle, eval_policy
from .bench import run_bench
from .replay import parse_replay_file, run_replay, write_replay_file

__all__ = [
    "MapConfig", "RunConfig", "load_config", "save_config", "smoke_config",
    "Trainer", "run_training", "eval_checkpoint", "eval_oracle", "eval_policy",
    "run_bench", "parse_replay_file", "run_replay", "write_replay_file",
]
