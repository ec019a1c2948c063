#!/usr/bin/env python3
"""
Label View Manager - Command-line entry point for ingest, synthesis, training, evaluation and inspection
"""
import argparse
import fnmatch
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from config.run_config import RunConfig, load_run_config
from controllers.registry import get_controller_by_name, list_controller_names, needs_checkpoint
from errors import (
    CheckpointError,
    ConfigError,
    DataError,
    LabelViewError,
    OutOfRangeError,
    PolicyCorruptionError,
    TrainingDivergenceError,
)
from learning.agent_policy import Policy, value_heatmap
from learning.checkpoint import load_checkpoint, model_fingerprint
from learning.ppo_trainer import train
from processing.sim_world import world_hash
from results_exporter import (
    JsonLinesWriter,
    comparison_table,
    export_comparison,
    export_heatmap,
    export_metrics,
    export_replay,
    metric_rows,
)
from scene_storage import SceneStorage
from synthetic_generator import synth_corpus, synth_scenes
from trajectory_importer import export_trajectories, import_trajectories
from trajectory_scenes import DatasetSplit, Scene, split_scenes, train_test_split
from workers.evaluation_worker import EvaluationWorker, evaluate_scene, world_at

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3
LOG_NAME = "label_view_manager.log"


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def configure_logging(out_dir: Path, verbose: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(out_dir / LOG_NAME),
            logging.StreamHandler(sys.stdout)
        ],
        force=True,
    )


def build_parser() -> ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='TOML configuration file')
    common.add_argument('--seed', type=int, help='Override [run] seed')
    common.add_argument('--out', type=Path, default=Path('runs'), help='Output directory')
    common.add_argument('--single-thread', action='store_true', help='Run workers inline (bit-reproducible)')
    common.add_argument('--verbose', action='store_true', help='Debug logging')

    scenes = argparse.ArgumentParser(add_help=False)
    scenes.add_argument('--data', type=Path, help='Scene directory written by ingest (synthesized when omitted)')
    scenes.add_argument('--scenes', default='*', help='Glob over scene ids')

    controllers = argparse.ArgumentParser(add_help=False)
    controllers.add_argument('--controller', action='append', choices=list_controller_names(),
                             help='Controller to run; repeat for several')
    controllers.add_argument('--checkpoint', type=Path, help='Policy checkpoint for the rl controller')

    parser = ArgumentParser(description='Label View Manager')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=ArgumentParser)

    p = sub.add_parser('synth', parents=[common], help='Write a synthetic trajectory corpus CSV')
    p.add_argument('--kind', help='Scenario kind (defaults to [data] synth_kind)')
    p.add_argument('--duration', type=float, help='Corpus length in seconds')
    p.add_argument('--csv', type=Path, help='Output CSV (defaults to <out>/corpus.csv)')

    p = sub.add_parser('ingest', parents=[common], help='Split a trajectory CSV into scenes')
    p.add_argument('csv', type=Path, help='Trajectory CSV with header t,id,x,z')

    sub.add_parser('train', parents=[common, scenes], help='Train the policy with PPO')

    p = sub.add_parser('eval', parents=[common, scenes, controllers], help='Compare controllers on test scenes')
    p.add_argument('--split', choices=['test', 'train', 'all'], default='test', help='Which scenes to evaluate')

    p = sub.add_parser('replay', parents=[common, scenes, controllers], help='Record one scene as JSON lines')
    p.add_argument('--scene', required=True, help='Scene id')
    p.add_argument('--dump-observations', type=Path, help='Also write every encoded observation as JSON lines')

    p = sub.add_parser('heatmap', parents=[common, scenes, controllers], help='Critic values around one label')
    p.add_argument('--scene', required=True, help='Scene id')
    p.add_argument('--step', type=int, required=True, help='Scene step to evaluate')
    p.add_argument('--label', required=True, help='Target id of the label to map')
    p.add_argument('--mode', choices=['offset', 'acceleration'], default='offset', help='Grid over offsets or actions')
    return parser


def resolve_config(args) -> RunConfig:
    overrides: Dict[str, Dict[str, Any]] = {"run": {}}
    if args.seed is not None:
        overrides["run"]["seed"] = args.seed
    if args.single_thread:
        overrides["run"]["single_thread"] = True
    manager, run = load_run_config(args.config, overrides)
    if not manager.save(args.out):
        raise ConfigError(f"cannot write the resolved configuration to {args.out}")
    return run


def synthesize_scenes(run: RunConfig) -> List[Scene]:
    data = run.data
    if data.synth_scenes > 0:
        return synth_scenes(data.synth_kind, data.synth, data.synth_scenes, run.run.seed, data.scene_len, run.sim.dt)
    tracks = synth_corpus(data.synth_kind, data.synth, data.synth_duration, run.run.seed, data.synth_interval)
    return split_scenes(tracks, data.scene_len, run.sim.dt, data.dynamic_population, data.exclude,
                        prefix=data.synth_kind)


def load_scenes(args, run: RunConfig) -> List[Scene]:
    if args.data is None:
        scenes = synthesize_scenes(run)
        if args.scenes != "*":
            scenes = [s for s in scenes if fnmatch.fnmatch(s.scene_id, args.scenes)]
        return scenes
    storage = SceneStorage(args.data)
    if not storage.load(args.scenes):
        raise DataError(f"cannot load scenes from {args.data}")
    return storage.get_all()


def load_split(args, run: RunConfig) -> DatasetSplit:
    scenes = load_scenes(args, run)
    if not scenes:
        raise DataError("no scenes matched")
    return train_test_split(scenes, run.data.train_ratio, run.run.seed)


def load_policy(args, run: RunConfig) -> Policy:
    if args.checkpoint is None:
        raise ConfigError("the rl controller needs --checkpoint")
    return load_checkpoint(str(args.checkpoint), run.network, model_fingerprint(run.settings))


def make_controller(name: str, args, run: RunConfig, policy: Optional[Policy] = None):
    if needs_checkpoint(name) and policy is None:
        policy = load_policy(args, run)
    controller = get_controller_by_name(name, force=run.force, policy=policy, encoder=run.encoder)
    if controller is None:
        raise ConfigError(f"unknown controller {name!r}")
    return controller


def cmd_synth(args, run: RunConfig) -> int:
    kind = args.kind or run.data.synth_kind
    duration = args.duration or run.data.synth_duration
    tracks = synth_corpus(kind, run.data.synth, duration, run.run.seed, run.data.synth_interval)
    path = args.csv or args.out / "corpus.csv"
    export_trajectories(tracks, str(path))
    logger.info(f"Wrote {len(tracks)} tracks ({duration} s of {kind}) to {path}")
    return EXIT_OK


def cmd_ingest(args, run: RunConfig) -> int:
    tracks = import_trajectories(str(args.csv))
    scenes = split_scenes(tracks, run.data.scene_len, run.sim.dt, run.data.dynamic_population, run.data.exclude)
    storage = SceneStorage(args.out)
    storage.add_scenes(scenes)
    if not storage.save(source=str(args.csv)):
        raise DataError(f"cannot write scenes to {args.out}")
    averages = storage.manifest["averages"]
    logger.info(
        f"Ingested {len(scenes)} scenes: avg max objects {averages['max_objects']:.2f}, "
        f"avg speed {averages['mean_speed']:.2f} m/s, avg distance {averages['mean_distance']:.2f} m"
    )
    return EXIT_OK


def cmd_train(args, run: RunConfig) -> int:
    split = load_split(args, run)
    result = train(run, split, args.out)
    logger.info(f"Final checkpoint: {result.final_checkpoint}")
    return EXIT_OK


def cmd_eval(args, run: RunConfig) -> int:
    split = load_split(args, run)
    scenes = {"test": split.test, "train": split.train, "all": split.train + split.test}[args.split]
    if not scenes:
        raise DataError(f"the {args.split} split is empty")
    rows = []
    for name in args.controller or ["none", "force"]:
        controller = make_controller(name, args, run)
        worker = EvaluationWorker(controller, run.sim, run.camera, run.reward, run.run.workers, run.run.single_thread)
        rows.extend(metric_rows(name, worker.run(scenes)))
    if not export_metrics(rows, str(args.out / "metrics.csv")):
        raise DataError("cannot write metrics.csv")
    table = comparison_table(rows)
    export_comparison(table, str(args.out / "comparison.txt"))
    print(table.to_string(float_format=lambda v: f"{v:.4f}"))
    return EXIT_OK


def find_scene(args, run: RunConfig) -> Scene:
    for scene in load_scenes(args, run):
        if scene.scene_id == args.scene:
            return scene
    raise DataError(f"scene {args.scene!r} not found")


def cmd_replay(args, run: RunConfig) -> int:
    scene = find_scene(args, run)
    name = (args.controller or ["none"])[0]
    controller = make_controller(name, args, run)
    path = args.out / f"replay_{scene.scene_id}_{name}.jsonl"
    if args.dump_observations:
        with JsonLinesWriter(str(args.dump_observations)) as dump:
            result = evaluate_scene(scene, controller, run.sim, run.camera, run.reward, record=True,
                                    observation_sink=dump, encoder=run.encoder)
        logger.info(f"Dumped {dump.count} observations to {args.dump_observations}")
    else:
        result = evaluate_scene(scene, controller, run.sim, run.camera, run.reward, record=True)
    if not export_replay(result.frames, str(path)):
        raise DataError(f"cannot write {path}")
    return EXIT_OK


def cmd_heatmap(args, run: RunConfig) -> int:
    scene = find_scene(args, run)
    if not 0 <= args.step <= scene.n_steps:
        raise OutOfRangeError(f"step {args.step} outside scene {scene.scene_id} (0..{scene.n_steps})")
    policy = load_policy(args, run)
    name = (args.controller or ["rl"])[0]
    controller = make_controller(name, args, run, policy)
    world = world_at(scene, controller, run.sim, run.camera, args.step)
    try:
        i = world.label_index(args.label)
    except KeyError:
        raise DataError(f"scene {scene.scene_id} has no track {args.label!r}") from None
    before = world_hash(world)
    grid = value_heatmap(policy, world, i, mode=args.mode, encoder=run.encoder)
    if world_hash(world) != before:
        raise DataError(f"heatmap of {args.label} changed the world state at step {args.step}")
    path = args.out / f"heatmap_{scene.scene_id}_{args.label}_{args.step}_{args.mode}.csv"
    if not export_heatmap(grid, str(path)):
        raise DataError(f"cannot write {path}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "train": cmd_train,
    "eval": cmd_eval,
    "replay": cmd_replay,
    "heatmap": cmd_heatmap,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the application"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.out, args.verbose)
    try:
        run = resolve_config(args)
        return COMMANDS[args.command](args, run)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except (TrainingDivergenceError, PolicyCorruptionError) as e:
        logger.error(f"Numerical divergence: {e}")
        return EXIT_DIVERGED
    except (DataError, CheckpointError) as e:
        logger.error(f"Data error: {e}")
        return EXIT_DATA
    except LabelViewError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_DATA
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
