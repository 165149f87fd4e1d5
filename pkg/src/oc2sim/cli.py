"""Command-line entry point.

One subcommand per study: ``run`` (single trial, optional frame dumps),
``sweep`` (robot-count study), ``perturb`` (mid-trial rescatter), ``ablate``
(puck-sensing-radius study), ``search`` (exhaustive variant grid), ``flow``
(vector-field analysis).

Every invocation resolves its configuration (config file -> flag overrides),
writes a ``manifest.json`` snapshot into the output directory before any
experiment output, then streams CSVs line-buffered so an interrupted run
leaves whole rows only.  The manifest is finalized with timings (and, for
``search``, the achieved rank of the default variant pair) on success.
Exit status is 0 only when everything requested completed.
"""

import argparse
import dataclasses
import json
import os
import sys
import time

from . import __version__, experiments, render
from .config import (TrialConfig, config_to_dict, controller_params,
                     parse_config, sensor_geometry)
from .errors import ConfigError
from .experiments import (ablation_csv_lines, flow_csv_lines, flow_field,
                          perturbation_study, plateau_levels, radius_ablation,
                          run_trial, search_csv_lines, signed_circulation,
                          sweep_csv_lines, sweep_robot_count, trial_csv_lines,
                          variant_search)
from .field import write_field
from .rng import trial_seed

DEFAULT_OUT = "oc2sim_out"


def _write_lines(path, lines):
    """Line-buffered CSV write: every row hits the file whole."""
    with open(path, "w", encoding="utf-8", buffering=1) as fh:
        for line in lines:
            fh.write(line + "\n")


class Manifest:
    """Run provenance: resolved config, seed, artifact paths, timings.

    Written to ``manifest.json`` before any experiment output and rewritten
    with final status and timings at the end.
    """

    def __init__(self, out_dir, command, cfg, options):
        self.path = os.path.join(out_dir, "manifest.json")
        self.doc = {
            "tool": "oc2sim",
            "version": __version__,
            "command": command,
            "master_seed": cfg.seed,
            "config": config_to_dict(cfg),
            "options": options,
            "artifacts": [],
            "status": "running",
            "started_unix": time.time(),
        }
        self._t0 = time.perf_counter()
        self.flush()

    def add_artifact(self, name):
        if name not in self.doc["artifacts"]:
            self.doc["artifacts"].append(name)
        self.flush()

    def finalize(self, **extra):
        self.doc.update(extra)
        self.doc["status"] = "complete"
        self.doc["wall_time_s"] = time.perf_counter() - self._t0
        self.flush()

    def flush(self):
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(self.doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _resolve_config(args) -> TrialConfig:
    cfg = parse_config(args.config) if args.config else TrialConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args) -> str:
    out = args.out or os.environ.get("OC2_OUT") or DEFAULT_OUT
    os.makedirs(out, exist_ok=True)
    return out


def _parse_num_list(text, kind, flag):
    try:
        return [kind(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{flag}: expected comma-separated values, got {text!r}") from None


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    manifest = Manifest(out, "run", cfg, {
        "threads": args.threads, "frames_every": args.frames_every})
    fld, _ = experiments._field_bundle(cfg)

    frame_paths = []

    def frame_cb(world, step):
        name = f"frame_{step:06d}.ppm"
        render.write_ppm(render.render_frame(world, fld), os.path.join(out, name))
        frame_paths.append(name)

    trial_cfg = dataclasses.replace(cfg, seed=trial_seed(cfg.seed, "run", 0, 0))
    record = run_trial(trial_cfg,
                       frame_every=args.frames_every,
                       frame_cb=frame_cb if args.frames_every > 0 else None)
    _write_lines(os.path.join(out, "trial.csv"), trial_csv_lines(record))
    manifest.add_artifact("trial.csv")
    render.write_ppm(render.render_frame(record.final_world, fld),
                     os.path.join(out, "final.ppm"))
    manifest.add_artifact("final.ppm")
    with open(os.path.join(out, "final_state.txt"), "w", encoding="utf-8") as fh:
        fh.write(record.final_world.to_text())
    manifest.add_artifact("final_state.txt")
    write_field(fld, os.path.join(out, "field.pgm"))
    manifest.add_artifact("field.pgm")
    for name in frame_paths:
        manifest.add_artifact(name)
    manifest.finalize(final_proportion=record.final_proportion)
    print(f"run: final proportion {record.final_proportion:.4f} "
          f"after {cfg.max_steps} steps -> {out}/trial.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    counts = _parse_num_list(args.counts, int, "--counts")
    manifest = Manifest(out, "sweep", cfg, {
        "threads": args.threads, "counts": counts, "trials": args.trials})
    summaries = sweep_robot_count(cfg, counts=counts, trials=args.trials,
                                  threads=args.threads)
    _write_lines(os.path.join(out, "sweep.csv"), sweep_csv_lines(summaries))
    manifest.add_artifact("sweep.csv")
    finals = {s.group: float(s.mean[-1]) for s in summaries}
    manifest.finalize(final_means=finals)
    for s in summaries:
        print(f"sweep: {s.group:3d} robots -> final mean {s.mean[-1]:.4f} "
              f"(+/- {s.ci_half[-1]:.4f}, n={s.n_trials})")
    return 0


def cmd_perturb(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    manifest = Manifest(out, "perturb", cfg, {
        "threads": args.threads, "trials": args.trials,
        "scatter_step": args.scatter_step})
    records = perturbation_study(cfg, trials=args.trials,
                                 scatter_step=args.scatter_step,
                                 threads=args.threads)
    names = []
    for t, rec in enumerate(records):
        name = f"trial_{t:03d}.csv"
        _write_lines(os.path.join(out, name), trial_csv_lines(rec))
        names.append(name)
        manifest.add_artifact(name)
    pres, posts = zip(*(plateau_levels(r, args.scatter_step) for r in records))
    pre = sum(pres) / len(pres)
    post = sum(posts) / len(posts)
    manifest.finalize(pre_scatter_plateau=pre, post_recovery_plateau=post)
    print(f"perturb: plateau {pre:.4f} before scatter at step "
          f"{args.scatter_step}, {post:.4f} after recovery "
          f"({len(records)} trials)")
    return 0


def cmd_ablate(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    radii = _parse_num_list(args.radii, float, "--radii")
    manifest = Manifest(out, "ablate", cfg, {
        "threads": args.threads, "radii": radii, "trials": args.trials})
    results = radius_ablation(cfg, radii=radii, trials=args.trials,
                              threads=args.threads)
    _write_lines(os.path.join(out, "ablation.csv"), ablation_csv_lines(results))
    manifest.add_artifact("ablation.csv")
    manifest.finalize()
    for r in results:
        print(f"ablate: radius {r.radius:6.1f} -> in-goal "
              f"{r.mean_final_proportion:.4f}, coverage {r.mean_goal_coverage:.4f}")
    return 0


def cmd_search(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    manifest = Manifest(out, "search", cfg, {
        "threads": args.threads, "trials_per_combo": args.trials,
        "search_steps": args.steps, "refine_top": args.refine_top})

    def progress(done, total):
        if done % 256 == 0 or done == total:
            print(f"search: {done}/{total} combos", file=sys.stderr)

    result = variant_search(cfg, trials_per_combo=args.trials,
                            threads=args.threads, search_steps=args.steps,
                            refine_top=args.refine_top, progress=progress)
    _write_lines(os.path.join(out, "search.csv"),
                 search_csv_lines(result.scores))
    manifest.add_artifact("search.csv")
    if result.refined:
        _write_lines(os.path.join(out, "search_refined.csv"),
                     search_csv_lines(result.refined))
        manifest.add_artifact("search_refined.csv")
    rank = result.rank_of(13, 18)
    manifest.finalize(default_pair_rank=rank, combos=len(result.scores))
    best = result.scores[0]
    print(f"search: best combo ({best.puck_variant}, {best.align_variant}) "
          f"mean {best.mean_final:.4f}; pair (13, 18) ranked {rank}/4096")
    return 0


def cmd_flow(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    manifest = Manifest(out, "flow", cfg, {
        "spacing": args.spacing, "steps": args.steps})
    fld, _ = experiments._field_bundle(cfg)
    vectors = flow_field(fld, controller_params(cfg), args.spacing,
                         steps=args.steps, geometry=sensor_geometry(cfg),
                         robot_radius=cfg.robot_radius, dt=cfg.dt,
                         master_seed=cfg.seed)
    _write_lines(os.path.join(out, "flow.csv"), flow_csv_lines(vectors))
    manifest.add_artifact("flow.csv")
    render.write_ppm(render.render_flow(vectors, fld),
                     os.path.join(out, "flow.ppm"))
    manifest.add_artifact("flow.ppm")
    mid = ((cfg.segment[0][0] + cfg.segment[1][0]) / 2.0,
           (cfg.segment[0][1] + cfg.segment[1][1]) / 2.0)
    circ = signed_circulation(vectors, mid)
    manifest.finalize(signed_circulation=circ)
    sense_word = "clockwise" if circ < 0 else "counter-clockwise"
    print(f"flow: {len(vectors)} vectors, circulation {circ:.2f} ({sense_word})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON configuration file (defaults when omitted)")
    common.add_argument("--seed", type=int, metavar="U64",
                        help="master seed (overrides the config's seed)")
    common.add_argument("--out", metavar="DIR",
                        help=f"output directory (default $OC2_OUT or {DEFAULT_OUT})")
    common.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker threads for parallel trials (default 1)")

    p = argparse.ArgumentParser(
        prog="oc2sim",
        description="Deterministic swarm simulator: robots herd pucks into "
                    "a scalar-field goal region.")
    p.add_argument("--version", action="version", version=f"oc2sim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", parents=[common],
                        help="single trial with optional frame dumps")
    sp.add_argument("--frames-every", type=int, default=0, metavar="N",
                    help="write a PPM frame every N steps (0 = off)")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", parents=[common], help="robot-count study")
    sp.add_argument("--counts", default="1,2,4,8,16", metavar="LIST",
                    help="comma-separated robot counts (default 1,2,4,8,16)")
    sp.add_argument("--trials", type=int, default=30, metavar="N",
                    help="trials per count (default 30)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("perturb", parents=[common],
                        help="mid-trial puck rescatter study")
    sp.add_argument("--scatter-step", type=int, default=2500, metavar="N",
                    help="step at which pucks rescatter (default 2500)")
    sp.add_argument("--trials", type=int, default=1, metavar="N",
                    help="number of trials (default 1)")
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("ablate", parents=[common],
                        help="puck-sensing-radius study")
    sp.add_argument("--radii", default="420,100,80", metavar="LIST",
                    help="comma-separated sensing radii (default 420,100,80)")
    sp.add_argument("--trials", type=int, default=10, metavar="N",
                    help="trials per radius (default 10)")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("search", parents=[common],
                        help="exhaustive 64x64 variant-pair search")
    sp.add_argument("--trials", type=int, default=5, metavar="N",
                    help="trials per combo (default 5)")
    sp.add_argument("--steps", type=int, default=2000, metavar="N",
                    help="reduced step budget per search trial (default 2000)")
    sp.add_argument("--refine-top", type=int, default=50, metavar="N",
                    help="combos re-run at the full budget (default 50)")
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("flow", parents=[common],
                        help="lone-robot flow-field analysis")
    sp.add_argument("--spacing", type=float, default=50.0, metavar="UNITS",
                    help="grid spacing between start points (default 50)")
    sp.add_argument("--steps", type=int, default=40, metavar="K",
                    help="rollout steps per heading (default 40)")
    sp.set_defaults(func=cmd_flow)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
