"""Experiment driver: single runs, Pareto sweeps, soundness reports, and plots.

Configuration files are JSON (schema_version 1). A config names the plant,
the controller weight file, one target box or a seeded random-target
generator, the horizon, and a list of partitioning configurations. All
outputs are deterministic given the config; measured wall time is the one
exception and can be suppressed with `--timing none`.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import LtiSystem
from .errors import ConfigError, EmptySweepError
from .geometry import HyperRect, RotatedRect, volume
from .network import FeedforwardNetwork, load_network
from .oracle import BpEstimate, error_metric, grid_soundness_check, mc_true_bp
from .reach import BpoaRun, PartitionParams, backreach_chain, hybreach_lp_plus, lp_count

SCHEMA_VERSION = 1
AXIS = "axis"
ROTATED = "rotated2d"

CSV_COLUMNS = [
    "config_id",
    "n_T",
    "n_B",
    "strategy",
    "lp_count",
    "mean_error",
    "mean_wall_time_s",
    "targets",
    "seed",
]


@dataclass
class RunConfig:
    config_id: str
    tsp_counts: tuple[int, ...]
    brsp_budget: int
    strategy: str

    def params(self, min_cell_volume: float) -> PartitionParams:
        return PartitionParams(
            tsp_counts=self.tsp_counts,
            brsp_budget=self.brsp_budget,
            min_cell_volume=min_cell_volume,
            brsp_strategy=self.strategy,
        )


@dataclass
class ExperimentConfig:
    system: LtiSystem
    network: FeedforwardNetwork
    network_path: str
    targets: list[HyperRect]
    horizon: int
    configurations: list[RunConfig]
    mc_samples: int
    mode: str
    seed: int
    output_dir: Path
    min_cell_volume: float
    parallel: int = 1


def _box_from(block, name: str) -> HyperRect:
    try:
        return HyperRect(np.asarray(block["lower"], float), np.asarray(block["upper"], float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid box {name!r}: {exc}") from exc


def _random_targets(block, default_seed: int) -> list[HyperRect]:
    try:
        count = int(block["count"])
        seed = int(block.get("seed", default_seed))
        center_low = float(block.get("center_low", 3.5))
        center_high = float(block.get("center_high", 6.0))
        size = np.asarray(block.get("box_size", [1.0, 0.5]), float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid random_targets block: {exc}") from exc
    if count < 1:
        raise ConfigError("random_targets.count must be >= 1")
    rng = np.random.default_rng(seed)
    centers_x = rng.uniform(center_low, center_high, size=count)
    half = 0.5 * size
    targets = []
    for cx in centers_x:
        center = np.zeros(size.size)
        center[0] = cx
        targets.append(HyperRect(center - half, center + half))
    return targets


def load_config(path, *, out=None, seed=None, mode=None, parallel=1) -> ExperimentConfig:
    """Parse and validate an experiment config, applying CLI overrides."""
    cfg_path = Path(path)
    try:
        doc = json.loads(cfg_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"config {path} has schema_version {doc.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    sys_block = doc.get("system")
    if not isinstance(sys_block, dict):
        raise ConfigError("config lacks a 'system' block")
    try:
        system = LtiSystem(
            A=np.asarray(sys_block["A"], float),
            B=np.asarray(sys_block["B"], float),
            X=_box_from(sys_block["X"], "system.X"),
            U=_box_from(sys_block["U"], "system.U"),
            c=np.asarray(sys_block["c"], float) if "c" in sys_block else None,
            dt=float(sys_block.get("dt", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid system block: {exc}") from exc

    net_field = doc.get("network")
    if not net_field:
        raise ConfigError("config lacks a 'network' path")
    net_path = Path(net_field)
    if not net_path.is_absolute():
        net_path = cfg_path.parent / net_path
    if not net_path.exists():
        raise ConfigError(f"network file does not exist: {net_path}")
    try:
        network = load_network(net_path)
    except ValueError as exc:
        raise ConfigError(f"cannot load network {net_path}: {exc}") from exc

    the_seed = int(seed if seed is not None else doc.get("seed", 0))
    if "target" in doc:
        targets = [_box_from(doc["target"], "target")]
    elif "random_targets" in doc:
        targets = _random_targets(doc["random_targets"], the_seed)
    else:
        raise ConfigError("config needs either 'target' or 'random_targets'")
    for t in targets:
        if t.dim != system.n_x:
            raise ConfigError("target dimension does not match the system")

    horizon = int(doc.get("horizon", 0))
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")

    raw_cfgs = doc.get("configurations")
    if not isinstance(raw_cfgs, list) or not raw_cfgs:
        raise ConfigError("config needs a nonempty 'configurations' list")
    configurations = []
    for i, entry in enumerate(raw_cfgs):
        try:
            tsp_counts = tuple(int(v) for v in entry["tsp"])
            brsp_budget = int(entry["brsp"])
            strategy = str(entry.get("strategy", "guided"))
            config_id = str(entry.get("id", f"cfg{i}"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"configuration {i} is malformed: {exc}") from exc
        if len(tsp_counts) != system.n_x:
            raise ConfigError(f"configuration {config_id}: tsp counts must match the state dimension")
        configurations.append(RunConfig(config_id, tsp_counts, brsp_budget, strategy))

    the_mode = str(mode if mode is not None else doc.get("mode", AXIS))
    if the_mode not in (AXIS, ROTATED):
        raise ConfigError(f"mode must be '{AXIS}' or '{ROTATED}', got {the_mode!r}")
    if the_mode == ROTATED and system.n_x != 2:
        raise ConfigError("rotated2d mode requires a 2-D state space")

    return ExperimentConfig(
        system=system,
        network=network,
        network_path=str(net_path),
        targets=targets,
        horizon=horizon,
        configurations=configurations,
        mc_samples=int(doc.get("mc_samples", 100000)),
        mode=the_mode,
        seed=the_seed,
        output_dir=Path(out if out is not None else doc.get("output_dir", "out")),
        min_cell_volume=float(doc.get("min_cell_volume", 0.0)),
        parallel=max(1, int(parallel)),
    )


def _mc_seed(cfg: ExperimentConfig, target_index: int) -> int:
    return cfg.seed * 1000 + target_index


def _sample_region(cfg: ExperimentConfig, target: HyperRect) -> HyperRect | None:
    """Sampling region for the ground-truth estimate at the final step.

    The pure backreach chain box always covers the true set; intersecting it
    with the (slightly inflated) bound of a coarse unpartitioned run keeps the
    region tight enough for useful member counts.
    """
    chain = backreach_chain(cfg.system, target, cfg.horizon)
    if len(chain) < cfg.horizon:
        return None
    region = chain[cfg.horizon - 1]
    coarse = hybreach_lp_plus(
        cfg.system,
        cfg.network,
        target,
        cfg.horizon,
        PartitionParams(tsp_counts=(1,) * cfg.system.n_x, brsp_budget=1),
        rotated=False,
    )
    box = coarse.bounding_box(-cfg.horizon)
    if box is None:
        return None
    pad = 0.01 * np.maximum(box.widths, 1e-9)
    lo = np.maximum(box.lower - pad, region.lower)
    hi = np.minimum(box.upper + pad, region.upper)
    if np.any(lo > hi):
        return None
    return HyperRect(lo, hi)


def _estimate_truth(cfg: ExperimentConfig, target_index: int) -> BpEstimate | None:
    target = cfg.targets[target_index]
    region = _sample_region(cfg, target)
    if region is None:
        return None
    return mc_true_bp(
        cfg.system,
        cfg.network,
        target,
        -cfg.horizon,
        region,
        cfg.mc_samples,
        _mc_seed(cfg, target_index),
    )


def _estimate_all(cfg: ExperimentConfig) -> list[BpEstimate | None]:
    if cfg.parallel > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
            return list(pool.map(lambda i: _estimate_truth(cfg, i), range(len(cfg.targets))))
    return [_estimate_truth(cfg, i) for i in range(len(cfg.targets))]


def _true_area(est: BpEstimate | None, mode: str) -> float | None:
    if est is None or est.empty:
        return None
    area = est.area_rotated if mode == ROTATED else est.area_axis
    return area if area > 0 else None


def _set_to_json(s) -> dict:
    if isinstance(s, RotatedRect):
        return {
            "kind": "rotated",
            "center": s.center.tolist(),
            "half_extents": s.half_extents.tolist(),
            "angle": s.angle,
        }
    return {"kind": "axis", "lower": s.lower.tolist(), "upper": s.upper.tolist()}


def _run_artifact(
    cfg: ExperimentConfig,
    rc: RunConfig,
    target_index: int,
    run: BpoaRun,
    est: BpEstimate | None,
) -> dict:
    target = cfg.targets[target_index]
    timesteps = []
    for t in range(-1, -cfg.horizon - 1, -1):
        box = run.bounding_box(t)
        br_cells = [
            [_set_to_json(c) for c in h.cells.get(t, [])] for h in run.histories
        ]
        timesteps.append(
            {
                "t": t,
                "sets": [_set_to_json(s) for s in run.aggregate(t)],
                "bounding_box": None if box is None else _set_to_json(box),
                "br_cells": br_cells,
            }
        )
    area_true = _true_area(est, cfg.mode)
    area_bpoa = run.bound_area(-cfg.horizon)
    error = None
    if area_true is not None:
        error = error_metric(area_bpoa, area_true)
    members = []
    if est is not None and not est.empty:
        members = est.member_points[:2000].tolist()
    return {
        "schema_version": SCHEMA_VERSION,
        "config_id": rc.config_id,
        "mode": cfg.mode,
        "strategy": rc.strategy,
        "tsp": list(rc.tsp_counts),
        "brsp": rc.brsp_budget,
        "horizon": cfg.horizon,
        "target_index": target_index,
        "target": _set_to_json(target),
        "state_dim": cfg.system.n_x,
        "lp_count": run.lp_count,
        "aux_lp_count": run.aux_lp_count,
        "wall_time_s": run.wall_time_s,
        "error": {
            "value": error,
            "area_bpoa": area_bpoa,
            "area_true": area_true,
            "members": 0 if est is None else int(est.member_points.shape[0]),
            "samples": 0 if est is None else est.samples_used,
            "seed": _mc_seed(cfg, target_index),
        },
        "mc_members": members,
        "timesteps": timesteps,
    }


def _execute(cfg: ExperimentConfig):
    """Run every configuration against every target; yields (rc, idx, run, estimate)."""
    estimates = _estimate_all(cfg)
    results = []
    for rc in cfg.configurations:
        params = rc.params(cfg.min_cell_volume)
        for idx, target in enumerate(cfg.targets):
            run = hybreach_lp_plus(
                cfg.system, cfg.network, target, cfg.horizon, params, rotated=cfg.mode == ROTATED
            )
            results.append((rc, idx, run, estimates[idx]))
    return results


def cmd_run(cfg: ExperimentConfig) -> list[Path]:
    """Execute all configurations and write one artifact file per (config, target)."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for rc, idx, run, est in _execute(cfg):
        artifact = _run_artifact(cfg, rc, idx, run, est)
        path = cfg.output_dir / f"run_{rc.config_id}_t{idx}.json"
        path.write_text(json.dumps(artifact, indent=1) + "\n", encoding="utf-8")
        paths.append(path)
        err = artifact["error"]["value"]
        err_txt = "n/a" if err is None else f"{err:.6f}"
        print(
            f"[run] {rc.config_id} target {idx}: lp_count={run.lp_count} "
            f"error={err_txt} wall={run.wall_time_s:.3f}s -> {path}"
        )
    return paths


def cmd_sweep(cfg: ExperimentConfig, timing: str = "wall") -> Path:
    """Run every configuration, averaging error over targets; writes sweep.csv + geometry."""
    if not cfg.configurations:
        raise EmptySweepError("sweep needs at least one configuration")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    results = _execute(cfg)
    rows = []
    geometry: dict = {}
    for rc in cfg.configurations:
        entries = [(idx, run, est) for (r, idx, run, est) in results if r is rc]
        errors = []
        times = []
        for idx, run, est in entries:
            area_true = _true_area(est, cfg.mode)
            if area_true is not None:
                errors.append(error_metric(run.bound_area(-cfg.horizon), area_true))
            times.append(run.wall_time_s)
        mean_error = float(np.mean(errors)) if errors else float("nan")
        mean_time = float(np.mean(times)) if times else float("nan")
        n_eff = _effective_cells(rc, cfg.system.n_x)
        budget = lp_count(cfg.system.n_x, n_eff, int(np.prod(rc.tsp_counts)), cfg.horizon)
        n_t = rc.tsp_counts[0] if len(set(rc.tsp_counts)) == 1 else "x".join(map(str, rc.tsp_counts))
        rows.append(
            {
                "config_id": rc.config_id,
                "n_T": n_t,
                "n_B": rc.brsp_budget,
                "strategy": rc.strategy,
                "lp_count": budget,
                "mean_error": repr(mean_error),
                "mean_wall_time_s": "nan" if timing == "none" else repr(mean_time),
                "targets": len(cfg.targets),
                "seed": cfg.seed,
            }
        )
        geometry[rc.config_id] = [
            {
                "target_index": idx,
                "final_sets": [_set_to_json(s) for s in run.aggregate(-cfg.horizon)],
                "lp_count": run.lp_count,
            }
            for idx, run, _ in entries
        ]
    csv_path = cfg.output_dir / "sweep.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    geo_path = cfg.output_dir / "sweep_geometry.json"
    geo_path.write_text(json.dumps(geometry, indent=1) + "\n", encoding="utf-8")
    for row in rows:
        print(
            f"[sweep] {row['config_id']}: lp_count={row['lp_count']} "
            f"mean_error={row['mean_error']} mean_wall_time_s={row['mean_wall_time_s']}"
        )
    return csv_path


def _effective_cells(rc: RunConfig, n_x: int) -> int:
    if rc.brsp_budget == 1:
        return 1
    if rc.strategy == "uniform":
        m = 1
        while (m + 1) ** n_x <= rc.brsp_budget:
            m += 1
        return m**n_x
    return rc.brsp_budget


def cmd_soundness(cfg: ExperimentConfig, shrink_pct: float = 0.0) -> dict:
    """Grid soundness over all timesteps; returns and writes the violation report."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    report: dict = {"schema_version": SCHEMA_VERSION, "shrink_pct": shrink_pct, "checks": []}
    factor = 1.0 - shrink_pct / 100.0
    for rc in cfg.configurations:
        params = rc.params(cfg.min_cell_volume)
        for idx, target in enumerate(cfg.targets):
            run = hybreach_lp_plus(
                cfg.system, cfg.network, target, cfg.horizon, params, rotated=cfg.mode == ROTATED
            )
            chain = backreach_chain(cfg.system, target, cfg.horizon)
            for t in range(-1, -cfg.horizon - 1, -1):
                if len(chain) < -t:
                    break
                region = chain[-t - 1]
                pitch = float((volume(region) / max(cfg.mc_samples, 1)) ** (1.0 / region.dim))
                sets = run.aggregate(t)
                if shrink_pct > 0.0:
                    sets = [
                        s.scaled(factor) if isinstance(s, HyperRect) else
                        RotatedRect(s.center, s.half_extents * factor, s.angle)
                        for s in sets
                    ]
                violations = grid_soundness_check(
                    cfg.system, cfg.network, target, t, region, pitch, sets
                )
                report["checks"].append(
                    {
                        "config_id": rc.config_id,
                        "target_index": idx,
                        "t": t,
                        "pitch": pitch,
                        "violations": int(violations.shape[0]),
                        "violation_points": violations[:50].tolist(),
                    }
                )
                print(
                    f"[soundness] {rc.config_id} target {idx} t={t}: "
                    f"{violations.shape[0]} violations (pitch {pitch:.4g})"
                )
    total = sum(c["violations"] for c in report["checks"])
    report["total_violations"] = total
    out_path = cfg.output_dir / "soundness.json"
    out_path.write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
    print(f"[soundness] total violations: {total} -> {out_path}")
    return report


def cmd_plot(artifact_path, out_dir=None) -> list[Path]:
    """Render one SVG per timestep from a run artifact (CSV fallback off the plane)."""
    path = Path(artifact_path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read artifact {path}: {exc}") from exc
    if "timesteps" not in doc:
        raise ConfigError(f"artifact {path} lacks 'timesteps'")
    out = Path(out_dir) if out_dir is not None else path.parent
    out.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    if doc.get("state_dim", 2) != 2:
        return _plot_csv_fallback(doc, out, stem)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Polygon

    files = []
    members = np.asarray(doc.get("mc_members", []), dtype=float)
    for entry in doc["timesteps"]:
        fig, ax = plt.subplots(figsize=(6, 5))
        for cells in entry["br_cells"]:
            for cell in cells:
                ax.add_patch(
                    Polygon(_corners_of(cell), closed=True, facecolor="0.85", edgecolor="0.6", lw=0.5)
                )
        for s in entry["sets"]:
            ax.add_patch(
                Polygon(_corners_of(s), closed=True, fill=False, edgecolor="magenta", lw=1.5)
            )
        ax.add_patch(
            Polygon(_corners_of(doc["target"]), closed=True, fill=False, edgecolor="red", lw=1.5)
        )
        if members.size:
            ax.plot(members[:, 0], members[:, 1], ".", color="tab:blue", ms=1.5, alpha=0.5)
        ax.autoscale_view()
        ax.relim()
        ax.autoscale()
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_title(f"{doc.get('config_id', '')} t={entry['t']}")
        fig_path = out / f"{stem}_t{entry['t']}.svg"
        fig.savefig(fig_path)
        plt.close(fig)
        files.append(fig_path)
        print(f"[plot] wrote {fig_path}")
    return files


def _corners_of(set_json: dict) -> np.ndarray:
    if set_json["kind"] == "rotated":
        rect = RotatedRect(
            np.asarray(set_json["center"], float),
            np.asarray(set_json["half_extents"], float),
            float(set_json["angle"]),
        )
        return rect.corners()
    lo = np.asarray(set_json["lower"], float)
    hi = np.asarray(set_json["upper"], float)
    return np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])


def _plot_csv_fallback(doc: dict, out: Path, stem: str) -> list[Path]:
    files = []
    for entry in doc["timesteps"]:
        rows = []
        for s in entry["sets"]:
            if s["kind"] == "axis":
                rows.append(s["lower"] + s["upper"])
        csv_path = out / f"{stem}_t{entry['t']}.csv"
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lower...", "upper..."])
            writer.writerows(rows)
        files.append(csv_path)
        print(f"[plot] wrote {csv_path}")
    return files


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bpreach",
        description="Backward reachability experiments for neural feedback loops",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--mode", choices=[AXIS, ROTATED], default=None, help="set representation")
        p.add_argument("--parallel", type=int, default=1, help="worker threads for sampling")

    p_run = sub.add_parser("run", help="single verification runs, one artifact per config/target")
    common(p_run)
    p_sweep = sub.add_parser("sweep", help="Pareto sweep over configurations")
    common(p_sweep)
    p_sweep.add_argument(
        "--timing",
        choices=["wall", "none"],
        default="wall",
        help="'none' writes nan wall times for byte-reproducible CSVs",
    )
    p_sound = sub.add_parser("soundness", help="grid soundness report over all timesteps")
    common(p_sound)
    p_sound.add_argument(
        "--debug-shrink",
        type=float,
        default=0.0,
        metavar="PCT",
        help="shrink BPOA sets by PCT%% (negative-control testing)",
    )
    p_plot = sub.add_parser("plot", help="render a run artifact")
    p_plot.add_argument("--artifact", required=True, help="run artifact JSON")
    p_plot.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "plot":
            cmd_plot(args.artifact, args.out)
            return 0
        cfg = load_config(
            args.config, out=args.out, seed=args.seed, mode=args.mode, parallel=args.parallel
        )
        if args.command == "run":
            cmd_run(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg, timing=args.timing)
        elif args.command == "soundness":
            cmd_soundness(cfg, shrink_pct=args.debug_shrink)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
