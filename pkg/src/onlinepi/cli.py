"""Reproducible experiment runner.

Manifests are flat ``key = value`` text naming the experiment, its arms, the
engine config and the series recipe.  Every artifact embeds the manifest
hash, and the output directory is derived from it, so a changed manifest can
never overwrite a previous experiment.  Identical manifests reproduce
byte-identical artifacts.

Exit codes: 0 success, 1 runtime fault, 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .config import EngineConfig, config_from_flat, config_to_flat, dumps_flat, loads_flat
from .data import SeriesSpec, generate_synthetic, load_csv
from .engine import (
    StepRecord,
    run_frozen,
    run_naive_baseline,
    run_online,
    run_online_cpi,
    strip_warmup,
)
from .errors import NumericalFault
from .metrics import score_trace
from .traces import read_trace, write_trace

__all__ = [
    "ExperimentManifest",
    "load_manifest",
    "manifest_hash",
    "run_experiment",
    "run_ablation_no_per",
    "report_relative_winkler",
    "main",
]

VALID_ARMS = ("opi", "cpi", "naive", "frozen", "opi-no-per")
OUTPUT_ROOT_ENV = "ONLINEPI_OUT"
SCORE_COLUMNS = ("arm", "n_steps", "mean_winkler", "avg_coverage_deviation", "mean_sharpness")


@dataclass
class ExperimentManifest:
    name: str = "experiment"
    arms: Tuple[str, ...] = ("opi", "cpi")
    sweep: Optional[Tuple[int, ...]] = None
    reward_ma_window: int = 500
    engine: EngineConfig = field(default_factory=EngineConfig)
    series: SeriesSpec = field(default_factory=SeriesSpec)

    def validate(self) -> "ExperimentManifest":
        if not self.name or any(c in self.name for c in "/\\ "):
            raise ValueError(f"experiment name must be a non-empty token, got {self.name!r}")
        if not self.arms:
            raise ValueError("at least one arm is required")
        for arm in self.arms:
            if arm not in VALID_ARMS:
                raise ValueError(f"unknown arm {arm!r}; valid arms: {VALID_ARMS}")
        if self.sweep is not None:
            for n in self.sweep:
                if n < 1 or (n + 1) & n:
                    raise ValueError(f"sweep values must be 2**n - 1, got {n}")
        if self.reward_ma_window < 1:
            raise ValueError("reward_ma_window must be positive")
        self.engine.validate()
        self.series.validate()
        return self

    def to_flat(self) -> Dict[str, str]:
        out = {
            "experiment.name": self.name,
            "experiment.arms": ",".join(self.arms),
            "experiment.reward_ma_window": str(self.reward_ma_window),
        }
        if self.sweep is not None:
            out["experiment.sweep"] = ",".join(str(n) for n in self.sweep)
        out.update(config_to_flat(self.engine))
        out.update(self.series.to_flat())
        return out

    @classmethod
    def from_flat(cls, flat: Dict[str, str]) -> "ExperimentManifest":
        manifest = cls(engine=config_from_flat(flat), series=SeriesSpec.from_flat(flat))
        if "experiment.name" in flat:
            manifest.name = flat["experiment.name"]
        if "experiment.arms" in flat:
            manifest.arms = tuple(a.strip() for a in flat["experiment.arms"].split(",") if a.strip())
        if "experiment.sweep" in flat:
            manifest.sweep = tuple(int(n) for n in flat["experiment.sweep"].split(",") if n.strip())
        if "experiment.reward_ma_window" in flat:
            manifest.reward_ma_window = int(flat["experiment.reward_ma_window"])
        return manifest


def load_manifest(path) -> ExperimentManifest:
    with open(path) as fh:
        return ExperimentManifest.from_flat(loads_flat(fh.read())).validate()


def manifest_hash(manifest: ExperimentManifest) -> str:
    """Hash of the canonical serialized manifest (sorted flat keys)."""
    return hashlib.sha256(dumps_flat(manifest.to_flat()).encode()).hexdigest()


def report_relative_winkler(trace_a: Sequence[StepRecord], trace_b: Sequence[StepRecord]) -> float:
    """Mean Winkler of ``trace_b`` minus mean Winkler of ``trace_a``.

    Positive when the first (proposed) trace scores better.  Traces must pair
    step for step.
    """
    if len(trace_a) != len(trace_b):
        raise ValueError(f"trace lengths differ: {len(trace_a)} vs {len(trace_b)}")
    if not trace_a:
        raise ValueError("cannot compare empty traces")
    mean_a = sum(r.winkler for r in trace_a) / len(trace_a)
    mean_b = sum(r.winkler for r in trace_b) / len(trace_b)
    return mean_b - mean_a


def _load_series(spec: SeriesSpec):
    if spec.source == "synthetic":
        series, _ = generate_synthetic(spec)
        return series
    return load_csv(spec.source)


def _arm_config(arm: str, cfg: EngineConfig) -> EngineConfig:
    """The engine config an arm actually runs with.

    The no-replay-prioritization arm zeroes the sigma/rho knobs (uniform
    sampling, unit IS weights) and changes nothing else.
    """
    if arm != "opi-no-per":
        return cfg
    import copy as _copy

    cfg = _copy.deepcopy(cfg)
    cfg.per.sigma = 0.0
    cfg.per.rho_start = 0.0
    cfg.per.rho_end = 0.0
    return cfg


def _run_arm(arm: str, series, cfg: EngineConfig) -> List[StepRecord]:
    cfg = _arm_config(arm, cfg)
    if arm in ("opi", "opi-no-per"):
        return run_online(series, cfg)
    if arm == "cpi":
        return run_online_cpi(series, cfg)
    if arm == "naive":
        return run_naive_baseline(series, cfg)
    if arm == "frozen":
        return run_frozen(series, cfg)
    raise ValueError(f"unknown arm {arm!r}")


def _score_row(arm: str, records: Sequence[StepRecord], ncp: float) -> str:
    scored = strip_warmup(records)
    report = score_trace(scored, ncp)
    return "\t".join(
        [
            arm,
            str(report.n_steps),
            repr(report.mean_winkler),
            repr(report.avg_coverage_deviation),
            repr(report.mean_sharpness),
        ]
    )


def _write_table(path: Path, header: Sequence[str], rows: Sequence[str], hash_hex: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# manifest_hash = {hash_hex}\n")
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write(row + "\n")


def _moving_average(values: Sequence[float], window: int) -> List[float]:
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def _experiment_dir(manifest: ExperimentManifest, out_root: Path) -> Tuple[Path, str]:
    hash_hex = manifest_hash(manifest)
    exp_dir = out_root / f"{manifest.name}-{hash_hex[:12]}"
    exp_dir.mkdir(parents=True, exist_ok=True)
    return exp_dir, hash_hex


def run_experiment(
    manifest: ExperimentManifest,
    out_root,
    arm_filter: Optional[str] = None,
) -> Path:
    """Run the manifest's arms, writing traces, scores and reward curves."""
    manifest.validate()
    out_root = Path(out_root)
    exp_dir, hash_hex = _experiment_dir(manifest, out_root)
    (exp_dir / "manifest.txt").write_text(dumps_flat(manifest.to_flat()))

    series = _load_series(manifest.series)
    echo = manifest.to_flat()
    echo["manifest_hash"] = hash_hex
    ncp = 1.0 - manifest.engine.beta

    arms = manifest.arms if arm_filter is None else tuple(a for a in manifest.arms if a == arm_filter)
    if not arms:
        raise ValueError(f"arm {arm_filter!r} is not part of this manifest (arms: {manifest.arms})")

    score_rows = []
    for arm in arms:
        records = _run_arm(arm, series, manifest.engine)
        arm_echo = dict(echo)
        arm_echo.update(config_to_flat(_arm_config(arm, manifest.engine)))
        write_trace(exp_dir / f"trace_{arm}.csv", records, arm_echo)
        score_rows.append(_score_row(arm, records, ncp))
        if arm != "naive":
            ma = _moving_average([r.reward for r in records], manifest.reward_ma_window)
            rows = [f"{r.step}\t{repr(v)}" for r, v in zip(records, ma)]
            _write_table(exp_dir / f"reward_ma_{arm}.tsv", ("step", "reward_ma"), rows, hash_hex)

    _write_table(exp_dir / "scores.tsv", SCORE_COLUMNS, score_rows, hash_hex)

    if manifest.sweep:
        sweep_rows = []
        cpi_records = run_online_cpi(series, manifest.engine)
        cpi_mean = score_trace(strip_warmup(cpi_records), ncp).mean_winkler
        for n in manifest.sweep:
            cfg = manifest.engine.with_overrides(n_actions=n)
            records = run_online(series, cfg)
            mean = score_trace(strip_warmup(records), ncp).mean_winkler
            sweep_rows.append(f"{n}\topi\t{repr(mean)}")
            sweep_rows.append(f"{n}\tcpi\t{repr(cpi_mean)}")
        _write_table(
            exp_dir / "winkler_by_actions.tsv",
            ("n_actions", "arm", "mean_winkler"),
            sweep_rows,
            hash_hex,
        )
    return exp_dir


def run_ablation_no_per(manifest: ExperimentManifest, out_root) -> Path:
    """Run the prioritized arm against its uniform-replay counterpart."""
    import copy as _copy

    ablated = _copy.deepcopy(manifest)
    ablated.arms = ("opi", "opi-no-per")
    ablated.sweep = None
    return run_experiment(ablated, out_root)


def _resolve_out(arg_out: Optional[str]) -> Path:
    if arg_out:
        return Path(arg_out)
    env = os.environ.get(OUTPUT_ROOT_ENV)
    return Path(env) if env else Path("runs")


def _apply_common_overrides(manifest: ExperimentManifest, args) -> ExperimentManifest:
    if args.seed is not None:
        manifest.engine.seed = args.seed
    return manifest


def _cmd_run(args) -> int:
    manifest = _apply_common_overrides(load_manifest(args.config), args)
    exp_dir = run_experiment(manifest, _resolve_out(args.out), arm_filter=args.arm)
    print(exp_dir)
    return 0


def _cmd_sweep(args) -> int:
    manifest = _apply_common_overrides(load_manifest(args.config), args)
    if args.sizes:
        manifest.sweep = tuple(int(n) for n in args.sizes.split(","))
    if not manifest.sweep:
        raise ValueError("no sweep sizes: set experiment.sweep in the manifest or pass --sizes")
    manifest.arms = tuple(a for a in manifest.arms if a in ("opi", "cpi")) or ("opi", "cpi")
    exp_dir = run_experiment(manifest, _resolve_out(args.out))
    print(exp_dir)
    return 0


def _cmd_ablate(args) -> int:
    manifest = _apply_common_overrides(load_manifest(args.config), args)
    exp_dir = run_ablation_no_per(manifest, _resolve_out(args.out))
    print(exp_dir)
    return 0


def _cmd_drift(args) -> int:
    manifest = _apply_common_overrides(load_manifest(args.config), args)
    if manifest.series.drift_step is None:
        raise ValueError("the drift scenario requires series.drift_step in the manifest")
    drift_step = manifest.series.drift_step
    # freeze exactly at the drift point so the frozen arm never sees the new regime
    manifest.engine.train_fraction = drift_step / manifest.series.length
    manifest.arms = ("opi", "frozen")
    manifest.sweep = None
    out_root = _resolve_out(args.out)
    exp_dir = run_experiment(manifest, out_root)

    ncp = 1.0 - manifest.engine.beta
    hash_hex = manifest_hash(manifest)
    rows = []
    for arm in manifest.arms:
        records, _ = read_trace(exp_dir / f"trace_{arm}.csv")
        post = [r for r in strip_warmup(records) if r.step >= drift_step]
        rows.append(_score_row(arm, post, ncp).replace(arm, f"{arm}-post-drift", 1))
    _write_table(exp_dir / "drift_scores.tsv", SCORE_COLUMNS, rows, hash_hex)
    print(exp_dir)
    return 0


def _cmd_score(args) -> int:
    lines = ["\t".join(SCORE_COLUMNS)]
    raw_traces = []
    for path in args.traces:
        records, echo = read_trace(path)
        beta = float(echo.get("engine.beta", "0.1"))
        raw_traces.append(records)
        if not args.include_warmup:
            records = strip_warmup(records)
        report = score_trace(records, 1.0 - beta)
        lines.append(
            "\t".join(
                [
                    Path(path).stem,
                    str(report.n_steps),
                    repr(report.mean_winkler),
                    repr(report.avg_coverage_deviation),
                    repr(report.mean_sharpness),
                ]
            )
        )
    if args.relative:
        if len(raw_traces) != 2:
            raise ValueError("--relative needs exactly two traces (proposed first)")
        # paired step-for-step over the full traces, warm-up included
        rel = report_relative_winkler(raw_traces[0], raw_traces[1])
        lines.append(f"relative_winkler\t-\t{repr(rel)}\t-\t-")
    text = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onlinepi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="manifest file (flat key = value)")
        p.add_argument("--seed", type=int, default=None, help="override engine.seed")
        p.add_argument("--out", default=None, help=f"output root (default ${OUTPUT_ROOT_ENV} or ./runs)")

    p_run = sub.add_parser("run", help="run the manifest's arms")
    add_common(p_run)
    p_run.add_argument("--arm", default=None, choices=VALID_ARMS, help="run a single arm")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep action-space sizes")
    add_common(p_sweep)
    p_sweep.add_argument("--sizes", default=None, help="comma list of 2**n-1 sizes, e.g. 3,7,15")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_ablate = sub.add_parser("ablate", help="prioritized replay on/off comparison")
    add_common(p_ablate)
    p_ablate.set_defaults(func=_cmd_ablate)

    p_drift = sub.add_parser("drift", help="concept-drift scenario (continuing vs frozen)")
    add_common(p_drift)
    p_drift.set_defaults(func=_cmd_drift)

    p_score = sub.add_parser("score", help="recompute score reports from trace files")
    p_score.add_argument("traces", nargs="+", help="trace files")
    p_score.add_argument("--include-warmup", action="store_true")
    p_score.add_argument("--relative", action="store_true", help="also report mean Winkler(b) - mean Winkler(a)")
    p_score.add_argument("--out", default=None)
    p_score.set_defaults(func=_cmd_score)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalFault as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
