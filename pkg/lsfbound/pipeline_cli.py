"""Command line for the LSF rate-bound experiment.

    python -m lsfbound extract  speech/*.wav --out work
    python -m lsfbound fit      work/deltas.csv --components 64,128,256 --out work
    python -m lsfbound bound    work/dmm_I*.json --out work
    python -m lsfbound lsd-eval pairs.csv --order 16 --out work
"""

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import structlog
from joblib import Parallel, delayed
from pydantic import ValidationError

from . import __version__
from .config import (
    LSD_POLY_COEFFICIENTS,
    BoundConfig,
    EmConfig,
    FrameConfig,
    LsdPolynomial,
    RateGrid,
    SpectrumGrid,
)
from .dmm_em import fit_em, load_model, mixture_entropy_terms
from .errors import (
    DomainError,
    EmptyOutputError,
    FormatError,
    InputError,
    InstabilityError,
    LsfBoundError,
    OrderError,
)
from .formats import (
    read_vector_csv,
    write_curve_csv,
    write_lpc_dump,
    write_lsd_values,
    write_report,
    write_vector_csv,
)
from .log import configure_logging
from .lsf_codec import is_minimum_phase, log_spectral_distortion, lpc_to_lsf, lsd_statistics, lsf_to_delta
from .manifest import RunManifest, digests, utc_now
from .rate_bound import lsd_rate_curve, max_curve_gap, min_transparent_rate
from .signal_frontend import analyze_signal, read_wav

logger = structlog.get_logger(__name__)

COEFFICIENT_MODES = {"paper": "paper_formula", "sphere": "sphere_bound"}
TRANSFORM_MODES = {"isotropic": "isotropic_cell", "jacobian": "jacobian_only"}
DROP_REASONS = ("silent", "degenerate", "unstable", "invalid")


@dataclass
class RunResult:
    """What a command read, wrote and decided; becomes the run manifest."""

    inputs: List[Path]
    outputs: List[Path]
    config: Dict[str, Any]
    summary: Dict[str, Any] = field(default_factory=dict)


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _check_readable(paths: Sequence[Path]) -> None:
    for path in paths:
        if not path.is_file():
            raise InputError(path, "no such file")


# --- extract ---------------------------------------------------------------


def _deltas_from_wav(path: Path, cfg: FrameConfig):
    counts = dict.fromkeys(DROP_REASONS, 0)
    try:
        signal = read_wav(path, downmix=cfg.downmix)
        frames, dropped = analyze_signal(signal, cfg)
    except EmptyOutputError as e:
        logger.warning("no frames in file", path=str(path), reason=str(e))
        return np.empty((0, cfg.lpc_order)), counts, []
    counts.update(dropped)

    deltas, kept = [], []
    for frame in frames:
        try:
            deltas.append(lsf_to_delta(lpc_to_lsf(frame)).values)
            kept.append(frame)
        except InstabilityError:
            counts["unstable"] += 1
        except DomainError:
            counts["invalid"] += 1
    return np.array(deltas).reshape(-1, cfg.lpc_order), counts, kept


def _deltas_from_lsf_csv(path: Path, order: Optional[int]):
    counts = dict.fromkeys(DROP_REASONS, 0)
    rows = read_vector_csv(path, expected_columns=order)
    deltas = []
    for row in rows:
        try:
            deltas.append(lsf_to_delta(row).values)
        except DomainError:
            counts["invalid"] += 1
    return np.array(deltas).reshape(-1, rows.shape[1]), counts, []


def _extract_one(path: Path, cfg: FrameConfig):
    suffix = path.suffix.lower()
    if suffix == ".wav":
        return _deltas_from_wav(path, cfg)
    if suffix == ".csv":
        # an explicit order is checked against the CSV width, otherwise inferred
        explicit = cfg.lpc_order if "lpc_order" in cfg.model_fields_set else None
        return _deltas_from_lsf_csv(path, explicit)
    raise FormatError(f"{path}: expected a .wav or LSF .csv file")


def cmd_extract(
    inputs: Sequence,
    cfg: FrameConfig,
    out_dir,
    dump_lpc: bool = False,
    n_jobs: int = 1,
) -> RunResult:
    """Delta-LSF vectors from WAV files or LSF CSV files into deltas.csv."""
    paths = sorted((Path(p) for p in inputs), key=str)
    _check_readable(paths)
    if cfg.lpc_order % 2 and any(p.suffix.lower() == ".wav" for p in paths):
        raise OrderError(f"LSF extraction needs an even LPC order, got {cfg.lpc_order}")
    out_dir = Path(out_dir)

    results = Parallel(n_jobs=n_jobs)(delayed(_extract_one)(p, cfg) for p in paths)

    widths = {deltas.shape[1] for deltas, _, _ in results}
    if len(widths) > 1:
        raise FormatError(f"inputs disagree on vector dimension: {sorted(widths)}")
    totals = dict.fromkeys(DROP_REASONS, 0)
    for _, counts, _ in results:
        for reason, n in counts.items():
            totals[reason] += n
    deltas = np.vstack([d for d, _, _ in results])
    if len(deltas) == 0:
        raise EmptyOutputError(f"no delta-LSF vectors survived from {len(paths)} inputs (dropped: {totals})")

    outputs = [write_vector_csv(out_dir / "deltas.csv", deltas)]
    if dump_lpc:
        for i, (path, (_, _, frames)) in enumerate(zip(paths, results)):
            if frames:
                outputs.append(write_lpc_dump(out_dir / f"lpc_{i:03d}_{path.stem}.csv", frames))

    logger.info("extracted delta-LSF vectors", vectors=len(deltas), files=len(paths), **totals)
    print(f"vectors: {len(deltas)}  dropped: " + ", ".join(f"{k}={v}" for k, v in totals.items()))
    return RunResult(
        inputs=paths,
        outputs=outputs,
        config=cfg.model_dump(),
        summary={"vectors": len(deltas), "dropped": totals},
    )


# --- fit -------------------------------------------------------------------


def _read_deltas(path: Path, order: Optional[int]) -> np.ndarray:
    data = read_vector_csv(path, expected_columns=order)
    bad = np.flatnonzero(np.any(data <= 0.0, axis=1) | ~(data.sum(axis=1) < 1.0))
    if len(bad):
        raise DomainError(f"{path}: line {bad[0] + 1} is not a point of the open simplex")
    return data


def cmd_fit(
    delta_csv,
    components: Sequence[int],
    out_dir,
    max_iterations: int = 200,
    rel_tol: float = 1e-6,
    seed: int = 0,
    n_jobs: int = 1,
    order: Optional[int] = None,
) -> RunResult:
    """One Dirichlet mixture per requested component count, saved as dmm_I<I>.json."""
    delta_csv = Path(delta_csv)
    _check_readable([delta_csv])
    data = _read_deltas(delta_csv, order)
    out_dir = Path(out_dir)

    outputs, logliks, configs = [], {}, []
    for num_components in components:
        cfg = EmConfig(
            num_components=num_components,
            max_iterations=max_iterations,
            rel_tol=rel_tol,
            seed=seed,
            n_jobs=n_jobs,
        )
        model, history = fit_em(data, cfg)
        outputs.append(model.save(out_dir / f"dmm_I{num_components}.json"))
        logliks[num_components] = history[-1]
        configs.append(cfg.model_dump())
        print(f"I={num_components}  loglik={history[-1]:.6f}  iterations={len(history) - 1}")

    return RunResult(
        inputs=[delta_csv],
        outputs=outputs,
        config={"em": configs},
        summary={"loglik": {str(k): v for k, v in logliks.items()}, "vectors": len(data)},
    )


# --- bound -----------------------------------------------------------------


def _curve_names(paths: Sequence[Path]) -> List[str]:
    stems = [p.stem for p in paths]
    if len(set(stems)) == len(stems):
        return [f"curve_{s}.csv" for s in stems]
    return [f"curve_{i:02d}_{s}.csv" for i, s in enumerate(stems)]


def cmd_bound(model_paths: Sequence, cfg: BoundConfig, poly: LsdPolynomial, out_dir) -> RunResult:
    """LSD-rate curve and minimum transparent rate per model, with a comparison report."""
    paths = [Path(p) for p in model_paths]
    _check_readable(paths)
    models = [load_model(p) for p in paths]
    dims = {m.dim for m in models}
    if len(dims) > 1:
        raise DomainError(f"models disagree on dimension: K in {sorted(dims)}")
    out_dir = Path(out_dir)

    # consecutive-order comparisons follow increasing I
    order = sorted(range(len(models)), key=lambda i: (models[i].num_components, str(paths[i])))
    paths = [paths[i] for i in order]
    models = [models[i] for i in order]

    outputs, curves, rates = [], [], []
    for path, name, model in zip(paths, _curve_names(paths), models):
        curve = lsd_rate_curve(model, cfg, poly)
        outputs.append(write_curve_csv(out_dir / name, curve))
        curves.append(curve)
        rates.append(min_transparent_rate(model, cfg, poly))

    grid = cfg.rate_grid
    lines = [
        f"lsfbound {__version__} bound report",
        f"coefficient_mode: {cfg.coefficient_mode}",
        f"transform_mode: {cfg.transform_mode}",
        f"lsd_target_db: {_fmt(cfg.lsd_target_db)}",
        f"poly_coefficients: {','.join(_fmt(c) for c in poly.coefficients)}",
        f"poly_scale_exponent: {poly.scale_exponent}",
        f"rate_grid: {_fmt(grid.min)} to {_fmt(grid.max)} step {_fmt(grid.step)} bits/vector",
        "",
        "model,I,K,mean_entropy_bits,min_rate_bits,min_rate_ceil",
    ]
    for path, model, rate in zip(paths, models, rates):
        _, mean_entropy = mixture_entropy_terms(model)
        lines.append(
            f"{path.name},{model.num_components},{model.dim},{_fmt(mean_entropy)},"
            f"{_fmt(rate.rate_bits)},{rate.rate_ceil}"
        )

    gaps = {}
    if len(models) > 1:
        lines += ["", "consecutive_models,max_lsd_gap_db"]
        for i in range(len(models) - 1):
            gap = max_curve_gap(curves[i], curves[i + 1])
            label = f"{paths[i].name} vs {paths[i + 1].name}"
            gaps[label] = gap
            lines.append(f"{label},{_fmt(gap)}")

    if cfg.reference_rate_bits is not None:
        lines += ["", f"reference_rate_bits: {_fmt(cfg.reference_rate_bits)}", "model,gap_bits"]
        for path, rate in zip(paths, rates):
            lines.append(f"{path.name},{_fmt(cfg.reference_rate_bits - rate.rate_ceil)}")

    outputs.append(write_report(out_dir / "bound_report.txt", lines))
    for path, rate in zip(paths, rates):
        print(f"{path.name}: R* = {rate.rate_bits:.4f} bits/vector (ceil {rate.rate_ceil})")

    return RunResult(
        inputs=paths,
        outputs=outputs,
        config={"bound": cfg.model_dump(), "poly": poly.model_dump()},
        summary={
            "min_rate_bits": {p.name: r.rate_bits for p, r in zip(paths, rates)},
            "max_lsd_gap_db": gaps,
        },
    )


# --- lsd-eval --------------------------------------------------------------


def cmd_lsd_eval(pairs_csv, grid: SpectrumGrid, out_dir, order: Optional[int] = None) -> RunResult:
    """Per-pair LSD of (original, quantized) LPC rows and the transparency summary."""
    pairs_csv = Path(pairs_csv)
    _check_readable([pairs_csv])
    rows = read_vector_csv(pairs_csv, expected_columns=None if order is None else 2 * order)
    if rows.shape[1] % 2:
        raise FormatError(f"{pairs_csv}: rows need 2K coefficients, found {rows.shape[1]}")
    dim = rows.shape[1] // 2
    out_dir = Path(out_dir)

    values: List[Optional[float]] = []
    for row in rows:
        original, quantized = row[:dim], row[dim:]
        if is_minimum_phase(original) and is_minimum_phase(quantized):
            values.append(log_spectral_distortion(original, quantized, grid))
        else:
            values.append(None)
    unstable = sum(v is None for v in values)
    valid = [v for v in values if v is not None]
    if not valid:
        raise EmptyOutputError(f"{pairs_csv}: every pair has an unstable filter")
    if unstable:
        logger.warning("excluded pairs with unstable filters", count=unstable, pairs=len(values))

    stats = lsd_statistics(valid)
    lines = [
        f"pairs: {len(values)}",
        f"evaluated: {stats.count}",
        f"unstable: {unstable}",
        f"order: {dim}",
        f"grid_points: {grid.num_points}",
        f"mean_lsd_db: {_fmt(stats.mean_db)}",
        f"pct_outliers_2_4_db: {_fmt(stats.pct_outliers_2_4)}",
        f"pct_outliers_over_4_db: {_fmt(stats.pct_outliers_over_4)}",
        f"transparent: {'yes' if stats.transparent else 'no'}",
    ]
    outputs = [
        write_lsd_values(out_dir / "lsd_values.csv", values),
        write_report(out_dir / "lsd_report.txt", lines),
    ]
    print(f"mean LSD {stats.mean_db:.4f} dB over {stats.count} pairs, transparent: {stats.transparent}")
    return RunResult(
        inputs=[pairs_csv],
        outputs=outputs,
        config={"grid": grid.model_dump(), "order": dim},
        summary={"mean_lsd_db": stats.mean_db, "transparent": stats.transparent, "unstable": unstable},
    )


# --- entry point -----------------------------------------------------------


def _int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    shared.add_argument("--order", type=int, default=None, help="LPC order K (default 16 for audio)")
    shared.add_argument("--out", type=Path, default=Path("."), help="output directory")
    shared.add_argument("--jobs", type=int, default=1, help="joblib worker count")
    shared.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="lsfbound", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    extract = commands.add_parser("extract", parents=[shared], help="WAV or LSF CSV -> delta-LSF CSV")
    extract.add_argument("inputs", nargs="+", type=Path)
    extract.add_argument("--downmix", action="store_true", help="average multichannel audio")
    extract.add_argument("--dump-lpc", action="store_true", help="also write the per-file LPC frames")
    extract.add_argument("--window-ms", type=float, default=25.0)
    extract.add_argument("--step-ms", type=float, default=20.0)
    extract.add_argument("--silence-db", type=float, default=-60.0)

    fit = commands.add_parser("fit", parents=[shared], help="fit Dirichlet mixtures by EM")
    fit.add_argument("delta_csv", type=Path)
    fit.add_argument("--components", type=_int_list, default=[64, 128, 256])
    fit.add_argument("--max-iters", type=int, default=200)
    fit.add_argument("--tol", type=float, default=1e-6)

    bound = commands.add_parser("bound", parents=[shared], help="LSD-rate curves and minimum transparent rate")
    bound.add_argument("models", nargs="+", type=Path)
    bound.add_argument("--coeff-mode", choices=sorted(COEFFICIENT_MODES), default="paper")
    bound.add_argument("--transform-mode", choices=sorted(TRANSFORM_MODES), default="isotropic")
    bound.add_argument("--lsd-target", type=float, default=1.0)
    bound.add_argument("--rate-min", type=float, default=16.0)
    bound.add_argument("--rate-max", type=float, default=56.0)
    bound.add_argument("--rate-step", type=float, default=0.25)
    bound.add_argument("--poly-scale-exp", type=int, default=5)
    bound.add_argument("--poly", type=_float_list, default=list(LSD_POLY_COEFFICIENTS), help="c0,c1,c2,c3")
    bound.add_argument("--reference-rate", type=float, default=None, help="earlier estimate to compare against")

    lsd_eval = commands.add_parser("lsd-eval", parents=[shared], help="LSD between LPC filter pairs")
    lsd_eval.add_argument("pairs_csv", type=Path)
    lsd_eval.add_argument("--sample-rate", type=int, default=16000)
    lsd_eval.add_argument("--grid-points", type=int, default=512)
    return parser


def _dispatch(args) -> RunResult:
    if args.command == "extract":
        overrides = {} if args.order is None else {"lpc_order": args.order}
        cfg = FrameConfig(
            window_ms=args.window_ms,
            step_ms=args.step_ms,
            silence_threshold_db=args.silence_db,
            downmix=args.downmix,
            **overrides,
        )
        return cmd_extract(args.inputs, cfg, args.out, dump_lpc=args.dump_lpc, n_jobs=args.jobs)
    if args.command == "fit":
        return cmd_fit(
            args.delta_csv,
            args.components,
            args.out,
            max_iterations=args.max_iters,
            rel_tol=args.tol,
            seed=args.seed,
            n_jobs=args.jobs,
            order=args.order,
        )
    if args.command == "bound":
        if len(args.poly) != 4:
            raise DomainError(f"--poly needs four coefficients c0,c1,c2,c3, got {len(args.poly)}")
        cfg = BoundConfig(
            coefficient_mode=COEFFICIENT_MODES[args.coeff_mode],
            transform_mode=TRANSFORM_MODES[args.transform_mode],
            lsd_target_db=args.lsd_target,
            rate_grid=RateGrid(min=args.rate_min, max=args.rate_max, step=args.rate_step),
            reference_rate_bits=args.reference_rate,
        )
        poly = LsdPolynomial(coefficients=tuple(args.poly), scale_exponent=args.poly_scale_exp)
        return cmd_bound(args.models, cfg, poly, args.out)
    grid = SpectrumGrid(num_points=args.grid_points, sample_rate_hz=args.sample_rate)
    return cmd_lsd_eval(args.pairs_csv, grid, args.out, order=args.order)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    started_at = utc_now()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        result = _dispatch(args)
        RunManifest(
            command=args.command,
            config=result.config,
            inputs=digests(result.inputs),
            outputs=digests(result.outputs),
            seed=args.seed,
            summary=result.summary,
            started_at=started_at,
            finished_at=utc_now(),
        ).write(args.out)
    except LsfBoundError as e:
        logger.error("command failed", command=args.command, error=type(e).__name__, detail=str(e))
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        logger.error("invalid configuration", command=args.command, errors=e.error_count())
        print(f"error: invalid configuration: {e.errors()[0]['msg']}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0
