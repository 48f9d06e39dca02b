"""Command-line front end.

Subcommands: synth, detect, filter, label, eval, bench. Machine-readable
outputs are CSV (tables) and JSON (reports); human summaries go to
stdout. All randomized behavior is gated on an explicit --seed, so
identical invocations produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .anms import AnmsConfig, run_pipeline
from .config import Config, ConfigError
from .detectors import DETECTOR_NAMES, EvHarrisConfig, make_detector
from .events import StreamError, load_events, write_events
from .ground_truth import (
    EventLabel,
    label_events,
    load_tracks,
    save_tracks,
    write_labels,
)
from .metrics import (
    bench,
    classification_report,
    report_row,
    write_report_csv,
    write_report_json,
)
from .synth import SceneBoundsError, generate, scene_from_file

_FLAG_KEYS = {
    "width": "geometry.width",
    "height": "geometry.height",
    "detector": "detector",
    "k": "anms.k",
    "tau_fallback": "anms.tau_fallback",
    "tau_neighbors": "anms.tau_neighbors",
    "window_radius": "anms.window_radius",
    "sae_policy": "anms.sae_policy",
    "evharris_threshold": "evharris.threshold",
    "interpolation": "tracks.interpolation",
    "t_min": "eval.t_min",
    "t_max": "eval.t_max",
    "repetitions": "bench.repetitions",
}


def _build_config(args: argparse.Namespace) -> Config:
    overrides = {}
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return Config.load(getattr(args, "config", None), overrides)


def _evharris_config(cfg: Config) -> EvHarrisConfig:
    return EvHarrisConfig(
        queue_capacity=cfg.get("evharris.queue_capacity"),
        patch=cfg.get("evharris.patch"),
        gauss_sigma=cfg.get("evharris.gauss_sigma"),
        harris_k=cfg.get("evharris.harris_k"),
        threshold=cfg.get("evharris.threshold"),
    )


def _anms_config(cfg: Config) -> AnmsConfig:
    return AnmsConfig(
        window_radius=cfg.get("anms.window_radius"),
        k=cfg.get("anms.k"),
        tau_fallback=cfg.get("anms.tau_fallback"),
        tau_neighbors=cfg.get("anms.tau_neighbors"),
        sae_policy=cfg.get("anms.sae_policy"),
    )


def _make_detector(cfg: Config):
    return make_detector(cfg.get("detector"), _evharris_config(cfg))


def _maybe_print_config(args: argparse.Namespace, cfg: Config) -> bool:
    if getattr(args, "print_config", False):
        print(cfg.dump())
        return True
    return False


def _rate(n: int, total: int) -> str:
    return f"{n / total:.6f}" if total else "n/a"


def cmd_synth(args: argparse.Namespace) -> int:
    scene = scene_from_file(args.spec)
    events, tracks = generate(scene, args.seed)
    write_events(events, args.out)
    save_tracks(tracks, args.tracks)
    print(
        f"synth: {len(events)} events over {scene.duration:.3f}s, "
        f"{len(tracks.tracks)} corner tracks -> {args.out}, {args.tracks}"
    )
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if _maybe_print_config(args, cfg):
        return 0
    events = load_events(args.in_path)
    result = run_pipeline(
        events,
        _make_detector(cfg),
        _anms_config(cfg),
        width=cfg.get("geometry.width"),
        height=cfg.get("geometry.height"),
        out_of_order=cfg.get("io.out_of_order"),
        anms=False,
    )
    write_events(result.raw_events, args.out)
    print(
        f"detect[{cfg.get('detector')}]: {result.n_raw} corners from {result.n_total} events "
        f"(reduction_rate={_rate(result.n_raw, result.n_total)}, "
        f"skipped={result.n_skipped}) -> {args.out}"
    )
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if _maybe_print_config(args, cfg):
        return 0
    events = load_events(args.in_path)
    result = run_pipeline(
        events,
        _make_detector(cfg),
        _anms_config(cfg),
        width=cfg.get("geometry.width"),
        height=cfg.get("geometry.height"),
        out_of_order=cfg.get("io.out_of_order"),
    )
    write_events(result.kept_events, args.out)
    if args.raw_out:
        write_events(result.raw_events, args.raw_out)
    print(
        f"filter[{cfg.get('detector')}]: kept {result.n_kept} of {result.n_raw} corner events "
        f"from {result.n_total} total (reduction {_rate(result.n_raw, result.n_total)} -> "
        f"{_rate(result.n_kept, result.n_total)}) -> {args.out}"
    )
    return 0


def cmd_label(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if _maybe_print_config(args, cfg):
        return 0
    events = load_events(args.events)
    tracks = load_tracks(args.tracks, cfg.get("tracks.interpolation"))
    labels, distances = label_events(
        events,
        tracks,
        cfg.get("label.positive_radius"),
        cfg.get("label.negative_radius"),
    )
    write_labels(events, labels, distances, args.out)
    n_pos = int((labels == int(EventLabel.POSITIVE)).sum())
    n_neg = int((labels == int(EventLabel.NEGATIVE)).sum())
    n_dis = int((labels == int(EventLabel.DISCARDED)).sum())
    print(
        f"label: {n_pos} positive, {n_neg} negative, {n_dis} discarded -> {args.out}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if _maybe_print_config(args, cfg):
        return 0
    events = load_events(args.events)
    tracks = load_tracks(args.tracks, cfg.get("tracks.interpolation"))
    result = run_pipeline(
        events,
        _make_detector(cfg),
        _anms_config(cfg),
        width=cfg.get("geometry.width"),
        height=cfg.get("geometry.height"),
        out_of_order=cfg.get("io.out_of_order"),
    )
    if args.full_span or not events:
        t_lo, t_hi = 0, events[-1].t if events else 0
    else:
        t_lo = int(round(cfg.get("eval.t_min") * 1e6))
        t_hi = int(round(cfg.get("eval.t_max") * 1e6))
    span_idx = [i for i, e in enumerate(events) if t_lo <= e.t <= t_hi]
    span_events = [events[i] for i in span_idx]
    labels, _ = label_events(
        span_events,
        tracks,
        cfg.get("label.positive_radius"),
        cfg.get("label.negative_radius"),
    )
    mask = result.kept_mask() if args.anms else result.raw_mask()
    kept = mask[span_idx]
    report = classification_report(len(span_events), int(kept.sum()), kept, labels)
    scene = Path(args.events).stem
    row = report_row(scene, cfg.get("detector"), args.anms, report)
    print(f"eval: scene={scene} detector={cfg.get('detector')} anms={row['anms']}")
    for col in ("n_total", "n_corner", "reduction_rate", "tp", "fp", "tn", "fn",
                "tpr", "fpr", "accuracy"):
        value = row[col]
        text = "n/a" if value is None else (f"{value:.6f}" if isinstance(value, float) else value)
        print(f"  {col:<16} {text}")
    if args.out_csv:
        write_report_csv([row], args.out_csv)
    if args.out_json:
        write_report_json([row], args.out_json)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if _maybe_print_config(args, cfg):
        return 0
    events = load_events(args.in_path)
    result = bench(
        events,
        lambda: _make_detector(cfg),
        _anms_config(cfg),
        repetitions=cfg.get("bench.repetitions"),
        min_events=cfg.get("bench.min_events"),
        width=cfg.get("geometry.width"),
        height=cfg.get("geometry.height"),
    )
    print(
        f"bench[{cfg.get('detector')}]: {result.n_events} events x {result.repetitions} reps\n"
        f"  without anms: median {result.without_anms.median_ns:.0f} ns/event "
        f"(mean {result.without_anms.mean_ns:.0f})\n"
        f"  with anms:    median {result.with_anms.median_ns:.0f} ns/event "
        f"(mean {result.with_anms.mean_ns:.0f})\n"
        f"  increase rate: {result.increase_rate * 100.0:.2f}%"
        + ("  [low-confidence: short stream]" if result.low_confidence else "")
    )
    if args.out_json:
        write_report_json(
            [
                {
                    "detector": cfg.get("detector"),
                    "n_events": result.n_events,
                    "repetitions": result.repetitions,
                    "ns_without_median": result.without_anms.median_ns,
                    "ns_without_mean": result.without_anms.mean_ns,
                    "ns_with_median": result.with_anms.median_ns,
                    "ns_with_mean": result.with_anms.mean_ns,
                    "increase_rate": result.increase_rate,
                    "low_confidence": result.low_confidence,
                }
            ],
            args.out_json,
        )
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--print-config", action="store_true",
                   help="print the effective configuration and exit")
    p.add_argument("--width", type=int, help="sensor width (pixels)")
    p.add_argument("--height", type=int, help="sensor height (pixels)")


def _add_detector(p: argparse.ArgumentParser) -> None:
    p.add_argument("--detector", choices=DETECTOR_NAMES, help="corner detector")
    p.add_argument("--evharris-threshold", type=float, dest="evharris_threshold",
                   help="evHarris acceptance threshold")


def _add_anms(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=float, help="decay multiplier")
    p.add_argument("--tau-fallback", type=float, dest="tau_fallback",
                   help="decay horizon (s) for empty windows")
    p.add_argument("--tau-neighbors", type=int, dest="tau_neighbors",
                   help="recent timestamps averaged into tau")
    p.add_argument("--window-radius", type=int, dest="window_radius",
                   help="suppression window radius (pixels)")
    p.add_argument("--sae-policy", choices=("all", "corners"), dest="sae_policy",
                   help="which events refresh the filter's time surface")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evnms",
        description="Asynchronous corner detection and non-maximum suppression "
                    "for event-camera streams.",
    )
    parser.add_argument("--version", action="version", version=f"evnms {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--spec", required=True, help="scene description file")
    p.add_argument("--seed", required=True, type=int, help="noise RNG seed")
    p.add_argument("--out", required=True, help="output events.txt")
    p.add_argument("--tracks", required=True, help="output corner tracks CSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="run a detector, write the raw corner stream")
    _add_common(p)
    _add_detector(p)
    p.add_argument("--in", required=True, dest="in_path", help="input events.txt")
    p.add_argument("--out", required=True, help="output corner stream")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("filter", help="run detector + suppression filter")
    _add_common(p)
    _add_detector(p)
    _add_anms(p)
    p.add_argument("--in", required=True, dest="in_path", help="input events.txt")
    p.add_argument("--out", required=True, help="filtered corner stream")
    p.add_argument("--raw-out", dest="raw_out", help="also write the unfiltered corner stream")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("label", help="label events against corner tracks")
    _add_common(p)
    p.add_argument("--events", required=True, help="input events.txt")
    p.add_argument("--tracks", required=True, help="corner tracks CSV")
    p.add_argument("--out", required=True, help="output labels CSV")
    p.add_argument("--interpolation", choices=("linear", "cubic"),
                   help="track interpolation")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("eval", help="evaluate a detector against labeled tracks")
    _add_common(p)
    _add_detector(p)
    _add_anms(p)
    p.add_argument("--events", required=True, help="input events.txt")
    p.add_argument("--tracks", required=True, help="corner tracks CSV")
    p.add_argument("--anms", action="store_true", help="evaluate the filtered stream")
    p.add_argument("--t-min", type=float, dest="t_min", help="evaluation span start (s)")
    p.add_argument("--t-max", type=float, dest="t_max", help="evaluation span end (s)")
    p.add_argument("--full-span", action="store_true", dest="full_span",
                   help="evaluate the whole stream")
    p.add_argument("--interpolation", choices=("linear", "cubic"),
                   help="track interpolation")
    p.add_argument("--out-csv", dest="out_csv", help="write the report row as CSV")
    p.add_argument("--out-json", dest="out_json", help="write the report row as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-event timing with and without the filter")
    _add_common(p)
    _add_detector(p)
    _add_anms(p)
    p.add_argument("--in", required=True, dest="in_path", help="input events.txt")
    p.add_argument("--repetitions", type=int, help="timed repetitions per arm")
    p.add_argument("--out-json", dest="out_json", help="write timing results as JSON")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    stage = args.command
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"evnms {stage}: configuration error: {err}", file=sys.stderr)
        return 2
    except SceneBoundsError as err:
        print(f"evnms {stage}: scene error: {err}", file=sys.stderr)
        return 1
    except StreamError as err:
        print(f"evnms {stage}: stream error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"evnms {stage}: i/o error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"evnms {stage}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
