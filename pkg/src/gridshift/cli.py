"""``gridshift`` command-line interface.

Subcommands: cluster, tune, segment, track, bench, theory.  Every command
writes its artifact to ``--output`` (or stdout where that makes sense).
``--no-timing`` replaces wall-clock fields with null so that repeated runs
are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import statistics
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import baselines, engine, metrics, segmentation, theory, tracker
from .datasets import bundled_path, gaussian_mixture, minmax
from .grid import GridError, InvalidInputError
from .imageio import (
    ImageDecodeError,
    draw_rectangle,
    load_image,
    save_labels_csv,
    save_pgm,
    save_png,
    save_ppm,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_CONVERGENCE = 5
EXIT_IO = 6

ALGORITHMS = ("gridshift", "mspp", "vanilla_ms")
BUILTINS = {"iris": "iris.csv", "prnn": "prnn_synth.csv"}


class CsvParseError(ValueError):
    """Malformed CSV; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class NonNumericFeatureError(InvalidInputError):
    pass


class NotConvergedError(RuntimeError):
    pass


# ---------------------------------------------------------------- CSV input

def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_table(text: str, label_col: str | None = None):
    """Parse CSV text into ``(X, labels, feature_names)``.

    A first row with any non-numeric field is taken as a header.  The label
    column may be given by 0-based index or by header name.
    """
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(io.StringIO(text))) if r and any(f.strip() for f in r)]
    if not rows:
        raise CsvParseError("no data rows")
    header = None
    first_line, first = rows[0]
    if not all(_is_number(f.strip()) for f in first):
        header = [f.strip() for f in first]
        rows = rows[1:]
        if not rows:
            raise CsvParseError("header but no data rows", first_line)
    width = len(header) if header is not None else len(rows[0][1])
    for line, r in rows:
        if len(r) != width:
            raise CsvParseError(f"expected {width} fields, found {len(r)}", line)

    lab_idx = None
    if label_col is not None:
        if label_col.lstrip("-").isdigit():
            lab_idx = int(label_col)
            if lab_idx < 0:
                lab_idx += width
        elif header is not None and label_col in header:
            lab_idx = header.index(label_col)
        else:
            raise InvalidInputError(f"label column {label_col!r} not found")
        if not 0 <= lab_idx < width:
            raise InvalidInputError(f"label column index {label_col} out of range for {width} columns")

    feat_idx = [j for j in range(width) if j != lab_idx]
    if not feat_idx:
        raise InvalidInputError("no feature columns left")
    X = np.empty((len(rows), len(feat_idx)))
    for i, (line, r) in enumerate(rows):
        for k, j in enumerate(feat_idx):
            try:
                X[i, k] = float(r[j])
            except ValueError:
                col = header[j] if header is not None else str(j)
                raise NonNumericFeatureError(
                    f"line {line}: non-numeric value {r[j]!r} in feature column {col}"
                ) from None
    labels = None
    if lab_idx is not None:
        raw = [r[lab_idx].strip() for _, r in rows]
        _, labels = np.unique(raw, return_inverse=True)
        labels = labels.reshape(-1).astype(np.int64)
    names = [header[j] if header is not None else f"x{j}" for j in feat_idx]
    return X, labels, names


def _load_csv_input(args):
    if args.builtin is not None:
        path = bundled_path(BUILTINS[args.builtin])
        text = path.read_text(encoding="utf-8")
        # Bundled files keep the class in their last column.
        label_col = args.label_col if args.label_col is not None else "-1"
    else:
        text = Path(args.csv).read_text(encoding="utf-8")
        label_col = args.label_col
    X, labels, _ = read_table(text, label_col)
    if not args.no_normalize:
        X = minmax(X)
    return X, labels


# ---------------------------------------------------------------- helpers

def _emit(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    Path(path).write_text(text, encoding="utf-8")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _ms(args, value: float):
    return None if args.no_timing else round(value, 3)


def _info(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def _timed_run(X, h, max_iterations):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", engine.ConvergenceWarning)
        t0 = time.perf_counter()
        lab = engine.run(X, engine.EngineConfig(h=h, max_iterations=max_iterations))
        return lab, (time.perf_counter() - t0) * 1000.0


def _parse_grid(text: str | None):
    if text is None:
        return metrics.DEFAULT_H_GRID
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError(f"bad bandwidth grid {text!r}") from None


def _tune(args, X):
    def clusterer(data, h):
        lab, _ = _timed_run(data, h, args.max_iterations)
        return lab.labels

    return metrics.tune_bandwidth(X, clusterer, _parse_grid(args.h_grid),
                                  subsample=args.subsample, seed=args.seed)


def _sweep_json(res: metrics.BandwidthSweepResult):
    return {
        "best_h": res.best_h,
        "entries": [{"h": e.h, "silhouette": e.score, "n_clusters": e.n_clusters} for e in res.entries],
    }


# ---------------------------------------------------------------- commands

def cmd_cluster(args) -> int:
    X, truth = _load_csv_input(args)
    if (args.h is None) == (not args.tune):
        raise InvalidInputError("give exactly one of --h or --tune")
    out = {}
    tune_ms = 0.0
    if args.tune:
        t0 = time.perf_counter()
        sweep = _tune(args, X)
        tune_ms = (time.perf_counter() - t0) * 1000.0
        h = sweep.best_h
    else:
        h = args.h
    lab, ms = _timed_run(X, h, args.max_iterations)
    out.update(
        h=h,
        n_clusters=lab.n_clusters,
        labels=lab.labels.tolist(),
        centroids=lab.centroids.tolist(),
        iterations=lab.iterations,
        converged=lab.converged,
        runtime_ms=_ms(args, ms),
    )
    if args.tune:
        out["tuning"] = _sweep_json(sweep)
        out["tuning_runtime_ms"] = _ms(args, tune_ms)
    if truth is not None:
        out["ari"] = metrics.ari(truth, lab.labels) if len(truth) > 1 else None
        out["ami"] = metrics.ami(truth, lab.labels) if len(truth) > 1 else None
        out["fm"] = metrics.fowlkes_mallows(truth, lab.labels) if len(truth) > 1 else None
    _emit(_dumps(out), args.output)
    if not lab.converged:
        raise NotConvergedError(f"no convergence within {args.max_iterations} iterations")
    return EXIT_OK


def cmd_tune(args) -> int:
    X, _ = _load_csv_input(args)
    _emit(_dumps(_sweep_json(_tune(args, X))), args.output)
    return EXIT_OK


def _save_render(img, path: Path) -> None:
    ext = path.suffix.lower()
    if ext == ".png":
        save_png(img, path)
    elif ext == ".ppm":
        save_ppm(img, path)
    else:
        raise InvalidInputError(f"render must be .png or .ppm, got {path.name}")


def cmd_segment(args) -> int:
    if args.output is None:
        raise InvalidInputError("segment needs --output for the rendered image")
    img = load_image(args.image)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", engine.ConvergenceWarning)
        res = segmentation.segment(img, args.h, args.mode, args.max_iterations)
    out = Path(args.output)
    labels_path = Path(args.labels) if args.labels else out.with_name(out.stem + "_labels.pgm")
    sidecar = Path(args.sidecar) if args.sidecar else out.with_suffix(".json")
    _save_render(segmentation.render(res, img), out)
    if labels_path.suffix.lower() == ".csv":
        save_labels_csv(res.label_map, labels_path)
    else:
        save_pgm(res.label_map, labels_path)
    meta = {"h": args.h, "mode": args.mode, "n_segments": res.n_segments,
            "runtime_ms": _ms(args, res.runtime_ms)}
    sidecar.write_text(_dumps(meta), encoding="utf-8")
    _info(args, f"{res.n_segments} segments -> {out}, {labels_path}, {sidecar}")
    if not res.labeling.converged:
        raise NotConvergedError(f"no convergence within {args.max_iterations} iterations")
    return EXIT_OK


def _parse_pair(text: str, what: str):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise InvalidInputError(f"{what} must be 'x,y', got {text!r}") from None
    return a, b


def _parse_selection(text: str):
    if text.startswith("top_"):
        return text
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise InvalidInputError(f"bad --select value {text!r}") from None


def _frame_files(directory: Path):
    if not directory.is_dir():
        raise InvalidInputError(f"{directory} is not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in (".png", ".ppm"))
    if len(files) < 2:
        raise InvalidInputError(f"{directory} holds {len(files)} frames; at least 2 are needed")
    return files


def cmd_track(args) -> int:
    files = _frame_files(Path(args.frames))
    frames = [load_image(p) for p in files]
    cx, cy = _parse_pair(args.center, "--center")
    window = tracker.TrackWindow(cx, cy, args.length, args.width)
    cfg = tracker.TrackerConfig(h=args.h, f=args.f, eta=args.eta,
                                selection=_parse_selection(args.select),
                                max_inner_iters=args.max_inner_iters)
    results = tracker.track_sequence(frames, window, cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "cx", "cy", "l", "w", "lost"])
    for t, r in enumerate(results, start=1):
        win = r.window
        w.writerow([t, f"{win.cx:.6f}", f"{win.cy:.6f}", f"{win.length:.6f}", f"{win.width:.6f}", int(r.lost)])
    _emit(buf.getvalue(), args.output)
    if args.annotate:
        adir = Path(args.annotate)
        adir.mkdir(parents=True, exist_ok=True)
        for t, (path, r) in enumerate(zip(files[1:], results), start=1):
            b = r.window.pixel_bounds(frames[t].shape)
            img = frames[t] if b is None else draw_rectangle(frames[t], b[0], b[2], b[1], b[3])
            save_png(img, adir / f"{path.stem}_track.png")
    return EXIT_OK


def _bench_algo(name, X, h, max_iterations):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", engine.ConvergenceWarning)
        t0 = time.perf_counter()
        if name == "gridshift":
            lab = engine.run(X, engine.EngineConfig(h=h, max_iterations=max_iterations))
        elif name == "mspp":
            lab = baselines.mspp_run(X, h)
        else:
            lab = baselines.vanilla_ms_run(X, h)
        return lab, (time.perf_counter() - t0) * 1000.0


def run_bench(X, h: float, algos, repeats: int = 1, truth=None,
              max_iterations: int = 1000, timing: bool = True) -> dict:
    """Time each algorithm ``repeats`` times; returns the report as a dict."""
    if repeats < 1:
        raise InvalidInputError("--repeats must be >= 1")
    unknown = [a for a in algos if a not in ALGORITHMS]
    if unknown:
        raise InvalidInputError(f"unknown algorithm(s): {', '.join(unknown)}")
    if "vanilla_ms" in algos and len(X) > baselines.VANILLA_MAX_POINTS:
        raise baselines.OracleScaleError(
            f"vanilla_ms is O(n^2) per iteration and capped at {baselines.VANILLA_MAX_POINTS} "
            f"points; this input has {len(X)}. Drop it from --algos or use a smaller input."
        )
    report = {"n": int(len(X)), "d": int(X.shape[1]), "h": h, "repeats": repeats, "algorithms": {}}
    medians = {}
    for name in algos:
        samples = []
        for _ in range(repeats):
            lab, ms = _bench_algo(name, X, h, max_iterations)
            samples.append(ms)
        medians[name] = statistics.median(samples)
        entry = {
            "times_ms": [round(s, 3) if timing else None for s in samples],
            "median_ms": round(medians[name], 3) if timing else None,
            "iterations": lab.iterations,
            "n_clusters": lab.n_clusters,
            "converged": lab.converged,
        }
        if name == "gridshift":
            entry["m_avg"] = lab.m_avg
            entry["m_avg_over_n"] = lab.m_avg / len(X)
        if truth is not None and len(X) > 1:
            entry["ari"] = metrics.ari(truth, lab.labels)
        report["algorithms"][name] = entry
    if "gridshift" in medians:
        base = medians["gridshift"]
        report["speedup_vs_gridshift"] = {
            name: (round(medians[name] / base, 3) if timing and base > 0 else None)
            for name in medians if name != "gridshift"
        }
    return report


def cmd_bench(args) -> int:
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    if args.csv is not None:
        X, truth, _ = read_table(Path(args.csv).read_text(encoding="utf-8"), args.label_col)
        if not args.no_normalize:
            X = minmax(X)
    else:
        X, truth = gaussian_mixture(args.n, args.d, args.k, args.std, args.sep, args.seed)
    report = run_bench(X, args.h, algos, args.repeats, truth, args.max_iterations,
                       timing=not args.no_timing)
    report["seed"] = args.seed
    _emit(_dumps(report), args.output)
    return EXIT_OK


def cmd_theory(args) -> int:
    s = [float(v) for v in args.s.split(",")]
    if len(s) not in (1, args.d):
        raise InvalidInputError(f"--s needs 1 or {args.d} values")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", engine.ConvergenceWarning)
        rec = theory.gaussian_experiment(args.n, args.d, s if len(s) > 1 else s[0], args.h, seed=args.seed)
    _emit(rec.to_csv(), args.output)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _common(sub: bool) -> argparse.ArgumentParser:
    # Subparser copies default to SUPPRESS so they only override when given.
    d = argparse.SUPPRESS if sub else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS if sub else 0)
    p.add_argument("--output", "-o", default=d)
    p.add_argument("--quiet", "-q", action="store_true", default=argparse.SUPPRESS if sub else False)
    p.add_argument("--no-timing", action="store_true", default=argparse.SUPPRESS if sub else False,
                   help="write null instead of wall-clock times")
    return p


def _add_csv_input(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("csv", nargs="?", help="input CSV file")
    src.add_argument("--builtin", choices=sorted(BUILTINS), help="use a bundled dataset")
    p.add_argument("--label-col", help="ground-truth column, by 0-based index or header name")
    p.add_argument("--no-normalize", action="store_true", help="skip min-max scaling of features")
    p.add_argument("--max-iterations", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    common = _common(sub=True)
    parser = argparse.ArgumentParser(prog="gridshift", parents=[_common(sub=False)],
                                     description="Grid-based mean shift clustering tools.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("cluster", parents=[common], help="cluster a CSV file")
    _add_csv_input(p)
    p.add_argument("--h", type=float)
    p.add_argument("--tune", action="store_true", help="pick h by silhouette score")
    p.add_argument("--h-grid", help="comma-separated bandwidths for --tune")
    p.add_argument("--subsample", type=int, help="silhouette subsample size for --tune")
    p.set_defaults(func=cmd_cluster)

    p = subs.add_parser("tune", parents=[common], help="silhouette sweep over bandwidths")
    _add_csv_input(p)
    p.add_argument("--h-grid")
    p.add_argument("--subsample", type=int)
    p.set_defaults(func=cmd_tune)

    p = subs.add_parser("segment", parents=[common], help="segment a PNG/PPM image")
    p.add_argument("image")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--mode", choices=segmentation.MODES, default="rgb")
    p.add_argument("--labels", help="label map path (.pgm or .csv)")
    p.add_argument("--sidecar", help="JSON metadata path")
    p.add_argument("--max-iterations", type=int, default=1000)
    p.set_defaults(func=cmd_segment)

    p = subs.add_parser("track", parents=[common], help="track an object through a frame directory")
    p.add_argument("frames")
    p.add_argument("--center", required=True, help="initial window centre 'x,y'")
    p.add_argument("--length", type=float, required=True)
    p.add_argument("--width", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--f", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--select", default="top_1", help="top_K or comma-separated cluster ids")
    p.add_argument("--max-inner-iters", type=int, default=20)
    p.add_argument("--annotate", help="directory for annotated frames")
    p.set_defaults(func=cmd_track)

    p = subs.add_parser("bench", parents=[common], help="runtime comparison")
    p.add_argument("--csv")
    p.add_argument("--label-col")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--std", type=float, default=0.03)
    p.add_argument("--sep", type=float, default=0.3)
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--algos", default="gridshift,mspp")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.set_defaults(func=cmd_bench)

    p = subs.add_parser("theory", parents=[common], help="Gaussian shrinkage experiment")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--s", default="1.0", help="standard deviation(s), comma-separated")
    p.add_argument("--h", type=float, default=0.5)
    p.set_defaults(func=cmd_theory)
    return parser


def _classify(exc: BaseException):
    if isinstance(exc, (CsvParseError, ImageDecodeError)):
        return EXIT_PARSE, "parse error"
    if isinstance(exc, NotConvergedError):
        return EXIT_CONVERGENCE, "convergence failure"
    if isinstance(exc, (GridError, metrics.MetricError, tracker.TrackerError, ValueError)):
        return EXIT_VALIDATION, "invalid input"
    return EXIT_IO, "I/O error"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, NotConvergedError, OSError) as exc:
        code, kind = _classify(exc)
        print(f"gridshift: {kind}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
