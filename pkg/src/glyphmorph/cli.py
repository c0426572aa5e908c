"""Batch front-end: measure datasets, build perturbed datasets, compare
attribute distributions and compute disentanglement reports.

Subcommands: ``measure``, ``perturb``, ``compare``, ``disentangle``.  Every
run is deterministic given its full flag set (the seed defaults to 0);
outputs are byte-identical across repeats and across worker counts.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import multiprocessing
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import idx, perturb, stats
from .errors import GlyphmorphError, MeasurementError
from .measure import ATTRIBUTE_NAMES, measure

DEFAULT_SEED = 0
SCHEMA_PREFIX = "glyphmorph"

_WORK: dict = {}


# --- shared helpers ---


def _float_repr(v: float) -> str:
    return format(float(v), ".9g")


def _pool_map(func, n_items: int, workers: int):
    """Map ``func`` over range(n_items), in order, optionally forking workers."""
    if workers <= 1 or n_items < 2:
        return [func(i) for i in range(n_items)]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, n_items // (workers * 8))
    with ctx.Pool(processes=workers) as pool:
        return pool.map(func, range(n_items), chunksize=chunk)


def _read_attribute_csv(path: str) -> stats.AttributeTable:
    """Load the five attribute columns of a morphometrics CSV, skipping any
    row whose attributes are missing or flagged with an error code."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for name in ATTRIBUTE_NAMES:
            if name not in header:
                raise ValueError(f"{path}: missing column {name!r}")
        rows = []
        for row in reader:
            if row.get("error"):
                continue
            try:
                rows.append([float(row[name]) for name in ATTRIBUTE_NAMES])
            except (TypeError, ValueError):
                continue
    if len(rows) < 2:
        raise ValueError(f"{path}: fewer than 2 usable rows")
    return stats.AttributeTable(ATTRIBUTE_NAMES, np.array(rows, dtype=np.float64))


def _write_pgm_grid(path: Path, images: np.ndarray, per_row: int = 10) -> None:
    """Dump a raw grid of images as a binary PGM file."""
    n, h, w = images.shape
    rows = (n + per_row - 1) // per_row
    grid = np.zeros((rows * h, per_row * w), dtype=np.uint8)
    for k in range(n):
        r, c = divmod(k, per_row)
        grid[r * h : (r + 1) * h, c * w : (c + 1) * w] = images[k]
    header = f"P5\n{grid.shape[1]} {grid.shape[0]}\n255\n".encode("ascii")
    path.write_bytes(header + grid.tobytes())


def parse_menu(text: str) -> list:
    """Parse ``--menu`` syntax: comma-separated entries, each a built-in name
    (plain, thin, thick, swel, frac) optionally followed by ``:key=value``
    overrides, e.g. ``plain,thin:strength=0.5,swel:gamma=5``."""
    menu = []
    for entry in text.split(","):
        parts = entry.strip().split(":")
        name = parts[0]
        if name not in perturb.BUILTIN_SPECS:
            known = ", ".join(sorted(perturb.BUILTIN_SPECS))
            raise ValueError(f"unknown menu entry {name!r} (known: {known})")
        base = perturb.BUILTIN_SPECS[name]
        overrides = {}
        for part in parts[1:]:
            if "=" not in part:
                raise ValueError(f"malformed parameter {part!r} in menu entry {entry!r}")
            key, value = part.split("=", 1)
            if key == "count":
                overrides[key] = int(value)
            else:
                overrides[key] = float(value)
        if overrides:
            fields = {k: getattr(base, k) for k in (
                "kind", "strength", "gamma", "radius_coef", "count",
                "brush", "min_dist", "window", "extension",
            )}
            unknown = set(overrides) - set(fields)
            if unknown:
                raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {name!r}")
            fields.update(overrides)
            menu.append(perturb.PerturbSpec(**fields))
        else:
            menu.append(base)
    return menu


# --- measure ---


def _measure_index(i: int):
    img = _WORK["images"][i]
    try:
        rec = measure(img, _WORK["factor"])
        return (i, rec.as_tuple(), "")
    except MeasurementError as exc:
        return (i, None, type(exc.cause).__name__)
    except GlyphmorphError as exc:
        return (i, None, type(exc).__name__)


def cmd_measure(args) -> int:
    dataset = idx.load_idx_images(args.images)
    labels = idx.load_idx_labels(args.labels) if args.labels else None
    if labels is not None and labels.count != dataset.count:
        raise ValueError(f"{labels.count} labels for {dataset.count} images")
    _WORK.update(images=dataset.images, factor=args.scale)
    results = _pool_map(_measure_index, dataset.count, args.workers)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "morphometrics.csv"
    thicknesses = []
    slants = []
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "label", *ATTRIBUTE_NAMES, "error"])
        for i, values, error in results:
            label = str(int(labels.labels[i])) if labels is not None else ""
            if values is None:
                writer.writerow([i, label, "", "", "", "", "", error])
                continue
            length, thickness, slant_rad, width, height = values
            slant_deg = math.degrees(slant_rad)
            writer.writerow(
                [i, label]
                + [_float_repr(v) for v in (length, thickness, slant_deg, width, height)]
                + [""]
            )
            thicknesses.append(thickness)
            slants.append(slant_deg)

    # soft sanity gate on the measured bulk (5th..95th percentile)
    if thicknesses:
        t_lo, t_hi = np.percentile(thicknesses, [5, 95])
        s_lo, s_hi = np.percentile(slants, [5, 95])
        if not (1.0 <= t_lo and t_hi <= 7.0):
            print(
                f"warning: thickness bulk [{t_lo:.2f}, {t_hi:.2f}] px outside [1, 7]",
                file=sys.stderr,
            )
        if not (-50.0 <= s_lo and s_hi <= 50.0):
            print(
                f"warning: slant bulk [{s_lo:.2f}, {s_hi:.2f}] deg outside [-50, 50]",
                file=sys.stderr,
            )
    return 0


# --- perturb ---


def _perturb_index(i: int):
    out, choice, outcome = perturb.apply_menu(
        _WORK["images"][i], _WORK["menu"], _WORK["seed"], i, _WORK["factor"]
    )
    return (i, out, choice, outcome)


def _outcome_record(i: int, choice: int, spec, outcome) -> dict:
    record = {
        "index": i,
        "menu_index": choice,
        "kind": outcome.kind,
        "seed": outcome.seed,
        "parameters": spec.parameters(),
        "error": outcome.error,
    }
    if outcome.center is not None:
        record["center"] = list(outcome.center)
        record["radius"] = outcome.radius
    if outcome.sites:
        record["sites"] = [asdict(site) for site in outcome.sites]
    return record


def cmd_perturb(args) -> int:
    dataset = idx.load_idx_images(args.images)
    menu = parse_menu(args.menu)
    _WORK.update(images=dataset.images, menu=menu, seed=args.seed, factor=args.scale)
    results = _pool_map(_perturb_index, dataset.count, args.workers)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if results:
        images = np.stack([r[1] for r in results])
    else:
        images = np.zeros((0,) + dataset.images.shape[1:], dtype=np.uint8)
    choices = np.array([r[2] for r in results], dtype=np.uint8)
    idx.save_idx_images(out_dir / "out_images.idx", idx.ImageDataset(images))
    idx.save_idx_labels(out_dir / "pert_labels.idx", idx.LabelVector(choices))
    with open(out_dir / "outcomes.jsonl", "w") as fh:
        for i, _, choice, outcome in results:
            fh.write(json.dumps(_outcome_record(i, choice, menu[choice], outcome), sort_keys=True))
            fh.write("\n")
    if args.examples:
        _write_pgm_grid(out_dir / "examples.pgm", images[: args.examples])
    return 0


# --- compare ---


def cmd_compare(args) -> int:
    real = _read_attribute_csv(args.real)
    samples = _read_attribute_csv(args.samples)
    result = stats.mmd_linear_test(real, samples)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for d, name in enumerate(ATTRIBUTE_NAMES):
        pooled = np.concatenate([real.values[:, d], samples.values[:, d]])
        lo, hi = float(pooled.min()), float(pooled.max())
        if hi == lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, 101)
        real_counts, _ = np.histogram(real.values[:, d], bins=edges)
        sample_counts, _ = np.histogram(samples.values[:, d], bins=edges)
        with open(out_dir / f"hist_{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_lo", "bin_hi", "real_count", "sample_count"])
            for b in range(100):
                writer.writerow(
                    [
                        _float_repr(edges[b]),
                        _float_repr(edges[b + 1]),
                        int(real_counts[b]),
                        int(sample_counts[b]),
                    ]
                )

    report = {
        "schema": f"{SCHEMA_PREFIX}/compare/1",
        "statistic": result.statistic,
        "std_error": result.std_error,
        "p_value": result.p_value,
        "n_used": result.n_used,
        "alternative": result.alternative,
        "bandwidths": {
            name: result.bandwidths[d] for d, name in enumerate(ATTRIBUTE_NAMES)
        },
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    (out_dir / "compare.json").write_text(text + "\n")
    print(text)
    return 0


# --- disentangle ---


def _read_code_csv(path: str) -> stats.CodeTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        names = []
        kinds = []
        for cell in header:
            if ":" not in cell:
                raise ValueError(f"{path}: column {cell!r} lacks a type tag (cont, bin, cat:K)")
            name, tag = cell.split(":", 1)
            names.append(name)
            kinds.append(stats.parse_code_kind(tag))
        rows = [[float(v) for v in row] for row in reader if row]
    return stats.CodeTable(tuple(names), np.array(rows, dtype=np.float64), tuple(kinds))


def _read_factor_csv(path: str) -> tuple:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [[float(v) for v in row] for row in reader if row]
    return tuple(header), np.array(rows, dtype=np.float64)


def cmd_disentangle(args) -> int:
    y = _read_attribute_csv(args.morphometrics)
    codes = _read_code_csv(args.codes)
    names = list(y.names)
    values = y.values
    if args.factors:
        extra_names, extra_values = _read_factor_csv(args.factors)
        if extra_values.shape[0] != values.shape[0]:
            raise ValueError(
                f"row mismatch: {values.shape[0]} morphometrics vs "
                f"{extra_values.shape[0]} factors"
            )
        names += list(extra_names)
        values = np.column_stack([values, extra_values])
        y = stats.AttributeTable(tuple(names), values)
    if codes.n_rows != y.n_rows:
        raise ValueError(f"row mismatch: {y.n_rows} attribute rows vs {codes.n_rows} code rows")

    table = stats.partial_correlations(y, codes)
    report_mig = stats.mig(y, codes, bins=args.bins)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "partial_corr.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["attribute", *table.codes])
        for j, attr in enumerate(table.attributes):
            writer.writerow([attr] + [_float_repr(v) for v in table.matrix[j]])

    report = {
        "schema": f"{SCHEMA_PREFIX}/disentangle/1",
        "attributes": list(table.attributes),
        "codes": list(table.codes),
        "partial_correlations": [[float(v) for v in row] for row in table.matrix],
        "mig": {
            "per_attribute": {
                attr: float(v) for attr, v in zip(report_mig.attributes, report_mig.per_attribute)
            },
            "overall": report_mig.overall,
            "binning": report_mig.binning,
        },
        "mutual_information": {
            "codes": list(report_mig.codes),
            "matrix": [[float(v) for v in row] for row in report_mig.mutual_information],
        },
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    (out_dir / "disentangle.json").write_text(text + "\n")
    print(text)
    return 0


# --- entry point ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glyphmorph",
        description="Measure, perturb and statistically compare rasterised glyph datasets.",
    )
    parser.add_argument(
        "--json-errors",
        action="store_true",
        help="emit machine-readable error JSON on stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="measure shape attributes of an IDX dataset")
    p.add_argument("images", help="IDX image file (optionally gzipped)")
    p.add_argument("labels", nargs="?", default=None, help="optional IDX label file")
    p.add_argument("--scale", type=int, default=4, help="upscale factor (default 4)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("perturb", help="build a perturbed copy of an IDX dataset")
    p.add_argument("images")
    p.add_argument("--menu", default="plain,thin,thick", help="comma-separated perturbations")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--examples", type=int, default=0, help="dump a PGM grid of the first N outputs")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("compare", help="kernel two-sample test between two morphometrics CSVs")
    p.add_argument("real")
    p.add_argument("samples")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("disentangle", help="partial correlations and MIG for latent codes")
    p.add_argument("morphometrics")
    p.add_argument("codes")
    p.add_argument("factors", nargs="?", default=None)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_disentangle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GlyphmorphError, ValueError, OSError) as exc:
        if args.json_errors:
            payload = {"error": type(exc).__name__, "message": str(exc)}
            print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
