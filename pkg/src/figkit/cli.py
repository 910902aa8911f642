"""Command-line front end.

Each subcommand wraps one pipeline stage and writes file artifacts into
an output directory.  All randomness flows from --seed, every artifact
embeds the run configuration (JSON carries a "meta" key, SVG a comment,
PNG text chunks, CSV a .meta.json sidecar), and reruns with identical
inputs are byte-identical.

Exit codes: 0 success, 2 configuration or manifest errors, 3 missing or
corrupt inputs, 4 degenerate data.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, features, kappa, segeval, synth, viz
from .corpus import (
    MapRecord,
    Texel,
    assign_texel_class,
    area_proportions,
    collapse_classes,
    decode_labels,
    extract_texels,
    load_manifest,
    ontology_for,
    resolve_path,
    texel_origins,
)
from .errors import (
    ConfigError,
    DegenerateDataError,
    InputError,
    ManifestError,
    ShapeMismatchError,
)
from .raster import ABLATION_MODES, ablate, load_rgb, save_png

__all__ = ["main"]


def _meta(args: argparse.Namespace, keys: tuple[str, ...]) -> dict:
    meta = {"tool": f"figkit {__version__}", "command": args.command}
    for key in keys:
        meta[key.replace("_", "-")] = getattr(args, key)
    return meta


def _write_json(path: Path, doc: dict, meta: dict) -> None:
    doc = dict(doc)
    doc["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _sidecar_meta(csv_path: Path, meta: dict) -> None:
    with open(csv_path.with_suffix(".meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _png_meta(meta: dict) -> dict:
    return {k: str(v) for k, v in meta.items()}


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_corpus_maps(args: argparse.Namespace) -> tuple[list[MapRecord], Path]:
    manifest_path = Path(args.manifest)
    records = load_manifest(manifest_path)
    return records, manifest_path.parent


def _decoded_label(
    rec: MapRecord, base: Path, arity: int, img_shape: tuple[int, int] | None = None
):
    if rec.label_path is None:
        return None
    label_img = load_rgb(resolve_path(base, rec.label_path))
    if img_shape is not None and label_img.shape[:2] != img_shape:
        raise ShapeMismatchError(
            f"{rec.map_id}: label raster {label_img.shape[:2]} does not match "
            f"image {img_shape}"
        )
    cm = decode_labels(label_img, ontology_for(5))
    if arity == 3:
        cm = collapse_classes(cm)
    return cm


def _cmd_synth(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    manifest = synth.generate_corpus(out, seed=args.seed, n_maps=args.maps, size=args.size)
    print(f"wrote {manifest}")
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    records, base = _load_corpus_maps(args)
    out = _out_dir(args)
    ontology = ontology_for(args.classes)
    texel_dir = out / "texels"
    if args.texel_pngs:
        texel_dir.mkdir(exist_ok=True)
    meta = _meta(args, ("seed", "texel_size", "stride", "classes", "threshold"))
    rows = []
    for rec in records:
        img = load_rgb(resolve_path(base, rec.image_path))
        label = _decoded_label(rec, base, args.classes, img.shape[:2])
        origins = texel_origins(img.shape[1], img.shape[0], args.texel_size, args.stride)
        for x, y in origins:
            cls_name = ""
            if label is not None:
                cls = assign_texel_class(label, x, y, args.texel_size, args.threshold)
                if cls is not None:
                    cls_name = ontology.classes[cls]
            rows.append((rec.map_id, x, y, cls_name))
            if args.texel_pngs:
                tile = img[y : y + args.texel_size, x : x + args.texel_size]
                save_png(
                    tile,
                    texel_dir / f"{rec.map_id}_{x:04d}_{y:04d}.png",
                    _png_meta(meta),
                )
    index_path = out / "texels.csv"
    with open(index_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["map_id", "x", "y", "class"])
        writer.writerows(rows)
    _sidecar_meta(index_path, meta)
    print(f"wrote {index_path} ({len(rows)} texels)")
    return 0


def _read_index(path: Path) -> list[tuple[str, int, int, str]]:
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["map_id", "x", "y", "class"]:
            raise InputError(f"{path}: not a texel index")
        for line in reader:
            rows.append((line[0], int(line[1]), int(line[2]), line[3]))
    return rows


def _cmd_features(args: argparse.Namespace) -> int:
    records, base = _load_corpus_maps(args)
    rows = _read_index(Path(args.index))
    out = _out_dir(args)
    by_map: dict[str, list[int]] = {}
    for i, (map_id, _, _, _) in enumerate(rows):
        by_map.setdefault(map_id, []).append(i)
    known = {rec.map_id: rec for rec in records}
    missing = sorted(set(by_map) - set(known))
    if missing:
        raise InputError(f"index references maps absent from the manifest: {missing}")
    width = len(features.SIMPLIFIED_LABELS if args.simplified else features.FEATURE_LABELS)
    matrix = np.empty((len(rows), width), dtype=np.float64)
    for map_id, idxs in by_map.items():
        img = load_rgb(resolve_path(base, known[map_id].image_path))
        origins = [(rows[i][1], rows[i][2]) for i in idxs]
        sub = features.extract_map_features(
            img, origins, args.texel_size, simplified=args.simplified
        )
        matrix[idxs] = sub
    path = out / "features.csv"
    features.write_features_csv(path, rows, matrix)
    _sidecar_meta(path, _meta(args, ("seed", "texel_size", "simplified")))
    print(f"wrote {path} ({matrix.shape[0]} x {matrix.shape[1]})")
    return 0


def _feature_names(width: int) -> tuple[str, ...]:
    if width == len(features.FEATURE_LABELS):
        return features.FEATURE_LABELS
    if width == len(features.SIMPLIFIED_LABELS):
        return features.SIMPLIFIED_LABELS
    return tuple(f"f{j:02d}" for j in range(width))


def _cmd_kappa(args: argparse.Namespace) -> int:
    rows, matrix = features.read_features_csv(Path(args.features))
    out = _out_dir(args)
    names = _feature_names(matrix.shape[1])
    sets = []
    if args.group == "all":
        sets.append(kappa.FeatureSampleSet("all", matrix, names))
    else:
        classes = sorted({cls for _, _, _, cls in rows if cls})
        if not classes:
            raise DegenerateDataError("no class labels in the feature table")
        for cls in classes:
            idx = [i for i, r in enumerate(rows) if r[3] == cls]
            if len(idx) < 8:
                continue
            sets.append(kappa.FeatureSampleSet(cls, matrix[idx], names))
        if not sets:
            raise DegenerateDataError("every class has fewer than 8 texels")
    reports = kappa.bootstrap_kappa(
        sets, trials=args.trials, seed=args.seed, threads=args.threads
    )
    path = out / "kappa.json"
    kappa.save_reports(
        reports, path, _meta(args, ("seed", "trials", "group"))
    )
    print(f"wrote {path} ({len(reports)} sets)")
    return 0


def _cmd_kurtograph(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    series = []
    labels: tuple[str, ...] | None = None
    for path in args.kappa:
        for rep in kappa.load_reports(path):
            rep_labels = tuple(f["name"] for f in rep["features"])
            values = np.array([f["kappa_median"] for f in rep["features"]])
            if labels is None:
                labels = rep_labels
            elif labels != rep_labels:
                raise ConfigError("reports disagree on the feature set")
            series.append((rep["set"], values))
    if labels is None:
        raise InputError("no reports found")
    spec = viz.KurtographSpec(series, labels)
    svg = viz.render_kurtograph(spec, _meta(args, ("seed",)))
    path = out / "kurtograph.svg"
    _write_text(path, svg)
    print(f"wrote {path}")
    return 0


def _cmd_correlate(args: argparse.Namespace) -> int:
    rows, matrix = features.read_features_csv(Path(args.features))
    out = _out_dir(args)
    classes = sorted({cls for _, _, _, cls in rows if cls})
    named = []
    for cls in classes:
        idx = [i for i, r in enumerate(rows) if r[3] == cls]
        if len(idx) >= 8:
            named.append((args.corpus, cls, matrix[idx]))
    if len(named) < 2:
        raise DegenerateDataError("need at least 2 classes with 8+ texels")
    sigs = analysis.build_signatures(named, bins=args.bins)
    m = analysis.correlate(sigs)
    per_class, overall = analysis.mean_interclass(m, args.corpus)
    meta = _meta(args, ("seed", "corpus", "bins"))
    doc = analysis.correlation_to_dict(m)
    doc["mean_interclass"] = {"per_class": per_class, "overall": overall}
    _write_json(out / "correlation.json", doc, meta)
    analysis.write_correlation_csv(m, out / "correlation.csv")
    _sidecar_meta(out / "correlation.csv", meta)
    _write_text(out / "heatmap.svg", viz.render_heatmap(m, meta))
    print(f"wrote {out / 'correlation.json'} ({len(sigs)} signatures)")
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    records, base = _load_corpus_maps(args)
    rows, matrix = features.read_features_csv(Path(args.features))
    out = _out_dir(args)
    emb = analysis.tsne_project(
        matrix, perplexity=args.perplexity, seed=args.seed, iterations=args.iterations
    )
    layout = analysis.grid_assign(emb)
    keys = [(map_id, x, y) for map_id, x, y, _ in rows]
    layout_path = out / "layout.csv"
    analysis.write_layout_csv(layout_path, keys, layout)
    meta = _meta(args, ("seed", "perplexity", "iterations", "texel_size", "cell"))
    _sidecar_meta(layout_path, meta)
    known = {rec.map_id: rec for rec in records}
    cache: dict[str, np.ndarray] = {}
    texels = []
    for map_id, x, y, _ in rows:
        if map_id not in known:
            raise InputError(f"feature table references unknown map {map_id!r}")
        if map_id not in cache:
            cache[map_id] = load_rgb(resolve_path(base, known[map_id].image_path))
        img = cache[map_id]
        texels.append(
            Texel(map_id, x, y, args.texel_size,
                  img[y : y + args.texel_size, x : x + args.texel_size])
        )
    montage = viz.render_montage(texels, layout, args.cell)
    save_png(montage, out / "montage.png", _png_meta(meta))
    print(f"wrote {out / 'montage.png'} ({layout.rows} x {layout.cols} cells)")
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    records, base = _load_corpus_maps(args)
    out = _out_dir(args)
    meta = _meta(args, ("seed", "mode"))
    count = 0
    for rec in records:
        img = load_rgb(resolve_path(base, rec.image_path))
        result, degenerate = ablate(img, args.mode)
        png_meta = _png_meta(meta)
        png_meta["degenerate"] = str(degenerate).lower()
        save_png(result, out / f"{rec.map_id}_{args.mode}.png", png_meta)
        count += 1
    print(f"wrote {count} {args.mode} images to {out}")
    return 0


def _cmd_segeval(args: argparse.Namespace) -> int:
    records, base = _load_corpus_maps(args)
    out = _out_dir(args)
    pred_dir = Path(args.pred)
    patches = []
    for rec in records:
        if rec.label_path is None:
            continue
        gt = _decoded_label(rec, base, args.classes)
        pred_path = pred_dir / f"{rec.map_id}.png"
        if not pred_path.exists():
            raise InputError(f"missing prediction {pred_path}")
        pred_cm = decode_labels(load_rgb(pred_path), ontology_for(5))
        if args.classes == 3:
            pred_cm = collapse_classes(pred_cm)
        patches.append((rec.map_id, segeval.confusion(pred_cm, gt)))
    if not patches:
        raise InputError("no labeled maps to evaluate")
    pooled = segeval.sum_confusions([cm for _, cm in patches])
    pooled_metrics = segeval.metrics(pooled)
    norm, empty_rows = segeval.normalize_confusion(pooled)
    doc = {
        "classes": list(pooled.ontology.classes),
        "pooled": segeval.metrics_to_dict(pooled_metrics),
        "confusion": pooled.counts.tolist(),
        "confusion_normalized": [[float(v) for v in row] for row in norm],
        "empty_gt_rows": [bool(v) for v in empty_rows],
        "per_patch_miou": {
            pid: segeval.metrics(cm).miou for pid, cm in patches
        },
    }
    if len(patches) >= 2:
        bh = segeval.best_half(patches)
        doc["best_half"] = {
            "selected": bh.selected_ids,
            "median_miou": bh.median_miou,
            "tie_fallback": bh.tie_fallback,
            "metrics": segeval.metrics_to_dict(bh.pooled),
        }
    meta = _meta(args, ("seed", "classes"))
    _write_json(out / "segeval.json", doc, meta)
    per_patch = out / "per_patch.csv"
    with open(per_patch, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["map_id", "miou"])
        for pid, cm in patches:
            writer.writerow([pid, repr(segeval.metrics(cm).miou)])
    _sidecar_meta(per_patch, meta)
    print(f"wrote {out / 'segeval.json'} (mIoU {pooled_metrics.miou:.4f})")
    return 0


def _cmd_extrapolate(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    sizes: list[float] = []
    scores: list[float] = []
    with open(args.points, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["size", "score"]:
            raise InputError(f"{args.points}: expected header size,score")
        for line in reader:
            sizes.append(float(line[0]))
            scores.append(float(line[1]))
    y = np.asarray(scores)
    fit_y = 1.0 - y if args.fit_target == "complement" else y
    fit = segeval.fit_power_law(sizes, fit_y, c_max=args.c_max)
    doc = {
        "a": fit.a,
        "b": fit.b,
        "c": fit.c,
        "residual": fit.residual,
        "fit_target": args.fit_target,
        "sizes": list(fit.sizes),
    }
    if args.target_score is not None:
        goal = (
            1.0 - args.target_score
            if args.fit_target == "complement"
            else args.target_score
        )
        doc["target_score"] = args.target_score
        doc["required_size"] = segeval.extrapolate(fit, target_score=goal)
    if args.target_size is not None:
        raw = segeval.extrapolate(fit, target_size=args.target_size)
        doc["target_size"] = args.target_size
        doc["predicted_score"] = (
            1.0 - raw if args.fit_target == "complement" else raw
        )
    _write_json(out / "powerlaw.json", doc, _meta(args, ("seed", "fit_target", "c_max")))
    print(f"wrote {out / 'powerlaw.json'} (c = {fit.c:.4f})")
    return 0


def _cmd_proportions(args: argparse.Namespace) -> int:
    records, base = _load_corpus_maps(args)
    out = _out_dir(args)
    ontology = ontology_for(args.classes)
    per_map = {}
    totals = np.zeros(ontology.arity, dtype=np.int64)
    for rec in records:
        if rec.label_path is None:
            continue
        cm = _decoded_label(rec, base, args.classes)
        per_map[rec.map_id] = {
            name: float(v)
            for name, v in zip(ontology.classes, area_proportions(cm))
        }
        totals += np.bincount(cm.indices.ravel(), minlength=ontology.arity)
    if not per_map:
        raise InputError("no labeled maps in the manifest")
    corpus_prop = totals / totals.sum()
    doc = {
        "per_map": per_map,
        "corpus": {
            name: float(v) for name, v in zip(ontology.classes, corpus_prop)
        },
    }
    _write_json(out / "proportions.json", doc, _meta(args, ("seed", "classes")))
    print(f"wrote {out / 'proportions.json'} ({len(per_map)} maps)")
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "extract": _cmd_extract,
    "features": _cmd_features,
    "kappa": _cmd_kappa,
    "kurtograph": _cmd_kurtograph,
    "correlate": _cmd_correlate,
    "embed": _cmd_embed,
    "ablate": _cmd_ablate,
    "segeval": _cmd_segeval,
    "extrapolate": _cmd_extrapolate,
    "proportions": _cmd_proportions,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figkit",
        description="Measure and visualize cartographic figuration.",
    )
    parser.add_argument("--version", action="version", version=f"figkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        return p

    p = add("synth", "generate the bundled synthetic mini-corpus")
    p.add_argument("--maps", type=int, default=3, help="number of maps (default 3)")
    p.add_argument("--size", type=int, default=360, help="sheet side in px (default 360)")

    p = add("extract", "cut the texel grid and assign tile classes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--texel-size", type=int, default=50)
    p.add_argument("--stride", type=int, default=50)
    p.add_argument("--classes", type=int, choices=(3, 5), default=5)
    p.add_argument("--threshold", type=float, default=0.75,
                   help="area share a class needs to own a tile (default 0.75)")
    p.add_argument("--no-texel-pngs", dest="texel_pngs", action="store_false",
                   help="skip writing per-texel PNGs")

    p = add("features", "compute descriptor vectors for an extracted index")
    p.add_argument("--manifest", required=True)
    p.add_argument("--index", required=True, help="texels.csv from `figkit extract`")
    p.add_argument("--texel-size", type=int, default=50)
    p.add_argument("--simplified", action="store_true",
                   help="14-entry variant instead of the full 29")

    p = add("kappa", "convergence coefficients with bootstrap recalibration")
    p.add_argument("--features", required=True, help="features.csv")
    p.add_argument("--trials", type=int, default=5000)
    p.add_argument("--group", choices=("all", "class"), default="all",
                   help="one set over everything, or one per class")
    p.add_argument("--threads", type=int, default=None,
                   help="bootstrap workers (default: FIGKIT_THREADS or 1)")

    p = add("kurtograph", "radial plot of per-feature convergence")
    p.add_argument("--kappa", required=True, nargs="+", help="kappa.json report files")

    p = add("correlate", "inter-class Pearson proximity and heatmap")
    p.add_argument("--features", required=True)
    p.add_argument("--corpus", default="corpus", help="corpus label for the rows")
    p.add_argument("--bins", type=int, default=32)

    p = add("embed", "t-SNE projection, grid layout, and texel montage")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--texel-size", type=int, default=50)
    p.add_argument("--cell", type=int, default=50, help="montage cell size in px")

    p = add("ablate", "figuration-removal renderings of each map")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=ABLATION_MODES, required=True)

    p = add("segeval", "score predictions against manifest labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred", required=True, help="directory of <map_id>.png predictions")
    p.add_argument("--classes", type=int, choices=(3, 5), default=5)

    p = add("extrapolate", "fit the training-size power law and invert it")
    p.add_argument("--points", required=True, help="CSV with header size,score")
    p.add_argument("--target-score", type=float, default=None)
    p.add_argument("--target-size", type=float, default=None)
    p.add_argument("--fit-target", choices=("score", "complement"), default="score",
                   help="fit the score itself or 1 - score")
    p.add_argument("--c-max", type=float, default=20.0)

    p = add("proportions", "per-class area shares of the labeled corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--classes", type=int, choices=(3, 5), default=5)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ManifestError, ConfigError) as exc:
        print(f"figkit {args.command}: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError) as exc:
        print(f"figkit {args.command}: {exc}", file=sys.stderr)
        return 3
    except DegenerateDataError as exc:
        print(f"figkit {args.command}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
