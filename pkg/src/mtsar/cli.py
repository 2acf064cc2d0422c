"""Command-line pipelines: simulate, filter, measure, render.

Conventions: products go to files, metric reports go to stdout as
JSON-Lines, diagnostics go to stderr. Exit code 0 on success, 1 on data
errors, 2 on usage errors. Every pipeline is a pure function of its
inputs, flags, and seed, so re-runs are bit-identical.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from mtsar import io
from mtsar.core import Image, Region, SarError, Stack, validate_stack
from mtsar.despeckle import (
    DespecklerSpec,
    ExternalSpec,
    parse_despeckler_spec,
    plugin_caps,
    despeckle,
    with_looks,
)
from mtsar.metrics import MetricReport, enl, log_variance, mean_ratio, mse, psnr, residual_stats
from mtsar.multitemporal import (
    EpsilonPolicy,
    SuperImageAccumulator,
    preestimate_stack,
    quegan,
    rabasar,
    ratio_image,
    super_image,
)
from mtsar.speckle import ChangeEvent, SceneScript, generate_scene, generate_stack
from mtsar.io import scene_script_to_dict


# ---------------------------------------------------------------------------
# Flag-value parsers (argparse type= callables; failures exit 2)


def _usage(msg: str) -> argparse.ArgumentTypeError:
    return argparse.ArgumentTypeError(msg)


def _parse_size(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise _usage(f"size must look like 256x256, got {text!r}")
    w, h = int(m.group(1)), int(m.group(2))
    if w < 1 or h < 1:
        raise _usage(f"size components must be >= 1, got {text!r}")
    return w, h


def _parse_scene(text: str):
    from mtsar.speckle import ConstantScene, EdgeScene, LinesScene, PointTargetsScene

    head, sep, rest = text.partition(":")
    try:
        if head == "constant" and sep:
            return ConstantScene(float(rest))
        if head == "edge" and sep:
            left, right, column = rest.split(",")
            return EdgeScene(float(left), float(right), int(column))
        if head == "points" and sep:
            fields = rest.split(",")
            background, target = float(fields[0]), float(fields[1])
            positions = []
            for pair in fields[2:]:
                x, _, y = pair.partition("/")
                positions.append((int(x), int(y)))
            if not positions:
                raise ValueError("no target positions")
            return PointTargetsScene(background, target, tuple(positions))
        if head == "lines" and sep:
            fields = rest.split(",")
            return LinesScene(float(fields[0]), float(fields[1]), tuple(int(r) for r in fields[2:]))
    except (ValueError, IndexError) as e:
        raise _usage(f"bad scene spec {text!r}: {e}") from None
    raise _usage(
        f"unknown scene {text!r}; expected constant:LEVEL, edge:LEFT,RIGHT,COLUMN, "
        "points:BG,TARGET,X/Y[,X/Y...], or lines:BG,LEVEL,ROW[,ROW...]"
    )


def _parse_event(text: str) -> ChangeEvent:
    parts = text.split(":")
    if len(parts) != 3:
        raise _usage(f"event must look like T:X0,Y0,W,H:VALUE, got {text!r}")
    try:
        t = int(parts[0])
        x0, y0, w, h = (int(v) for v in parts[1].split(","))
        value = float(parts[2])
        return ChangeEvent(date_index=t, region=Region(x0, y0, w, h), value=value)
    except (ValueError, SarError) as e:
        raise _usage(f"bad event spec {text!r}: {e}") from None


def _parse_region(text: str) -> Region:
    try:
        x0, y0, w, h = (int(v) for v in text.split(","))
        return Region(x0, y0, w, h)
    except (ValueError, SarError) as e:
        raise _usage(f"region must look like X0,Y0,W,H, got {text!r}: {e}") from None


def _parse_despeckler(text: str) -> DespecklerSpec:
    try:
        return parse_despeckler_spec(text)
    except SarError as e:
        raise _usage(str(e)) from None


def _parse_date(text: str):
    if text == "all":
        return "all"
    try:
        t = int(text)
    except ValueError:
        raise _usage(f"date must be an index or 'all', got {text!r}") from None
    if t < 0:
        raise _usage(f"date index must be >= 0, got {t}")
    return t


def _parse_db_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise _usage(f"dB range must look like LO,HI, got {text!r}") from None
    if not lo < hi:
        raise _usage(f"dB range must satisfy LO < HI, got {text!r}")
    return lo, hi


def _parse_eps(text: str) -> float:
    try:
        eps = float(text)
    except ValueError:
        raise _usage(f"eps-rel must be a float, got {text!r}") from None
    if not eps > 0:
        raise _usage(f"eps-rel must be positive, got {eps}")
    return eps


# ---------------------------------------------------------------------------
# Shared helpers


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_stack(path: Path) -> Stack:
    loaded = io.read_manifest(path)
    if not isinstance(loaded, Stack):
        raise SarError(f"{path}: manifest describes a scene script, not an image stack")
    return loaded


def _sanitize(label: str) -> str:
    return re.sub(r"[^\w.-]", "_", label)


def _select_dates(stack: Stack, date) -> list[int]:
    if date == "all":
        return list(range(len(stack)))
    if date >= len(stack):
        raise SarError(f"date index {date} outside stack of {len(stack)} dates")
    return [date]


def _parallel(fn: Callable[[int], None], indices: Sequence[int], jobs: int) -> None:
    if jobs <= 1 or len(indices) <= 1:
        for i in indices:
            fn(i)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        # consume to surface exceptions
        list(pool.map(fn, indices))


def _out_path_for(args, t: int, stack: Stack, prefix: str) -> Path:
    if args.date == "all":
        return Path(args.out_dir) / f"{prefix}_{_sanitize(stack.dates[t])}.sarr"
    return Path(args.out)


def _check_out_flags(args, parser_name: str) -> None:
    if args.date == "all":
        if not args.out_dir:
            raise SarError(f"{parser_name}: --date all requires --out-dir")
    elif not args.out:
        raise SarError(f"{parser_name}: --out is required for a single date")


def _validate_external(spec: DespecklerSpec) -> None:
    """Capability handshake for configured external plugins; fail fast."""
    if isinstance(spec, ExternalSpec):
        caps = plugin_caps(spec.command)
        _log(f"plugin ok: {caps['name']} (protocol {caps['protocol']})")


# ---------------------------------------------------------------------------
# Subcommand implementations


def _cmd_simulate(args) -> int:
    script = SceneScript(
        base=generate_scene(args.scene, args.size[0], args.size[1]),
        events=tuple(args.event or ()),
        num_dates=args.dates,
        looks=args.looks,
    )
    stack, truths = generate_stack(script, args.seed)
    out = Path(args.out)
    (out / "truth").mkdir(parents=True, exist_ok=True)
    entries = []
    for t, date in enumerate(stack.dates):
        name = f"{date}.sarr"
        io.write_image(stack.images[t], out / name)
        io.write_image(truths[t], out / "truth" / f"truth_{date}.sarr")
        entries.append((date, name))
    io.write_manifest(
        out / "manifest.json",
        looks=args.looks,
        entries=entries,
        scene_script=scene_script_to_dict(
            args.scene, args.size[0], args.size[1], args.dates, args.looks, script.events
        ),
    )
    _log(f"simulated {len(stack)} dates of {args.size[0]}x{args.size[1]} at L={args.looks:g} -> {out}")
    return 0


def _state_paths(prefix: str) -> tuple[Path, Path]:
    return Path(prefix + ".sarr"), Path(prefix + ".json")


def _load_state(prefix: str) -> SuperImageAccumulator | None:
    sarr_path, json_path = _state_paths(prefix)
    if not sarr_path.exists() and not json_path.exists():
        return None
    if not (sarr_path.exists() and json_path.exists()):
        raise SarError(f"incremental state incomplete: need both {sarr_path} and {json_path}")
    running = io.read_image(sarr_path)
    meta = json.loads(json_path.read_text())
    count = meta.get("count")
    if not isinstance(count, int) or count < 0:
        raise SarError(f"{json_path}: invalid count {count!r}")
    return SuperImageAccumulator.from_state(running, count)


def _save_state(acc: SuperImageAccumulator, prefix: str) -> None:
    sarr_path, json_path = _state_paths(prefix)
    io.write_image(acc.running_sum(), sarr_path)
    json_path.write_text(json.dumps({"count": acc.count}) + "\n")


def _cmd_superimage(args) -> int:
    new_images: list[Image] = []
    if args.manifest:
        stack = _load_stack(Path(args.manifest))
        new_images.extend(stack.images)
    for p in args.add or ():
        new_images.append(io.read_image(p))

    acc = _load_state(args.incremental_state) if args.incremental_state else None
    if acc is None:
        if not new_images:
            raise SarError("superimage: no input images and no existing state")
        acc = SuperImageAccumulator(new_images[0].width, new_images[0].height)
    for img in new_images:
        acc.update(img)

    if args.incremental_state:
        _save_state(acc, args.incremental_state)
        _log(f"state now holds {acc.count} dates")
    if args.out:
        io.write_image(acc.current(), Path(args.out))
    elif not args.incremental_state:
        raise SarError("superimage: nothing to do (need --out or --incremental-state)")
    return 0


def _cmd_ratio(args) -> int:
    stack = _load_stack(Path(args.manifest))
    dates = _select_dates(stack, args.date)
    s = io.read_image(args.super) if args.super else super_image(stack)
    policy = EpsilonPolicy(args.eps_rel)
    if args.date == "all":
        outdir = Path(args.out_dir)
        outdir.mkdir(parents=True, exist_ok=True)
    for t in dates:
        tau = ratio_image(stack.images[t], s, policy)
        io.write_image(tau, _out_path_for(args, t, stack, "ratio"))
    return 0


def _cmd_despeckle(args) -> int:
    spec = args.despeckler
    if args.looks is not None:
        spec = with_looks(spec, args.looks)
    _validate_external(spec)
    image = io.read_image(args.input)
    io.write_image(despeckle(image, spec), Path(args.out))
    return 0


def _cmd_quegan(args) -> int:
    _check_out_flags(args, "quegan")
    stack = _load_stack(Path(args.manifest))
    dates = _select_dates(stack, args.date)
    _validate_external(args.despeckler)
    policy = EpsilonPolicy(args.eps_rel)
    preests = preestimate_stack(stack, args.despeckler)
    if args.date == "all":
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)

    def run_one(t: int) -> None:
        io.write_image(quegan(stack, preests, t, policy), _out_path_for(args, t, stack, "quegan"))

    _parallel(run_one, dates, args.jobs)
    return 0


def _cmd_rabasar(args) -> int:
    _check_out_flags(args, "rabasar")
    stack = _load_stack(Path(args.manifest))
    dates = _select_dates(stack, args.date)
    ratio_spec = with_looks(args.ratio_despeckler, stack.looks)
    _validate_external(ratio_spec)
    policy = EpsilonPolicy(args.eps_rel)
    s = super_image(stack)
    if args.denoise_super is not None:
        super_spec = with_looks(args.denoise_super, stack.looks)
        _validate_external(super_spec)
        s = despeckle(s, super_spec)
    if args.date == "all":
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)

    def run_one(t: int) -> None:
        out = rabasar(stack.images[t], s, ratio_spec, policy)
        io.write_image(out, _out_path_for(args, t, stack, "rabasar"))

    _parallel(run_one, dates, args.jobs)
    return 0


_AUTO_METRICS = ("enl", "mse", "psnr", "mean_ratio", "residual")
_ALL_METRICS = ("enl", "logvar", "mse", "psnr", "mean_ratio", "residual")


def _cmd_metrics(args) -> int:
    estimate = io.read_image(args.estimate)
    truth = io.read_image(args.truth) if args.truth else None
    noisy = io.read_image(args.noisy) if args.noisy else None
    region = args.region
    wanted = _AUTO_METRICS if args.metrics == "auto" else tuple(args.metrics.split(","))
    for name in wanted:
        if name not in _ALL_METRICS:
            raise SarError(f"unknown metric {name!r}; choose from {', '.join(_ALL_METRICS)}")
    policy = EpsilonPolicy(args.eps_rel)
    reports: list[MetricReport] = []
    params = {"estimate": args.estimate}
    if "enl" in wanted:
        reports.append(MetricReport("enl", enl(estimate, region), region, params))
    if "logvar" in wanted:
        reports.append(MetricReport("log_variance", log_variance(estimate, region), region, params))
    if truth is not None:
        tp = dict(params, truth=args.truth)
        if "mse" in wanted:
            reports.append(MetricReport("mse", mse(estimate, truth), None, tp))
        if "psnr" in wanted:
            reports.append(MetricReport("psnr", psnr(estimate, truth), None, tp))
        if "mean_ratio" in wanted:
            reports.append(
                MetricReport("mean_ratio", mean_ratio(estimate, truth, region), region, tp)
            )
    if noisy is not None and "residual" in wanted:
        rp = dict(params, noisy=args.noisy)
        r_mean, r_enl = residual_stats(noisy, estimate, policy)
        reports.append(MetricReport("residual_mean", r_mean, None, rp))
        reports.append(MetricReport("residual_enl", r_enl, None, rp))
    for rep in reports:
        print(rep.to_json())
    return 0


def _cmd_quicklook(args) -> int:
    image = io.read_image(args.input)
    io.export_quicklook(image, Path(args.out), args.db_range)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtsar",
        description="Multi-temporal SAR despeckling pipelines on .sarr rasters.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("simulate", help="generate a synthetic speckled stack + manifest")
    p.add_argument("--scene", type=_parse_scene, required=True,
                   help="constant:LEVEL | edge:L,R,COL | points:BG,T,X/Y[,X/Y...] | lines:BG,LVL,ROW[,...]")
    p.add_argument("--size", type=_parse_size, required=True, help="image size, e.g. 256x256")
    p.add_argument("--dates", type=int, required=True, help="number of dates T")
    p.add_argument("--looks", type=float, default=4.0, help="nominal looks L (default 4)")
    p.add_argument("--seed", type=int, required=True, help="master seed (per-date seeds derived)")
    p.add_argument("--event", type=_parse_event, action="append",
                   help="change event T:X0,Y0,W,H:VALUE (repeatable)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("superimage", help="temporal mean, optionally via persistent accumulator")
    p.add_argument("--manifest", help="stack manifest to absorb")
    p.add_argument("--add", action="append", help=".sarr image to absorb (repeatable)")
    p.add_argument("--incremental-state", metavar="PREFIX",
                   help="persist/restore running sum at PREFIX.sarr + PREFIX.json")
    p.add_argument("--out", help="write current super-image here")
    p.set_defaults(func=_cmd_superimage)

    p = sub.add_parser("ratio", help="ratio image(s) w_t / super-image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--date", type=_parse_date, required=True, help="date index or 'all'")
    p.add_argument("--super", help="use this super-image instead of computing the temporal mean")
    p.add_argument("--eps-rel", type=_parse_eps, default=1e-6)
    p.add_argument("--out", help="output .sarr (single date)")
    p.add_argument("--out-dir", help="output directory (--date all)")
    p.set_defaults(func=_cmd_ratio)

    p = sub.add_parser("despeckle", help="single-image despeckling")
    p.add_argument("--input", required=True)
    p.add_argument("--despeckler", type=_parse_despeckler, required=True,
                   help="identity | boxcar:K | external:CMD")
    p.add_argument("--looks", type=float, help="looks hint exported to external plugins")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_despeckle)

    p = sub.add_parser("quegan", help="change-compensated temporal averaging")
    p.add_argument("--manifest", required=True)
    p.add_argument("--date", type=_parse_date, required=True, help="date index or 'all'")
    p.add_argument("--despeckler", type=_parse_despeckler, required=True,
                   help="pre-estimator: identity | boxcar:K | external:CMD")
    p.add_argument("--eps-rel", type=_parse_eps, default=1e-6)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallel output dates for --date all")
    p.add_argument("--out", help="output .sarr (single date)")
    p.add_argument("--out-dir", help="output directory (--date all)")
    p.set_defaults(func=_cmd_quegan)

    p = sub.add_parser("rabasar", help="ratio-based filtering against the super-image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--date", type=_parse_date, required=True, help="date index or 'all'")
    p.add_argument("--ratio-despeckler", type=_parse_despeckler, required=True,
                   help="denoiser for the ratio image")
    p.add_argument("--denoise-super", type=_parse_despeckler, metavar="SPEC",
                   help="also despeckle the super-image with this spec")
    p.add_argument("--eps-rel", type=_parse_eps, default=1e-6)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallel output dates for --date all")
    p.add_argument("--out", help="output .sarr (single date)")
    p.add_argument("--out-dir", help="output directory (--date all)")
    p.set_defaults(func=_cmd_rabasar)

    p = sub.add_parser("metrics", help="JSON-Lines metric reports on stdout")
    p.add_argument("--estimate", required=True)
    p.add_argument("--truth")
    p.add_argument("--noisy")
    p.add_argument("--region", type=_parse_region, help="X0,Y0,W,H evaluation window")
    p.add_argument("--metrics", default="auto",
                   help=f"comma list from: {', '.join(_ALL_METRICS)} (default: auto)")
    p.add_argument("--eps-rel", type=_parse_eps, default=1e-6)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("quicklook", help="8-bit dB-scaled grayscale PNG")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--db-range", type=_parse_db_range, default=(-25.0, 5.0),
                   help="LO,HI display range in dB (default -25,5)")
    p.set_defaults(func=_cmd_quicklook)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (SarError, OSError) as e:
        print(f"mtsar: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
