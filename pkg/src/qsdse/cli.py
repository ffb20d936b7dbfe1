"""Command-line entry point.

Exit codes: 0 success (including an empty feasible set), 2 input or parse
error, 3 fit failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import accel_model as am
from . import cli_io
from .errors import FitError, QsdseError
from .explorer import ExplorationRequest, explore
from .netspec import DesignPoint, ShapeConventions, analytics, build_network
from .published import fit_accuracy_robust
from .surrogates import (
    fit_accuracy,
    fit_energy,
    predict_accuracy,
    predict_energy,
    predict_latency,
    predict_power,
)

EXIT_OK, EXIT_INPUT, EXIT_FIT = 0, 2, 3


def _pair(text, cast):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return tuple(cast(p) for p in parts)


def _int_pair(text):
    return _pair(text, int)


def _float_pair(text):
    return _pair(text, float)


def _conventions(args) -> ShapeConventions:
    return ShapeConventions(args.padding, args.pool_rounding)


def _emit(data: bytes, out) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _load_doc(path):
    return cli_io.load_models(path) if path else {}


def _models(args):
    """Models from --model-in, overridden by fits of any CSVs given on the command line."""
    doc = _load_doc(args.model_in)
    if getattr(args, "accuracy_csv", None):
        doc["accuracy"], _ = fit_accuracy_robust(cli_io.parse_accuracy_csv(args.accuracy_csv))
    if getattr(args, "hw_csv", None):
        doc["power"], doc["latency"], _ = fit_energy(cli_io.parse_hw_csv(args.hw_csv))
    return cli_io.require_models(doc, args.model_in or "<command line>")


def cmd_fit_accuracy(args) -> int:
    samples = cli_io.parse_accuracy_csv(args.accuracy_csv)
    if args.form == "auto":
        model, report = fit_accuracy_robust(samples, refine=args.refine)
    else:
        model, report = fit_accuracy(samples, refine=args.refine, form=args.form)
    doc = _load_doc(args.model_in)
    doc["accuracy"] = model
    _emit(cli_io.models_to_json(doc.get("accuracy"), doc.get("power"), doc.get("latency")).encode(), args.model_out)
    print(f"accuracy fit ({model.form}): rmse={report.rmse:.6g} n={report.n_points}", file=sys.stderr)
    return EXIT_OK


def cmd_fit_hw(args) -> int:
    samples = cli_io.parse_hw_csv(args.hw_csv)
    power, latency, report = fit_energy(samples, joint=args.joint)
    doc = _load_doc(args.model_in)
    doc["power"], doc["latency"] = power, latency
    _emit(cli_io.models_to_json(doc.get("accuracy"), power, latency).encode(), args.model_out)
    print(f"energy fit: rmse={report.rmse:.6g} mJ n={report.n_points}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    models = _models(args)
    point = DesignPoint(args.q, args.s)
    out = {
        "q": point.q,
        "s": point.s,
        "pred_accuracy": predict_accuracy(models.accuracy, point),
        "pred_power_w": predict_power(models.power, point),
        "pred_latency_ms": predict_latency(models.latency, point),
        "pred_energy_mj": predict_energy(models.power, models.latency, point),
    }
    _emit((json.dumps(out, indent=2) + "\n").encode(), None)
    return EXIT_OK


def cmd_explore(args) -> int:
    models = _models(args)
    req = ExplorationRequest(args.target, args.q_range, args.s_range, args.freq_mhz * 1e6)
    conv = _conventions(args)
    result = explore(req, models, conv)
    report = cli_io.build_report(result, models, conv, include_all=args.all)
    _emit(cli_io.write_report(report, args.format), args.out)
    if result.chosen is None:
        print(f"no feasible point reaches {args.target}% accuracy", file=sys.stderr)
    else:
        c = result.chosen
        print(f"chosen q={c.point.q} s={c.point.s:g} energy={c.pred_energy_mj:.6g} mJ", file=sys.stderr)
    return EXIT_OK


def cmd_analyze_net(args) -> int:
    net = build_network(args.s, _conventions(args), args.num_classes)
    a = analytics(net, args.q)
    out = {
        "layers": [
            {"name": l.name, "kind": l.kind, "in_shape": list(l.in_shape),
             "out_shape": list(l.out_shape), "macs": l.macs, "weights": l.weights}
            for l in net.layers
        ],
        "total_macs": a.total_macs,
        "weight_count": a.weight_count,
        "model_size_bits": a.model_size_bits,
        "largest_fmap_bits": a.largest_fmap_bits,
        "c_comp": a.c_comp,
        "c_size": a.c_size,
        "c_fmap": a.c_fmap,
    }
    _emit((json.dumps(out, indent=2) + "\n").encode(), None)
    return EXIT_OK


def cmd_accel_model(args) -> int:
    point = DesignPoint(args.q, args.s)
    cfg = am.derive_config(point, args.freq_mhz * 1e6)
    net = build_network(args.s, _conventions(args))
    lat = am.network_latency(net, cfg)
    mem = am.memory_plan(net, cfg)
    out = {
        "P": cfg.P,
        "M": cfg.M,
        "layers": [
            {"name": c.name, "cycles": c.cycles, "macs": c.macs, "utilization": c.utilization}
            for c in lat.layers
        ],
        "total_cycles": lat.total_cycles,
        "first_layer_cycles": lat.first_layer_cycles,
        "latency_ms": lat.ms,
        "memory": {
            "width_bits": mem.width_bits,
            "fmap_depth": mem.fmap_depth,
            "weight_depth": mem.weight_depth,
            "bram36_estimate": mem.bram36_estimate,
        },
    }
    _emit((json.dumps(out, indent=2) + "\n").encode(), None)
    return EXIT_OK


def cmd_contours(args) -> int:
    models = _models(args)
    svg = cli_io.render_contours_svg(args.levels, models, args.q_range, args.s_range)
    _emit(svg, args.svg_out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsdse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def net_flags(sp):
        sp.add_argument("--padding", choices=("same", "valid"), default="same")
        sp.add_argument("--pool-rounding", choices=("floor", "ceil"), default="floor")

    def model_flags(sp):
        sp.add_argument("--model-in")
        sp.add_argument("--accuracy-csv")
        sp.add_argument("--hw-csv")

    sp = sub.add_parser("fit-accuracy", help="fit the accuracy surface from a q,s,accuracy_pct CSV")
    sp.add_argument("--accuracy-csv", required=True)
    sp.add_argument("--refine", action="store_true")
    sp.add_argument("--form", choices=("auto", "full", "separable"), default="auto")
    sp.add_argument("--model-in")
    sp.add_argument("--model-out")
    sp.set_defaults(func=cmd_fit_accuracy)

    sp = sub.add_parser("fit-hw", help="fit power and latency from a hardware CSV")
    sp.add_argument("--hw-csv", required=True)
    sp.add_argument("--joint", action="store_true", help="polish both fits jointly on energy")
    sp.add_argument("--model-in")
    sp.add_argument("--model-out")
    sp.set_defaults(func=cmd_fit_hw)

    sp = sub.add_parser("predict", help="evaluate the surrogates at one (q, s)")
    model_flags(sp)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("explore", help="rank hardware-friendly points under an accuracy target")
    model_flags(sp)
    net_flags(sp)
    sp.add_argument("--target", type=float, required=True)
    sp.add_argument("--q-range", type=_int_pair, default=(2, 8))
    sp.add_argument("--s-range", type=_float_pair, default=(0.5, 8.0))
    sp.add_argument("--freq-mhz", type=float, default=100.0)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--all", action="store_true", help="also list infeasible points")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_explore)

    sp = sub.add_parser("analyze-net", help="shapes and counts of the network at scale s")
    net_flags(sp)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--q", type=int, default=8)
    sp.add_argument("--num-classes", type=int, default=30)
    sp.set_defaults(func=cmd_analyze_net)

    sp = sub.add_parser("accel-model", help="analytical cycles and memories at (q, s)")
    net_flags(sp)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--freq-mhz", type=float, default=100.0)
    sp.set_defaults(func=cmd_accel_model)

    sp = sub.add_parser("contours", help="SVG of accuracy contours and energy-vs-q curves")
    model_flags(sp)
    sp.add_argument("--levels", type=lambda t: [float(x) for x in t.split(",")], default=[90.0])
    sp.add_argument("--q-range", type=_int_pair, default=(2, 8))
    sp.add_argument("--s-range", type=_float_pair, default=(0.5, 8.0))
    sp.add_argument("--svg-out")
    sp.set_defaults(func=cmd_contours)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (QsdseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
