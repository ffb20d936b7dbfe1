"""Sample ingestion, model persistence, reports and SVG contour plots.

All emitters are byte-stable: fixed column order, fixed number formatting,
no timestamps.
"""

from __future__ import annotations

import csv
import io
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from . import __version__
from .errors import (
    BadNumeric,
    InconsistentEnergy,
    Infeasible,
    MissingHeader,
    OutOfRange,
    SampleFileError,
    SingularInversion,
)
from .explorer import ExplorationResult, SurrogateModels
from .netspec import BITS_PER_KB, ShapeConventions
from .surrogates import (
    AccuracyModel,
    AccuracySample,
    HwSample,
    LatencyModel,
    PowerModel,
    invert_scale,
)

PathLike = Union[str, Path]

ACCURACY_HEADER = ["q", "s", "accuracy_pct"]
HW_HEADER = ["q", "s", "power_w", "latency_ms"]
HW_HEADER_ENERGY = HW_HEADER + ["energy_mj"]
ENERGY_REL_TOL = 0.01

REPORT_COLUMNS = [
    "q", "s", "P", "M",
    "pred_accuracy", "pred_power_w", "pred_latency_ms", "pred_energy_mj",
    "model_size_kb", "bram36", "gopj",
    "feasible", "extrapolated", "pareto",
]
_INT_COLUMNS = {"q", "P", "M", "bram36"}
_BOOL_COLUMNS = {"feasible", "extrapolated", "pareto"}


# ---------------------------------------------------------------------------
# sample files
# ---------------------------------------------------------------------------

def _read_rows(path: PathLike, headers: Sequence[Sequence[str]]):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for raw in reader:
            if any(cell.strip() for cell in raw):
                header = [cell.strip() for cell in raw]
                break
        if header is None:
            raise MissingHeader("file is empty", path, 1)
        if header not in [list(h) for h in headers]:
            expected = " or ".join(",".join(h) for h in headers)
            raise MissingHeader(f"header {','.join(header)!r} does not match {expected!r}", path, reader.line_num)
        rows = []
        for raw in reader:
            if not any(cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise BadNumeric(
                    f"expected {len(header)} fields, got {len(raw)}", path, reader.line_num
                )
            rows.append((reader.line_num, [cell.strip() for cell in raw]))
    if not rows:
        raise SampleFileError("no data rows", path)
    return header, rows


def _number(text: str, path, row: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise BadNumeric(f"not a number: {text!r}", path, row, col) from None
    if not math.isfinite(value):
        raise BadNumeric(f"not a finite number: {text!r}", path, row, col)
    return value


def _positive(value: float, name: str, path, row: int, col: int) -> float:
    if not value > 0:
        raise OutOfRange(f"{name} must be positive, got {value:g}", path, row, col)
    return value


def _bit_width(value: float, path, row: int) -> int:
    if value < 1 or value != int(value):
        raise OutOfRange(f"q must be a positive integer, got {value:g}", path, row, 1)
    return int(value)


def parse_accuracy_csv(path: PathLike) -> List[AccuracySample]:
    """Read ``q,s,accuracy_pct`` rows; every row becomes one sample."""
    _, rows = _read_rows(path, [ACCURACY_HEADER])
    out = []
    for line, cells in rows:
        q, s, acc = (_number(c, path, line, i + 1) for i, c in enumerate(cells))
        q = _bit_width(q, path, line)
        _positive(s, "s", path, line, 2)
        if not 0 < acc <= 100:
            raise OutOfRange(f"accuracy_pct must be in (0, 100], got {acc:g}", path, line, 3)
        out.append(AccuracySample(q, s, acc))
    return out


def parse_hw_csv(path: PathLike) -> List[HwSample]:
    """Read ``q,s,power_w,latency_ms[,energy_mj]`` rows.

    Energy defaults to power * latency; a supplied energy more than 1% away
    from that product is rejected.
    """
    header, rows = _read_rows(path, [HW_HEADER, HW_HEADER_ENERGY])
    out = []
    for line, cells in rows:
        vals = [_number(c, path, line, i + 1) for i, c in enumerate(cells)]
        q = _bit_width(vals[0], path, line)
        for i, name in enumerate(header[1:], start=1):
            _positive(vals[i], name, path, line, i + 1)
        s, pw, lat = vals[1:4]
        energy = None
        if len(vals) == 5:
            energy = vals[4]
            product = pw * lat
            if abs(energy - product) > ENERGY_REL_TOL * product:
                raise InconsistentEnergy(
                    f"energy_mj {energy:g} differs from power_w*latency_ms = {product:g} by more than 1%",
                    path, line, 5,
                )
        out.append(HwSample(q, s, pw, lat, energy))
    return out


def write_accuracy_csv(samples: Iterable[AccuracySample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ACCURACY_HEADER)
    for x in samples:
        w.writerow([int(x.q), repr(float(x.s)), repr(float(x.accuracy_pct))])
    return buf.getvalue()


def write_hw_csv(samples: Iterable[HwSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HW_HEADER_ENERGY)
    for x in samples:
        w.writerow([int(x.q)] + [repr(float(v)) for v in (x.s, x.power_w, x.latency_ms, x.energy_mj)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# model documents
# ---------------------------------------------------------------------------

def models_to_json(
    accuracy: Optional[AccuracyModel] = None,
    power: Optional[PowerModel] = None,
    latency: Optional[LatencyModel] = None,
) -> str:
    doc = {"tool_version": __version__}
    for key, model in (("accuracy", accuracy), ("power", power), ("latency", latency)):
        if model is not None:
            doc[key] = model.to_dict()
    return json.dumps(doc, indent=2) + "\n"


def models_from_json(text: str, source: PathLike = "<models>") -> Dict[str, object]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SampleFileError(f"invalid JSON: {exc.msg}", source, exc.lineno, exc.colno) from None
    out: Dict[str, object] = {}
    for key, cls in (("accuracy", AccuracyModel), ("power", PowerModel), ("latency", LatencyModel)):
        if key in doc:
            try:
                out[key] = cls.from_dict(doc[key])
            except (TypeError, KeyError) as exc:
                raise SampleFileError(f"bad {key} model: {exc}", source) from None
    return out


def load_models(path: PathLike) -> Dict[str, object]:
    return models_from_json(Path(path).read_text(), path)


def require_models(found: Dict[str, object], source: PathLike = "<models>") -> SurrogateModels:
    missing = [k for k in ("accuracy", "power", "latency") if k not in found]
    if missing:
        raise SampleFileError(f"model document lacks {', '.join(missing)}", source)
    return SurrogateModels(found["accuracy"], found["power"], found["latency"])


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if value is None:
        return ""
    return format(float(value), ".6g")


@dataclass
class Report:
    metadata: Dict[str, str] = field(default_factory=dict)
    rows: List[Dict[str, object]] = field(default_factory=list)


def build_report(
    result: ExplorationResult,
    models: Optional[SurrogateModels] = None,
    conventions: Optional[ShapeConventions] = None,
    include_all: bool = False,
) -> Report:
    """Rows for ranked candidates (plus the rest in grid order if ``include_all``)."""
    req = result.request
    meta = {
        "tool_version": __version__,
        "target_accuracy_pct": _fmt(req.target_accuracy_pct),
        "freq_mhz": _fmt(req.freq_hz / 1e6),
        "q_range": f"{req.q_range[0]},{req.q_range[1]}",
        "s_range": f"{_fmt(req.s_range[0])},{_fmt(req.s_range[1])}",
    }
    if conventions is not None:
        meta["conv_padding"] = conventions.conv_padding
        meta["pool_rounding"] = conventions.pool_rounding
    if models is not None:
        for name, m in (("accuracy", models.accuracy), ("power", models.power), ("latency", models.latency)):
            meta[f"{name}_rmse"] = _fmt(m.rmse) if m.rmse is not None else "n/a"
    meta["n_evaluated"] = str(len(result.evaluated))
    meta["n_feasible"] = str(len(result.ranked))
    chosen = result.chosen
    meta["chosen"] = f"{chosen.point.q},{_fmt(chosen.point.s)}" if chosen else "none"

    on_front = {c.point for c in result.pareto}
    cands = list(result.ranked)
    if include_all:
        cands += [c for c in result.evaluated if not c.feasible]
    rows = []
    for c in cands:
        rows.append({
            "q": c.point.q,
            "s": float(_fmt(c.point.s)),
            "P": c.P,
            "M": c.M,
            "pred_accuracy": _round(c.pred_accuracy_pct),
            "pred_power_w": _round(c.pred_power_w),
            "pred_latency_ms": _round(c.pred_latency_ms),
            "pred_energy_mj": _round(c.pred_energy_mj),
            "model_size_kb": _round(c.model_size_bits / BITS_PER_KB),
            "bram36": c.bram36_estimate,
            "gopj": _round(c.gopj_estimate),
            "feasible": c.feasible,
            "extrapolated": c.extrapolated,
            "pareto": c.point in on_front,
        })
    return Report(meta, rows)


def _round(x: float) -> float:
    return float(format(x, ".6g"))


def write_report(report: Report, fmt: str = "csv") -> bytes:
    if fmt == "csv":
        buf = io.StringIO()
        for k, v in report.metadata.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in report.rows:
            w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
        return buf.getvalue().encode()
    if fmt == "json":
        rows = [{c: _json_value(row[c]) for c in REPORT_COLUMNS} for row in report.rows]
        doc = {"metadata": report.metadata, "rows": rows}
        return (json.dumps(doc, indent=2, allow_nan=False) + "\n").encode()
    raise ValueError(f"unknown report format {fmt!r}")


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _typed(col: str, text: str, source, line: int, idx: int):
    if col in _BOOL_COLUMNS:
        if text not in ("true", "false"):
            raise BadNumeric(f"{col} must be true/false, got {text!r}", source, line, idx)
        return text == "true"
    if col in _INT_COLUMNS:
        try:
            return int(text)
        except ValueError:
            raise BadNumeric(f"{col} must be an integer, got {text!r}", source, line, idx) from None
    try:
        return float(text)
    except ValueError:
        raise BadNumeric(f"{col} must be numeric, got {text!r}", source, line, idx) from None


def parse_report(data: bytes, fmt: str = "csv", source: PathLike = "<report>") -> Report:
    text = data.decode()
    if fmt == "json":
        doc = json.loads(text)
        rows = []
        for row in doc["rows"]:
            rows.append({c: (math.nan if row[c] is None else row[c]) for c in REPORT_COLUMNS})
        return Report(dict(doc["metadata"]), rows)
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    meta: Dict[str, str] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("# "):
        key, _, value = lines[i][2:].partition("=")
        meta[key] = value
        i += 1
    if i >= len(lines) or lines[i].split(",") != REPORT_COLUMNS:
        raise MissingHeader("report header missing or malformed", source, i + 1)
    rows = []
    for line_no, cells in enumerate(csv.reader(lines[i + 1:]), start=i + 2):
        rows.append({c: _typed(c, t, source, line_no, k + 1) for k, (c, t) in enumerate(zip(REPORT_COLUMNS, cells))})
    return Report(meta, rows)


# ---------------------------------------------------------------------------
# SVG contours
# ---------------------------------------------------------------------------

_W, _H = 820, 380
_PANEL = 340, 260
_ORIGINS = ((70, 50), (470, 50))


def _axis(svg, origin, xlabel, ylabel, xr, yr, title):
    ox, oy = origin
    pw, ph = _PANEL
    g = ET.SubElement(svg, "g", {"class": "panel"})
    ET.SubElement(g, "rect", {"x": str(ox), "y": str(oy), "width": str(pw), "height": str(ph),
                              "fill": "none", "stroke": "#444"})
    ET.SubElement(g, "text", {"x": str(ox + pw / 2), "y": str(oy - 12), "text-anchor": "middle"}).text = title
    ET.SubElement(g, "text", {"x": str(ox + pw / 2), "y": str(oy + ph + 36), "text-anchor": "middle",
                              "class": "xlabel"}).text = xlabel
    ET.SubElement(g, "text", {"x": str(ox - 48), "y": str(oy + ph / 2), "class": "ylabel",
                              "transform": f"rotate(-90 {ox - 48} {oy + ph / 2})",
                              "text-anchor": "middle"}).text = ylabel
    for frac in (0.0, 0.5, 1.0):
        xv = xr[0] + frac * (xr[1] - xr[0])
        yv = yr[0] + frac * (yr[1] - yr[0])
        ET.SubElement(g, "text", {"x": f"{ox + frac * pw:.2f}", "y": str(oy + ph + 16),
                                  "text-anchor": "middle", "class": "tick"}).text = f"{xv:.4g}"
        ET.SubElement(g, "text", {"x": str(ox - 6), "y": f"{oy + ph - frac * ph:.2f}",
                                  "text-anchor": "end", "class": "tick"}).text = f"{yv:.4g}"
    return g


def _project(origin, xr, yr, x, y):
    ox, oy = origin
    pw, ph = _PANEL
    px = ox + (x - xr[0]) / (xr[1] - xr[0]) * pw
    py = oy + ph - (y - yr[0]) / (yr[1] - yr[0]) * ph
    return f"{px:.2f},{py:.2f}"


def render_contours_svg(
    accuracy_levels: Sequence[float],
    models: SurrogateModels,
    q_range: Tuple[int, int] = (2, 8),
    s_range: Tuple[float, float] = (0.5, 8.0),
) -> bytes:
    """Accuracy contours in (q, s) and energy-vs-q curves along each contour.

    Levels that no q in range can reach are replaced by a ``warning`` text
    element.
    """
    q_lo, q_hi = int(q_range[0]), int(q_range[1])
    if q_hi <= q_lo:
        raise ValueError(f"q range must span at least two values, got {q_range}")
    s_lo, s_hi = float(s_range[0]), float(s_range[1])
    n_fine = 8 * (q_hi - q_lo) + 1
    fine_q = [q_lo + i * (q_hi - q_lo) / (n_fine - 1) for i in range(n_fine)]

    contours = []
    for level in accuracy_levels:
        line = [(q, s) for q, s in _contour_points(models.accuracy, level, fine_q) if s_lo <= s <= s_hi]
        curve = []
        for q, s in _contour_points(models.accuracy, level, range(q_lo, q_hi + 1)):
            if s_lo <= s <= s_hi:
                curve.append((q, s, float(models.power.value(q, s) * models.latency.value(q, s))))
        contours.append((level, line, curve))

    energies = [e for _, _, curve in contours for _, _, e in curve]
    e_lo, e_hi = (min(energies), max(energies)) if energies else (0.0, 1.0)
    if e_hi - e_lo < 1e-9:
        e_lo, e_hi = e_lo - 0.5, e_hi + 0.5
    pad = 0.05 * (e_hi - e_lo)
    e_range = (e_lo - pad, e_hi + pad)

    svg = ET.Element("svg", {"xmlns": "http://www.w3.org/2000/svg", "width": str(_W),
                             "height": str(_H), "viewBox": f"0 0 {_W} {_H}",
                             "font-family": "sans-serif", "font-size": "11"})
    left = _axis(svg, _ORIGINS[0], "q (bits)", "s (filter scale)", (q_lo, q_hi), (s_lo, s_hi),
                 "accuracy contours")
    right = _axis(svg, _ORIGINS[1], "q (bits)", "energy (mJ)", (q_lo, q_hi), e_range,
                  "energy along contour")
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    warn_y = _H - 8
    for k, (level, line, curve) in enumerate(contours):
        color = palette[k % len(palette)]
        tag = _fmt(level)
        if not line:
            ET.SubElement(svg, "text", {"x": "10", "y": str(warn_y), "class": "warning",
                                        "fill": "#b00"}).text = f"accuracy {tag}%: not reachable in range"
            warn_y -= 14
            continue
        pts = " ".join(_project(_ORIGINS[0], (q_lo, q_hi), (s_lo, s_hi), q, s) for q, s in line)
        ET.SubElement(left, "polyline", {"class": "accuracy-contour", "data-level": tag,
                                         "points": pts, "fill": "none", "stroke": color})
        end = _project(_ORIGINS[0], (q_lo, q_hi), (s_lo, s_hi), *line[-1]).split(",")
        ET.SubElement(left, "text", {"x": end[0], "y": end[1], "fill": color,
                                     "class": "level"}).text = f"{tag}%"
        if curve:
            pts = " ".join(_project(_ORIGINS[1], (q_lo, q_hi), e_range, q, e) for q, _, e in curve)
            ET.SubElement(right, "polyline", {"class": "energy-curve", "data-level": tag,
                                              "points": pts, "fill": "none", "stroke": color})
            qmin, smin, emin = min(curve, key=lambda t: (t[2], t[0]))
            xy = _project(_ORIGINS[1], (q_lo, q_hi), e_range, qmin, emin).split(",")
            ET.SubElement(right, "circle", {"cx": xy[0], "cy": xy[1], "r": "3", "fill": color,
                                            "class": "minimum", "data-q": str(qmin),
                                            "data-s": _fmt(smin)})
            ET.SubElement(right, "text", {"x": xy[0], "y": f"{float(xy[1]) - 6:.2f}", "fill": color,
                                          "class": "level"}).text = f"{tag}%"
    ET.indent(svg)
    return ET.tostring(svg, encoding="utf-8", xml_declaration=True) + b"\n"


def _contour_points(model: AccuracyModel, level: float, q_values) -> List[Tuple[float, float]]:
    out = []
    for q in q_values:
        try:
            out.append((q, invert_scale(model, q, level)))
        except (Infeasible, SingularInversion):
            continue
    return out
