"""Command-line front end.

Subcommands: truncate, scan, optimize, compare-ideal, calibrate. Values may
come from a flat ``key = value`` file given with ``--config``; explicit flags
win over the file. Exit codes: 0 success, 2 usage/validation, 3 no heralding
event, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .optics import DetectorModel, PdcParams
from .optimizer import ScanSpec, map_points, calibrate_rep_rate, compare_ideal, evaluate, maximize
from .pipeline import DEFAULT_REP_RATE, SchemeConfig, TargetQubit, run_branches

EXIT_OK, EXIT_USAGE, EXIT_NO_EVENT, EXIT_IO = 0, 2, 3, 4

CONFIG_KEYS = {
    "alpha_sq", "eta", "eta1", "eta2", "eta3", "gamma_sq", "pair_cutoff", "coherent_cutoff",
    "ratio", "rep_rate", "objective", "range_lo", "range_hi", "grid_points",
    "eta_lo", "eta_hi", "eta_points", "published_rate",
}


class UsageError(Exception):
    """Invalid option value; reported with exit code 2."""


def read_config(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise UsageError(f"--config: {path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split(sep, 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"--config: {path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _float(name: str, raw: Any) -> float:
    try:
        x = float(raw)
    except (TypeError, ValueError):
        raise UsageError(f"--{name.replace('_', '-')}: expected a number, got {raw!r}") from None
    if not math.isfinite(x):
        raise UsageError(f"--{name.replace('_', '-')}: must be finite")
    return x


def _int(name: str, raw: Any) -> int:
    try:
        return int(str(raw))
    except ValueError:
        raise UsageError(f"--{name.replace('_', '-')}: expected an integer, got {raw!r}") from None


def _floats(name: str, raw: Any) -> list[float]:
    if isinstance(raw, (int, float)):
        return [_float(name, raw)]
    return [_float(name, part) for part in str(raw).split(",") if part.strip()]


class Options:
    """Merged view of defaults, config file and command-line flags."""

    def __init__(self, args: argparse.Namespace, defaults: dict[str, Any]):
        merged = dict(defaults)
        if getattr(args, "config", None):
            merged.update(read_config(args.config))
        for key, value in vars(args).items():
            if value is not None and key not in ("command", "config", "out", "func"):
                merged[key] = value
        self.values = merged

    def get(self, key: str, kind=float):
        raw = self.values.get(key)
        if raw is None:
            return None
        if kind is float:
            return _float(key, raw)
        if kind is int:
            return _int(key, raw)
        return raw

    def eta(self, which: str) -> float:
        x = self.get(which)
        if x is None:
            x = self.get("eta")
        name = which if self.values.get(which) is not None else "eta"
        if x is None or not 0 <= x <= 1:
            raise UsageError(f"--{name}: detector efficiency must lie in [0, 1], got {x}")
        return x

    def scheme(self, alpha_sq: float = 0.0, eta: Optional[float] = None) -> SchemeConfig:
        gamma_sq = self.get("gamma_sq")
        if not 0 <= gamma_sq < 1:
            raise UsageError(f"--gamma-sq: must lie in [0, 1), got {gamma_sq}")
        pair_cutoff = self.get("pair_cutoff", int)
        if pair_cutoff < 1:
            raise UsageError(f"--pair-cutoff: must be at least 1, got {pair_cutoff}")
        rep_rate = self.get("rep_rate")
        if not rep_rate > 0:
            raise UsageError(f"--rep-rate: must be positive, got {rep_rate}")
        if alpha_sq < 0:
            raise UsageError(f"--alpha-sq: must be non-negative, got {alpha_sq}")
        raw_cut = str(self.values.get("coherent_cutoff", "auto")).strip().lower()
        cutoff = None if raw_cut == "auto" else _int("coherent_cutoff", raw_cut)
        etas = [eta] * 3 if eta is not None else [self.eta(k) for k in ("eta1", "eta2", "eta3")]
        if eta is not None and not 0 <= eta <= 1:
            raise UsageError(f"--eta: detector efficiency must lie in [0, 1], got {eta}")
        try:
            return SchemeConfig(
                alpha=math.sqrt(alpha_sq) + 0j,
                pdc=PdcParams(gamma_sq, pair_cutoff),
                eta1=DetectorModel(etas[0]), eta2=DetectorModel(etas[1]), eta3=DetectorModel(etas[2]),
                coherent_cutoff=cutoff, rep_rate=rep_rate)
        except ValueError as exc:
            raise UsageError(f"--coherent-cutoff: {exc}") from None

    def target(self) -> Optional[TargetQubit]:
        ratio = self.get("ratio")
        if ratio is None:
            return None
        if ratio < 0:
            raise UsageError(f"--ratio: must be non-negative, got {ratio}")
        return TargetQubit.from_ratio(ratio)

    def alpha_range(self) -> tuple[float, float, int]:
        lo, hi, n = self.get("range_lo"), self.get("range_hi"), self.get("grid_points", int)
        if n < 1:
            raise UsageError(f"--grid-points: must be at least 1, got {n}")
        # a single-point grid may collapse the range onto one value
        if not (0 <= lo < hi or (n == 1 and 0 <= lo == hi)):
            raise UsageError(f"--range-lo/--range-hi: need 0 <= lo < hi, got {lo}, {hi}")
        return lo, hi, n


COMMON_DEFAULTS = {
    "eta": 0.5, "gamma_sq": 4e-4, "pair_cutoff": 2, "coherent_cutoff": "auto",
    "rep_rate": DEFAULT_REP_RATE,
}


def fmt(x: float) -> str:
    """Six significant digits, locale independent."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return format(float(x), ".6g")


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.array([lo]) if n == 1 else np.linspace(lo, hi, n)


def _csv_text(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


def _emit(args, opts: Options, text: str, started: float) -> None:
    """Write ``text`` to ``--out`` plus its manifest, or to stdout."""
    if not args.out:
        sys.stdout.write(text)
        return
    _write(args.out, text)
    manifest = {
        "tool": "qscissors",
        "version": __version__,
        "command": args.command,
        "config": {k: (v if isinstance(v, (int, float, str)) else str(v)) for k, v in sorted(opts.values.items())},
        "outputs": [str(Path(args.out))],
        "duration_s": round(time.perf_counter() - started, 6),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _write(args.out + ".manifest.json", json.dumps(manifest, indent=2) + "\n")


def cmd_truncate(args) -> int:
    started = time.perf_counter()
    opts = Options(args, {**COMMON_DEFAULTS, "alpha_sq": 0.0})
    cfg = opts.scheme(opts.get("alpha_sq"))
    target = opts.target()
    res = run_branches(cfg, target)
    report: dict[str, Any] = {
        "alpha_sq": cfg.alpha_sq,
        "eta": [cfg.eta1.eta, cfg.eta2.eta, cfg.eta3.eta],
        "gamma_sq": cfg.pdc.gamma_sq,
        "probability": res.probability,
        "rate": res.rate,
        "no_event": res.no_event,
    }
    lines = [f"probability {fmt(res.probability)}", f"rate {fmt(res.rate)}"]
    if res.no_event:
        lines.append("no heralding event: output state undefined")
    else:
        elems = res.rho_out.elems
        report["rho_out"] = {"real": elems.real.tolist(), "imag": elems.imag.tolist()}
        lines.append("rho_out (b1, rows/cols n = 0..%d)" % (elems.shape[0] - 1))
        for row in elems:
            lines.append("  " + "  ".join(f"{z.real:+.6f}{z.imag:+.6f}i" for z in row))
        if res.fidelity is not None:
            report["ratio"] = target.ratio
            report["fidelity"] = res.fidelity
            lines.append(f"fidelity {fmt(res.fidelity)}")
    print("\n".join(lines))
    if args.out:
        _emit(args, opts, json.dumps(report, indent=2) + "\n", started)
    if res.no_event:
        print("error: heralding probability below 1e-15", file=sys.stderr)
        return EXIT_NO_EVENT
    return EXIT_OK


def cmd_scan(args) -> int:
    started = time.perf_counter()
    opts = Options(args, {**COMMON_DEFAULTS, "ratio": 1.0, "range_lo": 0.0, "range_hi": 4.0,
                          "grid_points": 41, "eta_lo": 0.1, "eta_hi": 1.0, "eta_points": 10})
    lo, hi, n = opts.alpha_range()
    e_lo, e_hi, e_n = opts.get("eta_lo"), opts.get("eta_hi"), opts.get("eta_points", int)
    if not (0 <= e_lo <= e_hi <= 1) or e_n < 1:
        raise UsageError(f"--eta-lo/--eta-hi/--eta-points: need 0 <= lo <= hi <= 1 and points >= 1")
    target = opts.target() or TargetQubit()
    base = opts.scheme()
    rows = []
    for eta in _grid(e_lo, e_hi, e_n):
        d = DetectorModel(float(eta))
        spec = ScanSpec(target=target, base=replace(base, eta1=d, eta2=d, eta3=d),
                        alpha_sq_range=(lo, max(hi, lo + 1.0)), grid_points=2)
        points = map_points(lambda x: evaluate(spec, float(x)), list(_grid(lo, hi, n)), None)
        rows.extend([p.alpha_sq, float(eta), p.fidelity, p.probability, p.rate] for p in points)
    _emit(args, opts, _csv_text(["alpha_sq", "eta", "fidelity", "probability", "rate"], rows), started)
    return EXIT_OK


def cmd_optimize(args) -> int:
    started = time.perf_counter()
    opts = Options(args, {**COMMON_DEFAULTS, "ratio": 1.0, "objective": "fidelity",
                          "range_lo": 0.0, "range_hi": 16.0, "grid_points": 161})
    lo, hi, n = opts.alpha_range()
    if n < 2:
        raise UsageError("--grid-points: optimization needs at least 2 points")
    objective = opts.get("objective", str)
    if objective not in ("fidelity", "rate"):
        raise UsageError(f"--objective: expected 'fidelity' or 'rate', got {objective!r}")
    eta = opts.eta("eta")
    ratios = _floats("ratio", opts.values["ratio"])
    if any(r < 0 for r in ratios):
        raise UsageError("--ratio: must be non-negative")
    base = opts.scheme(eta=eta)
    rows, records = [], []
    for ratio in ratios:
        spec = ScanSpec(target=TargetQubit.from_ratio(ratio), base=base, alpha_sq_range=(lo, hi),
                        grid_points=n, objective=objective)
        try:
            optima = maximize(spec)
        except RuntimeError as exc:
            print(f"error: ratio {ratio}: {exc}", file=sys.stderr)
            return EXIT_NO_EVENT
        for rank, p in enumerate(optima, start=1):
            rows.append([float(ratio), float(eta), objective, rank, p.alpha_sq, p.fidelity, p.probability, p.rate])
            records.append({"ratio": ratio, "eta": eta, "objective": objective, "rank": rank, **asdict(p)})
    header = ["ratio", "eta", "objective", "rank", "alpha_sq", "fidelity", "probability", "rate"]
    if args.out and args.out.endswith(".json"):
        text = json.dumps(records, indent=2) + "\n"
    else:
        text = _csv_text(header, rows)
    _emit(args, opts, text, started)
    return EXIT_OK


def cmd_compare_ideal(args) -> int:
    started = time.perf_counter()
    opts = Options(args, {**COMMON_DEFAULTS, "ratio": "0.4,1,2", "range_lo": 0.0, "range_hi": 4.0,
                          "grid_points": 401})
    lo, hi, n = opts.alpha_range()
    if n < 2:
        raise UsageError("--grid-points: comparison needs at least 2 points")
    eta = opts.eta("eta")
    ratios = _floats("ratio", opts.values["ratio"])
    if any(r < 0 for r in ratios):
        raise UsageError("--ratio: must be non-negative")
    rows = compare_ideal(ratios, eta, (lo, hi), n, base=opts.scheme(eta=eta))
    text = _csv_text(["ratio", "alpha_sq", "f_experimental", "f_ideal"],
                     [[r.ratio, r.alpha_sq, r.f_experimental, r.f_ideal] for r in rows])
    _emit(args, opts, text, started)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    started = time.perf_counter()
    opts = Options(args, {**COMMON_DEFAULTS, "alpha_sq": 0.72, "published_rate": 4533.0})
    cfg = opts.scheme(opts.get("alpha_sq"))
    published = opts.get("published_rate")
    if not published > 0:
        raise UsageError(f"--published-rate: must be positive, got {published}")
    try:
        rep = calibrate_rep_rate(cfg, published)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_EVENT
    print(f"rep_rate {rep:.9g}")
    if args.out:
        _emit(args, opts, json.dumps({"rep_rate": rep, "anchor_alpha_sq": cfg.alpha_sq,
                                      "published_rate": published}, indent=2) + "\n", started)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--eta", help="shared detector efficiency (default 0.5)")
    for i in (1, 2, 3):
        p.add_argument(f"--eta{i}", help=f"efficiency of detector D{i}")
    p.add_argument("--gamma-sq", dest="gamma_sq", help="pair probability per pulse (default 4e-4)")
    p.add_argument("--pair-cutoff", dest="pair_cutoff", help="max photon pairs kept (default 2)")
    p.add_argument("--coherent-cutoff", dest="coherent_cutoff", help="integer or 'auto'")
    p.add_argument("--rep-rate", dest="rep_rate", help="pulses per second")
    p.add_argument("--out", help="output file; a .manifest.json is written next to it")


def _add_range(p: argparse.ArgumentParser) -> None:
    p.add_argument("--range-lo", dest="range_lo")
    p.add_argument("--range-hi", dest="range_hi")
    p.add_argument("--grid-points", dest="grid_points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qscissors", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("truncate", help="evaluate one configuration")
    _add_common(p)
    p.add_argument("--alpha-sq", dest="alpha_sq")
    p.add_argument("--ratio", help="target |c1/c0|; adds the fidelity to the report")
    p.set_defaults(func=cmd_truncate)

    p = sub.add_parser("scan", help="2-D grid over |alpha|^2 and eta (CSV)")
    _add_common(p)
    _add_range(p)
    p.add_argument("--eta-lo", dest="eta_lo")
    p.add_argument("--eta-hi", dest="eta_hi")
    p.add_argument("--eta-points", dest="eta_points")
    p.add_argument("--ratio")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("optimize", help="all local optima of fidelity or rate")
    _add_common(p)
    _add_range(p)
    p.add_argument("--ratio", help="target |c1/c0|, comma-separated for several")
    p.add_argument("--objective", choices=["fidelity", "rate"])
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare-ideal", help="experimental vs ideal scissors fidelity (CSV)")
    _add_common(p)
    _add_range(p)
    p.add_argument("--ratio", help="comma-separated target ratios (default 0.4,1,2)")
    p.set_defaults(func=cmd_compare_ideal)

    p = sub.add_parser("calibrate", help="pulse rate reproducing a published event rate")
    _add_common(p)
    p.add_argument("--alpha-sq", dest="alpha_sq")
    p.add_argument("--published-rate", dest="published_rate")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
