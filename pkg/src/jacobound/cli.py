"""Command-line entry point: ``jacobound lipschitz|certify|landscape|jacobian|oracle``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .cert import DEFAULT_INTERVALS, certify_target, exclusion_radius
from .jacbound import METHODS, jacobian_bounds
from .lipschitz import ConvergenceError, local_lipschitz, worst_case_matrix
from .model import ModelError, expand_maxpool, forward, load_network
from .oracle import EnumerationError, enumerate_exact, sample_lipschitz_lower
from .preact import Ball, layer_intervals, parse_norm

SCHEMA_VERSION = 1
LIPSCHITZ_METHODS = METHODS + ("sampled",)
TARGET_MODES = ("runner-up", "random", "least-likely")

EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_REFUSED = 4


class ConfigError(ValueError):
    pass


class Refused(RuntimeError):
    pass


def _num(x):
    """JSON-safe float: infinities become the strings "inf" / "-inf"."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def _norm_name(p: float) -> str:
    return "inf" if p == np.inf else str(int(p))


# -- argument handling -------------------------------------------------------


def parse_grid(text: str) -> list:
    parts = [s.strip() for s in text.split(",")]
    if len(parts) not in (3, 4):
        raise ConfigError("--radius-grid takes START,STOP,COUNT[,log]")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"malformed --radius-grid {text!r}") from None
    if count < 1:
        raise ConfigError("grid count must be at least 1")
    if len(parts) == 4:
        if parts[3] not in ("log", "linear"):
            raise ConfigError("grid spacing must be 'log' or 'linear'")
        log = parts[3] == "log"
    else:
        log = False
    if start < 0 or stop < start or (log and start <= 0):
        raise ConfigError("grid needs 0 <= START <= STOP (START > 0 for log spacing)")
    if log:
        return np.geomspace(start, stop, count).tolist()
    return np.linspace(start, stop, count).tolist()


def parse_methods(text: str, allowed=LIPSCHITZ_METHODS) -> list:
    names = [m.strip() for m in text.split(",") if m.strip()]
    if names == ["all"]:
        return list(allowed)
    bad = [m for m in names if m not in allowed]
    if bad or not names:
        raise ConfigError(f"unknown method(s) {bad}; choose from {', '.join(allowed)} or 'all'")
    return names


def _read_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {what} {path}: {exc}") from None


def read_inputs(path) -> list:
    obj = _read_json(path, "inputs file")
    if not isinstance(obj, list) or not obj:
        raise ConfigError("inputs file must be a non-empty JSON array")
    out = []
    for i, item in enumerate(obj):
        if not isinstance(item, dict) or "x" not in item:
            raise ConfigError(f"input {i} needs an 'x' field")
        try:
            x = np.array(item["x"], dtype=np.float64).reshape(-1)
        except (TypeError, ValueError):
            raise ConfigError(f"input {i} has a non-numeric 'x'") from None
        label = item.get("label")
        out.append((x, None if label is None else int(label)))
    return out


def _centers(args, net) -> list:
    """``(index, x, label)`` triples from --center or --inputs [--index]."""
    if args.center:
        obj = _read_json(args.center, "center file")
        try:
            x = np.array(obj["x"] if isinstance(obj, dict) else obj, dtype=np.float64).reshape(-1)
        except (TypeError, ValueError, KeyError):
            raise ConfigError("center file must hold a JSON array of numbers") from None
        items = [(0, x, obj.get("label") if isinstance(obj, dict) else None)]
    elif args.inputs:
        items = [(i, x, lab) for i, (x, lab) in enumerate(read_inputs(args.inputs))]
        if args.index is not None:
            if not 0 <= args.index < len(items):
                raise ConfigError(f"--index {args.index} out of range for {len(items)} inputs")
            items = [items[args.index]]
    else:
        raise ConfigError("give --center PATH or --inputs PATH")
    for i, x, _ in items:
        if x.size != net.input_dim:
            raise ConfigError(f"input {i} has dimension {x.size}, model expects {net.input_dim}")
        if not np.all(np.isfinite(x)):
            raise ConfigError(f"input {i} is not finite")
    return items


def _radii(args) -> list:
    if args.radius is not None and args.radius_grid:
        raise ConfigError("--radius and --radius-grid are exclusive")
    if args.radius_grid:
        return parse_grid(args.radius_grid)
    if args.radius is None:
        raise ConfigError("give --radius R or --radius-grid START,STOP,COUNT[,log]")
    if not (args.radius >= 0 and math.isfinite(args.radius)):
        raise ConfigError("--radius must be a finite non-negative number")
    return [args.radius]


def _load_model(path):
    try:
        net = load_network(path)
    except OSError as exc:
        raise ModelError(f"cannot read model {path}: {exc.strerror}") from None
    return expand_maxpool(net) if net.maxpools else net


# -- commands ----------------------------------------------------------------


def cmd_lipschitz(args, net, p):
    methods = parse_methods(args.method)
    radii = _radii(args)
    rows = []
    for idx, x, _ in _centers(args, net):
        for R in radii:
            ball = Ball(x, R, p)
            row = {"input": idx, "radius": R}
            for m in methods:
                if m == "sampled":
                    row[m] = sample_lipschitz_lower(net, ball, args.samples, args.seed)
                else:
                    row[m] = local_lipschitz(net, ball, m, args.threads).value
            rows.append(row)
    return {"methods": methods, "rows": rows}, ["input", "radius"] + methods


def _targets_for(mode, logits, c, rng):
    others = [j for j in range(logits.size) if j != c]
    if mode == "runner-up":
        return [max(others, key=lambda j: (logits[j], -j))]
    if mode == "least-likely":
        return [min(others, key=lambda j: (logits[j], j))]
    return [int(rng.choice(others))]


def cmd_certify(args, net, p):
    if not args.inputs:
        raise ConfigError("certify needs --inputs PATH with labelled examples")
    if net.output_dim < 2:
        raise ConfigError("certification needs at least two outputs")
    modes = [m.strip() for m in args.target_modes.split(",") if m.strip()]
    bad = [m for m in modes if m not in TARGET_MODES]
    if bad or not modes:
        raise ConfigError(f"unknown target mode(s) {bad}; choose from {', '.join(TARGET_MODES)}")
    method = parse_methods(args.method, METHODS[:-1])
    if len(method) != 1:
        raise ConfigError("certify takes a single bound method")
    if not args.r_max > 0:
        raise ConfigError("--r-max must be positive")
    rng = np.random.default_rng(args.seed)
    rows, per_mode = [], {m: [] for m in modes}
    for idx, x, label in _centers(args, net):
        if label is None:
            raise ConfigError(f"input {idx} has no label")
        logits = forward(net, x)[0]
        pred = int(np.argmax(logits))
        for mode in modes:
            # drawn for every input so the random targets do not depend on which inputs are skipped
            targets = _targets_for(mode, logits, label, rng)
            if pred != label:
                if args.strict:
                    raise Refused(f"input {idx} is classified as {pred}, labelled {label}")
                rows.append({"input": idx, "label": label, "mode": mode, "target": targets[0],
                             "margin": None, "radius": None, "skipped": "misclassified"})
                continue
            tc = certify_target(net, x, label, targets[0], p, args.r_max, args.intervals, method[0])
            per_mode[mode].append(tc.radius)
            rows.append({"input": idx, "label": label, "mode": mode, "target": tc.target,
                         "margin": tc.margin, "radius": tc.radius, "skipped": ""})
    mean = {m: (float(np.mean(v)) if v else None) for m, v in per_mode.items()}
    return (
        {"method": method[0], "intervals": args.intervals, "r_max": args.r_max, "rows": rows, "mean": mean},
        ["input", "label", "mode", "target", "margin", "radius", "skipped"],
    )


def cmd_landscape(args, net, p):
    if not args.r_max > 0:
        raise ConfigError("--r-max must be positive")
    outs = range(net.output_dim) if args.output_index is None else [args.output_index]
    for j in outs:
        if not 0 <= j < net.output_dim:
            raise ConfigError(f"--output-index {j} out of range")
    rows = []
    for idx, x, _ in _centers(args, net):
        for j in outs:
            res = exclusion_radius(net, x, j, p, args.r_max)
            rows.append({"input": idx, "output": j, "radius": res.radius, "witness": res.witness, "sign": res.sign})
    radii = [r["radius"] for r in rows]
    return {"r_max": args.r_max, "rows": rows, "mean": float(np.mean(radii))}, ["input", "output", "radius", "witness", "sign"]


def cmd_jacobian(args, net, p):
    method = parse_methods(args.method, METHODS[:-1])
    if len(method) != 1:
        raise ConfigError("jacobian takes a single bound method")
    radii = _radii(args)
    if len(radii) != 1:
        raise ConfigError("jacobian takes a single --radius")
    items = _centers(args, net)
    if len(items) != 1:
        raise ConfigError("jacobian needs one center; use --index with --inputs")
    _, x, _ = items[0]
    li = layer_intervals(net, Ball(x, radii[0], p))
    jb = jacobian_bounds(net, li, method[0], args.threads)
    depths = [l for l in range(1, len(jb.lower) + 1) if jb.lower[l - 1] is not None] if args.all_levels else [1]
    levels = [{"level": l, "lower": jb.level(l)[0], "upper": jb.level(l)[1]} for l in depths]
    rows = [
        {"level": lv["level"], "row": r, "col": c, "lower": lv["lower"][r, c], "upper": lv["upper"][r, c]}
        for lv in levels
        for r in range(lv["lower"].shape[0])
        for c in range(lv["lower"].shape[1])
    ]
    report = {"method": method[0], "radius": radii[0], "levels": levels, "M": worst_case_matrix(jb), "rows": rows}
    return report, ["level", "row", "col", "lower", "upper"]


def cmd_oracle(args, net, p):
    radii = _radii(args)
    rows = []
    for idx, x, _ in _centers(args, net):
        for R in radii:
            ball = Ball(x, R, p)
            row = {"input": idx, "radius": R, "sampled": sample_lipschitz_lower(net, ball, args.samples, args.seed)}
            try:
                en = enumerate_exact(net, layer_intervals(net, ball), cap=args.cap)
                row.update(unstable=len(en.unstable), lower=en.lower, upper=en.upper)
            except EnumerationError as exc:
                row.update(unstable=None, lower=None, upper=None, note=str(exc))
            rows.append(row)
    flat = [{k: r[k] for k in ("input", "radius", "sampled", "unstable")} for r in rows]
    return {"samples": args.samples, "seed": args.seed, "rows": rows, "_csv": flat}, ["input", "radius", "sampled", "unstable"]


COMMANDS = {
    "lipschitz": cmd_lipschitz,
    "certify": cmd_certify,
    "landscape": cmd_landscape,
    "jacobian": cmd_jacobian,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jacobound", description="Certified Jacobian and Lipschitz bounds for feed-forward networks.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--model", required=True, help="network JSON file")
        sp.add_argument("--p", default="inf", choices=["1", "2", "inf"], help="input ball norm")
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--center", help="JSON array with the ball center")
        src.add_argument("--inputs", help='JSON array of {"x": [...], "label": int}')
        sp.add_argument("--index", type=int, help="use only this entry of --inputs")
        sp.add_argument("--radius", type=float)
        sp.add_argument("--radius-grid", help="START,STOP,COUNT[,log]")
        default_method = "all" if name == "lipschitz" else "recurjac-b"
        sp.add_argument("--method", default=default_method, help="comma-separated methods, or 'all'")
        sp.add_argument("--intervals", type=int, default=DEFAULT_INTERVALS, help="integration intervals for certify")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int, default=1000, help="sample count for the sampled lower bound")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--r-max", type=float, default=1.0, help="search ceiling for certify/landscape")
        sp.add_argument("--target-modes", default=",".join(TARGET_MODES))
        sp.add_argument("--output-index", type=int, help="landscape: output coordinate (default: all)")
        sp.add_argument("--all-levels", action="store_true", help="jacobian: dump every depth")
        sp.add_argument("--cap", type=int, default=16, help="oracle: most unstable neurons to enumerate")
        sp.add_argument("--strict", action="store_true", help="certify: refuse misclassified inputs")
        sp.add_argument("--format", default="json", choices=["json", "csv"])
        sp.add_argument("--out", help="write here instead of stdout")
    return ap


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else _cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = _num(v)
        return v if isinstance(v, str) else repr(v)
    return v


def render(command, args, p, report, columns) -> str:
    flat = report.pop("_csv", report["rows"])
    if args.format == "csv":
        return _csv_text(flat, columns)
    head = {"schema_version": SCHEMA_VERSION, "command": command, "model": args.model, "p": _norm_name(p)}
    return json.dumps(_jsonable({**head, **report}), indent=2, allow_nan=False) + "\n"


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.threads < 1 or args.samples < 1 or args.intervals < 1:
            raise ConfigError("--threads, --samples and --intervals must be positive")
        if args.index is not None and not args.inputs:
            raise ConfigError("--index needs --inputs")
        p = parse_norm(args.p)
        net = _load_model(args.model)
        report, columns = COMMANDS[args.command](args, net, p)
        text = render(args.command, args, p, report, columns)
    except ConfigError as exc:
        print(f"jacobound: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"jacobound: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except Refused as exc:
        print(f"jacobound: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except ConvergenceError as exc:
        print(f"jacobound: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
