"""Command line entry points: sampling, transforming, verifying, analytics
tables, and SVG figure rendering.

Every output embeds provenance: the package version, the resolved seed, and
a hash of the resolved configuration. Seed resolution order is the --seed
flag, then the EXCISE_SEED environment variable, then OS entropy. Exit codes
follow the usual convention: 0 for success (and for passing verifications),
1 for a verification that ran but failed its statistical check, 2 for usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys

import numpy as np

from . import __version__
from .analytics import (T_density, g_density, phi_table, rayleigh_density,
                        tau_e_density)
from .montecarlo import (_config_hash, report_to_json, verify_corollary2,
                         verify_counts, verify_eq22, verify_laplace,
                         verify_lemma2, verify_lemma3, verify_lemma4,
                         verify_theorem1)
from .excursion_ppp import lemma1_two_sample
from .path_core import (Path, RngStream, TimeGrid, path_from_csv,
                        path_from_json_dict, path_to_csv, path_to_json_dict,
                        sample_bes3, sample_bm, sample_bridge,
                        sample_excursion, sample_first_passage_bridge,
                        sample_meander_reversed)
from .transforms import (brownian_scale, excise_bridge, excise_meander,
                         excise_to_level, t_br, t_me, two_sided_max)

_SAMPLERS = {
    "bm": sample_bm,
    "bridge": sample_bridge,
    "meander": sample_meander_reversed,
    "excursion": sample_excursion,
    "bes3": sample_bes3,
}


class CliError(Exception):
    """Raised for configuration problems; mapped to exit code 2."""


def _resolve_seed(flag_value):
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get("EXCISE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise CliError(f"EXCISE_SEED must be an integer, got {env!r}") \
                from exc
    return secrets.randbits(63)


def _provenance(seed, config: dict) -> dict:
    return {"version": __version__, "seed": seed,
            "config_hash": _config_hash(config)}


def _emit(text: str, output):
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _comment_block(prov: dict) -> str:
    return "".join(f"# {k}={v}\n" for k, v in sorted(prov.items()))


def _read_path(fname, kind, level):
    try:
        with open(fname) as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read input file: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return path_from_json_dict(json.loads(text))
    return path_from_csv(text, kind, level)


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(args) -> int:
    seed = _resolve_seed(args.seed)
    config = {"subcommand": "sample", "kind": args.kind, "grid": args.grid,
              "seed": seed, "x": args.x, "format": args.format}
    grid = TimeGrid(1.0, args.grid)
    rng = RngStream(seed, 0)
    if args.kind == "first_passage":
        if args.x is None:
            raise CliError("--x is required for first_passage sampling")
        path = sample_first_passage_bridge(args.x, grid, rng)
    elif args.kind in _SAMPLERS:
        path = _SAMPLERS[args.kind](grid, rng)
    else:
        raise CliError(f"unknown kind {args.kind!r}")
    prov = _provenance(seed, config)
    if args.format == "csv":
        _emit(_comment_block(prov) + path_to_csv(path), args.output)
    else:
        doc = {"provenance": prov, "config": config,
               "path": path_to_json_dict(path)}
        _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.output)
    return 0


_PATH_OPS = {"t_me": t_me, "t_br": t_br, "brownian_scale": brownian_scale}
_DEFAULT_KINDS = {"excise_bridge": "bridge", "t_me": "bridge",
                  "excise_meander": "meander_type", "t_br": "meander_type",
                  "excise_to_level": "free", "brownian_scale": "free"}


def cmd_transform(args) -> int:
    config = {"subcommand": "transform", "op": args.op, "input": args.input,
              "kind": args.kind, "x": args.x, "format": args.format}
    kind = args.kind or _DEFAULT_KINDS[args.op]
    path = _read_path(args.input, kind, args.x if kind == "first_passage"
                      else None)
    prov = _provenance(None, config)
    if args.op in _PATH_OPS:
        out_path = _PATH_OPS[args.op](path)
        if args.format == "csv":
            _emit(_comment_block(prov) + path_to_csv(out_path), args.output)
        else:
            doc = {"provenance": prov, "config": config,
                   "path": path_to_json_dict(out_path)}
            _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                  args.output)
        return 0
    if args.op == "excise_bridge":
        out = excise_bridge(path)
    elif args.op == "excise_meander":
        out = excise_meander(path)
    elif args.op == "excise_to_level":
        if args.x is None:
            raise CliError("--x is required for excise_to_level")
        out = excise_to_level(path, args.x)
    else:
        raise CliError(f"unknown op {args.op!r}")
    doc = {
        "provenance": prov,
        "config": config,
        "tau": out.tau,
        "argmax_time": out.argmax_time,
        "excised_length": out.excised_length,
        "records": [{"g": r.g, "d": r.d, "level": r.level,
                     "length": r.length, "height": r.height,
                     "excised": r.excised, "phase": r.phase}
                    for r in out.records],
        "path": path_to_json_dict(out.excised),
    }
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.output)
    return 0


_VERIFIERS = {"theorem1", "corollary2", "lemma1", "lemma2", "lemma3",
              "lemma4", "eq22", "laplace", "counts"}


def cmd_verify(args) -> int:
    seed = _resolve_seed(args.seed)
    ident = args.identity
    if ident not in _VERIFIERS:
        raise CliError(f"unknown identity {ident!r}")
    n, grid, w = args.n, args.grid, args.workers
    if ident == "theorem1":
        report = verify_theorem1(args.g, n, grid, seed, w)
    elif ident == "corollary2":
        report = verify_corollary2(n, grid, seed, w)
    elif ident == "lemma2":
        report = verify_lemma2(args.g, n, seed, grid, w)
    elif ident == "lemma3":
        report = verify_lemma3(args.x, n, grid, seed, w)
    elif ident == "lemma4":
        report = verify_lemma4(args.x, args.g, n, grid, seed, w)
    elif ident == "eq22":
        report = verify_eq22(args.g, n, grid, seed, w)
    elif ident == "laplace":
        report = verify_laplace(args.x, n, grid, seed, w)
    elif ident == "counts":
        report = verify_counts(args.x, n, grid, seed, w)
    else:
        checks = lemma1_two_sample(args.x, n, TimeGrid(1.0, grid),
                                   (seed, seed + 1))
        config = {"identity": "lemma1", "x": args.x, "n": n, "grid": grid,
                  "seed": seed}
        config["version"] = __version__
        config["config_hash"] = _config_hash(config)
        report = {"identity": "lemma1", "config": config, "checks": checks,
                  "pass": all(c["pass"] for c in checks.values())}
    _emit(report_to_json(report), args.output)
    return 0 if report["pass"] else 1


def cmd_analytics_table(args) -> int:
    config = {"subcommand": "analytics-table", "function": args.function,
              "x": args.x, "lo": args.lo, "hi": args.hi,
              "points": args.points}
    pts = np.linspace(args.lo, args.hi, args.points)
    fn = args.function
    if fn in ("g", "tau_e", "T") and args.x is None:
        raise CliError(f"--x is required for function {fn!r}")
    if fn == "g":
        vals = [g_density(args.x, t) for t in pts]
    elif fn == "tau_e":
        vals = [tau_e_density(args.x, t) for t in pts]
    elif fn == "T":
        vals = [T_density(args.x, t) for t in pts]
    elif fn == "rayleigh":
        vals = [rayleigh_density(t) for t in pts]
    elif fn == "phi":
        table = phi_table()
        vals = [table(t) for t in pts]
    else:
        raise CliError(f"unknown function {fn!r}")
    prov = _provenance(None, config)
    lines = [_comment_block(prov), "arg,value\n"]
    lines += [f"{t:.17g},{v:.17g}\n" for t, v in zip(pts, vals)]
    _emit("".join(lines), args.output)
    return 0


# ---------------------------------------------------------------------------
# figure rendering

_FIG_W, _FIG_H = 960, 540
_ML, _MR, _MT, _MB = 60, 24, 30, 44


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _svg_polyline(xs, ys, style: str) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" {style} points="{pts}"/>\n'


def _svg_polygon(xs, ys, style: str) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    return f'<polygon {style} points="{pts}"/>\n'


def render_figure(path: Path) -> str:
    """Figure-1-style SVG: the bridge, its two-sided max envelope, excised
    excursion regions in red, kept excursion regions in blue, and the argmax
    marker. Byte-deterministic for a fixed input path."""
    out = excise_bridge(path)
    env = two_sided_max(path)
    vmin = float(np.min(path.values))
    vmax = float(np.max(env.values))
    pad = 0.06 * max(vmax - vmin, 1e-12)
    vlo, vhi = vmin - pad, vmax + pad
    span_x = _FIG_W - _ML - _MR
    span_y = _FIG_H - _MT - _MB

    def px(t):
        return _ML + t / path.horizon * span_x

    def py(v):
        return _FIG_H - _MB - (v - vlo) / (vhi - vlo) * span_y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_FIG_W}" '
        f'height="{_FIG_H}" viewBox="0 0 {_FIG_W} {_FIG_H}">\n',
        f'<rect width="{_FIG_W}" height="{_FIG_H}" fill="#ffffff"/>\n',
    ]
    t, v = path.times, path.values
    for r in out.records:
        inside = (t > r.g) & (t < r.d)
        xs = [r.g] + list(t[inside]) + [r.d]
        ys = [r.level] + list(v[inside]) + [r.level]
        if r.excised:
            style = 'fill="#d65f5f" fill-opacity="0.5" class="excised"'
        else:
            style = 'fill="#6f9fd8" fill-opacity="0.35" class="kept"'
        parts.append(_svg_polygon([px(x) for x in xs],
                                  [py(y) for y in ys], style))
    parts.append(_svg_polyline(
        [px(x) for x in env.times], [py(y) for y in env.values],
        'stroke="#888888" stroke-width="1.2" stroke-dasharray="6 4"'))
    parts.append(_svg_polyline(
        [px(x) for x in t], [py(y) for y in v],
        'stroke="#111111" stroke-width="1.5"'))
    mx = px(out.argmax_time)
    parts.append(f'<line x1="{_fmt(mx)}" y1="{_MT}" x2="{_fmt(mx)}" '
                 f'y2="{_FIG_H - _MB}" stroke="#2a7f2a" stroke-width="1" '
                 f'stroke-dasharray="2 3"/>\n')
    parts.append(f'<text x="{_fmt(mx + 4)}" y="{_MT + 14}" '
                 f'font-family="monospace" font-size="13" '
                 f'fill="#2a7f2a">mu</text>\n')
    legend = [
        ("#111111", "path", "line"),
        ("#888888", "envelope", "line"),
        ("#d65f5f", "excised", "rect"),
        ("#6f9fd8", "kept", "rect"),
    ]
    lx, ly = _FIG_W - _MR - 150, _MT + 8
    for i, (color, label, shape) in enumerate(legend):
        y = ly + 20 * i
        if shape == "line":
            parts.append(f'<line x1="{lx}" y1="{y + 6}" x2="{lx + 24}" '
                         f'y2="{y + 6}" stroke="{color}" '
                         f'stroke-width="2"/>\n')
        else:
            parts.append(f'<rect x="{lx}" y="{y}" width="24" height="12" '
                         f'fill="{color}" fill-opacity="0.5"/>\n')
        parts.append(f'<text x="{lx + 32}" y="{y + 11}" '
                     f'font-family="monospace" font-size="13" '
                     f'fill="#333333">{label}</text>\n')
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{span_x}" '
                 f'height="{span_y}" fill="none" stroke="#cccccc"/>\n')
    parts.append(f'<text x="{_ML}" y="{_FIG_H - _MB + 18}" '
                 f'font-family="monospace" font-size="12" '
                 f'fill="#333333">0</text>\n')
    parts.append(f'<text x="{_fmt(_ML + span_x - 8)}" '
                 f'y="{_FIG_H - _MB + 18}" font-family="monospace" '
                 f'font-size="12" fill="#333333">'
                 f'{path.horizon:g}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def cmd_figure(args) -> int:
    if args.input:
        path = _read_path(args.input, "bridge", None)
        seed = None
        config = {"subcommand": "figure", "input": args.input}
    else:
        seed = _resolve_seed(args.seed)
        config = {"subcommand": "figure", "seed": seed, "grid": args.grid}
        path = sample_bridge(TimeGrid(1.0, args.grid), RngStream(seed, 0))
    if path.kind != "bridge":
        raise CliError("figure rendering expects a bridge path")
    prov = _provenance(seed, config)
    svg = render_figure(path)
    comment = ("<!-- " + " ".join(f"{k}={v}" for k, v in
                                  sorted(prov.items())) + " -->\n")
    _emit(svg.replace("\n", "\n" + comment, 1), args.output)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="excise",
        description="Brownian bridge excision transforms and Monte Carlo "
                    "identity checks")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("sample", help="draw a seeded path")
    sp.add_argument("--kind", required=True,
                    choices=sorted(_SAMPLERS) + ["first_passage"])
    sp.add_argument("--grid", type=int, default=4096)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--x", type=float)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--output")
    sp.set_defaults(func=cmd_sample)

    tp = sub.add_parser("transform", help="apply a deterministic transform")
    tp.add_argument("--op", required=True,
                    choices=("excise_bridge", "excise_meander",
                             "excise_to_level", "t_me", "t_br",
                             "brownian_scale"))
    tp.add_argument("--input", required=True)
    tp.add_argument("--kind", choices=("free", "bridge", "meander_type",
                                       "excursion", "first_passage"))
    tp.add_argument("--x", type=float)
    tp.add_argument("--format", choices=("csv", "json"), default="json")
    tp.add_argument("--output")
    tp.set_defaults(func=cmd_transform)

    vp = sub.add_parser("verify", help="run a Monte Carlo identity check")
    vp.add_argument("--identity", required=True, choices=sorted(_VERIFIERS))
    vp.add_argument("--g", default="const_one")
    vp.add_argument("--x", type=float, default=1.0)
    vp.add_argument("--n", type=int, default=20000)
    vp.add_argument("--grid", type=int, default=2048)
    vp.add_argument("--seed", type=int)
    vp.add_argument("--workers", type=int, default=1)
    vp.add_argument("--output")
    vp.set_defaults(func=cmd_verify)

    fp = sub.add_parser("figure", help="render a Figure-1-style SVG")
    fp.add_argument("--input")
    fp.add_argument("--seed", type=int)
    fp.add_argument("--grid", type=int, default=1024)
    fp.add_argument("--output")
    fp.set_defaults(func=cmd_figure)

    ap = sub.add_parser("analytics-table",
                        help="tabulate a closed-form density or kernel")
    ap.add_argument("--function", required=True,
                    choices=("g", "tau_e", "T", "rayleigh", "phi"))
    ap.add_argument("--x", type=float)
    ap.add_argument("--lo", type=float, default=0.05)
    ap.add_argument("--hi", type=float, default=2.0)
    ap.add_argument("--points", type=int, default=100)
    ap.add_argument("--output")
    ap.set_defaults(func=cmd_analytics_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
