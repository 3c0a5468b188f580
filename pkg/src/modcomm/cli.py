"""Command-line front end.

Every run writes ``report.json`` (deterministic: sorted keys, no clocks) and
``timing.json`` (wall time and timestamps) into ``--out``.  Exit status is 0
on success, 1 on usage or configuration errors and 2 when a verification
fails.

Config files are TOML::

    seed = 0
    backend = "auto"

    [model]
    kind = "chern-insulator"
    extent = [24, 24]
    boundary = "periodic"
    granularity = 3.0
    params = { mass = 1.0 }

    [geometry]
    radius = 6
    # regions = { A = [0], B = [1], C = [2] }        # qubit models
    # moves = [{ sites = [[12, 5]], to = "A" }]       # deformation script

    [tolerances]
    ccc = 0.2

    [sweep]
    "geometry.radius" = [4, 6, 8]
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import current as cur
from . import dense, gaussian, models
from .errors import ConservationViolated, ImplicationViolated, ModcommError
from .lattice import build_disk, standard_partition

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULT_TOLERANCES = {
    "cmi": 1e-10,      # Markov implication: CMI threshold
    "j": 1e-8,         # Markov implication: |J| threshold
    "imag": 1e-8,      # allowed imaginary part of J (dense)
    "ccc": 0.2,        # |c- - expected| for free-fermion models
    "oracle": 1e-8,    # backend agreement in verify gaussian
    "edge": 0.25,      # relative spread of numeric edge currents
    "clamp": gaussian.DEFAULT_CLAMP,
    "floor": dense.DEFAULT_FLOOR,
}
COMMANDS = ("j", "ccc", "tee", "cmi", "current", "edge-current", "markov", "gaussian")


class UsageError(Exception):
    pass


class VerificationFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- configuration -----------------------------------------------------------

def _default_config() -> dict:
    return {"seed": 0, "backend": "auto", "model": {}, "geometry": {},
            "tolerances": {}, "sweep": {}}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def load_config(args) -> dict:
    cfg = _default_config()
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                loaded = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config sections: {sorted(unknown)}")
        for k, v in loaded.items():
            cfg[k] = v
    if getattr(args, "model", None):
        cfg["model"] = {**cfg["model"], "kind": args.model}
    for item in getattr(args, "param", None) or []:
        key, _, val = item.partition("=")
        if not _:
            raise UsageError(f"--param expects KEY=VAL, got {item!r}")
        cfg["model"].setdefault("params", {})[key] = _parse_value(val)
    if getattr(args, "extent", None):
        cfg["model"]["extent"] = list(args.extent)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.backend is not None:
        cfg["backend"] = args.backend
    if getattr(args, "radius", None) is not None:
        cfg["geometry"]["radius"] = args.radius
    for item in args.tol or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects KEY=VAL, got {item!r}")
        try:
            cfg["tolerances"][key] = float(val)
        except ValueError as exc:
            raise UsageError(f"tolerance {key} is not a number") from exc
    unknown = set(cfg["tolerances"]) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise UsageError(f"unknown tolerances: {sorted(unknown)}")
    cfg["tolerances"] = {**DEFAULT_TOLERANCES, **cfg["tolerances"]}
    if cfg["backend"] not in ("auto", "dense", "gaussian"):
        raise UsageError("backend must be auto, dense or gaussian")
    return cfg


def model_spec(cfg: dict, default_kind: str) -> models.ModelSpec:
    m = dict(cfg.get("model") or {})
    m.setdefault("kind", default_kind)
    try:
        return models.ModelSpec(kind=m["kind"], params=dict(m.get("params", {})),
                                extent=tuple(m.get("extent", (24, 24))),
                                boundary=m.get("boundary", "periodic"),
                                granularity=float(m.get("granularity",
                                                        models.DEFAULT_GRANULARITY)),
                                seed=int(cfg["seed"]), conjugate=bool(m.get("conjugate", False)))
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"invalid model: {exc}") from exc


def config_hash(cfg: dict, command: str) -> str:
    payload = {k: v for k, v in cfg.items() if k != "sweep"}
    payload["command"] = command
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


# --- state preparation -------------------------------------------------------

def _fermionic(spec) -> bool:
    return spec.kind in models.FREE_FERMION_KINDS


def prepare(cfg: dict, spec: models.ModelSpec):
    """Return (state, regions, backend) for a region-based computation."""
    geo = cfg.get("geometry") or {}
    backend = cfg["backend"]
    if _fermionic(spec):
        cov = models.ground_state(spec)
        center = tuple(geo.get("center", models.default_center(spec)))
        regs = models.disk_regions(cov, float(geo.get("radius", 6)), center)
        pos = {m: (float(p[0]), float(p[1])) for m, p in zip(cov.modes, cov.positions)}
        for mv in geo.get("moves", []):
            target = mv.get("to")
            if target not in ("A", "B", "C", "D"):
                raise UsageError("each move needs to = A, B, C or D")
            spots = {(float(s[0]), float(s[1])) for s in mv.get("sites", [])}
            moved = [m for m in cov.modes if pos[m] in spots]
            for k in regs:
                regs[k] = [m for m in regs[k] if m not in moved]
            if target != "D":
                regs[target] = regs[target] + moved
        if backend == "dense":
            if cov.n_modes > 12:
                raise UsageError("dense backend limited to 12 modes; use gaussian")
            return gaussian.to_density(cov), regs, "dense"
        return cov, regs, "gaussian"
    if backend == "gaussian":
        raise UsageError(f"{spec.kind} has no Gaussian representation")
    state = models.build(spec)
    if "regions" in geo:
        regs = {k: list(v) for k, v in geo["regions"].items()}
    else:
        regs = models.default_regions(spec)
    for mv in geo.get("moves", []):
        target = mv.get("to")
        if target not in ("A", "B", "C", "D"):
            raise UsageError("each move needs to = A, B, C or D")
        moved = list(mv.get("sites", []))
        for k in regs:
            regs[k] = [s for s in regs[k] if s not in moved]
        if target != "D":
            regs[target] = regs.get(target, []) + moved
    return state, regs, "dense"


def _region_summary(regs: dict) -> dict:
    return {k: len(v) for k, v in sorted(regs.items())}


# --- computations ------------------------------------------------------------

def run_compute(what: str, cfg: dict) -> dict:
    tol = cfg["tolerances"]
    spec = model_spec(cfg, "chern-insulator")
    state, regs, backend = prepare(cfg, spec)
    a, b, c = regs["A"], regs["B"], regs["C"]
    res: dict = {"backend": backend, "regionSizes": _region_summary(regs)}
    if what in ("j", "ccc"):
        if backend == "gaussian":
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                j = gaussian.gaussian_modular_commutator(state, a, b, c, clamp=tol["clamp"])
            res["clampDominated"] = bool(caught)
        else:
            z = dense.modular_commutator_complex(state, a, b, c, tol["floor"])
            res["imaginaryPart"] = float(z.imag)
            if abs(z.imag) > tol["imag"]:
                raise VerificationFailed(f"Im J = {z.imag:.3e} exceeds {tol['imag']:.0e}")
            j = float(z.real)
        res["J"] = j
        if what == "ccc":
            res["ccc"] = 3 * j / math.pi
            if _fermionic(spec):
                expected = models.expected_ccc(spec)
                res["expectedCcc"] = expected
                res["chernNumber"] = models.chern_number(spec)
                res["cccError"] = abs(res["ccc"] - expected)
                if res["cccError"] > tol["ccc"]:
                    raise VerificationFailed(
                        f"c- = {res['ccc']:.4f} differs from {expected} by more than {tol['ccc']}")
    elif what == "tee":
        if backend == "gaussian":
            res["tee"] = gaussian.gaussian_tee(state, a, b, c)
        else:
            res["tee"] = dense.tee_kitaev_preskill(state, a, b, c)
        res["teeOverLn2"] = res["tee"] / math.log(2)
    elif what == "cmi":
        if backend == "gaussian":
            res["cmi"] = gaussian.gaussian_cmi(state, a, b, c)
        else:
            res["cmi"] = dense.cmi(state, a, b, c)
    return res


def _coarse_setup(cfg: dict, radius: int, symbolic: bool):
    disk = build_disk(None, (0, 0), radius)
    if symbolic:
        return disk, None
    spec = model_spec(cfg, "chern-insulator")
    if not _fermionic(spec):
        raise UsageError("numeric currents need a free-fermion model")
    s = spec.granularity
    reach = s * (radius + 1)
    if reach > min(spec.extent) / 2:
        raise UsageError(f"extent {spec.extent} too small for radius {radius} at granularity {s}")
    cov = models.ground_state(spec)
    cells = models.supersites(cov, disk.cells, s, models.default_center(spec))
    ev = cur.GaussianPairEvaluator(cov, cells, clamp=cfg["tolerances"]["clamp"])
    part = standard_partition(disk)
    jref = gaussian.gaussian_modular_commutator(
        cov, *[[m for x in sorted(part.region(k)) for m in cells[x]] for k in "ABC"], warn=False)
    return disk, (ev, jref)


def _fit_j(cmap: cur.CurrentMap, disk) -> dict:
    sym = cur.current_report(disk, "symbolic")
    num = den = 0.0
    for key, val in cmap.values.items():
        s = float(sym.values[key].coefficient)
        num += s * val
        den += s * s
    jfit = num / den if den else 0.0
    worst = max((abs(val - jfit * float(sym.values[k].coefficient)) for k, val in cmap.values.items()),
                default=0.0)
    return {"jFit": jfit, "maxResidual": worst}


def run_current(cfg: dict, symbolic: bool, emit_svg: bool, out: Path) -> dict:
    radius = int((cfg.get("geometry") or {}).get("radius", 3))
    disk, num = _coarse_setup(cfg, radius, symbolic)
    if symbolic:
        cmap = cur.current_report(disk, "symbolic")
        res = {"mode": "symbolic", "radius": radius,
               "nonzeroCurrents": len(cmap.nonzero()),
               "maxAbsDivergence": str(max((abs(v.coefficient) for v in cmap.divergence.values()),
                                           default=0)),
               "interiorCurrent": "0" if not any(
                   cmap.f(u, v) for (u, v) in cmap.values
                   if disk.depth(u) > 2 and disk.depth(v) > 2) else "nonzero"}
        edge = {str(cur.edge_current(disk, cut).total) for cut in cur.boundary_cuts(disk)}
        res["edgeCurrent"] = sorted(edge)[0] if len(edge) == 1 else sorted(edge)
        if edge != {"1/4 J"}:
            raise VerificationFailed(f"edge currents {sorted(edge)} differ from 1/4 J")
    else:
        ev, jref = num
        cmap = cur.current_report(disk, "numeric", ev)
        res = {"mode": "numeric", "radius": radius, "J": jref,
               "maxAbsDivergence": max(abs(v) for v in cmap.divergence.values()),
               **_fit_j(cmap, disk)}
    (out / "current.json").write_text(json.dumps(cmap.to_dict(), sort_keys=True, indent=1))
    res["currentFile"] = "current.json"
    if emit_svg:
        (out / "current.svg").write_text(cur.render_svg(cmap))
        res["svgFile"] = "current.svg"
    return res


def run_edge_current(cfg: dict, symbolic: bool) -> dict:
    radius = int((cfg.get("geometry") or {}).get("radius", 3))
    disk, num = _coarse_setup(cfg, radius, symbolic)
    cuts = cur.boundary_cuts(disk)
    rows = []
    for cut in cuts:
        if symbolic:
            ec = cur.edge_current(disk, cut)
            total = str(ec.total)
            contrib = {f"{u[0]},{u[1]}->{v[0]},{v[1]}": str(val)
                       for (u, v), val in sorted(ec.contributions.items())}
        else:
            ec = cur.edge_current(disk, cut, "numeric", num[0])
            total = float(ec.total)
            contrib = {f"{u[0]},{u[1]}->{v[0]},{v[1]}": float(val)
                       for (u, v), val in sorted(ec.contributions.items())}
        rows.append({"left": list(cut.left), "right": list(cut.right), "total": total,
                     "contributions": contrib})
    res = {"mode": "symbolic" if symbolic else "numeric", "radius": radius, "cuts": rows}
    if symbolic:
        bad = [r for r in rows if r["total"] != "1/4 J"]
        if bad:
            raise VerificationFailed(f"{len(bad)} cuts deviate from 1/4 J")
    else:
        jref = num[1]
        ratios = [r["total"] / jref for r in rows]
        res.update({"J": jref, "meanRatio": float(np.mean(ratios)),
                    "maxRatioDeviation": float(max(abs(r - 0.25) for r in ratios) / 0.25)})
        if res["maxRatioDeviation"] > cfg["tolerances"]["edge"]:
            raise VerificationFailed("numeric edge currents deviate from J/4")
    return res


def run_verify_markov(cfg: dict, strict: bool) -> dict:
    from .markov import markov_suite
    tol = cfg["tolerances"]
    spec = model_spec(cfg, "random-markov")
    state, regs, _ = prepare(cfg, spec)
    try:
        rep = markov_suite(state, regs["A"], regs["B"], regs["C"], tol["cmi"], tol["j"],
                           tol["floor"], strict=strict)
    except ImplicationViolated as exc:
        raise VerificationFailed(str(exc)) from exc
    return {"markov": rep.to_dict(), "strict": strict}


def run_verify_gaussian(cfg: dict) -> dict:
    tol = cfg["tolerances"]
    geo = cfg.get("geometry") or {}
    n = int(geo.get("modes", 6))
    samples = int(geo.get("samples", 10))
    if not 3 <= n <= 8:
        raise UsageError("verify gaussian needs 3..8 modes")
    rng = np.random.default_rng(int(cfg["seed"]))
    worst = {"entropy": 0.0, "cmi": 0.0, "J": 0.0}
    for _ in range(samples):
        cov = gaussian.random_covariance(n, rng, pure=bool(rng.integers(2)))
        rho = gaussian.to_density(cov)
        cut = sorted(rng.choice(np.arange(1, n), size=2, replace=False))
        perm = [int(v) for v in rng.permutation(n)]
        a, b, c = perm[:cut[0]], perm[cut[0]:cut[1]], perm[cut[1]:]
        worst["entropy"] = max(worst["entropy"], abs(gaussian.region_entropy(cov, a + b)
                                                     - dense.region_entropy(rho, a + b)))
        worst["cmi"] = max(worst["cmi"], abs(gaussian.gaussian_cmi(cov, a, b, c)
                                             - dense.cmi(rho, a, b, c)))
        worst["J"] = max(worst["J"], abs(gaussian.gaussian_modular_commutator(cov, a, b, c, warn=False)
                                         - dense.modular_commutator(rho, a, b, c)))
    res = {"modes": n, "samples": samples, "maxDeviation": worst}
    if max(worst.values()) > tol["oracle"]:
        raise VerificationFailed(f"backends disagree: {worst}")
    return res


# --- driver ------------------------------------------------------------------

def _execute(command: str, cfg: dict, opts: dict) -> tuple[dict, int, dict]:
    """Run one point; returns (report, exit code, timing)."""
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    status, code, message, results = "ok", 0, None, {}
    try:
        if command in ("j", "ccc", "tee", "cmi"):
            results = run_compute(command, cfg)
        elif command == "current":
            results = run_current(cfg, opts["symbolic"], opts["emit_svg"], out)
        elif command == "edge-current":
            results = run_edge_current(cfg, opts["symbolic"])
        elif command == "markov":
            results = run_verify_markov(cfg, opts["strict"])
        elif command == "gaussian":
            results = run_verify_gaussian(cfg)
    except (VerificationFailed, ConservationViolated) as exc:
        status, code, message = "verification-failed", 2, str(exc)
    wall = time.perf_counter() - t0
    report = {"command": command, "config": cfg, "configHash": config_hash(cfg, command),
              "tolerances": cfg["tolerances"], "status": status, "results": results,
              "timing": "timing.json"}
    if message:
        report["message"] = message
    timing = {"started": started, "wallSeconds": wall}
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2,
                                                default=_json_default) + "\n")
    (out / "timing.json").write_text(json.dumps(timing, sort_keys=True, indent=2) + "\n")
    return report, code, timing


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _sweep_points(cfg: dict) -> list[tuple[dict, dict]]:
    sweep = cfg.get("sweep") or {}
    if not sweep:
        return [({}, cfg)]
    lengths = {len(v) for v in sweep.values()}
    if len(lengths) != 1:
        raise UsageError("sweep arrays must have equal length")
    points = []
    for i in range(lengths.pop()):
        c = copy.deepcopy(cfg)
        c["sweep"] = {}
        vals = {}
        for key, arr in sorted(sweep.items()):
            _set_path(c, key, arr[i])
            vals[key] = arr[i]
        points.append((vals, c))
    return points


def _run_point(args):
    command, cfg, opts = args
    try:
        report, code, _ = _execute(command, cfg, opts)
        return code, report.get("results", {}), None
    except UsageError as exc:
        return 1, {}, str(exc)
    except ModcommError as exc:
        return 1, {}, f"{type(exc).__name__}: {exc}"


def run(command: str, cfg: dict, opts: dict) -> int:
    points = _sweep_points(cfg)
    if len(points) == 1 and not points[0][0]:
        code, _, err = _run_point((command, cfg, opts))
        if err:
            print(f"error: {err}", file=sys.stderr)
        return code
    base = Path(opts["out"])
    jobs = [(command, c, {**opts, "out": str(base / f"point-{i:03d}")})
            for i, (_, c) in enumerate(points)]
    if opts.get("jobs", 1) > 1:
        with ProcessPoolExecutor(max_workers=opts["jobs"]) as pool:
            outcomes = list(pool.map(_run_point, jobs))
    else:
        outcomes = [_run_point(j) for j in jobs]
    base.mkdir(parents=True, exist_ok=True)
    keys = sorted({k for _, r, _ in outcomes for k, v in r.items()
                   if isinstance(v, (int, float, str)) and not isinstance(v, bool)})
    with open(base / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["point", *sorted(points[0][0]), "exit", *keys])
        for i, ((vals, _), (code, res, _)) in enumerate(zip(points, outcomes)):
            w.writerow([i, *[vals[k] for k in sorted(vals)], code, *[res.get(k, "") for k in keys]])
    for _, _, err in outcomes:
        if err:
            print(f"error: {err}", file=sys.stderr)
    return max(code for code, _, _ in outcomes)


def _common(p: argparse.ArgumentParser, radius: bool = True) -> None:
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--backend", choices=("auto", "dense", "gaussian"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--tol", action="append", metavar="KEY=VAL")
    p.add_argument("--model", choices=sorted(models.KINDS))
    p.add_argument("--param", action="append", metavar="KEY=VAL", help="model parameter")
    p.add_argument("--extent", type=int, nargs=2, metavar=("LX", "LY"))
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    if radius:
        p.add_argument("--radius", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="modcomm", description="Modular commutator toolkit")
    sub = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    comp = sub.add_parser("compute", help="J, chiral central charge, TEE or CMI")
    comp.add_argument("what", choices=("j", "ccc", "tee", "cmi"))
    _common(comp)

    for name in ("current", "edge-current"):
        p = sub.add_parser(name, help=f"modular {name.replace('-', ' ')} on a coarse disk")
        p.add_argument("--symbolic", action="store_true", help="exact rule-engine values")
        if name == "current":
            p.add_argument("--emit-svg", action="store_true")
        _common(p)

    ver = sub.add_parser("verify", help="Markov implication or backend agreement")
    ver.add_argument("what", choices=("markov", "gaussian"))
    ver.add_argument("--strict", action="store_true",
                     help="fail if CMI vanishes but J does not")
    _common(ver)

    mod = sub.add_parser("model", help="list or describe models")
    mod.add_argument("what", choices=("list", "describe"))
    mod.add_argument("kind", nargs="?")
    return parser


def _model_command(args) -> int:
    if args.what == "list":
        for kind in sorted(models.KINDS):
            print(f"{kind:18s} {models.KINDS[kind][0]}")
        return 0
    if not args.kind or args.kind not in models.KINDS:
        raise UsageError(f"describe needs one of {sorted(models.KINDS)}")
    info = {"kind": args.kind, "description": models.KINDS[args.kind][0],
            "defaults": models.KINDS[args.kind][1],
            "representation": "gaussian" if args.kind in models.FREE_FERMION_KINDS else "dense"}
    print(json.dumps(info, sort_keys=True, indent=2))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.group == "model":
            return _model_command(args)
        if args.radius is not None and args.group in ("current", "edge-current") \
                and args.radius != int(args.radius):
            raise UsageError("coarse disk radius must be an integer")
        cfg = load_config(args)
        command = args.what if args.group in ("compute", "verify") else args.group
        opts = {"out": args.out, "symbolic": getattr(args, "symbolic", False),
                "emit_svg": getattr(args, "emit_svg", False),
                "strict": getattr(args, "strict", False), "jobs": args.jobs}
        return run(command, cfg, opts)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
