"""Command-line front end.

    simplechar analyze --preset quartic --out run/
    simplechar solve --config scenario.json --out run/ --emit-pieces
    simplechar verify --config scenario.json --out run/
    simplechar study --config study.json --out run/
    simplechar report --out run/

Configs are JSON with the keys ``scenario`` (a harness Scenario), ``study``
and ``analyze``; unknown keys are rejected. Reports are JSON, study rows
CSV and fields SCFD binary files. Exit codes: 2 invalid input,
3 certification failure, 4 solver failure, 5 failed study assertion.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .dirac import VectorField4, build_matrices, m_of_xi, normality_defect
from .directions import (
    CertGrid,
    check_admissibility_cond1,
    direction_set_from,
    find_directions,
    second_order_directions,
)
from .errors import SimpleCharError, UncertifiedDirections, ValidationError
from .fields import DomainSpec, read_fields, write_fields
from .harness import (
    Scenario,
    SourceSpec,
    _jsonable,
    assert_study,
    faddeev_anisotropic_check,
    invariance_study,
    laplacian_counterexample,
    multiball_bound,
    scaling_study,
    solve,
    verify_estimate,
)
from .poly import is_nonsingular_sampled, normalize_second_order

log = logging.getLogger("simplechar")

COMMANDS = ("analyze", "solve", "verify", "study", "report")
STUDY_KINDS = ("scaling", "invariance", "multiball", "counterexample", "faddeev_anisotropic")


@dataclass
class RunConfig:
    command: str
    scenario: dict = field(default_factory=dict)
    study: dict = field(default_factory=dict)
    analyze: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    out: str = "."
    threads: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.threads is not None and int(self.threads) < 1:
            raise ValidationError("--threads must be positive")

    def build_scenario(self) -> Scenario:
        d = dict(self.scenario)
        if self.seed is not None:
            d["seed"] = int(self.seed)
        return Scenario.from_dict(d)


def load_config(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
    allowed = {"command", "scenario", "study", "analyze", "verify", "out", "threads", "seed"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ValidationError(f"unknown config keys: {unknown}")
    if raw.get("command", args.command) != args.command:
        raise ValidationError(f"config is for {raw['command']!r}, not {args.command!r}")
    raw["command"] = args.command
    scen = dict(raw.get("scenario") or {})
    if not isinstance(scen, dict):
        raise ValidationError("scenario must be a JSON object")
    if args.preset:
        scen["preset"] = args.preset
        scen.pop("symbol", None)
    if args.resolution:
        scen["resolution"] = args.resolution
    if scen.get("preset") == "dirac" or args.preset == "dirac":
        scen.setdefault("n", 3)
    if scen.get("n", 2) == 3:
        # 3D grids are coarse; default to a small box with a narrow source
        scen.setdefault("box", 16.0)
        scen.setdefault("source", {"centers": [[0.0, 0.0, 0.0]], "widths": [0.45]})
        scen.setdefault("D_r", [{"kind": "ball", "center": [2.0, 1.0, 0.0], "R": 3.0}])
    raw["scenario"] = scen
    if args.out:
        raw["out"] = args.out
    if args.threads:
        raw["threads"] = args.threads
    if args.seed is not None:
        raw["seed"] = args.seed
    return RunConfig(**raw)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def write_json(path: Path, obj):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, rows):
    if not rows:
        path.write_text("")
        return
    keys = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(_jsonable(v)) if isinstance(v, (list, dict)) else v
                        for k, v in r.items()})


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _nonsingular_samples(pre, rng, count=2000):
    return rng.normal(size=(count, pre.n)) * 2 * pre.scale


def cmd_analyze(cfg: RunConfig, out: Path):
    sc = cfg.build_scenario()
    pre = sc.get_preset()
    opts = dict(cfg.analyze)
    unknown = sorted(set(opts) - {"directions", "r0", "cert_L", "cert_M", "sample_M", "search"})
    if unknown:
        raise ValidationError(f"unknown analyze keys: {unknown}")
    rng = np.random.default_rng(sc.seed)
    rep = {"preset": pre.name, "params": pre.params, "n": pre.n, "route": pre.route}
    try:
        _analyze_route(pre, sc, opts, rng, rep)
    except SimpleCharError as exc:
        rep["error"] = {"type": type(exc).__name__, "message": str(exc)}
        for key in ("clusters", "uncovered"):
            if hasattr(exc, key):
                v = getattr(exc, key)
                rep["error"][key] = int(len(v)) if key == "uncovered" else v
        write_json(out / "analysis.json", rep)
        raise
    write_json(out / "analysis.json", rep)
    return rep


def _analyze_route(pre, sc, opts, rng, rep):
    if pre.route == "dirac":
        dm = build_matrices(pre.params["omega"])
        xi = rng.normal(size=(100, 3)) * 3
        d = normality_defect(m_of_xi(dm, xi, 2, check=False))
        rep["sign_table"] = {f"A{i + 1}A{j + 1}": [s, k + 1] for (i, j), (s, k) in dm.sign_table().items()}
        rep["max_normality_defect"] = float(d.max())
        return
    P = pre.P if pre.frame is None else pre.P.compose_linear(pre.frame)
    rep["symbol"] = pre.P.to_string()
    rep["nonsingular"] = is_nonsingular_sampled(P, _nonsingular_samples(pre, rng)).to_dict()
    r0 = float(opts.get("r0", sc.r0 if sc.r0 is not None else 0.1 * pre.scale))
    if pre.route == "second-order":
        nf = normalize_second_order(P)
        rep["normal_form"] = nf.to_dict()
        plan = second_order_directions(nf, sc.eps)
        rep["plan"] = plan.to_dict()
        rep["plan"]["pieces"] = f"{nf.n} directions plus remainder"
    elif pre.route == "general":
        if pre.frame is not None:
            rep["frame"] = np.asarray(pre.frame).tolist()
        dirs = [np.eye(pre.n)[j] for j in range(pre.n)]
        adm = []
        for t in dirs:
            eps, c1 = check_admissibility_cond1(P, t, r0, M=opts.get("sample_M"))
            entry = {"theta_frame": t.tolist(), "eps": eps, "report": c1.to_dict()}
            if pre.name == "quartic":
                th = np.asarray(pre.frame) @ t
                entry["theta"] = th.tolist()
                entry["eps_formula"] = float(np.sqrt(8 * r0 * np.sqrt(abs(th[0] * th[1]))))
                entry["formula_holds"] = bool(entry["eps_formula"] <= eps)
            adm.append(entry)
        rep["admissibility"] = adm
        rep["r0"] = r0
    elif pre.route == "factorized":
        rep["inf_im_root"] = abs(float(pre.params["re"]))
    if "directions" in opts or opts.get("search"):
        cert = CertGrid(float(opts.get("cert_L", 2.0)), int(opts.get("cert_M", 81)))
        if opts.get("search"):
            dset = find_directions(P, r0=r0, cert_grid=cert, seed=sc.seed,
                                   sample_M=opts.get("sample_M"))
        else:
            dset = direction_set_from(P, opts["directions"], r0, cert_grid=cert,
                                      sample_M=opts.get("sample_M"))
        rep["certification"] = dset.to_dict()
        rep["certification"]["clusters"] = dset.uncovered_clusters()
        if not dset.certified:
            err = UncertifiedDirections(f"margin {dset.margin:.3g}, "
                                        f"{len(dset.uncovered)} points uncovered")
            err.clusters = rep["certification"]["clusters"]
            raise err


def _fields_out(u):
    return list(u.components) if isinstance(u, VectorField4) else [u]


def cmd_solve(cfg: RunConfig, out: Path, emit_pieces: bool = False):
    sc = cfg.build_scenario()
    u, f, rep = solve(sc, keep_parts=emit_pieces)
    write_fields(out / "u.scfd", _fields_out(u))
    write_fields(out / "f.scfd", _fields_out(f))
    d = rep.to_dict()
    parts = rep.extra.pop("parts", None)
    d["extra"].pop("parts", None)
    if parts is not None:
        write_fields(out / "pieces.scfd", parts)
        d["pieces_file"] = "pieces.scfd"
    if rep.ratio is None:
        d["ratio"] = "not applicable"
    d["scenario"] = sc.to_dict()
    d["backend"] = _kernels.BACKEND
    write_json(out / "timings.json", d.pop("timings"))
    write_json(out / "report.json", d)
    return d


def cmd_verify(cfg: RunConfig, out: Path):
    sc = cfg.build_scenario()
    opts = dict(cfg.verify)
    unknown = sorted(set(opts) - {"members", "n_sources"})
    if unknown:
        raise ValidationError(f"unknown verify keys: {unknown}")
    rows, summary = verify_estimate(sc, opts.get("members", 20), opts.get("n_sources", 4))
    write_csv(out / "verify.csv", rows)
    write_json(out / "verify_summary.json", summary)
    return summary


def cmd_study(cfg: RunConfig, out: Path):
    opts = dict(cfg.study)
    kind = opts.pop("kind", None)
    if kind not in STUDY_KINDS:
        raise ValidationError(f"study kind must be one of {STUDY_KINDS}")
    if kind == "counterexample":
        _only(opts, {"A_values", "R", "c_norm"}, kind)
        rows, summary = laplacian_counterexample(tuple(opts.get("A_values", (1, 2, 4, 8))),
                                                 float(opts.get("R", 64.0)), opts.get("c_norm"))
        summary["note"] = "expected failure of the diameter estimate for a double characteristic"
    else:
        sc = cfg.build_scenario()
        if kind == "scaling":
            _only(opts, {"values", "tol"}, kind)
            if "values" not in opts:
                raise ValidationError("scaling study needs 'values'")
            rows, summary = scaling_study(sc, opts["values"], opts.get("tol"))
        elif kind == "faddeev_anisotropic":
            _only(opts, {"values"}, kind)
            rows, summary = faddeev_anisotropic_check(sc, tuple(opts.get("values", (1, 2, 4))))
        elif kind == "invariance":
            _only(opts, {"shifts_cells", "angles"}, kind)
            rows = invariance_study(sc, tuple(opts.get("shifts_cells", (8,))),
                                    tuple(opts.get("angles", (90.0, 37.0))))
            summary = _invariance_summary(rows)
        else:
            _only(opts, {"pieces", "domains", "C"}, kind)
            pieces = [(SourceSpec.from_dict(p["source"]), DomainSpec.from_dict(p["ball"]))
                      for p in opts.get("pieces", [])]
            if not pieces:
                raise ValidationError("multiball study needs 'pieces'")
            domains = [DomainSpec.from_dict(d) for d in opts.get("domains", [])] or list(sc.D_r)
            summary = multiball_bound(sc, pieces, domains, opts.get("C"))
            rows = [{"piece": i, "single_ratio": r} for i, r in enumerate(summary["single_ratios"])]
    summary["kind"] = kind
    write_csv(out / f"{kind}.csv", rows)
    write_json(out / f"{kind}_summary.json", summary)
    assert_study(summary, f"{kind} study")
    return summary


def _only(opts, allowed, kind):
    unknown = sorted(set(opts) - allowed)
    if unknown:
        raise ValidationError(f"unknown {kind} study keys: {unknown}")


def _invariance_summary(rows):
    shifts = [r["change"] for r in rows if r["transform"].startswith("shift")]
    rots = [r for r in rows if r["transform"].startswith("rotation")]
    worst_shift = max(shifts, default=0.0)
    rot_ok = all(r["change"] <= r["resample_residual"] for r in rots)
    return {"max_translation_change": worst_shift,
            "rotation_changes": {r["transform"]: r["change"] for r in rots},
            "rotation_residuals": {r["transform"]: r["resample_residual"] for r in rots},
            "pass": bool(worst_shift < 1e-9 and rot_ok)}


def cmd_report(cfg: RunConfig, out: Path):
    """Collect every JSON report in ``out`` and check field files read back."""
    summary = {"reports": {}, "fields": {}}
    for p in sorted(out.glob("*.json")):
        if p.name == "summary.json":
            continue
        summary["reports"][p.name] = json.loads(p.read_text())
    for p in sorted(out.glob("*.scfd")):
        recs = read_fields(p)
        summary["fields"][p.name] = {"records": len(recs), "dims": list(recs[0].dims),
                                     "space": recs[0].space}
    write_json(out / "summary.json", summary)
    for name, rep in summary["reports"].items():
        if isinstance(rep, dict):
            keys = [k for k in ("ratio", "residual_fd", "slope", "max_ratio", "pass", "error")
                    if k in rep]
            if keys:
                print(name + ": " + ", ".join(f"{k}={rep[k]}" for k in keys))
    for name, info in summary["fields"].items():
        print(f"{name}: {info['records']} record(s), dims {info['dims']}")
    return summary


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="simplechar",
                                 description="Directional Fourier-ODE solves and estimate studies.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--out", help="output directory (default: current)")
    ap.add_argument("--threads", type=int, help="worker threads for the compiled kernels")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--preset", help="operator preset (overrides the config)")
    ap.add_argument("--resolution", type=int, help="samples per axis (overrides the config)")
    ap.add_argument("--emit-pieces", action="store_true",
                    help="also write the decomposed source pieces")
    return ap


def _setup_logging():
    level = os.environ.get("SIMPLECHAR_LOG", "WARNING").strip().upper()
    if level.isdigit():
        level = int(level)
    elif not isinstance(logging.getLevelName(level), int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if cfg.threads:
            _kernels.set_threads(cfg.threads)
        if cfg.command == "analyze":
            res = cmd_analyze(cfg, out)
        elif cfg.command == "solve":
            res = cmd_solve(cfg, out, args.emit_pieces)
        elif cfg.command == "verify":
            res = cmd_verify(cfg, out)
        elif cfg.command == "study":
            res = cmd_study(cfg, out)
        else:
            cmd_report(cfg, out)
            return 0
    except SimpleCharError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    if cfg.command != "report":
        keys = ("ratio", "residual_fd", "slope", "max_ratio", "pass")
        brief = {k: res[k] for k in keys if isinstance(res, dict) and k in res}
        print(json.dumps(_jsonable(brief), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
