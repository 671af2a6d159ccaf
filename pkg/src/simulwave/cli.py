"""Batch command-line front end.

``simulwave <command> --config <path> [--out <dir>]`` reads one JSON
document, runs the experiment and writes ``report.json`` (plus CSV plot data
for some commands) into ``--out``.  Reports contain no timestamps, so
repeated runs with the same config are byte-identical.

Exit status: 0 success, 2 validation failure, 3 numerical failure,
64 usage error, 65 malformed JSON, 66 unreadable config file.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import hum
from . import kalman as kl
from . import metric1d as mt
from . import rays1d
from . import waves as wv
from .errors import NumericalError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66

COMMANDS = ("kalman", "spectrum", "counterexample", "gramian", "control", "scan-time", "gcc")

DEFAULT_TOLERANCES = {
    "rank": kl.RANK_TOL,
    "speed": kl.SPEED_TOL,
    "kernel": hum.KERNEL_TOL,
    "cg": hum.CG_TOL,
    "resonance": 1e-6,
    "residual": 1e-4,
    "invisible": 1e-12,
    "round_trip": 1e-6,
    "spectrum": 5e-4,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description parsed from one JSON document."""

    command: str
    raw: dict
    sha256: str
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, command: str, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise _MalformedConfig(str(exc)) from None
        if not isinstance(raw, dict):
            raise _MalformedConfig("config must be a JSON object")
        if "command" in raw and raw["command"] != command:
            raise ValidationError(f"config is for {raw['command']!r}, not {command!r}")
        tol = dict(DEFAULT_TOLERANCES)
        extra = raw.get("tolerances", {})
        if not isinstance(extra, dict):
            raise ValidationError("tolerances must be an object")
        for k, v in extra.items():
            if k not in tol:
                raise ValidationError(f"unknown tolerance {k!r}")
            tol[k] = _positive(v, f"tolerances.{k}")
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        cfg = cls(command, raw, digest, tol)
        _VALIDATORS[command](cfg)
        return cfg

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def require(self, key):
        if key not in self.raw:
            raise ValidationError(f"config is missing {key!r}")
        return self.raw[key]

    # typed accessors, each re-validating through the target module

    def system(self) -> kl.SpeedSystem:
        s = self.require("system")
        if not isinstance(s, dict) or "speeds" not in s or "B" not in s:
            raise ValidationError("system needs 'speeds' and 'B'")
        return kl.SpeedSystem(s["speeds"], s["B"])

    def window(self, need_T: bool = True) -> wv.ObservationWindow:
        w = self.require("window")
        if not isinstance(w, dict) or "a" not in w or "b" not in w:
            raise ValidationError("window needs 'a' and 'b'")
        T = w.get("T", 1.0 if not need_T else None)
        if T is None:
            raise ValidationError("window needs 'T'")
        return wv.ObservationWindow(_num(w["a"], "window.a"), _num(w["b"], "window.b"), _num(T, "window.T"))

    def truncation(self) -> int:
        return _count(self.require("N"), "N")

    def metric(self) -> mt.Metric1D:
        m = self.require("metric")
        if not isinstance(m, dict):
            raise ValidationError("metric must be an object")
        if "constant" in m:
            return mt.Metric1D.constant(_num(m["constant"], "metric.constant"))
        return mt.counterexample_metric(self.profile())

    def profile(self) -> mt.BumpProfile:
        m = self.require("metric")
        if not isinstance(m, dict) or not {"a", "b", "K"} <= set(m):
            raise ValidationError("metric needs 'a', 'b' and 'K'")
        curv = m.get("curvature")
        return mt.build_chi(_num(m["a"], "metric.a"), _num(m["b"], "metric.b"), _num(m["K"], "metric.K"),
                            None if curv is None else _num(curv, "metric.curvature"))

    def grids(self) -> list[int]:
        g = self.get("grid_points", [512, 1024, 2048])
        if not isinstance(g, list) or not g:
            raise ValidationError("grid_points must be a non-empty list")
        out = [_count(v, "grid_points") for v in g]
        if any(b <= a for a, b in zip(out, out[1:])):
            raise ValidationError("grid_points must be increasing")
        return out


class _MalformedConfig(Exception):
    pass


def _num(v, name: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValidationError(f"{name} must be a finite number")
    return float(v)


def _positive(v, name: str) -> float:
    x = _num(v, name)
    if not x > 0:
        raise ValidationError(f"{name} must be positive")
    return x


def _count(v, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ValidationError(f"{name} must be a positive integer")
    return int(v)


def _times(cfg: ExperimentConfig) -> list[float]:
    if "times" in cfg.raw:
        t = cfg.raw["times"]
        if not isinstance(t, list) or not t:
            raise ValidationError("times must be a non-empty list")
        return [_positive(v, "times") for v in t]
    r = cfg.require("time_range")
    if not isinstance(r, dict) or not {"start", "stop", "count"} <= set(r):
        raise ValidationError("time_range needs 'start', 'stop' and 'count'")
    start, stop = _positive(r["start"], "time_range.start"), _positive(r["stop"], "time_range.stop")
    count = _count(r["count"], "time_range.count")
    if count > 1 and not stop > start:
        raise ValidationError("time_range needs stop > start")
    return np.linspace(start, stop, count).tolist()


def _validate_control(cfg):
    sys_ = cfg.system()
    cfg.window()
    N = cfg.truncation()
    for key in ("init", "target"):
        if key in cfg.raw:
            _state(cfg.raw[key], sys_, N, key)
    if cfg.get("route", "null") not in ("null", "exact"):
        raise ValidationError("route must be 'null' or 'exact'")
    _count(cfg.get("instances", 1), "instances")
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValidationError("seed must be a non-negative integer")
    if "partial_cutoff" in cfg.raw:
        _positive(cfg.raw["partial_cutoff"], "partial_cutoff")


def _validate_scan(cfg):
    cfg.system()
    cfg.window(need_T=False)
    cfg.truncation()
    t = _times(cfg)
    if any(b <= a for a, b in zip(t, t[1:])):
        raise ValidationError("times must be strictly increasing")


def _validate_gcc(cfg):
    cfg.window(need_T=False)
    sp = cfg.require("speeds")
    if not isinstance(sp, list) or not sp:
        raise ValidationError("speeds must be a non-empty list")
    for v in sp:
        _positive(v, "speeds")


_VALIDATORS = {
    "kalman": lambda c: c.system(),
    "spectrum": lambda c: (c.metric(), c.grids(), _count(c.get("kmax", 10), "kmax")),
    "counterexample": lambda c: (c.profile(), c.grids()),
    "gramian": lambda c: (c.system(), c.window(), c.truncation()),
    "control": _validate_control,
    "scan-time": _validate_scan,
    "gcc": _validate_gcc,
}


def _state(obj, sys_, N, name) -> wv.ModalData:
    if not isinstance(obj, dict) or "pos" not in obj or "vel" not in obj:
        raise ValidationError(f"{name} needs 'pos' and 'vel'")
    d = wv.ModalData(obj["pos"], obj["vel"])
    if d.pos.shape != (sys_.n, N):
        raise ValidationError(f"{name} must have shape ({sys_.n}, {N})")
    return d


# ---------------------------------------------------------------- commands

def _cmd_kalman(cfg: ExperimentConfig, out: Path) -> dict:
    s = cfg.system()
    tol = cfg.tolerances
    km = kl.kalman_matrix(s)
    full = kl.kalman_rank_ok(s, tol["rank"])
    dec = kl.block_decompose(s, tol["speed"], tol["rank"])
    nf = kl.block_normal_form(s, tol["speed"], tol["rank"])
    return {
        "system": s.to_dict(),
        "kalman_matrix": km.tolist(),
        "rank": int(nf.rank),
        "full_rank": bool(full),
        "via_blocks": bool(kl.kalman_via_blocks(s, tol["speed"], tol["rank"])),
        "blocks": dec.to_dict(),
        "normal_form": {
            "P": nf.P.tolist(),
            "Q": nf.Q.tolist(),
            "T": nf.T.tolist(),
            "reduced": nf.reduced.tolist(),
            "pivots": [float(p) for p in nf.pivots],
            "residual": float(nf.residual(s)),
        },
    }


def _spectrum_block(met: mt.Metric1D, grids, kmax: int) -> dict:
    exact = [e.eigenvalue for e in mt.dirichlet_spectrum(met, kmax)]
    fd, errs = {}, []
    for n in grids:
        vals = [e.eigenvalue for e in mt.sturm_liouville_fd(met, n, kmax)]
        fd[str(n)] = vals
        errs.append(max(abs(v - x) / x for v, x in zip(vals, exact)))
    return {
        "formula": exact,
        "fd": fd,
        "max_rel_error": errs,
        "error_ratios": [a / b for a, b in zip(errs[:-1], errs[1:])],
    }


def _write_metric_csv(met: mt.Metric1D, n: int, path: Path) -> None:
    rec = mt.metric_record(met, n)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,c\n")
        for x, c in zip(rec["x"], rec["c"]):
            fh.write(f"{x!r},{c!r}\n")


def _cmd_spectrum(cfg: ExperimentConfig, out: Path) -> dict:
    met = cfg.metric()
    grids = cfg.grids()
    kmax = _count(cfg.get("kmax", 10), "kmax")
    L = mt.arclength(met)
    res = _spectrum_block(met, grids, kmax)
    res.update({"metric": met.to_dict(), "grid_points": grids, "kmax": kmax, "L": L, "L_over_pi": L / math.pi,
                "resonance": mt.resonance_check(L, 50, cfg.tolerances["resonance"]),
                "within_tolerance": bool(res["max_rel_error"][-1] <= cfg.tolerances["spectrum"])})
    _write_metric_csv(met, grids[-1], out / "metric.csv")
    return res


def _cmd_counterexample(cfg: ExperimentConfig, out: Path) -> dict:
    prof = cfg.profile()
    grids = cfg.grids()
    tol = cfg.tolerances
    rep = mt.counterexample_report(prof, tuple(grids))
    rep["resonance"] = mt.resonance_check(rep["L"], 50, tol["resonance"])
    rep["checks"] = {
        "c_positive_interior": rep["c_min_interior"] > 0,
        "residual": rep["residual_inf"] <= tol["residual"],
        "residual_order": all(1.7 <= o <= 2.3 for o in rep["residual_orders"]),
        "invisible_on_omega": rep["invisible_max_on_omega"] <= tol["invisible"],
        "visible_elsewhere": rep["invisible_max"] >= 0.1,
        "L_integer": abs(rep["L_over_pi"] - round(rep["L_over_pi"])) <= tol["resonance"],
    }
    _write_metric_csv(mt.counterexample_metric(prof), grids[-1], out / "metric.csv")
    return rep


def _cmd_gramian(cfg: ExperimentConfig, out: Path) -> dict:
    s, win, N = cfg.system(), cfg.window(), cfg.truncation()
    g = hum.assemble_gramian(s, win, N)
    w = g.generalized_eigenvalues()
    return {
        "system": s.to_dict(),
        "n": s.n, "N": N, "T": win.T, "omega": list(win.omega),
        "size": int(g.G.shape[0]),
        "lambda_min": float(w[0]),
        "lambda_max": float(w[-1]),
        "kernel_dim": hum.kernel_dim(g, cfg.tolerances["kernel"]),
        "eigenvalues": w.tolist(),
    }


def _cmd_control(cfg: ExperimentConfig, out: Path) -> dict:
    s, win, N = cfg.system(), cfg.window(), cfg.truncation()
    tol = cfg.tolerances
    route = cfg.get("route", "null")
    g = hum.assemble_gramian(s, win, N)
    rng = np.random.default_rng(cfg.get("seed", 0))
    count = _count(cfg.get("instances", 1), "instances")
    target = _state(cfg.raw["target"], s, N, "target") if "target" in cfg.raw else wv.ModalData.zeros(s.n, N)
    cutoff = cfg.get("partial_cutoff")
    rows = []
    for i in range(count):
        init = _state(cfg.raw["init"], s, N, "init") if "init" in cfg.raw else wv.random_unit_state(s, N, rng)
        if cutoff is None:
            sol = hum.hum_solve(s, win, N, init, target, tol=tol["cg"], route=route, gramian=g)
            f, rank = sol.control, sol.rank
        else:
            f, rank = hum.synthesize_partial_control(s, win, N, init, target, cutoff=float(cutoff), gramian=g)
        err = hum.round_trip_error(s, f, init, target)
        name = f"control_{i:03d}.csv"
        f.to_csv(out / name)
        rows.append({"instance": i, "round_trip_error": err, "control_l2": f.l2_norm(), "rank": int(rank),
                     "csv": name, "ok": bool(err <= tol["round_trip"])})
    return {
        "system": s.to_dict(), "n": s.n, "N": N, "T": win.T, "omega": list(win.omega), "route": route,
        "observability_constant": hum.observability_constant(g),
        "kernel_dim": hum.kernel_dim(g, tol["kernel"]),
        "instances": rows,
        "max_round_trip_error": max(r["round_trip_error"] for r in rows),
    }


def _cmd_scan(cfg: ExperimentConfig, out: Path) -> dict:
    s, win, N = cfg.system(), cfg.window(need_T=False), cfg.truncation()
    rows = hum.time_scan(s, win.omega, N, _times(cfg), cfg.tolerances["kernel"])
    with (out / "scan.csv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("T,lambda_min,kernel_dim\n")
        for r in rows:
            fh.write(f"{r.T!r},{r.observability_constant!r},{r.kernel_dim}\n")
    return {
        "system": s.to_dict(), "N": N, "omega": list(win.omega),
        "rows": [{"T": r.T, "lambda_min": r.observability_constant, "kernel_dim": r.kernel_dim} for r in rows],
        "csv": "scan.csv",
    }


def _cmd_gcc(cfg: ExperimentConfig, out: Path) -> dict:
    win = cfg.window(need_T=False)
    speeds = [float(v) for v in cfg.require("speeds")]
    per = []
    for d in speeds:
        per.append({"speed": d, "analytic": rays1d.gcc_time_analytic(win.omega, d),
                    "bruteforce": rays1d.gcc_time_bruteforce(win.omega, d),
                    "time": rays1d.gcc_time(win.omega, d)})
    res = {"omega": list(win.omega), "speeds": per, "gcc_time": max(p["time"] for p in per)}
    if "T" in cfg.raw["window"]:
        res["T"] = win.T
        res["satisfied"] = bool(rays1d.gcc_satisfied(win.omega, win.T, speeds))
    return res


_COMMANDS = {
    "kalman": _cmd_kalman,
    "spectrum": _cmd_spectrum,
    "counterexample": _cmd_counterexample,
    "gramian": _cmd_gramian,
    "control": _cmd_control,
    "scan-time": _cmd_scan,
    "gcc": _cmd_gcc,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def run(cfg: ExperimentConfig, out: Path) -> dict:
    """Execute ``cfg`` and write ``report.json`` into ``out``; returns the report."""
    out.mkdir(parents=True, exist_ok=True)
    result = _COMMANDS[cfg.command](cfg, out)
    report = {
        "command": cfg.command,
        "config_sha256": cfg.sha256,
        "tolerances": cfg.tolerances,
        "version": __version__,
        "result": result,
    }
    report = _jsonable(report)
    text = json.dumps(report, sort_keys=True, indent=2, allow_nan=True) + "\n"
    (out / "report.json").write_text(text, encoding="utf-8")
    return report


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="simulwave", description="Simultaneous control of coupled 1-D waves: batch experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment description")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"simulwave: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"simulwave: cannot read config: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    try:
        cfg = ExperimentConfig.from_text(args.command, text)
        run(cfg, Path(args.out))
    except _MalformedConfig as exc:
        print(f"simulwave: malformed config: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    except ValidationError as exc:
        print(f"simulwave: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"simulwave: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
