"""Command-line runner: ``chflow <subcommand> [--config FILE] [--out DIR] [overrides]``.

Subcommands write plain data (CSV with a header row, JSON manifests carrying
``schema_version``) into the output directory.  Exit codes: 0 success,
1 a verification check failed, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import commutator, diffpoly, eulerian, peakons, taylor
from . import spectral as sp

SCHEMA_VERSION = 1
SUBCOMMANDS = ("simulate-eulerian", "simulate-peakons", "taylor-analyze", "verify-identities")
PRESETS = ("zero", "constant", "sine", "periodic-peakon", "multipeakon", "antisym")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on; serialized as one JSON document."""

    subcommand: str = "simulate-eulerian"
    l: int = 1
    n: int = 256
    dt: float = 1e-3
    T: float = 1.0
    K: int = 12
    preset: str = "sine"
    amplitude: float = 0.2
    speed: float = 1.0
    peakons: list = field(default_factory=lambda: [[0.0, 1.0]])
    speeds: list = field(default_factory=lambda: [1.0, -1.0])
    t0: float = -2.0
    continuation: bool = False
    labeling: str = "analytic"
    save_every: int = 10
    compare_t: float = 0.05
    k_max: int = 4
    m_max: int = 3
    pairs: int = 10
    seed: int = 0
    out: str = "run"
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> "RunConfig":
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        for name in ("l", "n", "K", "save_every", "k_max", "m_max", "pairs"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("dt", "T", "compare_t"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if self.n % 2 or self.n < 8:
            raise ConfigError(f"grid size n must be even and >= 8, got {self.n}")
        if self.K > 30:
            raise ConfigError("K must be at most 30")
        if self.labeling not in ("analytic", "swapped"):
            raise ConfigError("labeling must be 'analytic' or 'swapped'")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


# -- helpers --------------------------------------------------------------------------

def initial_field(cfg: RunConfig, grid: sp.PeriodicGrid) -> sp.PeriodicField:
    if cfg.preset == "zero":
        return grid.field(np.zeros(grid.n))
    if cfg.preset == "constant":
        return grid.field(np.full(grid.n, float(cfg.amplitude)))
    if cfg.preset == "sine":
        return grid.from_function(lambda x: cfg.amplitude * np.sin(2 * np.pi * x))
    if cfg.preset == "periodic-peakon":
        return peakons.periodic_peakon(cfg.speed, 0.0, grid)
    raise ConfigError(f"preset {cfg.preset!r} does not define a periodic field")


def initial_peakons(cfg: RunConfig) -> peakons.PeakonState:
    if cfg.preset == "antisym":
        c1, c2 = cfg.speeds
        q = np.array(peakons.exact_antisym_collision(c1, c2, cfg.t0))
        v = np.array(peakons.glued_velocities(c1, c2, cfg.t0))
        return peakons.PeakonState(q, peakons.reconstruct_amplitudes(q, v), cfg.t0)
    if cfg.preset == "multipeakon":
        arr = np.asarray(cfg.peakons, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ConfigError("peakons must be a list of [q, p] pairs")
        return peakons.PeakonState(arr[:, 0], arr[:, 1])
    raise ConfigError(f"preset {cfg.preset!r} does not define a multipeakon")


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def _manifest(cfg: RunConfig, **extra) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "config": asdict(cfg)}
    out.update(extra)
    return out


# -- subcommands -------------------------------------------------------------------------

def run_simulate_eulerian(cfg: RunConfig, out: Path, log) -> int:
    grid = sp.PeriodicGrid(cfg.n)
    u0 = initial_field(cfg, grid)
    state = eulerian.CHState(u0, cfg.l)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", eulerian.CFLWarning)
        try:
            traj = eulerian.integrate(state, cfg.T, cfg.dt, save_every=cfg.save_every)
        except eulerian.WaveBreakingError as exc:
            _write_json(out / "manifest.json", _manifest(
                cfg, status="aborted", breakdown={"time": exc.time, "message": str(exc)}))
            log(f"numerical abort: {exc}")
            return EXIT_NUMERIC
    rows = [[t] + list(traj.field(i).values) for i, t in enumerate(traj.times)]
    _write_csv(out / "trajectory.csv", ["t"] + [f"u{j}" for j in range(cfg.n)], rows)
    extra = {
        "status": "ok",
        "times": traj.times,
        "energy": traj.energy,
        "energy_drift": eulerian.energy_drift(traj),
        "warnings": [str(w.message) for w in caught],
        "breakdown": None,
    }
    if cfg.preset == "periodic-peakon":
        crest = [eulerian.crest_position(traj.field(i)) for i in range(len(traj.times))]
        extra["crest"] = {"times": traj.times, "position": crest,
                          "expected": [(cfg.speed * t) % 1.0 for t in traj.times]}
    _write_json(out / "manifest.json", _manifest(cfg, **extra))
    log(f"simulate-eulerian: {len(traj.times)} snapshots, energy drift {extra['energy_drift']:.3e}")
    return EXIT_OK


def run_simulate_peakons(cfg: RunConfig, out: Path, log) -> int:
    state = initial_peakons(cfg)
    traj = peakons.integrate(state, cfg.T, cfg.dt, save_every=cfg.save_every,
                             continuation=cfg.continuation, labeling=cfg.labeling)
    n = state.n
    T, Q, P = traj.arrays()
    rows = [[t, *q, *p, H, 4 * H] for t, q, p, H in zip(T, Q, P, traj.H)]
    header = ["t"] + [f"q{i}" for i in range(n)] + [f"p{i}" for i in range(n)] + ["H", "energy"]
    _write_csv(out / "trajectory.csv", header, rows)
    events = [e.as_dict() for e in traj.events]
    _write_json(out / "events.json", {"schema_version": SCHEMA_VERSION, "events": events})
    H = np.asarray(traj.H)
    ncont = len(traj.continued)
    pre = H[: len(H) - ncont]
    extra = {
        "status": "collision" if events else "ok",
        "events": events,
        "continued_samples": ncont,
        "hamiltonian_drift": float(np.max(np.abs(pre - pre[0])) / max(abs(pre[0]), 1e-300)),
    }
    _write_json(out / "manifest.json", _manifest(cfg, **extra))
    log(f"simulate-peakons: {len(T)} samples, {len(events)} event(s)")
    return EXIT_OK


def run_taylor_analyze(cfg: RunConfig, out: Path, log) -> int:
    grid = sp.PeriodicGrid(cfg.n)
    u0 = initial_field(cfg, grid)
    tt = taylor.time_taylor_u(u0, cfg.l, cfg.K)
    report = taylor.analyticity_report(tt)
    ft = taylor.flow_taylor(u0, cfg.l, cfg.K, tt)
    steps = max(1, int(np.ceil(cfg.compare_t / cfg.dt)))
    flow, _ = eulerian.advance_flow(eulerian.CHState(u0, cfg.l), cfg.compare_t,
                                    cfg.compare_t / steps)
    compare = {
        "t": cfg.compare_t,
        "steps": steps,
        "sup_difference": float(np.max(np.abs(ft.positions(cfg.compare_t) - flow.final))),
        "min_jacobian": flow.min_jacobian,
    }
    body = report.as_dict()
    body["flow_comparison"] = compare
    _write_json(out / "report.json", _manifest(cfg, report=body))
    log(f"taylor-analyze: L = {report.L:.4g}, stabilized = {report.stabilized}, "
        f"flow difference = {compare['sup_difference']:.3e}")
    return EXIT_OK if report.passed else EXIT_FAILED


def run_verify_identities(cfg: RunConfig, out: Path, log) -> int:
    rng = np.random.default_rng(cfg.seed)
    rows = []

    def record(check, params, value, ok):
        rows.append({"check": check, "params": params, "value": str(value), "pass": bool(ok)})

    for k in range(1, cfg.k_max + 1):
        for m in range(1, cfg.m_max + 1):
            terms = commutator.build_Fkm(k, m)
            worst = 0
            for _ in range(cfg.pairs):
                u, psi = commutator.random_symfield(rng), commutator.random_symfield(rng)
                worst = max(worst, commutator.verify_identity(k, m, u, psi, terms))
            record("identity", f"k={k},m={m}", worst, worst == 0)
    for k in range(1, 7):
        ts = commutator.build_F1(k)
        record("F1-bound", f"k={k}", len(ts.bound_violations()), ts.check_membership()
               and not ts.bound_violations())
    for k in range(1, 6):
        for m in range(1, 5):
            ts = commutator.build_Fkm(k, m)
            bad = ts.bound_violations()
            record("Fkm-bound", f"k={k},m={m}", len(bad), ts.check_membership() and not bad)
    for s in range(1, 7):
        ok = all(commutator.upsilon_bound_holds(s, m) for m in range(31))
        record("upsilon", f"s={s},m<=30", ok, ok)
    ok = all(commutator.leibniz_bound_check(k, a, b)
             for k in range(41) for a in range(5) for b in range(5))
    record("leibniz", "k<=40,m1,m2<=4", ok, ok)
    for l in (1, 2, 3):
        F = diffpoly.antiderivative_F(l)
        resid = F.dx() + diffpoly.expand_Cl(l)
        record("F-recovery", f"l={l}", len(resid.terms), not resid)

    with (out / "verify.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["check", "params", "value", "pass"])
        w.writeheader()
        w.writerows(rows)
    failed = [r for r in rows if not r["pass"]]
    _write_json(out / "manifest.json", _manifest(cfg, checks=rows, failed=len(failed)))
    for r in rows:
        log(f"{'PASS' if r['pass'] else 'FAIL'}  {r['check']:<10} {r['params']:<16} {r['value']}")
    return EXIT_FAILED if failed else EXIT_OK


RUNNERS = {
    "simulate-eulerian": run_simulate_eulerian,
    "simulate-peakons": run_simulate_peakons,
    "taylor-analyze": run_taylor_analyze,
    "verify-identities": run_verify_identities,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--quiet", action="store_true")
        p.add_argument("--preset", choices=PRESETS)
        p.add_argument("--l", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--T", type=float)
        p.add_argument("--K", type=int)
        p.add_argument("--amplitude", type=float)
        p.add_argument("--speed", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--save-every", dest="save_every", type=int)
        p.add_argument("--continuation", action="store_true", default=None)
        p.add_argument("--labeling", choices=("analytic", "swapped"))
    return parser


OVERRIDES = ("preset", "l", "n", "dt", "T", "K", "amplitude", "speed", "seed", "save_every",
             "continuation", "labeling")


def load_config(args) -> RunConfig:
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = RunConfig.from_json(text)
    else:
        cfg = RunConfig()
    cfg.subcommand = args.subcommand
    for name in OVERRIDES:
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    if args.out is not None:
        cfg.out = str(args.out)
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = (lambda msg: None) if args.quiet else (lambda msg: print(msg))
    try:
        cfg = load_config(args)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n")
    try:
        return RUNNERS[cfg.subcommand](cfg, out, log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (eulerian.WaveBreakingError, OverflowError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
