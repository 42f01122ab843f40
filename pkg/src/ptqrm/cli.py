"""Command-line driver for spectra, G-scans, EP searches, dynamics and QFI.

Every subcommand assembles a RunConfig, computes its payload and writes
either comma-separated tables (plot-ready curves) or structured JSON
records (nested payloads with metadata).  Payload bytes are deterministic
for identical configs: floats are printed with repr-faithful %.17g, sweep
points are processed in order, and no timestamps enter the payload.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .approx import aa_pair, caa_pair, state_to_fock
from .dynamics import emission_spectrum, evolve, evolve_in_basis, find_peaks
from .errors import ConfigError, PtqrmError
from .gfunction import find_zeros_real, g_complex, g_real, locate_ep
from .metrology import (
    ed_gap,
    ed_state_provider,
    nhtls_ground_state,
    prep_time,
    qfi_nhtls_analytic,
    qfi_numeric,
    qfi_ptqrm_aa_analytic,
)
from .model import (
    ModelParams,
    TruncationConfig,
    build_hamiltonian,
    exact_diagonalize,
    initial_upper_vacuum,
)

__all__ = ["main", "RunConfig", "ResultRecord", "config_hash"]

FLOAT_FMT = "%.17g"


@dataclass
class RunConfig:
    """Everything a subcommand needs, hashable into a stable identifier."""

    command: str
    delta: float
    epsilon: float
    g: float
    bias: str
    n_fock: int
    methods: list[str]
    sweep: dict | None = None        # {"parameter", "start", "stop", "count"}
    extra: dict = field(default_factory=dict)
    out: str = "."
    format: str = "table"


@dataclass
class ResultRecord:
    """Metadata plus payload for one subcommand run."""

    config_hash: str
    timestamp: str
    version: str
    methods: list[str]
    payload: dict


def config_hash(config: RunConfig) -> str:
    """sha256 of the canonical (sorted, compact) JSON form of the config."""
    blob = json.dumps(asdict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _num_workers() -> int:
    raw = os.environ.get("PTQRM_NUM_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"PTQRM_NUM_WORKERS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError("PTQRM_NUM_WORKERS must be >= 1")
    return n


def _map_ordered(fn, items):
    """Map over sweep points, order-stable, optionally in a process pool."""
    items = list(items)
    workers = _num_workers()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


def _write_table(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])


def _write_outputs(config: RunConfig, tables: dict[str, tuple[list, list]]) -> None:
    """Write tables as CSV, or bundle everything into one JSON record."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    if config.format == "table":
        for name, (header, rows) in tables.items():
            _write_table(out / f"{name}.csv", header, rows)
        meta = ResultRecord(
            config_hash=config_hash(config),
            timestamp=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
            version=__version__,
            methods=config.methods,
            payload={"tables": sorted(tables)},
        )
        (out / "run.json").write_text(json.dumps(asdict(meta), indent=2) + "\n")
    else:
        payload = {
            name: {"header": header,
                   "rows": [[c if isinstance(c, str) else float(_fmt(c)) for c in r]
                            for r in rows]}
            for name, (header, rows) in tables.items()
        }
        record = ResultRecord(
            config_hash=config_hash(config),
            timestamp=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
            version=__version__,
            methods=config.methods,
            payload=payload,
        )
        blob = json.dumps(asdict(record), sort_keys=True, indent=2)
        (out / f"{config.command}.json").write_text(blob + "\n")


def _params(config: RunConfig, **over) -> ModelParams:
    kw = dict(delta=config.delta, epsilon=config.epsilon, g=config.g,
              bias_kind=config.bias)
    kw.update(over)
    return ModelParams(**kw)


def _trunc(config: RunConfig) -> TruncationConfig:
    return TruncationConfig(n_fock=config.n_fock)


def _sweep_values(config: RunConfig) -> np.ndarray:
    sw = config.sweep
    if sw is None:
        return np.array([config.g])
    if sw["count"] < 2:
        raise ConfigError("sweep count must be >= 2")
    return np.linspace(sw["start"], sw["stop"], sw["count"])


# ---------------------------------------------------------------- spectrum

def _spectrum_point(args) -> list[list]:
    g, config = args
    rows = []
    n_pairs = int(config.extra.get("n_pairs", 4))
    for method in config.methods:
        if method == "ed":
            params = _params(config, g=float(g))
            pairs = exact_diagonalize(build_hamiltonian(params, _trunc(config)))
            for k in range(min(2 * n_pairs, len(pairs))):
                e = pairs[k].energy
                rows.append([g, "ed", k // 2, e.real, e.imag])
        elif method in ("aa", "caa"):
            params = _params(config, g=float(g))
            fn = aa_pair if method == "aa" else caa_pair
            for m in range(n_pairs):
                for st in fn(m, params):
                    rows.append([g, method, m, st.energy.real, st.energy.imag])
        else:
            raise ConfigError(f"spectrum does not support method {method!r}")
    return rows


def cmd_spectrum(config: RunConfig) -> None:
    gs = _sweep_values(config)
    chunks = _map_ordered(_spectrum_point, [(g, config) for g in gs])
    rows = [row for chunk in chunks for row in chunk]
    _write_outputs(config, {"spectrum": (["g", "method", "pair", "re_e", "im_e"], rows)})


# ------------------------------------------------------------------- gscan

def cmd_gscan(config: RunConfig) -> None:
    params = _params(config)
    trunc = _trunc(config)
    re_lo, re_hi = config.extra.get("re_range", (-0.5, 4.5))
    im_lo, im_hi = config.extra.get("im_range", (-0.6, 0.6))
    n_re, n_im = config.extra.get("grid", (200, 100))
    re = np.linspace(re_lo, re_hi, int(n_re))
    im = np.linspace(im_lo, im_hi, int(n_im))
    ee = re[None, :] + 1j * im[:, None]
    gv = g_complex(ee.ravel(), params, trunc).reshape(ee.shape)
    with np.errstate(divide="ignore"):
        ln_g2 = np.log(np.abs(gv) ** 2)
    grid_rows = [[re[j], im[i], ln_g2[i, j]]
                 for i in range(len(im)) for j in range(len(re))]

    e_real = np.linspace(re_lo, re_hi, int(config.extra.get("n_real", 800)))
    greal_rows = [[e, g_real(e, params, trunc)] for e in e_real]

    zeros = find_zeros_real((re_lo, re_hi), params, trunc)
    zero_rows = [[z.energy, z.multiplicity] for z in zeros]
    _write_outputs(config, {
        "gscan_grid": (["re_e", "im_e", "ln_g2"], grid_rows),
        "greal": (["e", "g_real"], greal_rows),
        "zeros_real": (["e", "multiplicity"], zero_rows),
    })


# ---------------------------------------------------------------------- ep

def cmd_ep(config: RunConfig) -> None:
    params = _params(config)
    trunc = _trunc(config)
    control = config.extra.get("control", "g")
    lo, hi = config.extra.get("interval", (0.3, 1.0))
    manifold = int(config.extra.get("manifold", 0))
    loc = locate_ep(params, control, (lo, hi), manifold, trunc)
    rows = [[control, loc.value, loc.energy.real, loc.energy.imag,
             loc.residual_g, loc.residual_dg]]
    _write_outputs(config, {
        "ep": (["control", "value", "re_e", "im_e", "residual_g", "residual_dg"], rows)
    })


# ---------------------------------------------------- dynamics and emission

def _approx_eigensystem(config: RunConfig, method: str, n_manifolds: int):
    params = _params(config)
    fn = aa_pair if method == "aa" else caa_pair
    energies, vectors = [], []
    for m in range(n_manifolds):
        for st in fn(m, params):
            energies.append(st.energy)
            vectors.append(state_to_fock(st, params, config.n_fock))
    return np.array(energies), np.column_stack(vectors)


def _traces(config: RunConfig) -> dict[str, "DynamicsTrace"]:
    t_max = float(config.extra.get("t_max", 200.0))
    dt = float(config.extra.get("dt", 0.05))
    n_manifolds = int(config.extra.get("n_manifolds", 12))
    times = np.arange(0.0, t_max, dt)
    psi0 = initial_upper_vacuum(config.n_fock)
    out = {}
    for method in config.methods:
        if method == "ed":
            params = _params(config)
            h = build_hamiltonian(params, _trunc(config))
            out["ed"] = evolve(h, psi0, times)
        elif method in ("aa", "caa"):
            energies, vectors = _approx_eigensystem(config, method, n_manifolds)
            out[method] = evolve_in_basis(energies, vectors, psi0, times,
                                          config.n_fock)
        else:
            raise ConfigError(f"dynamics does not support method {method!r}")
    return out


def cmd_dynamics(config: RunConfig) -> None:
    rows = []
    for method, trace in _traces(config).items():
        for k, t in enumerate(trace.times):
            rows.append([t, method, trace.sigma_z[k], trace.log_norm[k]])
    _write_outputs(config, {
        "dynamics": (["t", "method", "sigma_z", "log_norm"], rows)
    })


def cmd_emission(config: RunConfig) -> None:
    dt = float(config.extra.get("dt", 0.05))
    spec_rows, peak_rows = [], []
    for method, trace in _traces(config).items():
        spec = emission_spectrum(trace.sigma_z, dt)
        for k in range(len(spec.freqs)):
            spec_rows.append([spec.freqs[k], method, spec.magnitude[k]])
        for pk in find_peaks(spec):
            peak_rows.append([method, pk.position, pk.height, pk.fwhm])
    _write_outputs(config, {
        "emission": (["nu", "method", "magnitude"], spec_rows),
        "peaks": (["method", "position", "height", "fwhm"], peak_rows),
    })


# --------------------------------------------------------------------- qfi

def _qfi_point(args) -> list[list]:
    lam, config, parameter = args
    trunc = _trunc(config)
    rows = []
    if parameter == "g":
        variants = {
            "ptqrm": _params(config, g=float(lam), bias_kind="imaginary"),
            "hermitian": _params(config, g=float(lam), bias_kind="real"),
            "symmetric": _params(config, g=float(lam), epsilon=0.0,
                                 bias_kind="real"),
        }
        for name, base in variants.items():
            try:
                f = qfi_numeric(ed_state_provider(base, "g", trunc), float(lam))
                rows.append([lam, name, f])
            except PtqrmError:
                rows.append([lam, name, float("nan")])
    else:
        base = _params(config, epsilon=float(lam))
        try:
            f = qfi_numeric(ed_state_provider(base, "epsilon", trunc), float(lam))
            rows.append([lam, "ptqrm", f])
        except PtqrmError:
            rows.append([lam, "ptqrm", float("nan")])
        delta = config.delta
        try:
            rows.append([lam, "nhtls", qfi_nhtls_analytic(delta, float(lam))])
            rows.append([lam, "ptqrm_aa",
                         qfi_ptqrm_aa_analytic(delta, float(lam), config.g)])
        except PtqrmError:
            rows.append([lam, "nhtls", float("nan")])
    return rows


def cmd_qfi(config: RunConfig) -> None:
    parameter = config.extra.get("parameter", "g")
    lams = _sweep_values(config)
    chunks = _map_ordered(_qfi_point, [(l, config, parameter) for l in lams])
    rows = [row for chunk in chunks for row in chunk]
    _write_outputs(config, {"qfi": (["lambda", "method", "qfi"], rows)})


# ---------------------------------------------------------------- preptime

def cmd_preptime(config: RunConfig) -> None:
    parameter = config.extra.get("parameter", "epsilon")
    lam_cs = _sweep_values(config)
    trunc = _trunc(config)
    base = _params(config)
    gap = ed_gap(base, parameter, trunc)
    rows = []
    for lam_c in lam_cs:
        res = prep_time(gap, float(lam_c))
        try:
            f = qfi_numeric(ed_state_provider(base, parameter, trunc), float(lam_c))
        except PtqrmError:
            f = float("nan")
        rows.append([lam_c, res.time, f, f / res.time])
    _write_outputs(config, {
        "preptime": (["lambda_c", "time", "qfi", "qfi_over_time"], rows)
    })


# --------------------------------------------------------------- reproduce

def cmd_reproduce(config: RunConfig) -> None:
    """Bundle the eight figure-level runs under the output directory."""
    out = Path(config.out)

    def sub(command, out_name, **kw):
        cfg = RunConfig(command=command, delta=kw.pop("delta"),
                        epsilon=kw.pop("epsilon"), g=kw.pop("g", 0.0),
                        bias=kw.pop("bias", "imaginary"),
                        n_fock=kw.pop("n_fock", 40),
                        methods=kw.pop("methods", ["ed"]),
                        sweep=kw.pop("sweep", None),
                        extra=kw, out=str(out / out_name), format=config.format)
        _COMMANDS[command](cfg)

    # complex-plane G landscape and its real-axis zeros
    sub("gscan", "fig1_gscan", delta=0.5, epsilon=0.2, g=0.25, n_fock=60,
        grid=(200, 100))
    # real-G curves across the first EP
    for k, g in enumerate((0.5, 0.6828, 0.8)):
        sub("gscan", f"fig2_greal_{k}", delta=0.5, epsilon=0.2, g=g, n_fock=60,
            grid=(40, 20), re_range=(-0.5, 2.5), im_range=(-0.3, 0.3))
    # EP locations for the two bias values
    sub("ep", "fig2_ep_eps02", delta=0.5, epsilon=0.2, interval=(0.4, 0.9))
    sub("ep", "fig2_ep_eps04", delta=0.5, epsilon=0.4, interval=(0.15, 0.6))
    # first four pairs, ED vs AA vs CAA
    sub("spectrum", "fig3_spectrum", delta=1.0, epsilon=0.1, n_fock=80,
        methods=["ed", "aa", "caa"],
        sweep={"parameter": "g", "start": 0.0, "stop": 1.5, "count": 31})
    # dynamics and emission in three coupling regimes
    for tag, g in (("ultra", 0.1), ("near_deep", 0.75), ("deep", 1.25)):
        sub("emission", f"fig456_{tag}", delta=1.0, epsilon=0.1, g=g,
            methods=["ed", "aa", "caa"], t_max=200.0, dt=0.05)
    # Hermitian comparison run
    sub("emission", "fig7_hermitian", delta=1.0, epsilon=0.1, g=0.75,
        bias="real", methods=["ed"], t_max=200.0, dt=0.05)
    # QFI vs coupling and the preparation-time table
    sub("qfi", "fig8_qfi", delta=0.5, epsilon=0.2, parameter="g",
        sweep={"parameter": "g", "start": 0.05, "stop": 1.2, "count": 24})
    sub("preptime", "fig8_preptime", delta=0.5, epsilon=0.0, g=0.25,
        parameter="epsilon",
        sweep={"parameter": "epsilon", "start": 0.05, "stop": 0.28, "count": 8})


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "gscan": cmd_gscan,
    "ep": cmd_ep,
    "dynamics": cmd_dynamics,
    "emission": cmd_emission,
    "qfi": cmd_qfi,
    "preptime": cmd_preptime,
    "reproduce": cmd_reproduce,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptqrm",
        description="Spectra, exceptional points, dynamics and QFI of a "
                    "PT-symmetric qubit-cavity model.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--delta", type=float, default=1.0)
        p.add_argument("--epsilon", type=float, default=0.1)
        p.add_argument("--g", type=float, default=0.25)
        p.add_argument("--g-range", nargs=3, metavar=("START", "STOP", "COUNT"),
                       default=None, help="sweep the coupling (or the qfi/"
                       "preptime parameter) over COUNT points")
        p.add_argument("--bias", choices=("imaginary", "real"), default="imaginary")
        p.add_argument("--n-fock", type=int, default=60)
        p.add_argument("--method", default="ed",
                       help="comma-separated subset of {ed,aa,caa,gfunc}")
        p.add_argument("--out", default=".")
        p.add_argument("--format", choices=("table", "structured"), default="table")
        p.add_argument("--parameter", choices=("g", "epsilon"), default=None,
                       help="estimated/swept parameter for qfi and preptime")
        p.add_argument("--control", choices=("g", "epsilon"), default="g",
                       help="free control for the ep search")
        p.add_argument("--interval", nargs=2, type=float, metavar=("LO", "HI"),
                       default=None, help="bracketing interval for the ep search")
        p.add_argument("--manifold", type=int, default=0)
        p.add_argument("--t-max", type=float, default=200.0)
        p.add_argument("--dt", type=float, default=0.05)
        p.add_argument("--n-pairs", type=int, default=4)
        p.add_argument("--n-manifolds", type=int, default=12)
        p.add_argument("--re-range", nargs=2, type=float, default=None)
        p.add_argument("--im-range", nargs=2, type=float, default=None)
        p.add_argument("--grid", nargs=2, type=int, default=None)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    known = {"ed", "aa", "caa", "gfunc"}
    bad = set(methods) - known
    if bad:
        raise ConfigError(f"unknown methods: {sorted(bad)}")
    sweep = None
    if args.g_range is not None:
        start, stop, count = args.g_range
        sweep = {"parameter": args.parameter or "g",
                 "start": float(start), "stop": float(stop), "count": int(count)}
    extra = {"n_pairs": args.n_pairs, "n_manifolds": args.n_manifolds,
             "t_max": args.t_max, "dt": args.dt, "control": args.control,
             "manifold": args.manifold}
    if args.parameter is not None:
        extra["parameter"] = args.parameter
    if args.interval is not None:
        extra["interval"] = tuple(args.interval)
    if args.re_range is not None:
        extra["re_range"] = tuple(args.re_range)
    if args.im_range is not None:
        extra["im_range"] = tuple(args.im_range)
    if args.grid is not None:
        extra["grid"] = tuple(args.grid)
    return RunConfig(command=args.command, delta=args.delta,
                     epsilon=args.epsilon, g=args.g, bias=args.bias,
                     n_fock=args.n_fock, methods=methods, sweep=sweep,
                     extra=extra, out=args.out, format=args.format)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        _COMMANDS[config.command](config)
    except ConfigError as exc:
        print(f"ptqrm: configuration error: {exc}", file=sys.stderr)
        return 2
    except (PtqrmError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"ptqrm: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
