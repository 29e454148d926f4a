"""Command-line front end.

Subcommands ``eigen``, ``transform``, ``propagate``, ``verify`` and
``classical`` write CSV/JSON files into ``--out``.  Settings come from the
defaults, then ``--config`` (JSON), then explicit flags.

Exit codes: 0 success, 1 bad configuration or input, 2 a verification failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .classical import (
    PhaseState, action_along_path, energy_drift, free_potential, harmonic_potential,
    integrate_trajectory, write_trajectory_csv,
)
from .deformation import DeformationParams, deformation_factor, make_params, u_of_x
from .grid import SPACING_MODES, integrate_flat, make_grid, read_wavefunction_csv, write_wavefunction_csv
from .operators import hamiltonian_matrix, reports_to_json
from .propagators import (
    TIME_KINDS, SpectralPropagatorFactory, bound_scan, free_kernel_on_grid, free_propagator_closed,
    interior_mask, relative_difference, standard_baseline, timeslice_propagator, write_kernel_csv,
)
from .suite import SUITE_TOLERANCES, run_suite, suite_passed
from .transform import (
    eigenfunction_on_grid, forward_transform, inverse_transform, momentum_lattice, overlap_closed,
    overlap_modulus_reference, overlap_quadrature, parseval_ratio, read_spectral_csv, write_spectral_csv,
    xi_window,
)

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2
CONVERGENCE_SLICES = (8, 16, 32, 64)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    tau: float = 0.1
    hbar: float = 1.0
    mass: float = 1.0
    n: int = 2049
    spacing_mode: str = "uniform-in-u"
    delta_t: float = 1.0
    slices: int = 32
    time_kind: str = "euclidean"
    xi_window: float | None = None
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "."

    def validate(self) -> "RunConfig":
        try:
            self.params()
            make_grid(self.params(), self.n, self.spacing_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not (np.isfinite(self.delta_t) and self.delta_t > 0):
            raise ConfigError(f"delta_t must be positive, got {self.delta_t!r}")
        if int(self.slices) != self.slices or self.slices < 1:
            raise ConfigError(f"slices must be a positive integer, got {self.slices!r}")
        if self.time_kind not in TIME_KINDS:
            raise ConfigError(f"time_kind must be one of {TIME_KINDS}")
        if self.xi_window is not None and not self.xi_window > 0:
            raise ConfigError("xi_window must be a positive half-width")
        unknown = set(self.tolerances) - set(SUITE_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance labels {sorted(unknown)}")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v >= 0):
                raise ConfigError(f"tolerance {k} must be a non-negative number")
        return self

    def params(self) -> DeformationParams:
        return make_params(self.tau, self.hbar, self.mass)

    def grid(self):
        return make_grid(self.params(), self.n, self.spacing_mode)

    def tolerance(self, label: str) -> float:
        return float(self.tolerances.get(label, SUITE_TOLERANCES[label]))


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(data) - names
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        for k, v in data.items():
            setattr(cfg, k, dict(v) if k == "tolerances" else v)
    for name in ("tau", "hbar", "mass", "n", "spacing_mode", "delta_t", "slices", "time_kind", "xi_window"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    for item in args.tolerance or []:
        label, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tolerance expects label=value, got {item!r}")
        try:
            cfg.tolerances[label] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad tolerance value {value!r}") from exc
    if args.out is not None:
        cfg.output_dir = args.out
    return cfg.validate()


def _out(cfg: RunConfig) -> Path:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _r(v) -> str:
    return repr(float(v))


# -- subcommands ---------------------------------------------------------------------

def cmd_eigen(cfg: RunConfig, args) -> int:
    p = cfg.params()
    grid = cfg.grid()
    out = _out(cfg)
    xis = list(args.xi) if args.xi else list(momentum_lattice(p, -2, 2))
    for k, xi in enumerate(xis):
        write_wavefunction_csv(out / f"eigen_{k:03d}.csv", eigenfunction_on_grid(grid, xi))
    with open(out / "overlap.csv", "w") as fh:
        fh.write("xi,xi_prime,quad_re,quad_im,closed_re,closed_im,paper_form\n")
        for a in xis:
            for b in xis:
                q = complex(overlap_quadrature(grid, a, b))
                c = complex(overlap_closed(p, a, b))
                fh.write(",".join([_r(a), _r(b), _r(q.real), _r(q.imag), _r(c.real), _r(c.imag),
                                   _r(overlap_modulus_reference(p, a, b))]) + "\n")
    if args.sweep:
        with open(out / "overlap_sweep.csv", "w") as fh:
            fh.write("tau,delta_xi,quad_abs,closed_abs,paper_form\n")
            for tau in args.sweep:
                q = make_params(tau, cfg.hbar, cfg.mass)
                g = make_grid(q, cfg.n, cfg.spacing_mode)
                d = np.linspace(-8.0, 8.0, 401) * cfg.hbar * tau
                quad = np.abs(overlap_quadrature(g, d, 0.0))
                closed = np.abs(overlap_closed(q, d, 0.0))
                printed = overlap_modulus_reference(q, d, 0.0)
                for row in zip(d, quad, closed, printed):
                    fh.write(",".join([_r(tau)] + [_r(v) for v in row]) + "\n")
    print(json.dumps({"eigenfunctions": len(xis), "output_dir": str(out)}))
    return EXIT_OK


def cmd_transform(cfg: RunConfig, args) -> int:
    p = cfg.params()
    grid = cfg.grid()
    out = _out(cfg)
    xi = xi_window(grid, cfg.xi_window)
    try:
        if args.direction == "forward":
            psi = read_wavefunction_csv(args.input, grid).capital()
            spec = forward_transform(grid, psi, xi)
            back = inverse_transform(p, spec, grid)
            write_spectral_csv(out / "spectral.csv", spec)
            norm_x = integrate_flat(grid, np.abs(psi.samples) ** 2).real
            ratio = spec.norm_squared() / norm_x
            scale = np.max(np.abs(psi.samples))
            err = float(np.max(np.abs(back.samples - psi.samples)) / scale)
            tail = spec.tail_bound()
        else:
            spec = read_spectral_csv(args.input, p)
            psi = inverse_transform(p, spec, grid)
            write_wavefunction_csv(out / "wavefunction.csv", psi)
            again = forward_transform(grid, psi, spec.xi_nodes)
            ratio = spec.norm_squared() / integrate_flat(grid, np.abs(psi.samples) ** 2).real
            err = float(np.max(np.abs(again.values - spec.values)) / np.max(np.abs(spec.values)))
            tail = spec.tail_bound()
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    tol = cfg.tolerance("round_trip")
    summary = {"direction": args.direction, "parseval_ratio": float(ratio),
               "parseval_expected": parseval_ratio(p), "round_trip_error": err,
               "round_trip_tolerance": tol, "tail_bound": tail, "pass": bool(err <= tol)}
    _dump(out / "transform_summary.json", summary)
    print(json.dumps(summary))
    return EXIT_OK if err <= tol else EXIT_FAILED


def _default_pairs(p: DeformationParams):
    ell = p.ell_max
    return [(0.0, 0.0), (0.0, 0.5 * ell), (-0.5 * ell, 0.5 * ell), (-ell, 0.0), (0.49 * ell, 0.51 * ell)]


def _parse_pairs(items):
    pairs = []
    for item in items:
        a, sep, b = item.partition(",")
        if not sep:
            raise ConfigError(f"--pair expects x,x_prime, got {item!r}")
        pairs.append((float(a), float(b)))
    return pairs


def cmd_propagate(cfg: RunConfig, args) -> int:
    p = cfg.params()
    grid = cfg.grid()
    if grid.spacing_mode != "uniform-in-u":
        raise ConfigError("propagate needs spacing_mode uniform-in-u")
    out = _out(cfg)
    pairs = _parse_pairs(args.pair) if args.pair else _default_pairs(p)
    x = grid.x_nodes
    for a, b in pairs:
        if max(abs(a), abs(b)) > p.ell_max:
            raise ConfigError(f"pair ({a}, {b}) outside the domain")
    idx = [(int(np.argmin(np.abs(x - a))), int(np.argmin(np.abs(x - b)))) for a, b in pairs]
    dt, kind = cfg.delta_t, cfg.time_kind
    h = hamiltonian_matrix(grid)
    factory = SpectralPropagatorFactory(grid, h)
    spectral = factory(dt, kind)
    sliced = timeslice_propagator(grid, h, dt, cfg.slices) if kind == "euclidean" else None

    small = make_params(1e-6, cfg.hbar, cfg.mass)
    header = ["x", "x_prime", "x_node", "x_prime_node", "closed_paper_re", "closed_paper_im",
              "closed_measure_re", "closed_measure_im", "timeslice_re", "timeslice_im",
              "spectral_re", "spectral_im", "standard_re", "standard_im", "s_fp", "t_fp", "s_std", "t_std",
              "small_tau_re", "small_tau_im"]
    with open(out / "kernels.csv", "w") as fh:
        fh.write(",".join(header) + "\n")
        for (a, b), (i, j) in zip(pairs, idx):
            xi_, xj = x[i], x[j]
            kp = complex(free_propagator_closed(p, xi_, xj, dt, kind, "paper-form"))
            km = complex(free_propagator_closed(p, xi_, xj, dt, kind, "measure-consistent"))
            ts = complex(sliced.entries[i, j]) if sliced is not None else complex(np.nan, np.nan)
            sp = complex(spectral.entries[i, j])
            k0, s0, t0 = standard_baseline(p, xi_, xj, dt, kind)
            s = float((u_of_x(p, xi_) - u_of_x(p, xj)) ** 2 * p.mass / (2 * dt))
            # the tau -> 0 column: deformed closed form at tau = 1e-6, to compare with the standard kernel
            ksmall = complex(free_propagator_closed(small, xi_, xj, dt, kind, "paper-form"))
            row = [a, b, xi_, xj, kp.real, kp.imag, km.real, km.imag, ts.real, ts.imag, sp.real, sp.imag,
                   k0.real, k0.imag, s, s / dt, s0, t0, ksmall.real, ksmall.imag]
            fh.write(",".join(_r(v) for v in row) + "\n")
    write_kernel_csv(out / "kernel.csv", sliced if sliced is not None else spectral, idx)

    conv = []
    if kind == "euclidean":
        ref = free_kernel_on_grid(grid, dt, "euclidean")
        mask = interior_mask(grid, 6.0 * np.sqrt(p.hbar * dt / p.mass))
        prev = None
        for n_sl in CONVERGENCE_SLICES:
            k = sliced if n_sl == cfg.slices else timeslice_propagator(grid, h, dt, n_sl)
            err = relative_difference(k, ref, mask) if mask.any() else float("nan")
            conv.append({"slices": n_sl, "error": err, "ratio": None if prev is None else prev / err})
            prev = err
        with open(out / "convergence.csv", "w") as fh:
            fh.write("slices,error,ratio\n")
            for c in conv:
                fh.write(f"{c['slices']},{_r(c['error'])},{'' if c['ratio'] is None else _r(c['ratio'])}\n")
    samples = np.linspace(-p.ell_max, p.ell_max, 21)
    report = bound_scan(p, samples, dt, kind)
    (out / "bound_scan.json").write_text(report.to_json() + "\n")
    _dump(out / "bound_scan_summary.json", report.summary())
    print(json.dumps({"pairs": len(pairs), "convergence": conv, "bound_scan": report.summary()["action_bound_violated"]}))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    reports = run_suite(cfg.params(), cfg.n, delta_t=cfg.delta_t, slices=cfg.slices,
                        xi_half_width=cfg.xi_window, tolerances=cfg.tolerances)
    text = reports_to_json(reports)
    (_out(cfg) / "verify.json").write_text(text + "\n")
    print(text)
    return EXIT_OK if suite_passed(reports) else EXIT_FAILED


def cmd_classical(cfg: RunConfig, args) -> int:
    p = cfg.params()
    pot = free_potential() if args.potential == "free" else harmonic_potential(args.spring)
    traj = integrate_trajectory(p, pot, PhaseState(args.x0, args.xi0), args.t_end, args.dt)
    out = _out(cfg)
    write_trajectory_csv(out / "trajectory.csv", traj, p, pot)
    summary = {"states": int(traj.t.size), "event": traj.event, "energy_drift": energy_drift(traj, p, pot),
               "action": action_along_path(p, traj, pot),
               "bracket_at_x0": float(deformation_factor(p, args.x0))}
    _dump(out / "classical_summary.json", summary)
    print(json.dumps(summary))
    return EXIT_OK


COMMANDS = {"eigen": cmd_eigen, "transform": cmd_transform, "propagate": cmd_propagate,
            "verify": cmd_verify, "classical": cmd_classical}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tolerance", action="append", metavar="LABEL=VALUE",
                        help="override a residual tolerance (repeatable)")
    common.add_argument("--tau", type=float)
    common.add_argument("--hbar", type=float)
    common.add_argument("--mass", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--spacing-mode", dest="spacing_mode", choices=SPACING_MODES)
    common.add_argument("--delta-t", dest="delta_t", type=float)
    common.add_argument("--slices", type=int)
    common.add_argument("--time-kind", dest="time_kind", choices=TIME_KINDS)
    common.add_argument("--xi-window", dest="xi_window", type=float, help="half-width of the xi window")

    parser = argparse.ArgumentParser(prog="posdeform", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    e = sub.add_parser("eigen", parents=[common], help="eigenfunctions and overlaps")
    e.add_argument("--xi", type=float, nargs="+")
    e.add_argument("--sweep", type=float, nargs="+", metavar="TAU", help="overlap sweep for these tau values")
    t = sub.add_parser("transform", parents=[common], help="forward or inverse transform of a CSV file")
    t.add_argument("input")
    t.add_argument("--direction", choices=("forward", "inverse"), default="forward")
    pr = sub.add_parser("propagate", parents=[common], help="free-particle kernels and the bound scan")
    pr.add_argument("--pair", action="append", metavar="X,XP")
    sub.add_parser("verify", parents=[common], help="run the invariant suite")
    c = sub.add_parser("classical", parents=[common], help="integrate a classical trajectory")
    c.add_argument("--x0", type=float, default=0.0)
    c.add_argument("--xi0", type=float, default=0.5)
    c.add_argument("--t-end", dest="t_end", type=float, default=10.0)
    c.add_argument("--dt", type=float, default=1e-3)
    c.add_argument("--potential", choices=("free", "harmonic"), default="free")
    c.add_argument("--spring", type=float, default=1.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
