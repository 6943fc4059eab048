"""Command-line interface: simulate, fit, scan-nz, revival.

Exit codes: 0 success (including NOT_ATTAINED / NOT_OBSERVED outcomes),
2 usage or configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
import tempfile
import warnings
from pathlib import Path


from . import __version__
from .analysis import (
    DataSet,
    ModelConfig,
    SamplingError,
    compare_kappa_hypotheses,
    detect_revival,
    fit_delta_t_windowed,
    parse_windows,
    revival_time_estimate,
    scan_nz_lower_bound,
)
from .config import ConfigError, RunConfig
from .curves import TimeGrid, evaluate_curve
from .errors import DataError, DomainError, IntegrationError, UnsupportedConfigurationError
from .model import FieldState, RepresentationConfig

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

# flag name -> RunConfig field
_MODEL_FLAGS = {
    "rep": "rep", "N": "n_osc", "Z": "z_renorm", "chi_p": "chi_p", "state": "state",
    "nbar": "nbar", "z_amp": "z_amp", "gph_khz_over_pi": "gph_khz_over_pi",
    "delta": "delta", "p_plus0": "p_plus0", "kappa": "kappa", "t_cav_us": "t_cav_us",
    "dt_us": "dt_us", "dt_fraction": "dt_fraction", "t_min_us": "t_min_us",
    "t_max_us": "t_max_us", "points": "points", "open_start": "open_start", "eps": "eps",
    "weights": "weights",
}


def fmt(x: float) -> str:
    return f"{x:.12g}"


def _add_model_flags(p: argparse.ArgumentParser, grid: bool = True):
    p.add_argument("--config", type=Path, help="key = value run configuration file")
    p.add_argument("--rep", choices=["irreducible", "reducible"])
    p.add_argument("--N", type=int, help="number of oscillators (reducible)")
    p.add_argument("--Z", type=float, help="renormalization constant Z")
    p.add_argument("--chi-p", type=float, dest="chi_p", help="cut-off chi_p = Z_p/Z")
    p.add_argument("--state", choices=["vacuum", "thermal", "coherent"])
    p.add_argument("--nbar", type=float, help="thermal mean photon number")
    p.add_argument("--z-amp", type=float, dest="z_amp", help="bare coherent amplitude |z|")
    p.add_argument("--coherent-nbar", type=float, dest="coherent_nbar",
                   help="coherent mean photon number |z_ph chi'_p|^2 (sets --z-amp)")
    p.add_argument("--gph-khz-over-pi", type=float, dest="gph_khz_over_pi",
                   help="physical coupling g_ph/pi in kHz (default 47)")
    p.add_argument("--delta", type=float, help="detuning in rad/us")
    p.add_argument("--p-plus0", type=float, dest="p_plus0")
    p.add_argument("--kappa", type=float, help="energy damping rate, 1/us")
    p.add_argument("--t-cav-us", type=float, dest="t_cav_us",
                   help="cavity lifetime; sets kappa = 1/(2 T_cav)")
    p.add_argument("--dt-us", type=float, dest="dt_us", help="timing uncertainty, us")
    p.add_argument("--dt-fraction", type=float, dest="dt_fraction",
                   help="linear model dt(t) = c t")
    p.add_argument("--eps", type=float, help="photon-sum truncation mass")
    p.add_argument("--weights", choices=["binomial", "gaussian", "gaussian_small_z"])
    if grid:
        p.add_argument("--t-min-us", type=float, dest="t_min_us")
        p.add_argument("--t-max-us", type=float, dest="t_max_us")
        p.add_argument("--points", type=int)
        p.add_argument("--open-start", action="store_true", default=None, dest="open_start",
                       help="sample (t_min, t_max] instead of [t_min, t_max]")
    p.add_argument("-o", "--output", type=Path, help="write CSV here instead of stdout")


def resolve_config(args) -> RunConfig:
    base = RunConfig.from_text(args.config.read_text()) if args.config else None
    changes = {}
    for flag, name in _MODEL_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            changes[name] = v
    if changes.get("n_osc") is not None and "rep" not in changes and base is None:
        changes["rep"] = "reducible"
    if base is None:
        cfg = RunConfig(**changes)
    else:
        cfg = base.replace(**changes)
    if getattr(args, "coherent_nbar", None) is not None:
        rep = cfg.representation()
        z = FieldState.coherent_with_mean(args.coherent_nbar, rep).z_amp
        cfg = cfg.replace(state="coherent", z_amp=z)
    return cfg


def _header(cfg: RunConfig, extra: dict | None = None) -> str:
    lines = [f"# {line}" for line in cfg.to_text().splitlines()]
    for k, v in (extra or {}).items():
        lines.append(f"# {k} = {v}")
    return "\n".join(lines) + "\n"


def _emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_simulate(args) -> int:
    cfg = resolve_config(args)
    curve = evaluate_curve(cfg.representation(), cfg.field_state(), cfg.physical(),
                           cfg.decoherence(), cfg.grid(), eps=cfg.eps, weights=cfg.weights)
    out = io.StringIO()
    out.write(_header(cfg))
    out.write("t_us,p_plus\n")
    for t, v in zip(curve.times, curve.values):
        out.write(f"{fmt(t)},{fmt(v)}\n")
    _emit(out.getvalue(), args.output)
    return 0


def cmd_fit(args) -> int:
    cfg = resolve_config(args)
    data = DataSet.from_csv(args.data)
    model = ModelConfig(cfg.representation(), cfg.field_state(), cfg.physical(), cfg.eps)
    dt_range = (args.dt_min, args.dt_max)
    kw = {"linear": args.linear_dt}
    cmp = compare_kappa_hypotheses(data, model, dt_range, args.t_cav_fit, **kw)
    key = "dt_fraction" if args.linear_dt else "dt_us"
    out = io.StringIO()
    out.write(_header(cfg, {"data": args.data, "t_cav_fit_us": repr(args.t_cav_fit),
                            "weights_mode": "unit" if data.err is None else "1/err^2"}))
    out.write(f"hypothesis,kappa_per_us,best_{key},sse,mean_signed_residual\n")
    rows = [("kappa>0", cmp.damped), ("kappa=0", cmp.undamped)]
    for name, res in rows:
        out.write(f"{name},{fmt(res.best_params['kappa'])},{fmt(res.best_params[key])},"
                  f"{fmt(res.residual_sse)},{fmt(res.mean_signed_residual)}\n")
    summary = [f"preferred hypothesis: {cmp.preferred}"]
    if data.err is None:
        summary.append("no err column: unit weights used")
    if args.windows:
        kappa = cmp.kappa_damped if args.window_kappa == "damped" else 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            win = fit_delta_t_windowed(data, model, parse_windows(args.windows), dt_range,
                                       kappa, **kw)
        out.write(f"# per-window fit, kappa = {fmt(kappa)}\n")
        out.write(f"window_start_us,window_stop_us,best_{key}\n")
        for (lo, hi), v in win.per_window:
            out.write(f"{fmt(lo)},{fmt(hi)},{'SKIPPED' if v is None else fmt(v)}\n")
    _emit(out.getvalue(), args.output)
    for name, res in rows:
        summary.append(f"{name}: best {key} = {res.best_params[key]:.4f}, "
                       f"SSE = {res.residual_sse:.6g}, "
                       f"mean(model - data) = {res.mean_signed_residual:+.4g}")
    print("\n".join(summary), file=sys.stderr)
    return 0


def parse_nz_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        a, b, c = (float(x) for x in text.split(":"))
        if c <= 0 or b < a:
            raise ValueError(f"bad NZ range {text!r}")
        n = int(math.floor((b - a) / c + 1e-9)) + 1
        return [a + k * c for k in range(n)]
    return [float(x) for x in text.split(",")]


def cmd_scan_nz(args) -> int:
    cfg = resolve_config(args)
    nz_grid = parse_nz_grid(args.nz_grid)
    scan = scan_nz_lower_bound(cfg.physical(), cfg.field_state(), cfg.z_renorm, nz_grid,
                               args.scan_eps, cfg.grid(), cfg.decoherence(),
                               chi_p=cfg.chi_p, workers=args.workers)
    out = io.StringIO()
    out.write(_header(cfg, {"scan_eps": repr(args.scan_eps), "nz_grid": args.nz_grid,
                            "n_rounding": scan.rounding}))
    out.write("nz,sup_distance\n")
    for nz, d in zip(scan.nz_grid, scan.distances):
        out.write(f"{fmt(nz)},{fmt(d)}\n")
    out.write(f"# bound={'NOT_ATTAINED' if scan.bound is None else fmt(scan.bound)}\n")
    _emit(out.getvalue(), args.output)
    return 0


def _parse_pair(text: str) -> tuple[int, float]:
    n, _, z = text.partition(":")
    try:
        if "/" in z:
            num, den = z.split("/")
            zval = float(num) / float(den)
        else:
            zval = float(z)
        return int(n), zval
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N:Z, got {text!r}") from None


def cmd_revival(args) -> int:
    cfg = resolve_config(args)
    if cfg.delta != 0:
        raise ConfigError("revival detection assumes resonance (delta = 0)")
    params = cfg.physical()
    step = args.step_us
    if step is None:
        step = math.pi / params.g_ph / 40.0
    count = int(math.floor(args.t_max_us / step + 1e-9)) + 1
    grid = TimeGrid(step * (count - 1), count)
    if count < 2 or step > math.pi / params.g_ph / 20.0:
        raise SamplingError(
            f"step {step:.4g} us gives fewer than 20 samples per carrier period "
            f"{math.pi / params.g_ph:.4g} us; pass --step-us <= "
            f"{math.pi / params.g_ph / 20.0:.4g}")
    if args.pair:
        reps = [RepresentationConfig.reducible(n, z, cfg.chi_p) for n, z in args.pair]
    else:
        reps = [cfg.representation()]
    out = io.StringIO()
    out.write(_header(cfg, {"revival_t_max_us": repr(args.t_max_us), "step_us": repr(step)}))
    out.write("n_osc,z,nz,collapse_time_us,revival_time_us,estimate_us,status\n")
    trailers = []
    env_rows = []
    for rep in reps:
        curve = evaluate_curve(rep, FieldState.vacuum(), params, cfg.decoherence(), grid)
        rpt = detect_revival(curve, params.g_ph)
        if rep.n_osc is None:
            n_txt = z_txt = nz_txt = est_txt = ""
        else:
            nz = rep.n_osc * rep.z_renorm
            n_txt, z_txt, nz_txt = str(rep.n_osc), fmt(rep.z_renorm), fmt(nz)
            est_txt = fmt(revival_time_estimate(nz, params.g_ph))
        col = "" if rpt.collapse_time is None else fmt(rpt.collapse_time)
        rev = "NOT_OBSERVED" if rpt.revival_time is None else fmt(rpt.revival_time)
        status = rpt.status
        out.write(f"{n_txt},{z_txt},{nz_txt},{col},{rev},{est_txt},{status}\n")
        trailers.append(f"# revival={rev}")
        env_rows.append((n_txt, rpt))
    out.write("\n".join(trailers) + "\n")
    _emit(out.getvalue(), args.output)
    if args.envelope_out:
        env = io.StringIO()
        env.write("n_osc,t_us,envelope\n")
        for n_txt, rpt in env_rows:
            for t, e in zip(rpt.envelope_times, rpt.envelope):
                env.write(f"{n_txt},{fmt(t)},{fmt(e)}\n")
        _emit(env.getvalue(), args.envelope_out)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: usage: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccrqed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="sample p_plus(t) to CSV")
    _add_model_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the timing uncertainty to a data CSV")
    p.add_argument("data", type=Path, help="CSV with header t_us,p_plus[,err]")
    _add_model_flags(p, grid=False)
    p.add_argument("--dt-min", type=float, default=0.0)
    p.add_argument("--dt-max", type=float, default=2.0)
    p.add_argument("--t-cav-fit", type=float, default=220.0,
                   help="cavity lifetime for the kappa > 0 hypothesis, us")
    p.add_argument("--linear-dt", action="store_true",
                   help="fit c of dt(t) = c t instead of a constant dt")
    p.add_argument("--windows", help="per-window fits, e.g. 0:15,15:35,35:60,60:90")
    p.add_argument("--window-kappa", choices=["zero", "damped"], default="zero")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("scan-nz", help="lower bound on NZ from reducible/irreducible distance")
    _add_model_flags(p)
    p.add_argument("--nz-grid", default="10:1000:10", help="start:stop:step or a,b,c")
    p.add_argument("--scan-eps", type=float, default=0.05, help="sup-distance tolerance")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_scan_nz)

    p = sub.add_parser("revival", help="detect vacuum collapse and revival times")
    _add_model_flags(p, grid=False)
    p.add_argument("--pair", action="append", type=_parse_pair,
                   help="reducible N:Z pair (repeatable; Z may be a fraction like 1/3)")
    p.add_argument("--t-max-us", type=float, default=12000.0, dest="t_max_us")
    p.add_argument("--step-us", type=float, help="sample spacing (default period/40)")
    p.add_argument("--envelope-out", type=Path)
    p.set_defaults(func=cmd_revival)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, UnsupportedConfigurationError, SamplingError,
            ValueError) as exc:
        if isinstance(exc, DataError):
            print(f"error: data: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IntegrationError, FloatingPointError, ArithmeticError) as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
