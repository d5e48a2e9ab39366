"""Batch command-line frontend.

Subcommands: gen, norm, net, tails, sweep, decay, diag, tw.  Stochastic
subcommands require an explicit --seed (no wall-clock default).  Parameters
can come from a key=value config file (--config); command-line flags
override file values, and the effective merged config is echoed into every
report so a run can be reproduced from its own output.

Exit status: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from . import diagnostics, ensembles, epsnet, experiments, specnorm
from .errors import (
    ConfigError,
    NotSubGaussianError,
    OpnormLabError,
    ParameterError,
)

_ENS_KEYS = ("ensemble", "dist", "sigma", "half_width", "cap", "dof",
             "mixer", "mixer_seed", "load")
_DIST_KEYS = ("dist", "sigma", "half_width", "cap", "dof")
_COMMON_KEYS = ("subcommand", "seed", "out")

#: Config-file vocabulary per subcommand; anything else is rejected by name.
ALLOWED_KEYS = {
    "gen": _COMMON_KEYS + _ENS_KEYS + ("n", "cols"),
    "norm": ("subcommand", "in", "n", "kind", "method", "rtol"),
    "net": _COMMON_KEYS + ("dim", "eps", "saturation", "probes"),
    "tails": _COMMON_KEYS + _ENS_KEYS + ("n", "trials", "A_grid", "u_mode"),
    "sweep": _COMMON_KEYS + _ENS_KEYS + ("n_grid", "trials", "A"),
    "decay": _COMMON_KEYS + _ENS_KEYS + ("A", "n_grid", "trials"),
    "diag": _COMMON_KEYS + _DIST_KEYS + ("samples", "psi2_b"),
    "tw": _COMMON_KEYS + ("n", "trials", "width_c"),
}

STOCHASTIC = ("gen", "net", "tails", "sweep", "decay", "diag", "tw")


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def parse_config_file(path) -> dict:
    """Read key=value lines ('#' comments, blank lines allowed)."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    cfg: dict = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in cfg:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        cfg[key] = value
    return cfg


def load_config(path, subcommand: str | None = None) -> dict:
    """Parsed and key-validated config for a subcommand.

    The subcommand comes from the argument or from a ``subcommand=`` line in
    the file (both present: they must agree).  Range validation of the
    ensemble section happens here; numeric run parameters are validated by
    the operations they reach, which name the offending field.
    """
    cfg = parse_config_file(path)
    sub = cfg.get("subcommand")
    if subcommand is not None:
        if sub is not None and sub != subcommand:
            raise ConfigError(
                f"config {path!r} is for subcommand {sub!r}, not {subcommand!r}"
            )
        sub = subcommand
    if sub is not None and sub not in ALLOWED_KEYS:
        raise ConfigError(f"unknown subcommand {sub!r} in config {path!r}")
    allowed = (
        ALLOWED_KEYS[sub]
        if sub is not None
        else tuple({k for keys in ALLOWED_KEYS.values() for k in keys})
    )
    for key in cfg:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} in {path!r}")
    if sub in ("gen", "tails", "sweep", "decay"):
        ensembles.spec_from_config({k: v for k, v in cfg.items() if k in _ENS_KEYS})
    elif sub == "diag":
        ensembles.dist_from_config({k: v for k, v in cfg.items() if k in _DIST_KEYS})
    return cfg


def _as_int(value, key: str) -> int:
    try:
        return int(str(value), 10)
    except ValueError:
        raise ConfigError(f"field {key!r} must be an integer, got {value!r}") from None


def _as_float(value, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"field {key!r} must be a number, got {value!r}") from None


def _as_int_grid(value, key: str) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [_as_int(part, key) for part in str(value).split(",") if part.strip()]


def _as_float_grid(value, key: str) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [_as_float(part, key) for part in str(value).split(",") if part.strip()]


def _canon(value) -> str:
    """Canonical string form used when echoing a config into a report."""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, (list, tuple)):
        return ",".join(_canon(v) for v in value)
    raise ConfigError(f"cannot canonicalize config value {value!r}")


class _Params:
    """Flag-over-file merge with typed access and required-field errors."""

    def __init__(self, ns: argparse.Namespace, cmd: str):
        self.ns = ns
        self.cmd = cmd
        self.cfg = load_config(ns.config, cmd) if getattr(ns, "config", None) else {}

    def get(self, key, parse=None, default=None, required=False, flag=None):
        value = getattr(self.ns, key, None)
        if value is None and key in self.cfg:
            value = parse(self.cfg[key], key) if parse else self.cfg[key]
        if value is None:
            if required:
                flag = flag or "--" + key.replace("_", "-")
                raise ConfigError(
                    f"{self.cmd}: {flag} is required (or set {key}= in a config file)"
                )
            value = default
        return value

    def seed(self) -> int:
        return self.get(
            "seed", parse=_as_int, required=True, flag="--seed",
        )

    def ensemble_spec(self):
        section = {}
        for key in _ENS_KEYS:
            value = getattr(self.ns, key, None)
            if value is None:
                value = self.cfg.get(key)
            if value is not None:
                section[key] = value
        return ensembles.spec_from_config(section)

    def dist(self):
        section = {}
        for key in _DIST_KEYS:
            value = getattr(self.ns, key, None)
            if value is None:
                value = self.cfg.get(key)
            if value is not None:
                section[key] = value
        return ensembles.dist_from_config(section)


# ---------------------------------------------------------------------------
# artifact output
# ---------------------------------------------------------------------------

def _emit_artifacts(ns, echo: dict, seed: int, payload: dict,
                    csv_text: str | None = None, plot=None) -> None:
    """Report at --out, CSV and figure as siblings (same stem)."""
    out = getattr(ns, "out", None)
    if out is None:
        return
    report = experiments.make_report(echo, seed, payload)
    experiments.write_report(report, out)
    print(f"wrote {out}")
    stem = os.path.splitext(out)[0]
    if csv_text is not None:
        experiments.write_text(csv_text, stem + ".csv")
        print(f"wrote {stem}.csv")
    if plot is not None and not getattr(ns, "no_plot", False):
        plot(stem + ".png")
        print(f"wrote {stem}.png")


def _echo_spec(spec) -> dict:
    return {k: _canon(v) for k, v in ensembles.spec_to_config(spec).items()}


def _echo_dist(dist) -> dict:
    section = _echo_spec(ensembles.IidEntries(dist))
    del section["ensemble"]
    return section


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _read_matrix(path) -> np.ndarray:
    try:
        m = np.loadtxt(path, dtype=np.float64)
    except OSError as exc:
        raise OSError(f"cannot read matrix {path!r}: {exc}") from exc
    return np.atleast_2d(m)


def cmd_gen(ns) -> int:
    p = _Params(ns, "gen")
    spec = p.ensemble_spec()
    n = p.get("n", parse=_as_int, required=True)
    cols = p.get("cols", parse=_as_int, default=n)
    seed = p.seed()
    m = ensembles.sample_matrix(spec, n, cols, seed)
    out = p.get("out")
    if out is None:
        np.savetxt(sys.stdout, m, fmt="%.17g")
    else:
        try:
            np.savetxt(out, m, fmt="%.17g")
        except OSError as exc:
            raise OSError(f"cannot write matrix {out!r}: {exc}") from exc
        print(f"wrote {out} ({m.shape[0]}x{m.shape[1]})")
    return 0


def cmd_norm(ns) -> int:
    p = _Params(ns, "norm")
    kind_tag = p.get("kind", default="spectral")
    try:
        kind = specnorm.NormKind(kind_tag)
    except ValueError:
        raise ConfigError(
            f"field 'kind' must be spectral, one, or inf, got {kind_tag!r}"
        ) from None
    method = p.get("method", default="auto")
    if ns.ones:
        n = p.get("n", parse=_as_int, required=True)
        m = np.ones((n, n))
    else:
        path = ns.in_path if ns.in_path is not None else p.cfg.get("in")
        if path is None:
            raise ConfigError("norm: pass --ones with --n, or --in FILE")
        m = _read_matrix(path)
    if kind is not specnorm.NormKind.SPECTRAL:
        value = specnorm.opnorm_closed(m, kind)
    elif method == "exact":
        value = specnorm.opnorm_exact(m)
    elif method == "power":
        rtol = p.get("rtol", parse=_as_float, default=1e-10)
        value = specnorm.opnorm_power(m, rtol=rtol).value
    elif method == "auto":
        if min(m.shape) <= specnorm.ORACLE_DIM_LIMIT:
            value = specnorm.opnorm_exact(m)
        else:
            value = specnorm.opnorm_power(m).value
    else:
        raise ConfigError(f"field 'method' must be exact, power, or auto, got {method!r}")
    print(f"{value:.17g}")
    return 0


def cmd_net(ns) -> int:
    p = _Params(ns, "net")
    dim = p.get("dim", parse=_as_int, required=True)
    eps = p.get("eps", parse=_as_float, required=True)
    saturation = p.get("saturation", parse=_as_int, default=10_000)
    probes = p.get("probes", parse=_as_int, default=0)
    seed = p.seed()
    net = epsnet.build_net(dim, eps, seed, saturation)

    # audit the separation invariant from the stored points, not the builder
    gram = net.points @ net.points.T
    np.fill_diagonal(gram, -1.0)
    sep_ok = bool(gram.max() <= 1.0 - eps * eps / 2.0 + 1e-12)

    line = f"count={net.count} separation={'ok' if sep_ok else 'VIOLATED'}"
    if probes > 0:
        # probe stream must be independent of the build stream, or every
        # probe replays a candidate the builder already covered
        probe_seed = ensembles.derive_trial_seed(seed, 0xA0D17)
        coverage = epsnet.audit_coverage_check(net, probes, probe_seed)
        line += f" coverage={coverage:.6g}"
    print(line)
    out = p.get("out")
    if out is not None:
        epsnet.save_net(net, out)
        print(f"wrote {out}")
        if dim == 2 and not ns.no_plot:
            from . import plots

            stem = os.path.splitext(out)[0]
            plots.save_net_plot(net, stem + ".png")
            print(f"wrote {stem}.png")
    return 0 if sep_ok else 1


def cmd_tails(ns) -> int:
    p = _Params(ns, "tails")
    spec = p.ensemble_spec()
    n = p.get("n", parse=_as_int, required=True)
    trials = p.get("trials", parse=_as_int, required=True)
    A_grid = p.get("A_grid", parse=_as_float_grid,
                   default=list(experiments.DEFAULT_A_GRID), flag="--A-grid")
    u_mode = p.get("u_mode", flag="--u-mode")
    seed = p.seed()
    curve = experiments.tail_curve(spec, n, A_grid, trials, seed, threads=ns.threads)
    payload: dict = {"tail_curve": curve}
    for est in curve:
        print(f"A={est.A:g} p_hat={est.p_hat:.6g} "
              f"ci=[{est.ci_low:.6g}, {est.ci_high:.6g}] hits={est.hits}")
    if u_mode is not None:
        fixed = experiments.fixed_vector_curve(
            spec, n, u_mode, A_grid, trials, seed, threads=ns.threads
        )
        payload["fixed_vector_curve"] = fixed
        payload["u_mode"] = u_mode
        for est in fixed:
            print(f"A={est.A:g} fixed-vector p_hat={est.p_hat:.6g}")
    echo = {"subcommand": "tails", **_echo_spec(spec), "n": _canon(n),
            "trials": _canon(trials), "A_grid": _canon(A_grid),
            "seed": _canon(seed)}
    if u_mode is not None:
        echo["u_mode"] = u_mode

    def plot(path):
        from . import plots

        plots.save_tail_plot(curve, path)

    _emit_artifacts(ns, echo, seed, payload,
                    csv_text=experiments.tails_csv_text(curve), plot=plot)
    return 0


def cmd_sweep(ns) -> int:
    p = _Params(ns, "sweep")
    spec = p.ensemble_spec()
    n_grid = p.get("n_grid", parse=_as_int_grid, required=True, flag="--n-grid")
    trials = p.get("trials", parse=_as_int, required=True)
    A = p.get("A", parse=_as_float, default=2.5)
    seed = p.seed()
    grid = experiments._check_grid(n_grid, min_len=3)
    norms_per_n = experiments.grid_norms(spec, grid, trials, seed, threads=ns.threads)
    fit = experiments.growth_fit(grid, norms_per_n)
    rows = experiments.sweep_rows(grid, norms_per_n, A)
    print(f"slope={fit.slope:.6g} intercept={fit.intercept:.6g} "
          f"residual_max={fit.residual_max:.3g}")
    echo = {"subcommand": "sweep", **_echo_spec(spec), "n_grid": _canon(grid),
            "trials": _canon(trials), "A": _canon(A), "seed": _canon(seed)}
    payload = {"growth": fit, "rows": rows}

    def plot(path):
        from . import plots

        plots.save_sweep_plot(fit, path)

    _emit_artifacts(ns, echo, seed, payload,
                    csv_text=experiments.sweep_csv_text(rows), plot=plot)
    return 0


def cmd_decay(ns) -> int:
    p = _Params(ns, "decay")
    spec = p.ensemble_spec()
    A = p.get("A", parse=_as_float, required=True)
    n_grid = p.get("n_grid", parse=_as_int_grid, required=True, flag="--n-grid")
    trials = p.get("trials", parse=_as_int, required=True)
    seed = p.seed()
    cert = experiments.overwhelming_decay_check(
        spec, A, n_grid, trials, seed, threads=ns.threads
    )
    print(f"c_hat={cert.c_hat:.6g} C_hat={cert.C_hat:.6g} "
          f"monotone={str(cert.monotone).lower()} "
          f"degenerate={str(cert.degenerate).lower()}")
    echo = {"subcommand": "decay", **_echo_spec(spec), "A": _canon(A),
            "n_grid": _canon(list(cert.n_grid)), "trials": _canon(trials),
            "seed": _canon(seed)}

    def plot(path):
        from . import plots

        plots.save_decay_plot(cert, path)

    _emit_artifacts(ns, echo, seed, {"decay": cert}, plot=plot)
    return 0


def cmd_diag(ns) -> int:
    p = _Params(ns, "diag")
    dist = p.dist()
    samples = p.get("samples", parse=_as_int, required=True)
    psi2_b = p.get("psi2_b", parse=_as_float, default=0.25, flag="--psi2-b")
    seed = p.seed()
    values = ensembles.sample_values(dist, samples, seed)
    try:
        sigma_ref = ensembles.tail_params_of(dist).sigma
    except NotSubGaussianError:
        sigma_ref = None
    battery = diagnostics.run_battery(values, psi2_b=psi2_b, sigma_ref=sigma_ref)
    print(f"verdict={battery['verdict']}: {battery['reason']}")
    echo = {"subcommand": "diag", **_echo_dist(dist), "samples": _canon(samples),
            "psi2_b": _canon(psi2_b), "seed": _canon(seed)}

    def plot(path):
        from . import plots
        from .errors import InsufficientTailError

        try:
            fit = diagnostics.fit_tail_params(values)
        except InsufficientTailError:
            return
        plots.save_survival_plot(fit, path)

    _emit_artifacts(ns, echo, seed, {"battery": battery}, plot=plot)
    return 0


def cmd_tw(ns) -> int:
    p = _Params(ns, "tw")
    n = p.get("n", parse=_as_int, required=True)
    trials = p.get("trials", parse=_as_int, required=True)
    width_c = p.get("width_c", parse=_as_float, required=True, flag="--width-c")
    seed = p.seed()
    spec = ensembles.IidEntries(ensembles.Gaussian(1.0))
    norms = experiments.sample_norms(spec, n, trials, seed, threads=ns.threads)
    center = 2.0 * math.sqrt(n)
    half = width_c * n ** (-1.0 / 6.0)
    fraction = float(((norms >= center - half) & (norms <= center + half)).mean())
    print(f"fraction={fraction:.6g}")
    echo = {"subcommand": "tw", "n": _canon(n), "trials": _canon(trials),
            "width_c": _canon(width_c), "seed": _canon(seed)}
    payload = {"fraction": fraction, "window_center": center,
               "window_half_width": half}

    def plot(path):
        from . import plots

        plots.save_tw_plot(norms, n, width_c, path)

    _emit_artifacts(ns, echo, seed, payload, plot=plot)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_ensemble_flags(p: argparse.ArgumentParser, dist_only: bool = False):
    p.add_argument("--dist", choices=("gaussian", "rademacher", "uniform",
                                      "trunc_gaussian", "student_t"))
    p.add_argument("--sigma", type=float)
    p.add_argument("--half-width", type=float, dest="half_width")
    p.add_argument("--cap", type=float)
    p.add_argument("--dof", type=float)
    if not dist_only:
        p.add_argument("--ensemble", choices=("iid", "rows", "ones"))
        p.add_argument("--mixer", choices=("identity", "rotation", "common"))
        p.add_argument("--mixer-seed", type=int, dest="mixer_seed")
        p.add_argument("--load", type=float)


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value parameter file")
    p.add_argument("--seed", type=int, help="master seed (required; no clock default)")
    p.add_argument("--out", help="report path; CSV/figure siblings share its stem")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-plot", action="store_true", dest="no_plot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opnormlab",
        description="Random-matrix operator norms: generation, nets, "
                    "tail diagnostics, and concentration experiments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate one matrix as delimited text")
    _add_ensemble_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--cols", type=int)
    _add_run_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("norm", help="operator norm of a matrix")
    p.add_argument("--in", dest="in_path", help="matrix file (delimited text)")
    p.add_argument("--ones", action="store_true", help="use the all-ones n x n matrix")
    p.add_argument("--n", type=int)
    p.add_argument("--kind", choices=("spectral", "one", "inf"))
    p.add_argument("--method", choices=("exact", "power", "auto"))
    p.add_argument("--rtol", type=float)
    p.add_argument("--config")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("net", help="build a maximal net on the unit sphere")
    p.add_argument("--dim", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--saturation", type=int, help="stop after this many straight rejections")
    p.add_argument("--probes", type=int, help="coverage audit sample count (0 = skip)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("tails", help="exceedance curve over a threshold grid")
    _add_ensemble_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--A-grid", dest="A_grid", type=lambda s: _as_float_grid(s, "A_grid"))
    p.add_argument("--u-mode", dest="u_mode", choices=experiments.U_MODES,
                   help="also estimate the fixed-vector exceedance")
    _add_run_flags(p)
    p.set_defaults(func=cmd_tails)

    p = sub.add_parser("sweep", help="mean norm growth across n")
    _add_ensemble_flags(p)
    p.add_argument("--n-grid", dest="n_grid", type=lambda s: _as_int_grid(s, "n_grid"))
    p.add_argument("--trials", type=int)
    p.add_argument("--A", type=float, help="threshold for the exceedance column")
    _add_run_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("decay", help="exceedance decay certificate across n")
    _add_ensemble_flags(p)
    p.add_argument("--A", type=float)
    p.add_argument("--n-grid", dest="n_grid", type=lambda s: _as_int_grid(s, "n_grid"))
    p.add_argument("--trials", type=int)
    _add_run_flags(p)
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("diag", help="sub-Gaussian diagnostics battery")
    _add_ensemble_flags(p, dist_only=True)
    p.add_argument("--samples", type=int)
    p.add_argument("--psi2-b", dest="psi2_b", type=float)
    _add_run_flags(p)
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("tw", help="edge-window fraction for iid Gaussian(1)")
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--width-c", dest="width_c", type=float)
    _add_run_flags(p)
    p.set_defaults(func=cmd_tw)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {str(exc).splitlines()[0]}", file=sys.stderr)
        return 2
    except (OpnormLabError, OSError) as exc:
        print(f"error: {str(exc).splitlines()[0]}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
