"""Figure rendering for the report path.  All output goes to files (Agg)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 150


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def save_tail_plot(estimates, path, title="exceedance vs threshold"):
    """P(norm > A sqrt(n)) against A with Wilson error bars, log y."""
    A = [e.A for e in estimates]
    p = [max(e.p_hat, 0.0) for e in estimates]
    lo = [e.p_hat - e.ci_low for e in estimates]
    hi = [e.ci_high - e.p_hat for e in estimates]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(A, p, yerr=[lo, hi], fmt="o-", capsize=3)
    ax.set_yscale("log")
    floor = min((e.ci_high for e in estimates), default=1e-6) * 1e-2
    ax.set_ylim(bottom=max(floor, 1e-12))
    ax.set_xlabel("A")
    ax.set_ylabel(r"$\hat p\,(\|M\| > A\sqrt{n})$")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    _finish(fig, path)


def save_sweep_plot(fit, path, title="mean operator norm vs n"):
    """Mean norm against n on log-log axes with the fitted power law."""
    ns = np.asarray(fit.n_grid, dtype=np.float64)
    means = np.asarray(fit.mean_norms)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ns, means, "o", label="measured")
    xs = np.geomspace(ns[0], ns[-1], 128)
    ax.loglog(
        xs, np.exp(fit.intercept) * xs ** fit.slope, "--",
        label=f"fit: slope {fit.slope:.3f}",
    )
    ax.set_xlabel("n")
    ax.set_ylabel("mean norm")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _finish(fig, path)


def save_decay_plot(cert, path, title="exceedance decay in n"):
    """-log p_hat against n with the fitted line (finite points only)."""
    ns = np.asarray(cert.n_grid, dtype=np.float64)
    ys = np.asarray(cert.neg_log_p)
    finite = np.isfinite(ys)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ns[finite], ys[finite], "o", label=r"$-\log \hat p$")
    if finite.sum() and not cert.degenerate:
        xs = np.linspace(ns[0], ns[-1], 64)
        ax.plot(
            xs, cert.c_hat * xs - math.log(cert.C_hat), "--",
            label=f"fit: c {cert.c_hat:.4f}, C {cert.C_hat:.3g}",
        )
    if (~finite).any():
        for n in ns[~finite]:
            ax.axvline(n, color="gray", linestyle=":", alpha=0.5)
        ax.plot([], [], ":", color="gray", label="no hits (off scale)")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$-\log \hat p$")
    ax.set_title(f"{title} (A = {cert.A:g})")
    ax.legend()
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def save_survival_plot(fitres, path, title="tail survival"):
    """log survival against t^2; a straight line means a squared-exponential
    tail, and the fitted B_hat exp(-b_hat t^2) is overlaid."""
    t = np.asarray(fitres.t_grid)
    s = np.asarray(fitres.survival)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t**2, np.log(s), "o", label="empirical")
    if not fitres.non_decay and math.isfinite(fitres.B_hat):
        xs = np.linspace((t**2).min(), (t**2).max(), 64)
        ax.plot(
            xs, math.log(fitres.B_hat) - fitres.b_hat * xs, "--",
            label=f"fit: B {fitres.B_hat:.3f}, b {fitres.b_hat:.3f}",
        )
    ax.set_xlabel(r"$t^2$")
    ax.set_ylabel("log survival")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def save_tw_plot(norms, n, width_c, path, title="edge fluctuation window"):
    """Histogram of sigma_max with the 2 sqrt(n) +/- c n^(-1/6) window."""
    norms = np.asarray(norms)
    center = 2.0 * math.sqrt(n)
    half = width_c * n ** (-1.0 / 6.0)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(norms, bins=40, alpha=0.75)
    ax.axvline(center, color="k", linestyle="-", label=r"$2\sqrt{n}$")
    ax.axvspan(center - half, center + half, color="tab:orange", alpha=0.25,
               label=f"window (c = {width_c:g})")
    ax.set_xlabel(r"$\sigma_{\max}$")
    ax.set_ylabel("count")
    ax.set_title(f"{title} (n = {n})")
    ax.legend()
    _finish(fig, path)


def save_net_plot(net, path, title="maximal net on the circle"):
    """Net points on the unit circle; only defined for dim = 2."""
    if net.dim != 2:
        raise ValueError(f"net plot is only drawn for dim = 2, got dim = {net.dim}")
    theta = np.linspace(0, 2 * np.pi, 256)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(np.cos(theta), np.sin(theta), "-", color="gray", alpha=0.5)
    ax.plot(net.points[:, 0], net.points[:, 1], "o")
    ax.set_aspect("equal")
    ax.set_title(f"{title} (eps = {net.eps:g}, count = {net.count})")
    _finish(fig, path)
