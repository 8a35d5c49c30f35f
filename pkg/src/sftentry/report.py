"""Artifact writers: delimited outputs, JSON reports, rendered figures, and
a gnuplot companion script.

Everything written here is deterministic given the inputs; timestamps go to
a separate metadata file so summaries can be compared byte-for-byte.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from .errors import MissingArtifacts
from .oracle import SurvivalCurve
from .sampling import EmpiricalLaw


def write_survival_csv(curve: SurvivalCurve, path) -> None:
    eps = curve.epsilon
    lines = ["q,t,survival,exp_reference"]
    for q, s in enumerate(curve.values):
        t = q * eps
        lines.append(f"{q},{t!r},{float(s)!r},{np.exp(-t)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_ks_table(rows: list[dict], path) -> None:
    cols = ["n", "epsilon", "cardinality", "eta", "ks_oracle", "ks_mc", "dkw_band",
            "mc_censored", "mc_within_band"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("" if r.get(c) is None else repr(r.get(c)) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def write_family_csv(rows, path) -> None:
    cols = ["n", "epsilon", "cardinality", "eta", "regime", "nested",
            "scaled_half_eta_mass", "note"]
    lines = [",".join(cols)]
    for r in rows:
        vals = [r.n, r.epsilon, r.cardinality, r.eta, r.regime, r.nested,
                r.scaled_half_eta_mass, r.note]
        lines.append(",".join("" if v is None else (v if isinstance(v, str) else repr(v)) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def write_empirical_csv(law: EmpiricalLaw, path) -> None:
    lines = ["trial,tau,x"]
    eps = law.epsilon
    for i, tau in enumerate(law.taus):
        t = int(tau)
        x = "" if t == 0 else repr(eps * t)
        lines.append(f"{i},{t if t else ''},{x}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(payload: dict, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_metadata(path, extra: dict | None = None) -> None:
    import sftentry

    payload = {
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "package_version": getattr(sftentry, "__version__", "unknown"),
    }
    if extra:
        payload.update(extra)
    write_json(payload, path)


# ---------------------------------------------------------------------------
# plots


def emit_plot_script(run_dir) -> Path:
    """Write a gnuplot script referencing the run's CSV artifacts; the
    script is standalone and renders nothing by itself."""
    run_dir = Path(run_dir)
    curves = sorted(run_dir.glob("survival_n*.csv"))
    if not curves:
        raise MissingArtifacts(f"no survival CSVs under {run_dir}")
    lines = [
        "# survival curves against the unit-exponential tail",
        "set datafile separator ','",
        "set key outside",
        "set xlabel 't'",
        "set ylabel 'P(tau > t/eps)'",
    ]
    plot_parts = []
    for c in curves:
        label = c.stem.replace("survival_", "")
        plot_parts.append(f"'{c.name}' using 2:3 with lines title '{label}'")
    plot_parts.append(f"'{curves[0].name}' using 2:4 with lines dashtype 2 title 'exp(-t)'")
    lines.append("plot " + ", \\\n     ".join(plot_parts))
    if (run_dir / "ks_table.csv").exists():
        lines += [
            "",
            "# distance to the exponential law as the sets shrink",
            "set xlabel 'n'",
            "set ylabel 'KS distance'",
            "plot 'ks_table.csv' using 1:5 with linespoints title 'oracle', \\",
            "     'ks_table.csv' using 1:6 with points title 'monte-carlo'",
        ]
    out = run_dir / "plot.gp"
    out.write_text("\n".join(lines) + "\n")
    return out


def render_figures(run_dir) -> list[Path]:
    """Render the run's figures to PNG files next to the delimited output."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run_dir = Path(run_dir)
    curves = sorted(run_dir.glob("survival_n*.csv"))
    if not curves:
        raise MissingArtifacts(f"no survival CSVs under {run_dir}")
    fig_dir = run_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    reference_drawn = False
    for c in curves:
        data = np.genfromtxt(c, delimiter=",", names=True)
        label = c.stem.replace("survival_", "")
        ax.plot(data["t"], data["survival"], lw=1.0, label=label)
        if not reference_drawn:
            ax.plot(data["t"], data["exp_reference"], "k--", lw=1.2, label="exp(-t)")
            reference_drawn = True
    ax.set_xlabel("t")
    ax.set_ylabel("P(tau > t/eps)")
    ax.set_xlim(0, 6)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    out = fig_dir / "survival.png"
    fig.savefig(out, dpi=130)
    plt.close(fig)
    written.append(out)

    ks_path = run_dir / "ks_table.csv"
    if ks_path.exists():
        data = np.genfromtxt(ks_path, delimiter=",", names=True)
        data = np.atleast_1d(data)
        fig, ax = plt.subplots(figsize=(5.4, 3.8))
        ax.semilogy(data["n"], data["ks_oracle"], "o-", label="oracle")
        if not np.all(np.isnan(data["ks_mc"])):
            ax.semilogy(data["n"], data["ks_mc"], "s", mfc="none", label="monte-carlo")
        ax.set_xlabel("n")
        ax.set_ylabel("KS distance to Exp(1)")
        ax.legend(fontsize=8)
        fig.tight_layout()
        out = fig_dir / "ks_vs_n.png"
        fig.savefig(out, dpi=130)
        plt.close(fig)
        written.append(out)
    return written
