"""Static SVG figures of a trace: wind and rotor, powers, voltage and frequency."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PANELS = ("wind_speed", "powers", "voltage_frequency")
_MAX_POINTS = 6000


def event_markers(trace) -> list[tuple[float, str]]:
    """(t, label) for every mode switch, trip and other event in the trace."""
    out = []
    for r in trace:
        for e in r.events:
            out.append((r.t, e))
    return out


def _columns(trace):
    stride = max(1, len(trace) // _MAX_POINTS)
    rows = trace[::stride]
    if rows[-1] is not trace[-1]:
        rows = [*rows, trace[-1]]
    cols = np.array([r[:10] for r in rows], dtype=float)
    return {name: cols[:, i] for i, name in enumerate(trace[0]._fields[:10])}


def _mark(axes, markers):
    styles = {"mode": ("tab:purple", "--"), "trip": ("tab:red", "-"), "clamp": ("tab:orange", ":")}
    for t, label in markers:
        kind = label.split(":")[0]
        color, ls = styles.get(kind, ("tab:gray", ":"))
        for ax in axes:
            line = ax.axvline(t, color=color, ls=ls, lw=0.8)
            line.set_gid(f"event-{label.replace(':', '_').replace('>', '')}-{t:.3f}")


def emit_plots(trace, outdir: str | os.PathLike, title: str = "") -> list[str]:
    """Write one SVG per panel group into ``outdir`` and return their paths."""
    if not trace:
        raise ValueError("cannot plot an empty trace")
    os.makedirs(outdir, exist_ok=True)
    c = _columns(list(trace))
    t = c["t"]
    markers = event_markers(trace)
    layout = {
        "wind_speed": [("v_wind", "wind (m/s)"), ("omega_pu", "rotor speed (p.u.)"), ("beta_deg", "pitch (deg)")],
        "powers": [(("p_w_pu", "p_ael_pu"), "power (p.u.)"), ("duty", "IPBC duty")],
        "voltage_frequency": [(("u_ac_pu", "u_dc2_pu"), "voltage (p.u.)"), ("f_hz", "frequency (Hz)")],
    }
    paths = []
    with plt.rc_context({"svg.hashsalt": "h2grid", "svg.fonttype": "none"}):
        for name in PANELS:
            rows = layout[name]
            fig, axes = plt.subplots(len(rows), 1, sharex=True, figsize=(8, 2.2 * len(rows)))
            for ax, (cols, label) in zip(axes, rows):
                for col in (cols if isinstance(cols, tuple) else (cols,)):
                    ax.plot(t, c[col], lw=1.0, label=col)
                if isinstance(cols, tuple):
                    ax.legend(loc="best", fontsize=8)
                ax.set_ylabel(label)
                ax.grid(True, lw=0.3)
                if name == "voltage_frequency" and cols == "f_hz":
                    ax.ticklabel_format(axis="y", useOffset=False)
            _mark(axes, markers)
            axes[-1].set_xlabel("t (s)")
            if title:
                axes[0].set_title(title)
            fig.tight_layout()
            path = os.path.join(outdir, f"{name}.svg")
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths
