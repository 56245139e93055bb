# stc_synth/modules/simulacion/plotting.py
"""
Gráficas de trazas: tiempos entre muestras (stem) y promedio acumulado.
Se usa el backend Agg y se exporta SVG autocontenido.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from stc_synth.modules.simulacion.simulation import Trace, running_average  # noqa: E402

_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown")


def plot_traces(traces: Sequence[Trace], out_svg: Path, labels: Sequence[str] | None = None) -> Path:
    """
    Un subplot con tau_i vs t_i por traza y otro con el promedio acumulado.
    Cada traza usa un color y una etiqueta distintos.
    """
    out_svg = Path(out_svg)
    out_svg.parent.mkdir(parents=True, exist_ok=True)
    labels = list(labels) if labels is not None else [
        str(trace.metadata.get("policy", f"traza {i}")) for i, trace in enumerate(traces)
    ]

    plt.rcParams["svg.hashsalt"] = "stc-synth"
    fig, (ax_tau, ax_avg) = plt.subplots(2, 1, sharex=True, figsize=(8, 5), constrained_layout=True)

    for i, (trace, label) in enumerate(zip(traces, labels)):
        color = _COLORS[i % len(_COLORS)]
        markerline, stemlines, baseline = ax_tau.stem(trace.t, trace.tau, label=label)
        plt.setp(markerline, color=color, markersize=3)
        plt.setp(stemlines, color=color, linewidth=0.8)
        plt.setp(baseline, visible=False)

        ax_avg.plot(trace.t, running_average(trace), color=color, label=label)

    ax_tau.set_ylabel("tau_i [s]")
    ax_tau.legend(loc="upper right")
    ax_avg.set_xlabel("t_i [s]")
    ax_avg.set_ylabel("promedio acumulado [s]")
    ax_avg.legend(loc="lower right")

    fig.savefig(out_svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_svg
