"""Figures written next to the CSV output (headless Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .relay import condition, trigger_trace, windowed_delta  # noqa: E402
from .transient import relay_tap  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_run(result, out_dir):
    out = Path(out_dir)
    paths = []
    sc = result.scenario
    ms = result.measurements
    if ms is not None:
        t_ms = ms.v_clr_p.t * 1e3
        v0, v1 = relay_tap(ms)
        inputs = condition(ms, sc.relay, sc.noise.snr_db, sc.noise.seed)
        tr = trigger_trace(inputs, sc.relay)
        di_p = windowed_delta(inputs.i_p, sc.relay.delta_window)
        di_n = windowed_delta(inputs.i_n, sc.relay.delta_window)

        fig, ax = plt.subplots(4, 1, figsize=(8, 10), sharex=True)
        ax[0].plot(t_ms, ms.v_clr_p.samples / 1e3, label="V_CLR p")
        ax[0].plot(t_ms, ms.v_clr_n.samples / 1e3, label="V_CLR n")
        ax[0].set_ylabel("kV")
        ax[1].plot(t_ms, v0.samples / 1e3, label="V_L120")
        ax[1].plot(t_ms, v1.samples / 1e3, label="V_L121")
        ax[1].set_ylabel("kV")
        ax[2].plot(tr.t * 1e3, tr.samples / 1e3, label="|dV_CLR|")
        ax[2].axhline(sc.relay.u_set / 1e3, color="k", ls="--", lw=0.8, label="U_set")
        ax[2].set_ylabel("kV")
        ax[3].plot(di_p.t * 1e3, di_p.samples / 1e3, label="|di_p|")
        ax[3].plot(di_n.t * 1e3, di_n.samples / 1e3, label="|di_n|")
        ax[3].axhline(sc.relay.i_set / 1e3, color="k", ls="--", lw=0.8, label="I_set")
        ax[3].set_ylabel("kA")
        ax[3].set_xlabel("time (ms)")
        dec = result.decision
        if dec is not None and dec.trigger_time is not None:
            for a in ax:
                a.axvline(dec.trigger_time * 1e3, color="r", lw=0.6)
        for a in ax:
            a.legend(loc="upper right", fontsize=8)
            a.grid(alpha=0.3)
        title = sc.id if dec is None else f"{sc.id}: {dec.verdict.value}"
        ax[0].set_title(title)
        paths.append(_save(fig, out / "run.png"))
    if result.analytic is not None:
        inv0, inv1 = result.analytic
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.plot(inv0.t * 1e3, inv0.values / 1e3, label="V_L120 (analytic)")
        ax.plot(inv1.t * 1e3, inv1.values / 1e3, label="V_L121 (analytic)")
        ax.set_xlabel("time after inception (ms)")
        ax.set_ylabel("kV")
        ax.legend()
        ax.grid(alpha=0.3)
        paths.append(_save(fig, out / "analytic_modes.png"))
    if result.oracle is not None:
        paths.append(plot_oracle(result.oracle, out))
    return paths


def plot_oracle(rep, out_dir):
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(rep.t * 1e3, rep.sim_v_l121 / 1e3, label="simulated (stiff sources)")
    ax.plot(rep.t * 1e3, rep.ana_v_l121 / 1e3, "--", label="analytic")
    j = rep.extremum_index
    ax.plot(rep.t[j] * 1e3, rep.ana_v_l121[j] / 1e3, "ko", ms=4)
    ax.set_title(f"V_L121, first-extremum error {rep.rel_error:.2%}")
    ax.set_xlabel("time after inception (ms)")
    ax.set_ylabel("kV")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, Path(out_dir) / "oracle.png")


def plot_pivot(piv, out_dir):
    paths = []
    for kind, rows in sorted(piv.items()):
        ds = sorted(rows)
        cols = sorted({c for r in rows.values() for c in r})
        fig, ax = plt.subplots(figsize=(8, 3.5))
        for d in ds:
            ax.plot(range(len(cols)), [rows[d].get(c, float("nan")) for c in cols], "o-",
                    label=f"d = {d:g}")
        ax.set_xticks(range(len(cols)))
        ax.set_xticklabels([f"{rf:g} ohm\n{c * 1e3:g} mH" for rf, c in cols], fontsize=7)
        ax.set_ylabel("|dV_CLR| peak (kV)")
        ax.set_title(kind)
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        paths.append(_save(fig, Path(out_dir) / f"pivot_{kind}.png"))
    return paths
