"""
Figures and text reports for the fractal-ansatz toolkit.
"""
import logging
import os
from typing import Dict, List, Mapping, Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from utils.helpers import LOGGER_NAME  # noqa: E402

logger = logging.getLogger(LOGGER_NAME)


def _save(fig, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


class ChartGenerator:
    """Render PNG figures of the exported data series."""

    @staticmethod
    def weights_chart(frame: pd.DataFrame, path: str, normalized: bool = True) -> Optional[str]:
        """
        Plot weights against N, one line per term.

        Args:
            frame: Output of WeightTable.to_plot_frame
            path: Target PNG
            normalized: Plot weights scaled by their maximum absolute value

        Returns:
            Path of the figure, or None on failure
        """
        try:
            column = "normalized" if normalized else "weight_squared"
            fig, ax = plt.subplots(figsize=(7, 4.5))
            for label, group in frame.groupby("label", sort=False):
                ax.plot(group["N"], group[column], marker="o", ms=3, label=f"|{label}>")
            ax.set_xlabel("N")
            ax.set_ylabel("W / max|W|" if normalized else "W^2")
            ax.legend(fontsize=7, ncol=2)
            ax.grid(alpha=0.3)
            return _save(fig, path)
        except Exception as e:
            logger.error(f"Error generating weights chart: {e}")
            return None

    @staticmethod
    def energy_chart(predicted: pd.DataFrame, path: str, exact: Optional[Mapping[int, float]] = None) -> Optional[str]:
        """
        Plot predicted energies per site, with exact values and relative error when given.
        """
        try:
            fig, axes = plt.subplots(1, 2 if exact else 1, figsize=(10 if exact else 6, 4), squeeze=False)
            ax = axes[0, 0]
            for (method, spec), group in predicted.groupby(["method", "spec"], sort=False):
                ax.plot(group["N"], group["energy_per_site"], marker=".", label=f"{method} {spec}")
            if exact:
                ns = sorted(exact)
                ax.plot(ns, [exact[n] / n for n in ns], "k--", label="ED")
                err = axes[0, 1]
                for (method, spec), group in predicted.groupby(["method", "spec"], sort=False):
                    rows = group[group["N"].isin(ns)]
                    rel = [(e - exact[n]) / abs(exact[n]) for n, e in zip(rows["N"], rows["energy"]) if exact[n]]
                    err.semilogy(rows["N"][:len(rel)], np.maximum(np.abs(rel), 1e-16), marker=".",
                                 label=f"{method} {spec}")
                err.set_xlabel("N")
                err.set_ylabel("|E - E_ED| / |E_ED|")
                err.legend(fontsize=7)
            ax.set_xlabel("N")
            ax.set_ylabel("E / N")
            ax.legend(fontsize=7)
            return _save(fig, path)
        except Exception as e:
            logger.error(f"Error generating energy chart: {e}")
            return None

    @staticmethod
    def fidelity_chart(series: Dict[str, pd.Series], path: str, ylabel: str = "fidelity") -> Optional[str]:
        """
        Plot fidelity curves indexed by N.
        """
        try:
            fig, ax = plt.subplots(figsize=(6, 4))
            for name, values in series.items():
                ax.plot(values.index, values.values, marker="o", label=name)
            ax.set_xlabel("N")
            ax.set_ylabel(ylabel)
            ax.legend()
            return _save(fig, path)
        except Exception as e:
            logger.error(f"Error generating fidelity chart: {e}")
            return None

    @staticmethod
    def entropy_chart(frame: pd.DataFrame, path: str, transition_mu: Optional[float] = None) -> Optional[str]:
        """
        Plot S2 against mu, marking the located transition.
        """
        try:
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.plot(frame["mu"], frame["s2"], marker=".")
            if transition_mu is not None:
                ax.axvline(transition_mu, color="r", ls=":", label=f"max |dS2/dmu| at {transition_mu:+.3f}")
                ax.legend()
            ax.set_xlabel("mu")
            ax.set_ylabel("S2")
            return _save(fig, path)
        except Exception as e:
            logger.error(f"Error generating entropy chart: {e}")
            return None

    @staticmethod
    def qubism_chart(intensities: np.ndarray, path: str, title: str = "") -> Optional[str]:
        """
        Render a qubism raster in grey scale.
        """
        try:
            fig, ax = plt.subplots(figsize=(5, 5))
            ax.imshow(intensities, cmap="gray", interpolation="none", origin="upper")
            ax.set_title(title)
            ax.set_xticks([])
            ax.set_yticks([])
            return _save(fig, path)
        except Exception as e:
            logger.error(f"Error generating qubism chart: {e}")
            return None


class ReportFormatter:
    """Plain-text summaries printed by the command line."""

    @staticmethod
    def format_ground_state(n_sites: int, n_up: int, energy: float, residual: float,
                            gap: Optional[float] = None, degenerate: bool = False) -> str:
        report = f"Ground state N={n_sites} n_up={n_up}\n"
        report += f"  energy:   {energy:.15g}\n"
        report += f"  E/N:      {energy / n_sites:.15g}\n"
        report += f"  residual: {residual:.3e}\n"
        if gap is not None:
            report += f"  gap:      {gap:.6g}{' (degenerate)' if degenerate else ''}\n"
        return report

    @staticmethod
    def format_weights(table_frame: pd.DataFrame, labels: List[str], deficits: Mapping[int, float]) -> str:
        """
        Format one line per N with the signed weights and the coverage deficit.
        """
        lines = ["N    " + " ".join(f"{label:>10}" for label in labels) + "     deficit"]
        for n_sites, group in table_frame.groupby("N"):
            values = dict(zip(group["label"], group["value"]))
            cells = " ".join(f"{values[label]:>10.6f}" if label in values else f"{'-':>10}" for label in labels)
            deficit = deficits.get(n_sites)
            lines.append(f"{n_sites:<4} {cells}  " + (f"{deficit:10.3e}" if deficit is not None else ""))
        return "\n".join(lines)

    @staticmethod
    def format_energies(frame: pd.DataFrame, exact: Optional[Mapping[int, float]] = None) -> str:
        lines = []
        for row in frame.itertuples(index=False):
            line = f"N={row.N:<4} E={row.energy:.12f}  E/N={row.energy_per_site:.12f}"
            if exact and row.N in exact:
                line += f"  E-E_ED={row.energy - exact[row.N]:+.3e}"
            lines.append(line)
        return "\n".join(lines)

    @staticmethod
    def format_scan(frame: pd.DataFrame, transition_mu: float, switches: int) -> str:
        report = f"Renyi scan over {len(frame)} masses\n"
        report += f"  transition (max |dS2/dmu|): mu = {transition_mu:+.4f}\n"
        report += f"  dominant configuration switches: {switches}\n"
        report += f"  {frame['dominant'].iloc[0]} -> {frame['dominant'].iloc[-1]}\n"
        return report
