# monitoring/report_writer.py
import logging
import os
from typing import Any, Dict, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

EVAL_CSV = "eval_report.csv"
EVAL_SUMMARY = "eval_summary.txt"
LOSS_CURVE_PNG = "loss_curve.png"


class ReportWriter:
    """Writes evaluation reports and training charts into one output directory."""

    def __init__(self, reports_dir: str):
        self.reports_dir = reports_dir
        os.makedirs(reports_dir, exist_ok=True)

    def _path(self, name: str) -> str:
        return os.path.join(self.reports_dir, name)

    def write_eval_csv(self, per_sequence: pd.DataFrame, name: str = EVAL_CSV) -> str:
        filepath = self._path(name)
        per_sequence.to_csv(filepath, index=False, float_format="%.6f")
        logger.info(f"Wrote evaluation report for {len(per_sequence)} sequences: {filepath}")
        return filepath

    def write_eval_summary(self, summary: Dict[str, Any], comparison: Optional[Dict[str, Any]] = None,
                           title: str = "Evaluation summary", name: str = EVAL_SUMMARY) -> str:
        """
        Human-readable summary of an evaluation run.

        Args:
            summary: aggregate metrics (sequences, mse_mean, mse_std, re_mean, re_std, cl_mean)
            comparison: optional KS comparison against a second model
            title: heading line
            name: file name inside the reports directory

        Returns:
            str: path of the written file
        """
        lines = [
            title,
            "=" * len(title),
            f"sequences: {summary['sequences']}",
            f"MSE (mm^2): {summary['mse_mean']:.4f} ({summary['mse_std']:.4f})",
            f"RE (%):     {summary['re_mean']:.2f} ({summary['re_std']:.2f})",
            f"CyclicLoss of predictions (mean): {summary['cl_mean']:.4f}",
        ]
        if comparison is not None:
            verdict = "significant" if comparison["significant"] else "not significant"
            lines += [
                "",
                f"Kolmogorov-Smirnov vs {comparison.get('against', 'reference')}:",
                f"  D = {comparison['statistic']:.4f}, p = {comparison['p_value']:.4g}",
                f"  threshold = {comparison['threshold']:.4g} (alpha {comparison['alpha']} / {comparison['comparisons']})",
                f"  {verdict}",
            ]
        filepath = self._path(name)
        with open(filepath, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        return filepath

    def plot_loss_curve(self, history: pd.DataFrame, name: str = LOSS_CURVE_PNG) -> str:
        """Training loss and validation MSE per epoch."""
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(history["epoch"], history["train_loss"], label="train loss")
        if "val_mse" in history and history["val_mse"].notna().any():
            ax.plot(history["epoch"], history["val_mse"], label="validation MSE")
        ax.set_xlabel("epoch")
        ax.set_ylabel("mm$^2$")
        if (history["train_loss"] > 0).all():
            ax.set_yscale("log")
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        filepath = self._path(name)
        fig.savefig(filepath, dpi=100)
        plt.close(fig)
        logger.info(f"Saved loss curve: {filepath}")
        return filepath
