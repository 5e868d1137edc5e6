from typing import Iterable, Mapping

import pandas as pd

REPORT_COLUMNS = [
    "run", "n_qc", "d", "parameters", "min_loss_epoch", "test_loss", "test_acc",
    "pc1", "pc2", "pc1_pc2", "lambda_max",
]


def _fmt_ratio(x: float) -> str:
    """Contribution ratio with four decimals."""
    return f"{x:.4f}"


def format_ratios(ratio1: float, ratio2: float) -> str:
    """
    One-line contribution ratio summary.

    Examples
    --------
    >>> format_ratios(0.81234, 0.1)
    'PC1=0.8123 PC2=0.1000 PC1+PC2=0.9123'
    """
    return f"PC1={_fmt_ratio(ratio1)} PC2={_fmt_ratio(ratio2)} PC1+PC2={_fmt_ratio(ratio1 + ratio2)}"


def format_summary_line(n_qc: int, d: int, n_params: int, summary: Mapping) -> str:
    """Test metrics at the minimum-training-loss epoch of one run."""
    return (
        f"n_qc={n_qc} d={d} params={n_params} | min-loss epoch {summary['min_loss_epoch']}: "
        f"train loss {summary['min_train_loss']:.4f}, test loss {summary['test_loss']:.4f}, "
        f"test acc {summary['test_acc']:.4f}"
    )


def format_hessian(report: Mapping) -> str:
    flag = "" if report["converged"] else " (not converged)"
    return (
        f"lambda_max={report['lambda_max']:.6g} after {report['iterations']} iterations, "
        f"residual {report['residual']:.2e}, scope {report['parameter_scope']}{flag}"
    )


def report_frame(rows: Iterable[Mapping]) -> pd.DataFrame:
    """Cross-run table; missing entries are left empty."""
    return pd.DataFrame(list(rows), columns=REPORT_COLUMNS)


def format_report(df: pd.DataFrame) -> str:
    formatters = {c: (lambda x: "" if pd.isna(x) else _fmt_ratio(x)) for c in ("pc1", "pc2", "pc1_pc2")}
    return df.to_string(index=False, formatters=formatters, na_rep="")
