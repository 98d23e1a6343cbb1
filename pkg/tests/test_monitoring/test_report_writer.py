import pandas as pd

from monitoring.report_writer import EVAL_CSV, EVAL_SUMMARY, LOSS_CURVE_PNG, ReportWriter

SUMMARY = {"sequences": 2, "mse_mean": 0.085, "mse_std": 0.17, "re_mean": 5.23, "re_std": 4.91, "cl_mean": 0.4}


def test_eval_csv(tmp_path):
    writer = ReportWriter(str(tmp_path / "reports"))
    frame = pd.DataFrame([["s0", 0.1, 2.5], ["s1", 0.2, 3.0]], columns=["sequence_id", "mse_mm2", "re_percent"])
    path = writer.write_eval_csv(frame)
    assert path.endswith(EVAL_CSV)
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == "sequence_id,mse_mm2,re_percent"
    assert lines[1] == "s0,0.100000,2.500000"


def test_eval_summary_with_comparison(tmp_path):
    writer = ReportWriter(str(tmp_path))
    comparison = {"against": "framewise.ptck", "statistic": 0.4, "p_value": 0.001, "alpha": 0.05,
                  "comparisons": 7, "threshold": 0.05 / 7, "significant": True}
    path = writer.write_eval_summary(SUMMARY, comparison, title="Evaluation")
    text = open(path, encoding="utf-8").read()
    assert path.endswith(EVAL_SUMMARY)
    assert "MSE (mm^2): 0.0850 (0.1700)" in text
    assert "framewise.ptck" in text
    assert "significant" in text


def test_eval_summary_is_deterministic(tmp_path):
    writer = ReportWriter(str(tmp_path))
    first = open(writer.write_eval_summary(SUMMARY, name="a.txt")).read()
    second = open(writer.write_eval_summary(SUMMARY, name="b.txt")).read()
    assert first == second


def test_loss_curve_png(tmp_path):
    writer = ReportWriter(str(tmp_path))
    history = pd.DataFrame({"epoch": [1, 2, 3], "train_loss": [3.0, 2.0, 1.5], "val_mse": [2.5, 2.0, 1.8]})
    path = writer.plot_loss_curve(history)
    assert path.endswith(LOSS_CURVE_PNG)
    with open(path, "rb") as fh:
        assert fh.read(8) == b"\x89PNG\r\n\x1a\n"
