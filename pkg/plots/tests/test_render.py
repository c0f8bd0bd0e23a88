import hashlib

import pytest

import powerobs_plots as pp
from powerobs_plots.cli import main

from plotdata import write_csv


class TestReadLog:
    def test_reads_columns(self, small_speed_csv):
        data = pp.read_log(small_speed_csv)
        assert "omegahat_1" in data
        assert len(data["t"]) == 50

    def test_header_only_is_empty_data(self, tmp_path):
        p = write_csv(tmp_path / "empty.csv", ["t", "E_1"], [])
        with pytest.raises(pp.EmptyData):
            pp.read_log(p)

    def test_short_row_reports_line_number(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,E_1\n0.0,1.0\n0.1\n")
        with pytest.raises(pp.MalformedRow) as ei:
            pp.read_log(p)
        assert ei.value.line == 3

    def test_non_numeric_reports_line_number(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,E_1\n0.0,banana\n")
        with pytest.raises(pp.MalformedRow) as ei:
            pp.read_log(p)
        assert ei.value.line == 2


class TestVoltageError:
    def test_renders_with_event_marker(self, table1_csv, tmp_path):
        spec = pp.FigureSpec(csv_paths=(str(table1_csv),), kind="voltage_error",
                             machine=1, out_path=str(tmp_path / "v.svg"),
                             event_time=10.0)
        fig = pp.build_figure(spec)
        try:
            ax = fig.axes[0]
            labels = [ln.get_label() for ln in ax.lines]
            assert "drem" in labels and "ftc" in labels and "kalman" in labels
            marker = [ln for ln in ax.lines if "event" in ln.get_label()]
            assert len(marker) == 1
            assert list(marker[0].get_xdata()) == [10.0, 10.0]
        finally:
            import matplotlib.pyplot as plt
            plt.close(fig)
        out = pp.render(spec)
        assert (tmp_path / "v.svg").stat().st_size > 0
        assert out.endswith("v.svg")

    def test_marker_skipped_outside_span(self, table1_csv, tmp_path):
        spec = pp.FigureSpec(csv_paths=(str(table1_csv),), kind="voltage_error",
                             machine=2, out_path=str(tmp_path / "v.png"),
                             event_time=999.0)
        fig = pp.build_figure(spec)
        try:
            assert not any("event" in ln.get_label() for ln in fig.axes[0].lines)
        finally:
            import matplotlib.pyplot as plt
            plt.close(fig)

    def test_missing_estimates_reported(self, small_speed_csv, tmp_path):
        spec = pp.FigureSpec(csv_paths=(str(small_speed_csv),),
                             kind="voltage_error", machine=1,
                             out_path=str(tmp_path / "v.png"))
        with pytest.raises(pp.MissingColumn, match="Ehat"):
            pp.render(spec)

    def test_input_left_unchanged(self, table1_csv, tmp_path):
        before = hashlib.sha256(table1_csv.read_bytes()).hexdigest()
        pp.render(pp.FigureSpec(csv_paths=(str(table1_csv),),
                                kind="voltage_error", machine=1,
                                out_path=str(tmp_path / "v.png")))
        after = hashlib.sha256(table1_csv.read_bytes()).hexdigest()
        assert before == after


class TestSpeedError:
    def test_single_csv(self, small_speed_csv, tmp_path):
        spec = pp.FigureSpec(csv_paths=(str(small_speed_csv),),
                             kind="speed_error", machine=2,
                             out_path=str(tmp_path / "s.png"))
        pp.render(spec)
        assert (tmp_path / "s.png").stat().st_size > 0

    def test_overlaid_sweep_outputs(self, tmp_path):
        header = ["t", "omega_1", "omegahat_1"]
        paths = []
        for kom in (1, 5):
            rows = [[0.1 * i, 0.0, 2.0 ** (-kom * i)] for i in range(30)]
            paths.append(write_csv(tmp_path / f"sweep_k_omega_{kom}.csv",
                                   header, rows))
        spec = pp.FigureSpec(csv_paths=tuple(str(p) for p in paths),
                             kind="speed_error", machine=1,
                             out_path=str(tmp_path / "overlay.svg"))
        fig = pp.build_figure(spec)
        try:
            labels = [ln.get_label() for ln in fig.axes[0].lines]
            assert "sweep_k_omega_1" in labels and "sweep_k_omega_5" in labels
        finally:
            import matplotlib.pyplot as plt
            plt.close(fig)
        pp.render(spec)
        assert (tmp_path / "overlay.svg").stat().st_size > 0


class TestDeterminism:
    def test_repeated_svg_renders_byte_identical(self, small_speed_csv, tmp_path):
        outs = []
        for i in range(2):
            out = tmp_path / f"r{i}.svg"
            pp.render(pp.FigureSpec(csv_paths=(str(small_speed_csv),),
                                    kind="speed_error", machine=1,
                                    out_path=str(out)))
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestCli:
    def test_render_exit_zero(self, small_speed_csv, tmp_path):
        rc = main(["render", "--csv", str(small_speed_csv),
                   "--kind", "speed_error", "--machine", "1",
                   "--out", str(tmp_path / "o.png")])
        assert rc == 0
        assert (tmp_path / "o.png").exists()

    def test_error_exit_one(self, tmp_path, capsys):
        p = write_csv(tmp_path / "empty.csv", ["t", "E_1"], [])
        rc = main(["render", "--csv", str(p), "--kind", "voltage_error",
                   "--machine", "1", "--out", str(tmp_path / "o.png")])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error: ")

    def test_format_flag_overrides_suffix(self, small_speed_csv, tmp_path):
        out = tmp_path / "namedpng"
        rc = main(["render", "--csv", str(small_speed_csv),
                   "--kind", "speed_error", "--machine", "2",
                   "--out", str(out), "--format", "svg"])
        assert rc == 0
        assert out.read_bytes().lstrip().startswith(b"<?xml")
