"""Figure-package acceptance: render both figure kinds from a real
simulator CSV with the event marker, and check SVG determinism."""

import time

import powerobs_plots as pp


def test_criterion_11_renders_from_simulator_csv(table1_csv, tmp_path):
    t0 = time.perf_counter()
    svgs = []
    for i in range(2):
        out = tmp_path / f"voltage_{i}.svg"
        pp.render(pp.FigureSpec(csv_paths=(str(table1_csv),),
                                kind="voltage_error", machine=1,
                                out_path=str(out), event_time=10.0))
        svgs.append(out.read_bytes())
    speed_out = tmp_path / "speed.png"
    pp.render(pp.FigureSpec(csv_paths=(str(table1_csv),), kind="speed_error",
                            machine=2, out_path=str(speed_out),
                            event_time=10.0))
    fig = pp.build_figure(pp.FigureSpec(csv_paths=(str(table1_csv),),
                                        kind="voltage_error", machine=1,
                                        out_path=str(tmp_path / "probe.svg"),
                                        event_time=10.0))
    try:
        marker = [ln for ln in fig.axes[0].lines if "event" in ln.get_label()]
        has_marker = len(marker) == 1 and list(marker[0].get_xdata()) == [10.0, 10.0]
    finally:
        import matplotlib.pyplot as plt
        plt.close(fig)
    identical = svgs[0] == svgs[1]
    ok = identical and has_marker and speed_out.stat().st_size > 0
    dt = time.perf_counter() - t0
    print(f"criterion 11: {'PASS' if ok else 'FAIL'} — voltage_error and "
          f"speed_error rendered; event marker at t = 10 s: {has_marker}; "
          f"repeated SVG byte-identical: {identical}, {dt:.2f} s")
    assert ok
