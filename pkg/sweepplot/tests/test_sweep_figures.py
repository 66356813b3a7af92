import os

import numpy as np
import pytest

from sweepplot import (DataError, PlotSpec, SchemaError, build_sweep_figure,
                       build_validation_figure, parse_sweep, parse_validation,
                       render_sweep, render_validation)
from sweepplot.cli import main


def sweep_text(rows, version=1):
    lines = [f"# schema_version={version}",
             "T,Ddes_norm,gamma_e_sq,T_gamma_e_sq,iters,status"]
    lines += rows
    return "\n".join(lines) + "\n"


# values with full float precision, the way the harness writes them
ROW_A = "10000000000,1.0,436586.0414705524,4.365860414705524e+15,18,ok"
ROW_B = "1000000000000,100.0,107298.73557712059,1.0729873557712059e+17,4,ok"
ROW_BAD = "100000000000,10.0,,,0,infeasible"


@pytest.fixture()
def sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(sweep_text([ROW_A, ROW_BAD, ROW_B]))
    return str(path)


def validation_text(n=40, seed=3):
    rng = np.random.default_rng(seed)
    lines = ["# schema_version=1",
             "replica,goal_ok,contain_ok,noise_ok,radius_sq,logdet,excitation_margin"]
    for r in range(n):
        lines.append(f"{r},1,1,{int(r % 7 != 0)},{repr(rng.uniform(1, 2))},"
                     f"{repr(rng.uniform(10, 20))},{repr(rng.normal(0.02, 0.01))}")
    return "\n".join(lines) + "\n"


# -- parsing ---------------------------------------------------------------


def test_parse_keeps_ok_rows_and_records_skips(sweep_csv):
    table = parse_sweep(sweep_csv)
    assert table.T.tolist() == [1e10, 1e12]
    assert table.gamma_e_sq.tolist() == [436586.0414705524, 107298.73557712059]
    assert table.T_gamma_e_sq.tolist() == [4.365860414705524e+15, 1.0729873557712059e+17]
    assert table.iters.tolist() == [18, 4]
    assert table.skipped == ("infeasible",)


def test_parse_is_deterministic(sweep_csv):
    t1, t2 = parse_sweep(sweep_csv), parse_sweep(sweep_csv)
    for name in ("T", "Ddes_norm", "gamma_e_sq", "T_gamma_e_sq", "iters"):
        assert np.array_equal(t1.column(name), t2.column(name))


def test_no_data_rows_raises(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(sweep_text([]))
    with pytest.raises(DataError, match="no data rows"):
        parse_sweep(str(path))


def test_all_rows_skipped_raises(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(sweep_text([ROW_BAD]))
    with pytest.raises(DataError, match="no plottable rows"):
        parse_sweep(str(path))


def test_wrong_version_raises(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(sweep_text([ROW_A], version=2))
    with pytest.raises(SchemaError, match="schema_version 2"):
        parse_sweep(str(path))


def test_missing_version_line_raises(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text("T,Ddes_norm,gamma_e_sq,T_gamma_e_sq,iters,status\n" + ROW_A + "\n")
    with pytest.raises(SchemaError, match="schema_version"):
        parse_sweep(str(path))


def test_column_mismatch_reports_diff(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text("# schema_version=1\n"
                    "T,Ddes_norm,gamma_sq,T_gamma_e_sq,iters,status,extra\n")
    with pytest.raises(SchemaError) as exc:
        parse_sweep(str(path))
    msg = str(exc.value)
    assert "missing ['gamma_e_sq']" in msg
    assert "'gamma_sq'" in msg and "'extra'" in msg


def test_short_row_raises(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(sweep_text(["10,1.0,2.0,ok"]))
    with pytest.raises(DataError, match="cells per row"):
        parse_sweep(str(path))


def test_parse_validation_round_trip(tmp_path):
    path = tmp_path / "validation.csv"
    path.write_text(validation_text(n=40))
    table = parse_validation(str(path))
    assert table.excitation_margin.shape == (40,)
    assert table.goal_ok.mean() == 1.0
    assert 0.8 < table.noise_ok.mean() < 1.0
    # repr round-trip: stored text equals the parsed float exactly
    first = float(validation_text(n=40).splitlines()[2].split(",")[4])
    assert table.radius_sq[0] == first


# -- figures ---------------------------------------------------------------


def test_two_rows_give_two_points_per_panel(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(sweep_text([ROW_A, ROW_B]))
    table = parse_sweep(str(path))
    fig = build_sweep_figure(table, PlotSpec(str(path), "unused.png"))
    assert len(fig.axes) == 2
    for ax in fig.axes:
        (line,) = ax.lines
        assert len(line.get_xdata()) == 2
        assert ax.get_xscale() == "log" and ax.get_yscale() == "log"


def test_plotted_ordinates_equal_csv_values(sweep_csv):
    table = parse_sweep(sweep_csv)
    fig = build_sweep_figure(table, PlotSpec(sweep_csv, "unused.png"))
    ax_a, ax_b = fig.axes
    assert np.array_equal(ax_a.lines[0].get_ydata(), table.T_gamma_e_sq)
    assert np.array_equal(ax_b.lines[0].get_ydata(), table.gamma_e_sq)
    assert np.array_equal(ax_a.lines[0].get_xdata(), table.T)


def test_skipped_rows_show_in_legend(sweep_csv):
    table = parse_sweep(sweep_csv)
    fig = build_sweep_figure(table, PlotSpec(sweep_csv, "unused.png"))
    legend = fig.axes[0].get_legend()
    assert legend is not None
    assert "1 infeasible" in legend.get_texts()[0].get_text()


def test_no_legend_without_skips(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(sweep_text([ROW_A, ROW_B]))
    fig = build_sweep_figure(parse_sweep(str(path)),
                             PlotSpec(str(path), "unused.png"))
    assert fig.axes[0].get_legend() is None


def test_spec_rejects_unknown_series(sweep_csv):
    with pytest.raises(DataError, match="unknown series"):
        PlotSpec(sweep_csv, "out.png", series=("gamma_e",))
    with pytest.raises(DataError, match="empty"):
        PlotSpec(sweep_csv, "out.png", series=())


def test_render_sweep_writes_png(sweep_csv, tmp_path):
    out = tmp_path / "fig.png"
    assert render_sweep(sweep_csv, str(out)) == str(out)
    data = out.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"


def test_render_failure_writes_no_file(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(sweep_text([]))
    out = tmp_path / "fig.png"
    with pytest.raises(DataError):
        render_sweep(str(path), str(out))
    assert not out.exists()


def test_render_validation_writes_png(tmp_path):
    path = tmp_path / "validation.csv"
    path.write_text(validation_text())
    out = tmp_path / "hist.png"
    render_validation(str(path), str(out))
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    fig = build_validation_figure(parse_validation(str(path)))
    assert len(fig.axes) == 2


# -- command line ----------------------------------------------------------


def test_cli_success(sweep_csv, tmp_path, capsys):
    out = tmp_path / "fig.png"
    assert main([sweep_csv, str(out)]) == 0
    assert out.exists()
    assert "wrote" in capsys.readouterr().out


def test_cli_schema_mismatch_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    path.write_text("# schema_version=1\nT,status\n10,ok\n")
    out = tmp_path / "fig.png"
    assert main([str(path), str(out)]) == 1
    err = capsys.readouterr().err
    assert "missing" in err and "gamma_e_sq" in err
    assert not out.exists()


def test_cli_missing_file_exits_nonzero(tmp_path, capsys):
    assert main([str(tmp_path / "absent.csv"), str(tmp_path / "fig.png")]) == 1
    assert "plot error" in capsys.readouterr().err
