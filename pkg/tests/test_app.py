import pytest
from pydantic import ValidationError

from qudit_bpqm.app.emit import FigureId, emit_figure_data
from qudit_bpqm.app.schemas import Command, RunConfig, parse_eigenlist, parse_grid
from qudit_bpqm.app.verify import SuiteStatus, format_table, run_verify_suite
from qudit_bpqm.core.density_evolution import CurvePoint, SweepRow, Verdict, design_from_errors
from qudit_bpqm.core.errors import FigureTypeMismatch, InvalidEigenList


def test_parse_grid():
    assert parse_grid("1.0,1.5,2") == (1.0, 1.5, 2.0)
    assert parse_grid("1:2:0.25") == (1.0, 1.25, 1.5, 1.75, 2.0)
    assert parse_grid("1:1.3:0.1") == (1.0, 1.1, 1.2, 1.3)
    assert parse_eigenlist("2.2,0.4,0.4") == (2.2, 0.4, 0.4)


def test_run_config_resolves_channels():
    run = RunConfig(command=Command.COMBINE, q=3, lambda0=2.2)
    assert run.channel().values == pytest.approx((2.2, 0.4, 0.4))
    assert run.second_channel() == run.channel()
    assert run.eigenlist is None
    assert (run.output, run.checkpoint, run.resume) == (None, None, None)


def test_run_config_validation():
    with pytest.raises(ValidationError):
        RunConfig(command=Command.POLAR_SWEEP, q=3, n=[2])
    with pytest.raises(ValidationError):
        RunConfig(command=Command.POLAR_DESIGN, q=3, lambda0=2.0)
    with pytest.raises(ValidationError):
        RunConfig(command=Command.LDPC_THRESHOLD, q=3, dv=3)
    with pytest.raises(ValidationError):
        RunConfig(command=Command.POLAR_SWEEP, q=3, n=[2], lambda0_grid=(1.0, 3.5))
    with pytest.raises(InvalidEigenList):
        RunConfig(command=Command.CHANNEL_INFO, q=3, eigenlist=(1.0, 1.0, 0.5))


def test_polar_rank_figure(tmp_path):
    result = design_from_errors([0.25, 0.0625, 0.5, 0.125], epsilon=0.75, q=3, seed=0, M=1)
    [path] = emit_figure_data(result, FigureId.POLAR_RANK, tmp_path)
    assert path.name == "polar-rank_n2.csv"
    assert path.read_text().splitlines()[:2] == ["rank_over_N,mean_error", "0.25,0.0625"]


def test_ldpc_threshold_figure(tmp_path):
    points = [
        CurvePoint(lambda0=1.0, final_error=0.0, verdict=Verdict.CONVERGED, iterations=1),
        CurvePoint(lambda0=3.0, final_error=0.5, verdict=Verdict.NOT_CONVERGED, iterations=10),
    ]
    [path] = emit_figure_data(points, "ldpc-threshold", tmp_path)
    assert path.read_text() == "lambda0,final_error\n1.0,0.0\n3.0,0.5\n"


def test_figure_type_mismatch(tmp_path):
    row = SweepRow(lambda0=2.0, design_rate=0.5, holevo_qits=0.6, n=2, M=10, seed=0, epsilon=0.1)
    with pytest.raises(FigureTypeMismatch):
        emit_figure_data([row], FigureId.LDPC_THRESHOLD, tmp_path)
    with pytest.raises(FigureTypeMismatch):
        emit_figure_data([], FigureId.POLAR_RATE, tmp_path)


@pytest.mark.parametrize("q", [2, 3, 5])
def test_verify_suite_passes(config, q):
    results = run_verify_suite(q, config, pairs=10, seed=3)
    assert {r.name for r in results} >= {"pgm-oracle", "check-oracle", "bit-unitary", "controlled-unitary"}
    assert all(r.status == SuiteStatus.PASS for r in results), format_table(results)


def test_verify_suite_respects_limits(config):
    results = {r.name: r for r in run_verify_suite(11, config, pairs=5)}
    assert results["check-unitary"].status == SuiteStatus.SKIP
    assert results["chain-rule"].status == SuiteStatus.PASS
    assert "skip" in format_table(list(results.values()))
