import json

import numpy as np
import pytest
import yaml

from netdiff import harness
from netdiff.errors import NetdiffInputError, ReplicationError, exit_code_for
from netdiff.harness import (
    ReplicationRecord,
    ReplicationReport,
    analyze_real_data,
    emit_report,
    empirical_metrics,
    format_report,
    parse_report,
    run_replications,
)
from netdiff.netdata import LinkIndexMap, NetworkSampleStack, write_stack
from netdiff.simgen import ScenarioSpec, ScenarioTruth


def _truth(h1_set):
    return ScenarioTruth(np.zeros((3, 3)), np.zeros((3, 3)), np.asarray(h1_set, dtype=int), {})


@pytest.mark.parametrize(
    "rejected, h1_set, fdp, power",
    [
        pytest.param([1, 2, 3], [2, 3, 4, 5], 1 / 3, 0.5, id="mixed"),
        pytest.param([], [2, 3], 0.0, 0.0, id="no_rejections"),
        pytest.param([0, 1], [], 1.0, 0.0, id="empty_alternative"),
        pytest.param([4, 2], [2, 4], 0.0, 1.0, id="perfect"),
    ],
)
def test_empirical_metrics(rejected, h1_set, fdp, power):
    assert empirical_metrics(rejected, _truth(h1_set)) == pytest.approx((fdp, power))


def _small_spec(**kwargs):
    arguments = dict(family="bernoulli", n1=40, n2=40, k_q=10, p=12, seed=5)
    arguments.update(kwargs)
    return ScenarioSpec(**arguments)


@pytest.mark.parametrize("method", ["global", "baseline", "enhanced"])
def test_run_replications(method):
    report = run_replications(_small_spec(), method, alpha=0.05, reps=3)
    assert [record.index for record in report.per_replication] == [0, 1, 2]
    assert report.n_replications == 3
    assert 0.0 <= report.empirical_fdr <= 100.0
    assert 0.0 <= report.empirical_power <= 100.0
    assert report == run_replications(_small_spec(), method, alpha=0.05, reps=3)
    if method == "global":
        assert all(record.fdp == 0.0 for record in report.per_replication)
        assert all(record.n_rejections in (0, 1) for record in report.per_replication)


def test_run_replications_master_seed():
    report = run_replications(_small_spec(seed=0), "baseline", reps=2, master_seed=5)
    assert report.scenario.seed == 5
    assert report == run_replications(_small_spec(), "baseline", reps=2)


def test_workers_do_not_change_the_report():
    serial = run_replications(_small_spec(), "enhanced", reps=4)
    parallel = run_replications(_small_spec(), "enhanced", reps=4, workers=2)
    assert serial == parallel


@pytest.mark.parametrize(
    "kwargs",
    [
        pytest.param(dict(method="magic"), id="method"),
        pytest.param(dict(reps=0), id="reps"),
        pytest.param(dict(alpha=1.5), id="alpha"),
        pytest.param(dict(workers=0), id="workers"),
    ],
)
def test_run_replications_errors(kwargs):
    arguments = dict(method="baseline", reps=2)
    arguments.update(kwargs)
    with pytest.raises(NetdiffInputError):
        run_replications(_small_spec(), **arguments)


def test_failing_replication(monkeypatch):
    def broken(spec, index):
        raise NetdiffInputError(f"broken replication {index}")

    monkeypatch.setattr(harness, "generate_scenario", broken)
    with pytest.raises(ReplicationError) as info:
        run_replications(_small_spec(), "baseline", reps=2)
    assert info.value.index == 0
    assert isinstance(info.value.__cause__, NetdiffInputError)
    assert exit_code_for(info.value) == 2


def _report(fdps, powers, **spec_kwargs):
    records = [
        ReplicationRecord(index=i, fdp=fdp, power=power, n_rejections=3, threshold=2.5)
        for i, (fdp, power) in enumerate(zip(fdps, powers))
    ]
    return ReplicationReport(_small_spec(**spec_kwargs), "baseline", 0.05, len(records), records)


def test_report_aggregates():
    report = _report([0.0, 1.0], [0.5, 0.5])
    assert report.empirical_fdr == pytest.approx(50.0)
    assert report.empirical_power == pytest.approx(50.0)
    se_fdr, se_power = report.monte_carlo_se
    assert se_fdr == pytest.approx(50.0)
    assert se_power == 0.0
    assert _report([0.2], [0.4]).monte_carlo_se == (0.0, 0.0)


@pytest.mark.parametrize("fmt", ["tsv", "jsonl"])
def test_report_files(tmp_path, fmt):
    reports = [
        _report([0.0, 0.25], [0.75, 1.0]),
        _report([0.1], [0.9], family_params={"low": 0.4}, k_q=12),
    ]
    path = tmp_path / f"reports.{fmt}"
    text = emit_report(reports, path, fmt)
    assert path.read_text(encoding="utf-8") == text
    assert parse_report(path) == reports


def test_tsv_layout():
    lines = format_report([_report([0.0, 0.25], [0.75, 1.0])], "tsv").splitlines()
    header = lines[0].split("\t")
    assert header[:2] == ["scenario/family", "scenario/n1"]
    assert header[-5:] == ["index", "fdp", "power", "n_rejections", "threshold"]
    assert len(lines) == 3
    assert lines[2].split("\t")[-4:] == ["0.25", "1", "3", "2.5"]


def test_jsonl_summary():
    content = json.loads(format_report([_report([0.0, 0.5], [1.0, 0.5])], "jsonl"))
    assert content["summary"]["empirical_fdr"] == pytest.approx(25.0)
    assert "wall_time" not in content
    assert content["scenario"]["family"] == "bernoulli"


def test_table():
    table = format_report([_report([0.0, 0.5], [1.0, 0.5])], "table")
    assert "FDR %" in table.splitlines()[0]
    assert "bernoulli" in table
    assert "25.0" in table and "75.0" in table


def test_report_errors(tmp_path):
    with pytest.raises(NetdiffInputError):
        format_report([], "tsv")
    with pytest.raises(NetdiffInputError):
        format_report([_report([], [])], "tsv")
    with pytest.raises(NetdiffInputError):
        format_report([_report([0.0], [1.0])], "xml")
    (tmp_path / "file").write_text("")
    with pytest.raises(NetdiffInputError):
        emit_report(_report([0.0], [1.0]), tmp_path / "file" / "report.tsv")


def _write_groups(tmp_path, shift=3.0, n=40, p=12):
    index_map = LinkIndexMap(p)
    rng = np.random.default_rng(0)
    links1 = rng.normal(size=(n, index_map.q))
    links2 = rng.normal(size=(n, index_map.q))
    links2[:, :3] += shift
    path1 = write_stack(NetworkSampleStack(1, index_map.to_matrices(links1)), tmp_path / "g1.bin")
    path2 = write_stack(NetworkSampleStack(2, index_map.to_matrices(links2)), tmp_path / "g2.bin")
    return path1, path2


@pytest.mark.parametrize("method", ["baseline", "enhanced"])
def test_analyze_real_data(tmp_path, method):
    path1, path2 = _write_groups(tmp_path)
    out_dir = tmp_path / "out"
    result = analyze_real_data(path1, path2, method=method, out_dir=out_dir)
    assert result.global_result.reject
    assert result.global_result.argmax_link in (0, 1, 2)
    assert {0, 1, 2} <= set(result.link_result.rejected.tolist())

    lines = (out_dir / "links.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[0].split("\t") == [
        "link", "i", "j", "w", "t", "a", "pvalue", "adjusted_pvalue", "rejected", "degenerate"
    ]
    assert len(lines) == 1 + 66
    assert lines[1].split("\t")[:3] == ["0", "0", "1"]
    assert lines[1].split("\t")[8] == "1"

    summary = yaml.safe_load((out_dir / "summary.yaml").read_text(encoding="utf-8"))
    assert summary["method"] == method
    assert summary["q"] == 66
    assert summary["n1"] == summary["n2"] == 40
    assert summary["n_rejections"] == result.link_result.n_rejections
    assert summary["global"]["reject"] is True
    if method == "enhanced":
        assert summary["baseline_n_rejections"] == result.baseline_result.n_rejections
        assert sum(summary["group_sizes"]) == 66


def test_analyze_real_data_global_only(tmp_path):
    path1, path2 = _write_groups(tmp_path, shift=0.0)
    result = analyze_real_data(path1, path2, method="global", out_dir=tmp_path / "out")
    assert result.link_result is None
    summary = yaml.safe_load((tmp_path / "out" / "summary.yaml").read_text(encoding="utf-8"))
    assert summary["method"] == "global"
    lines = (tmp_path / "out" / "links.tsv").read_text(encoding="utf-8").splitlines()
    rejected = [line.split("\t")[8] for line in lines]
    assert set(rejected[1:]) == {"0"}


def test_analyze_real_data_errors(tmp_path):
    path1, _ = _write_groups(tmp_path)
    index_map = LinkIndexMap(5)
    other = write_stack(
        NetworkSampleStack(2, index_map.to_matrices(np.ones((3, index_map.q)))), tmp_path / "o.bin"
    )
    with pytest.raises(NetdiffInputError, match="Node counts differ"):
        analyze_real_data(path1, other)
    with pytest.raises(NetdiffInputError):
        analyze_real_data(path1, path1, transform="log1p")
    with pytest.raises(NetdiffInputError):
        analyze_real_data(path1, path1, method="magic")
