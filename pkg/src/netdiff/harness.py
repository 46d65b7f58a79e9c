"""
Monte Carlo replication loop, empirical FDR and power, real data analysis and report files.

Machine-readable report formats:

tsv
    One row per replication. Scenario fields are flattened into "scenario/<name>" columns
    (family parameters as "scenario/family_params/<name>"), reals written with %.17g.
jsonl
    One json object per report with the nested scenario and the list of replication records,
    plus the aggregated percentages for convenience (ignored when parsing).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import attrs
import numpy as np
import yaml
from attrs import define, field

from ._typedattr import NamedTupleMixin, attrs_from_dict, definenumpy, text_conversions
from .errors import NetdiffInputError, ReplicationError
from .fdr_baseline import MultipleTestResult, run_baseline_test
from .global_test import GlobalTestResult, run_global_test
from .netdata import LinkIndexMap, load_stack
from .objects import flatten_dict, invert_list_of_dict, unflatten_dict
from .power_gap import GapConfig, run_enhanced_test
from .simgen import ScenarioSpec, ScenarioTruth, generate_scenario
from .stats_core import LinkStatistics, compute_link_statistics

logger = logging.getLogger(__name__)

METHODS = ("global", "baseline", "enhanced")
REPORT_FORMATS = ("tsv", "jsonl", "table")
_REPORT_KEYS = ("method", "alpha", "n_replications")
_RECORD_KEYS = ("index", "fdp", "power", "n_rejections", "threshold")


@define
class ReplicationRecord(NamedTupleMixin):
    index: int
    fdp: float
    power: float
    n_rejections: int
    threshold: float


@definenumpy
class ReplicationReport:
    scenario: ScenarioSpec
    method: str
    alpha: float
    n_replications: int
    per_replication: List[ReplicationRecord]
    wall_time: float = field(default=0.0, eq=False)

    @property
    def empirical_fdr(self) -> float:
        """Mean FDP in percent."""
        return 100.0 * float(np.mean([record.fdp for record in self.per_replication]))

    @property
    def empirical_power(self) -> float:
        """Mean power in percent."""
        return 100.0 * float(np.mean([record.power for record in self.per_replication]))

    @property
    def monte_carlo_se(self) -> Tuple[float, float]:
        """Standard errors of empirical_fdr and empirical_power, in percent."""
        n = len(self.per_replication)
        if n < 2:
            return 0.0, 0.0
        columns = invert_list_of_dict([attrs.asdict(record) for record in self.per_replication])
        scale = 100.0 / math.sqrt(n)
        return (
            scale * float(np.std(columns["fdp"], ddof=1)),
            scale * float(np.std(columns["power"], ddof=1)),
        )


def empirical_metrics(rejected, truth: ScenarioTruth) -> Tuple[float, float]:
    """
    fdp = |rejected and null| / max(|rejected|, 1)
    power = |rejected and H1| / |H1|, 0 if H1 is empty
    """
    rejected = np.unique(np.asarray(rejected, dtype=np.intp))
    n_true = len(np.intersect1d(rejected, truth.h1_set, assume_unique=True))
    n_false = len(rejected) - n_true
    fdp = n_false / max(len(rejected), 1)
    power = n_true / len(truth.h1_set) if len(truth.h1_set) > 0 else 0.0
    return float(fdp), float(power)


def _run_replication(
    spec: ScenarioSpec, method: str, alpha: float, gap_config: GapConfig, index: int
) -> ReplicationRecord:
    stack1, stack2, truth = generate_scenario(spec, index)
    stats = compute_link_statistics(stack1, stack2)
    if method == "global":
        result = run_global_test(stats.t, alpha, stats.q)
        has_alternative = len(truth.h1_set) > 0
        return ReplicationRecord(
            index=index,
            fdp=float(result.reject and not has_alternative),
            power=float(result.reject and has_alternative),
            n_rejections=int(result.reject),
            threshold=result.threshold,
        )
    if method == "baseline":
        link_result = run_baseline_test(stats.t, alpha, stats.q)
    else:
        link_result = run_enhanced_test(stats.t, stats.a, alpha, gap_config)
    fdp, power = empirical_metrics(link_result.rejected, truth)
    return ReplicationRecord(
        index=index,
        fdp=fdp,
        power=power,
        n_rejections=link_result.n_rejections,
        threshold=float(link_result.threshold),
    )


def run_replications(
    spec: ScenarioSpec,
    method: str,
    alpha: float = 0.05,
    reps: int = 100,
    master_seed: Optional[int] = None,
    gap_config: Optional[GapConfig] = None,
    workers: int = 1,
) -> ReplicationReport:
    """
    Simulate and test reps replications of a scenario.

    Args:
        spec: scenario, its seed is replaced by master_seed if given
        method: one of METHODS
        alpha: level of every test
        reps: number of replications
        master_seed: seed of all replication streams
        gap_config: settings of the enhanced method, its alpha is replaced by alpha
        workers: number of processes, the report does not depend on it

    Returns:
        report with records sorted by replication index
    """
    if method not in METHODS:
        raise NetdiffInputError(f"Unknown method '{method}', choose from {METHODS}")
    if reps < 1:
        raise NetdiffInputError(f"Need at least one replication, got reps={reps}")
    if not 0.0 < alpha < 1.0:
        raise NetdiffInputError(f"alpha must be in (0, 1), got {alpha}")
    if workers < 1:
        raise NetdiffInputError(f"Need at least one worker, got {workers}")
    if master_seed is not None:
        spec = attrs.evolve(spec, seed=master_seed)
    gap_config = attrs.evolve(gap_config or GapConfig(), alpha=alpha)

    start = time.perf_counter()
    records: List[ReplicationRecord] = []
    if workers == 1:
        for index in range(reps):
            try:
                records.append(_run_replication(spec, method, alpha, gap_config, index))
            except Exception as e:
                raise ReplicationError(index, f"{type(e).__name__}: {e}") from e
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_run_replication, spec, method, alpha, gap_config, index)
                for index in range(reps)
            ]
            # collect in index order so the reported failure does not depend on scheduling
            for index, future in enumerate(futures):
                try:
                    records.append(future.result())
                except Exception as e:
                    for pending in futures[index + 1 :]:
                        pending.cancel()
                    raise ReplicationError(index, f"{type(e).__name__}: {e}") from e
    records.sort(key=lambda record: record.index)
    wall_time = time.perf_counter() - start

    report = ReplicationReport(
        scenario=spec,
        method=method,
        alpha=alpha,
        n_replications=reps,
        per_replication=records,
        wall_time=wall_time,
    )
    logger.info(
        f"{spec.family} n=({spec.n1},{spec.n2}) k_q={spec.k_q} {method}: "
        f"FDR {report.empirical_fdr:.1f}% power {report.empirical_power:.1f}% "
        f"({reps} replications, {wall_time:.1f}s)"
    )
    return report


# ---------- real data


@definenumpy
class RealDataResult:
    statistics: LinkStatistics = field(repr=False)
    global_result: GlobalTestResult
    link_result: Optional[MultipleTestResult]
    baseline_result: Optional[MultipleTestResult]
    transform: str
    p: int


def analyze_real_data(
    path1: Union[str, Path],
    path2: Union[str, Path],
    method: str = "enhanced",
    alpha: float = 0.05,
    config: Optional[GapConfig] = None,
    transform: str = "none",
    out_dir: Optional[Union[str, Path]] = None,
    stack_format: Optional[str] = None,
) -> RealDataResult:
    """
    Test two stacks of observed networks against each other.

    With out_dir, writes links.tsv (one row per link) and summary.yaml. The global test always
    runs. The enhanced method also runs the baseline so both rejection counts are reported.
    """
    if method not in METHODS:
        raise NetdiffInputError(f"Unknown method '{method}', choose from {METHODS}")
    stack1 = load_stack(path1, stack_format, group_id=1).transformed(transform)
    stack2 = load_stack(path2, stack_format, group_id=2).transformed(transform)
    if stack1.p != stack2.p:
        raise NetdiffInputError(
            f"Node counts differ: p={stack1.p} in {path1}, p={stack2.p} in {path2}"
        )
    stats = compute_link_statistics(stack1, stack2)
    global_result = run_global_test(stats.t, alpha, stats.q)
    link_result, baseline_result = None, None
    if method in ("baseline", "enhanced"):
        baseline_result = run_baseline_test(stats.t, alpha, stats.q)
        link_result = baseline_result
    if method == "enhanced":
        link_result = run_enhanced_test(stats.t, stats.a, alpha, config)
    result = RealDataResult(stats, global_result, link_result, baseline_result, transform, stack1.p)
    if out_dir is not None:
        write_real_data_outputs(result, Path(out_dir), n1=stack1.n, n2=stack2.n)
    return result


def write_real_data_outputs(result: RealDataResult, out_dir: Path, n1: int, n2: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = result.statistics
    index_map = LinkIndexMap(result.p)
    rejected = np.zeros(stats.q, dtype=int)
    adjusted = stats.pvalue
    if result.link_result is not None:
        rejected = result.link_result.rejected_mask(stats.q).astype(int)
        if result.link_result.adjusted_pvalues is not None:
            adjusted = result.link_result.adjusted_pvalues
    columns = {
        "link": np.arange(stats.q),
        "i": index_map.rows,
        "j": index_map.cols,
        "w": stats.w,
        "t": stats.t,
        "a": stats.a,
        "pvalue": stats.pvalue,
        "adjusted_pvalue": adjusted,
        "rejected": rejected,
        "degenerate": stats.degenerate.astype(int),
    }
    with (out_dir / "links.tsv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(columns.keys())
        for row in zip(*columns.values()):
            writer.writerow(_format_cell(value) for value in row)

    glob = result.global_result
    summary: Dict[str, Any] = {
        "p": result.p,
        "q": stats.q,
        "n1": n1,
        "n2": n2,
        "transform": result.transform,
        "alpha": glob.alpha,
        "n_degenerate": int(stats.degenerate.sum()),
        "global": {
            "m_n": glob.m_n,
            "standardized": glob.standardized,
            "threshold": glob.threshold,
            "pvalue": glob.pvalue,
            "reject": glob.reject,
            "argmax_link": glob.argmax_link,
        },
    }
    if result.link_result is not None:
        summary["method"] = result.link_result.method
        summary["n_rejections"] = result.link_result.n_rejections
        summary["threshold"] = float(result.link_result.threshold)
    else:
        summary["method"] = "global"
    if result.link_result is not None and result.link_result.method == "enhanced":
        summary["baseline_n_rejections"] = result.baseline_result.n_rejections
        summary["lambdas"] = result.link_result.lambdas.tolist()
        summary["group_sizes"] = result.link_result.group_sizes.tolist()
        summary["alt_proportions"] = result.link_result.alt_proportions.tolist()
        summary["weights"] = result.link_result.weights.tolist()
    with (out_dir / "summary.yaml").open("w", encoding="utf-8") as fh:
        yaml.safe_dump(summary, fh, sort_keys=False)
    logger.info(f"Wrote {out_dir / 'links.tsv'} and {out_dir / 'summary.yaml'}")


# ---------- report files


def _format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def _report_rows(report: ReplicationReport) -> List[Dict[str, Any]]:
    scenario = flatten_dict({"scenario": attrs.asdict(report.scenario)})
    head = {key: getattr(report, key) for key in _REPORT_KEYS}
    return [{**scenario, **head, **attrs.asdict(record)} for record in report.per_replication]


def format_table(reports: Sequence[ReplicationReport]) -> str:
    """Human readable table, percentages rounded to one decimal."""
    header = ["family", "n1", "n2", "k_q", "method", "FDR %", "power %"]
    header += ["SE FDR", "SE power", "reps", "time s"]
    rows = []
    for report in reports:
        se_fdr, se_power = report.monte_carlo_se
        rows.append(
            [
                report.scenario.family,
                str(report.scenario.n1),
                str(report.scenario.n2),
                str(report.scenario.k_q),
                report.method,
                f"{report.empirical_fdr:.1f}",
                f"{report.empirical_power:.1f}",
                f"{se_fdr:.1f}",
                f"{se_power:.1f}",
                str(report.n_replications),
                f"{report.wall_time:.1f}",
            ]
        )
    widths = [max(len(line[col]) for line in [header] + rows) for col in range(len(header))]
    lines = [
        "  ".join(cell.rjust(width) for cell, width in zip(line, widths))
        for line in [header] + rows
    ]
    return "\n".join(lines) + "\n"


def format_report(reports: Sequence[ReplicationReport], fmt: str) -> str:
    if len(reports) == 0:
        raise NetdiffInputError("No reports to format")
    for report in reports:
        if len(report.per_replication) == 0:
            raise NetdiffInputError(f"Report for {report.scenario} has no replications")
    if fmt == "table":
        return format_table(reports)
    if fmt == "jsonl":
        lines = []
        for report in reports:
            content = attrs.asdict(report, filter=lambda att, _value: att.eq)
            se_fdr, se_power = report.monte_carlo_se
            content["summary"] = {
                "empirical_fdr": report.empirical_fdr,
                "empirical_power": report.empirical_power,
                "se_fdr": se_fdr,
                "se_power": se_power,
            }
            lines.append(json.dumps(content, sort_keys=False))
        return "\n".join(lines) + "\n"
    if fmt == "tsv":
        rows = [row for report in reports for row in _report_rows(report)]
        columns: List[str] = []
        for row in rows:
            columns.extend(key for key in row if key not in columns)
        buffer = io.StringIO()
        writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(_format_cell(row[col]) if col in row else "" for col in columns)
        return buffer.getvalue()
    raise NetdiffInputError(f"Unknown report format '{fmt}', choose from {REPORT_FORMATS}")


def emit_report(
    reports: Union[ReplicationReport, Sequence[ReplicationReport]],
    path: Optional[Union[str, Path]],
    fmt: str = "tsv",
) -> str:
    """
    Write reports to path, or return the text only if path is None.
    """
    if isinstance(reports, ReplicationReport):
        reports = [reports]
    text = format_report(reports, fmt)
    if path is not None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise NetdiffInputError(f"Cannot write report to {path}: {e}") from e
        logger.info(f"Wrote {len(reports)} reports to {path}")
    return text


def _report_from_dict(content: Dict[str, Any], conversions=None) -> ReplicationReport:
    try:
        return attrs_from_dict(ReplicationReport, content, strict=True, conversions=conversions)
    except TypeError as e:
        raise NetdiffInputError(f"Malformed report: {e}") from e


def parse_report(path: Union[str, Path], fmt: Optional[str] = None) -> List[ReplicationReport]:
    """Read reports written by emit_report in tsv or jsonl format."""
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".")
    text = path.read_text(encoding="utf-8")
    if fmt == "jsonl":
        reports = []
        for line in text.splitlines():
            if not line.strip():
                continue
            content = json.loads(line)
            content.pop("summary", None)
            reports.append(_report_from_dict(content))
        return reports
    if fmt == "tsv":
        reader = csv.DictReader(io.StringIO(text), delimiter="\t")
        grouped: Dict[Tuple, List[Dict[str, str]]] = {}
        for row in reader:
            row = {key: value for key, value in row.items() if value != ""}
            record = {key: row.pop(key) for key in _RECORD_KEYS}
            grouped.setdefault(tuple(sorted(row.items())), []).append(record)
        reports = []
        for head, records in grouped.items():
            content = unflatten_dict(dict(head))
            content["per_replication"] = records
            reports.append(_report_from_dict(content, conversions=text_conversions))
        return reports
    raise NetdiffInputError(f"Cannot parse report format '{fmt}', choose from tsv, jsonl")
