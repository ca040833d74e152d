"""Run reports, manifests and the summary tables built from them."""

import csv
import io
import logging
from collections import defaultdict
from collections.abc import Iterable, Sequence
from typing import Literal

import numpy as np
from pydantic import model_validator

from genrl._core import bases
from genrl._core.abstract_graph import edge_label
from genrl._core.evaluation import SuccessEstimate, UnseenSweep
from genrl._core.generator import EdgeReport, TrainingResult, guard_expressions
from genrl._core.trainer import TelemetryRow
from genrl.errors import InvalidInputError

log = logging.getLogger(__name__)

Split = Literal["train", "unseen"]


class InstanceResult(bases.Model):
    index: int
    split: Split
    probability: float
    passed: bool


class RunReport(bases.Model):
    benchmark: str
    mode: str
    seed: int
    degree: int
    template: str
    train: list[int]
    instances: list[InstanceResult]
    successful_train: int
    successful_unseen: int
    successful_unseen_capped: int
    unseen_stop_reason: str
    guards: dict[int, str] = {}
    flagged_edges: list[str] = []

    @model_validator(mode="after")
    def _counts_match(self) -> "RunReport":
        train = sum(r.passed for r in self.instances if r.split == "train")
        unseen = sum(r.passed for r in self.instances if r.split == "unseen")
        if (train, unseen) != (self.successful_train, self.successful_unseen):
            raise InvalidInputError("Report counts disagree with the per-instance results.")
        return self


class RunManifest(bases.Model):
    edges: list[EdgeReport]
    reach: dict[str, dict[int, float]]
    best_in: dict[str, dict[int, list[int]]]
    decision_sets: dict[str, list[int]]
    guards: dict[int, str]
    unreached: dict[int, list[int]]


def build_report(
    benchmark: str,
    mode: str,
    seed: int,
    degree: int,
    template: str,
    train_estimates: Sequence[SuccessEstimate],
    sweep: UnseenSweep,
    result: TrainingResult,
) -> RunReport:
    instances = [
        InstanceResult(index=e.index, split="train", probability=e.probability, passed=e.passed)
        for e in train_estimates
    ] + [
        InstanceResult(index=e.index, split="unseen", probability=e.probability, passed=e.passed)
        for e in sweep.estimates
    ]
    return RunReport(
        benchmark=benchmark,
        mode=mode,
        seed=seed,
        degree=degree,
        template=template,
        train=[e.index for e in train_estimates],
        instances=instances,
        successful_train=sum(e.passed for e in train_estimates),
        successful_unseen=sweep.count,
        successful_unseen_capped=sweep.capped_count,
        unseen_stop_reason=sweep.stop_reason,
        guards=guard_expressions(result.generator),
        flagged_edges=[r.edge for r in result.edge_reports.values() if r.flagged],
    )


def build_manifest(result: TrainingResult) -> RunManifest:
    tables = result.tables
    reach, best_in = defaultdict(dict), defaultdict(dict)
    for (u, i), p in sorted(tables.prob.items()):
        reach[str(u)][i] = p
        best_in[str(u)][i] = sorted(tables.best_in[(u, i)])
    return RunManifest(
        edges=[result.edge_reports[e] for e in sorted(result.edge_reports)],
        reach=dict(reach),
        best_in=dict(best_in),
        decision_sets={edge_label(e): sorted(s) for e, s in sorted(result.decision_sets.items())},
        guards=guard_expressions(result.generator),
        unreached={u: sorted(v) for u, v in sorted(result.unreached.items())},
    )


class SummaryRow(bases.Model):
    benchmark: str
    mode: str
    runs: int
    train_size: int
    successful_train: float
    successful_unseen: float
    successful_unseen_capped: float


def summarize(reports: Iterable[RunReport]) -> list[SummaryRow]:
    """Medians over seeds, one row per benchmark and mode."""
    groups: dict[tuple[str, str], list[RunReport]] = defaultdict(list)
    for r in reports:
        groups[(r.benchmark, r.mode)].append(r)
    rows = []
    for (benchmark, mode), runs in sorted(groups.items()):
        rows.append(
            SummaryRow(
                benchmark=benchmark,
                mode=mode,
                runs=len(runs),
                train_size=len(runs[0].train),
                successful_train=float(np.median([r.successful_train for r in runs])),
                successful_unseen=float(np.median([r.successful_unseen for r in runs])),
                successful_unseen_capped=float(
                    np.median([r.successful_unseen_capped for r in runs])
                ),
            )
        )
    return rows


SUMMARY_COLUMNS = (
    "benchmark",
    "mode",
    "runs",
    "train_size",
    "successful_train",
    "successful_unseen",
    "successful_unseen_capped",
)


def _cells(row: SummaryRow) -> list[str]:
    return [
        f"{v:g}" if isinstance(v, float) else str(v)
        for v in (getattr(row, c) for c in SUMMARY_COLUMNS)
    ]


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    writer.writerows(_cells(r) for r in rows)
    return buf.getvalue()


def summary_table(rows: Sequence[SummaryRow]) -> str:
    """Left-aligned text columns separated by two spaces."""
    table = [list(SUMMARY_COLUMNS), *(_cells(r) for r in rows)]
    widths = [max(len(line[k]) for line in table) for k in range(len(SUMMARY_COLUMNS))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths, strict=True)).rstrip() for line in table]
    return "\n".join(lines) + "\n"


def telemetry_csv(rows: Sequence[TelemetryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("iter", "best_score", "mean_score", "alpha"))
    for r in rows:
        writer.writerow((r.iteration, repr(r.best_score), repr(r.mean_score), repr(r.alpha)))
    return buf.getvalue()


def trajectories_csv(estimates: Iterable[tuple[Split, SuccessEstimate]]) -> str:
    """
    Sampled trajectories of each instance, one row per state, tagged with the instance
    index, the train/unseen split and the rollout number.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header_written = False
    for split, est in estimates:
        for k, traj in enumerate(est.samples):
            if not header_written:
                writer.writerow(["instance", "split", "rollout", *traj.header()])
                header_written = True
            for row in traj.rows():
                writer.writerow([est.index, split, k, *row])
    return buf.getvalue()
