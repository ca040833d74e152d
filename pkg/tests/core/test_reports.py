import csv
import io
import json
from unittest import TestCase

import numpy as np
from genrl._core import generator as gn
from genrl._core import reports as rp
from genrl._core.abstract_graph import compile_spec
from genrl._core.decision_tree import TreeLeaf, TreeSplit
from genrl._core.evaluation import SuccessEstimate, UnseenSweep
from genrl._core.policy import EdgePolicy, PolicyGenerator, PolicyParams, PolicyShape
from genrl._core.spec_lang import Trajectory
from genrl._core.spec_parser import parse_spec
from genrl._core.trainer import TelemetryRow
from genrl.errors import InvalidInputError

from tests.resources import specs_data


def make_result() -> gn.TrainingResult:
    graph = compile_spec(parse_spec(specs_data.choice, specs_data.symbols))
    shape = PolicyShape(input_dim=2, output_dim=2, hidden_dims=(2, 2))
    params = PolicyParams(flat=np.zeros(shape.n_params))
    guard = TreeSplit(
        feature=0, threshold=0.5, left=TreeLeaf(label=(0, 1)), right=TreeLeaf(label=(0, 2))
    )
    gen = PolicyGenerator(
        graph=graph,
        edges={e: EdgePolicy(base=params) for e in graph.edges},
        guards={0: guard},
        shape=shape,
    )
    probs = {((0, 1), 0): 0.9, ((1, 3), 0): 0.8, ((0, 2), 1): 0.9, ((2, 3), 1): 0.8}
    tables = gn.compute_reach_tables(graph, probs, [0, 1])
    reports = {
        e: gn.EdgeReport(edge=f"{e[0]}->{e[1]}", flagged=e == (2, 3)) for e in graph.edges
    }
    return gn.TrainingResult(
        generator=gen,
        graph=graph,
        tables=tables,
        decision_sets=gn.build_decision_sets(graph, tables, [0, 1]),
        edge_reports=reports,
        unreached={1: [1], 2: [0]},
    )


def estimate(i: int, p: float, passed: bool, samples=()) -> SuccessEstimate:
    return SuccessEstimate(index=i, probability=p, passed=passed, samples=tuple(samples))


def report(seed: int, train: int, unseen: int, benchmark="choice", mode="genrl"):
    instances = [
        rp.InstanceResult(index=k, split="train", probability=1.0, passed=k < train)
        for k in range(3)
    ] + [
        rp.InstanceResult(index=3 + k, split="unseen", probability=1.0, passed=True)
        for k in range(unseen)
    ]
    return rp.RunReport(
        benchmark=benchmark,
        mode=mode,
        seed=seed,
        degree=1,
        template="polynomial",
        train=[0, 1, 2],
        instances=instances,
        successful_train=train,
        successful_unseen=unseen,
        successful_unseen_capped=min(unseen, 2),
        unseen_stop_reason="consecutive failures",
    )


class TestRunReport(TestCase):
    def test_build_report__counts_and_guards(self):
        """Should total the passes per split and name flagged edges and guards."""
        result = make_result()
        sweep = UnseenSweep(
            count=1,
            capped_count=1,
            stop_reason="probe limit",
            estimates=[estimate(2, 0.95, True), estimate(3, 0.2, False)],
        )
        out = rp.build_report(
            "choice", "genrl", 0, 1, "polynomial",
            [estimate(0, 1.0, True), estimate(1, 0.5, False)], sweep, result,
        )
        self.assertEqual(1, out.successful_train)
        self.assertEqual(1, out.successful_unseen)
        self.assertEqual([0, 1], out.train)
        self.assertEqual(["2->3"], out.flagged_edges)
        self.assertEqual({0: "i <= 0 ? 0->1 : 0->2"}, out.guards)
        self.assertEqual(["train", "train", "unseen", "unseen"], [r.split for r in out.instances])

    def test_report__error__inconsistent_counts(self):
        with self.assertRaises(InvalidInputError):
            rp.RunReport(
                benchmark="choice", mode="genrl", seed=0, degree=1, template="polynomial",
                train=[0],
                instances=[
                    rp.InstanceResult(index=0, split="train", probability=1.0, passed=True)
                ],
                successful_train=0, successful_unseen=0, successful_unseen_capped=0,
                unseen_stop_reason="horizon",
            )

    def test_report__json_is_stable(self):
        a = report(0, 2, 4).model_dump_json()
        self.assertEqual(a, report(0, 2, 4).model_dump_json())
        self.assertEqual(4, json.loads(a)["successful_unseen"])


class TestManifest(TestCase):
    def test_build_manifest__tables_and_sets(self):
        manifest = rp.build_manifest(make_result())
        self.assertAlmostEqual(0.72, manifest.reach["3"][0])
        self.assertEqual([1], manifest.best_in["3"][0])
        self.assertEqual([2], manifest.best_in["3"][1])
        self.assertEqual([0], manifest.decision_sets["0->1"])
        self.assertEqual([1], manifest.decision_sets["0->2"])
        self.assertEqual({1: [1], 2: [0]}, manifest.unreached)
        self.assertEqual(4, len(manifest.edges))


class TestSummary(TestCase):
    def test_summarize__medians_per_mode(self):
        """Should give the median over seeds for each benchmark and mode."""
        reports = [
            report(0, 3, 10),
            report(1, 2, 4),
            report(2, 3, 7),
            report(0, 1, 0, mode="base2"),
        ]
        rows = rp.summarize(reports)
        self.assertEqual(["base2", "genrl"], [r.mode for r in rows])
        genrl = rows[1]
        self.assertEqual(3, genrl.runs)
        self.assertEqual(3.0, genrl.successful_train)
        self.assertEqual(7.0, genrl.successful_unseen)
        self.assertEqual(2.0, genrl.successful_unseen_capped)

    def test_summary_csv__header_and_rows(self):
        text = rp.summary_csv(rp.summarize([report(0, 3, 10), report(1, 2, 5)]))
        rows = list(csv.reader(io.StringIO(text)))
        self.assertEqual(list(rp.SUMMARY_COLUMNS), rows[0])
        self.assertEqual(["choice", "genrl", "2", "3", "2.5", "7.5", "2"], rows[1])

    def test_summary_table__aligned(self):
        text = rp.summary_table(rp.summarize([report(0, 3, 10)]))
        header, row = text.splitlines()
        self.assertTrue(header.startswith("benchmark  mode"))
        self.assertEqual(header.index("mode"), row.index("genrl"))

    def test_telemetry_csv(self):
        rows = [TelemetryRow(iteration=0, best_score=-1.5, mean_score=-2.0, alpha=1.0)]
        lines = rp.telemetry_csv(rows).splitlines()
        self.assertEqual("iter,best_score,mean_score,alpha", lines[0])
        self.assertEqual("0,-1.5,-2.0,1.0", lines[1])

    def test_trajectories_csv__tags_rows(self):
        """Should write one row per state tagged with instance, split and rollout."""
        traj = Trajectory.from_states([[0.0, 0.0], [1.0, 0.0]], action_dim=2)
        text = rp.trajectories_csv(
            [
                ("train", estimate(0, 1.0, True, [traj])),
                ("unseen", estimate(5, 0.0, False, [traj, traj])),
            ]
        )
        rows = list(csv.reader(io.StringIO(text)))
        header = ["instance", "split", "rollout", "step", "s_0", "s_1", "a_0", "a_1"]
        self.assertEqual(header, rows[0])
        self.assertEqual(1 + 2 * 3, len(rows))
        self.assertEqual(["5", "unseen", "1"], rows[-1][:3])

    def test_trajectories_csv__empty(self):
        self.assertEqual("", rp.trajectories_csv([("train", estimate(0, 1.0, True))]))
