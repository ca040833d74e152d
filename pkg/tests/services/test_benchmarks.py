from unittest import TestCase

from genrl._core.abstract_graph import AbstractGraph
from genrl._services.benchmarks import BenchmarkService
from genrl.errors import InvalidInputError


class TestBenchmarkService(TestCase):
    def test_list__ids(self):
        """Should list every benchmark once, with a description."""
        ids = [b.id for b in BenchmarkService().list()]
        self.assertEqual(27, len(ids))
        self.assertEqual(len(ids), len(set(ids)))
        for bid in ("reach_moving_init_obs", "nreach_obs_5", "choice_two_levels",
                    "destack_opposite_side", "stack_horizontal_same_side", "acrobot"):
            with self.subTest(bid=bid):
                self.assertIn(bid, ids)

    def test_get__default_reach_epsilon(self):
        service = BenchmarkService(default_reach_epsilon=0.5)
        task = service.get("reach_moving_goal")
        self.assertEqual("reach_moving_goal", task.name)
        self.assertEqual(0.5, task.base.spec.pred.params[-1])
        self.assertEqual(0.2, service.get("reach_moving_goal", 0.2).base.spec.pred.params[-1])

    def test_get__error__unknown(self):
        with self.assertRaises(InvalidInputError):
            BenchmarkService().get("nreach_9")

    def test_graph_and_describe(self):
        service = BenchmarkService()
        graph = service.graph("choice")
        self.assertIsInstance(graph, AbstractGraph)
        self.assertEqual(4, graph.n_vertices)
        text = service.describe("choice")
        self.assertIn("digraph abstract_graph {", text)
        self.assertIn("0 -> 1", text)
        self.assertEqual(1, text.count("doublecircle"))
