import logging

from genrl._core import bases
from genrl._core.abstract_graph import AbstractGraph, compile_spec, to_dot
from genrl._core.benchmarks import Benchmark, get_benchmark, list_benchmarks
from genrl._core.spec_parser import format_spec
from genrl._core.tasks import InductiveTask
from genrl._utils.utils import coalesce

log = logging.getLogger(__name__)


class BenchmarkService(bases.Service):
    """
    Benchmark-related functionality is accessed through `client.benchmarks`. For example:

    ```python
    from genrl.client import Client

    client = Client()
    task = client.benchmarks.get("reach_moving_init")
    ```
    """

    __slots__ = ("default_reach_epsilon",)

    def __init__(self, default_reach_epsilon: float | None = None):
        self.default_reach_epsilon: float | None = default_reach_epsilon

    def list(self) -> list[Benchmark]:
        return list_benchmarks()

    def get(self, benchmark_id: str, reach_epsilon: float | None = None) -> InductiveTask:
        """
        Build a benchmark's inductive task.

        :param benchmark_id: One of the ids from `list()`.
        :param reach_epsilon: Radius of Car2D reach predicates; defaults to the config's.
        """
        eps = coalesce(reach_epsilon, self.default_reach_epsilon)
        if eps is None:
            return get_benchmark(benchmark_id)
        return get_benchmark(benchmark_id, reach_epsilon=eps)

    def graph(self, benchmark_id: str) -> AbstractGraph:
        return compile_spec(self.get(benchmark_id).base.spec)

    def describe(self, benchmark_id: str) -> str:
        """The benchmark's formula followed by its abstract graph in DOT."""
        task = self.get(benchmark_id)
        return format_spec(task.base.spec) + "\n\n" + to_dot(compile_spec(task.base.spec))
