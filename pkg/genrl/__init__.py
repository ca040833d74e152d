import logging

from genrl import errors
from genrl._core.abstract_graph import AbstractGraph, compile_spec
from genrl._core.benchmarks import get_benchmark, list_benchmarks
from genrl._core.generator import run_genrl, train_baseline
from genrl._core.policy import PolicyGenerator, generate_policy
from genrl._core.spec_parser import format_spec, parse_spec
from genrl._core.tasks import InductiveTask, RLTask, instantiate_task
from genrl.client import Client

__all__ = (
    "AbstractGraph",
    "Client",
    "InductiveTask",
    "PolicyGenerator",
    "RLTask",
    "compile_spec",
    "errors",
    "format_spec",
    "generate_policy",
    "get_benchmark",
    "instantiate_task",
    "list_benchmarks",
    "parse_spec",
    "run_genrl",
    "train_baseline",
)


logging.getLogger(__name__).addHandler(logging.NullHandler())
