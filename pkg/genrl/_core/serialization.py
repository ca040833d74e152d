"""
Policy generator files.

```
magic     8 bytes   b"GENRLGEN"
version   uint16 LE
length    uint32 LE  byte length of the header
header    UTF-8 JSON (graph, policy shape, feature mode, per-edge layout, guards)
payload   little-endian float64: for each edge in graph order, the base params
          followed by the kappa coefficients row by row (none for baselines)
```
"""

import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from genrl._core import bases
from genrl._core.abstract_graph import AbstractGraph, Edge
from genrl._core.decision_tree import DecisionTree
from genrl._core.policy import (
    EdgePolicy,
    FeatureMode,
    KappaPolynomial,
    KappaTemplate,
    PolicyGenerator,
    PolicyParams,
    PolicyShape,
)
from genrl.errors import GeneratorFormatError, InvalidInputError

log = logging.getLogger(__name__)

MAGIC = b"GENRLGEN"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sHI")
_FLOAT = np.dtype("<f8")


class EdgeLayout(bases.Model):
    edge: Edge
    kappa_rows: int = 0
    template: KappaTemplate | None = None


class GeneratorHeader(bases.Model):
    graph: AbstractGraph
    shape: PolicyShape
    feature_mode: FeatureMode
    edges: list[EdgeLayout]
    guards: dict[int, DecisionTree]


def _fail(msg: str, cause: Exception | None = None):
    err = GeneratorFormatError(msg)
    log.error(err, exc_info=True)
    if cause is not None:
        raise err from cause
    raise err


def dumps_generator(gen: PolicyGenerator) -> bytes:
    layouts, chunks = [], []
    for e in gen.graph.edges:
        ep = gen.edges[e]
        chunks.append(ep.base.flat)
        if ep.kappa is None:
            layouts.append(EdgeLayout(edge=e))
        else:
            layouts.append(
                EdgeLayout(
                    edge=e, kappa_rows=ep.kappa.coefficients.shape[0], template=ep.kappa.template
                )
            )
            chunks.append(ep.kappa.flat)
    header = GeneratorHeader(
        graph=gen.graph,
        shape=gen.shape,
        feature_mode=gen.feature_mode,
        edges=layouts,
        guards=dict(sorted(gen.guards.items())),
    )
    head = header.model_dump_json().encode("utf-8")
    payload = np.concatenate(chunks).astype(_FLOAT).tobytes() if chunks else b""
    return _PREFIX.pack(MAGIC, FORMAT_VERSION, len(head)) + head + payload


def loads_generator(data: bytes) -> PolicyGenerator:
    if len(data) < _PREFIX.size:
        _fail("Generator data is truncated.")
    magic, version, head_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        _fail("Not a policy generator file.")
    if version != FORMAT_VERSION:
        _fail(f"Unsupported generator format version {version}.")
    start = _PREFIX.size
    if len(data) < start + head_len:
        _fail("Generator header is truncated.")
    try:
        header = GeneratorHeader.model_validate_json(data[start : start + head_len])
    except (ValidationError, InvalidInputError, UnicodeDecodeError) as err:
        _fail(f"Generator header is invalid: {err}", err)
    payload = data[start + head_len :]
    if len(payload) % _FLOAT.itemsize:
        _fail("Generator payload is not a whole number of float64 values.")
    values = np.frombuffer(payload, dtype=_FLOAT)
    n = header.shape.n_params
    pos, edges = 0, {}
    for layout in header.edges:
        need = n * (1 + layout.kappa_rows)
        if pos + need > len(values):
            _fail("Generator payload is truncated.")
        base = PolicyParams(flat=values[pos : pos + n])
        kappa = None
        if layout.kappa_rows:
            coeffs = values[pos + n : pos + need].reshape(layout.kappa_rows, n)
            kappa = KappaPolynomial(coefficients=coeffs, template=layout.template)
        edges[tuple(layout.edge)] = EdgePolicy(base=base, kappa=kappa)
        pos += need
    if pos != len(values):
        _fail("Generator payload has trailing data.")
    try:
        return PolicyGenerator(
            graph=header.graph,
            edges=edges,
            guards=dict(header.guards),
            shape=header.shape,
            feature_mode=header.feature_mode,
        )
    except InvalidInputError as err:
        _fail(f"Generator is inconsistent: {err}", err)


def write_generator(gen: PolicyGenerator, path: Path) -> Path:
    path = Path(path)
    path.write_bytes(dumps_generator(gen))
    return path


def read_generator(path: Path) -> PolicyGenerator:
    try:
        data = Path(path).read_bytes()
    except OSError as err:
        _fail(f"Could not read generator at: {path}. {err!r}.", err)
    return loads_generator(data)
