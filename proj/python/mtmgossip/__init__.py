"""Random spread gossip simulators: synchronous, asynchronous, and synchronized."""

from fractions import Fraction

from ._mtmgossip import (
    ConfigError,
    GenerationError,
    Topology,
    band_for_count,
    check_matching_lemma,
    cli,
    generate,
    run_async,
    run_sync,
    run_synchronized,
)
from ._mtmgossip import vertex_expansion as _vertex_expansion


def vertex_expansion(topology):
    """Exact vertex expansion as a Fraction."""
    num, den = _vertex_expansion(topology)
    return Fraction(num, den)


__all__ = [
    "ConfigError",
    "GenerationError",
    "Topology",
    "band_for_count",
    "check_matching_lemma",
    "cli",
    "generate",
    "run_async",
    "run_sync",
    "run_synchronized",
    "vertex_expansion",
]
