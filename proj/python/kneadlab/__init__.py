"""Certified kneading computations for two bimodal interval map families.

Numbers cross the boundary as decimal strings; enclosures are (value, err)
string pairs.
"""

import json

from ._kneadlab import (
    STATE_VERSION,
    AmbiguousSymbol,
    BranchDead,
    Error,
    InvalidArgument,
    InvalidSequence,
    Map,
    NotAdmissible,
    ParamOutOfRange,
    ParseError,
    SchemaVersionMismatch,
    construct,
    find_param,
)
from ._kneadlab import verify as _verify


def verify(state_json, samples=11):
    """Verification reports of a state, as a list of dicts."""
    return json.loads(_verify(state_json, samples))


__all__ = [
    "STATE_VERSION",
    "AmbiguousSymbol",
    "BranchDead",
    "Error",
    "InvalidArgument",
    "InvalidSequence",
    "Map",
    "NotAdmissible",
    "ParamOutOfRange",
    "ParseError",
    "SchemaVersionMismatch",
    "construct",
    "find_param",
    "verify",
]
