"""Group Shapley attribution for multi-keypoint predictors.

Thin wrappers over the C++ core. Matrices are lists of row lists; JSON
artifacts come back as Python objects.
"""

import json

from ._keyshap import (
    KeyshapError,
    __version__,
    cluster,
    confidence_correlation,
    exact_shapley,
    exact_shapley_fn,
    interdependency,
    keypoint_connectivity,
    keypoint_names,
    load_delta_csv,
    normalize_nonneg,
    perturbation_influence,
    query_count,
    render_heatmap,
    run_cli,
)
from . import _keyshap


def run_gsv(oracle, groups, **kwargs):
    """Full group Shapley run; returns the report as a dict.

    oracle is "tabular:PATH", "synthetic:PATH" or "external:COMMAND".
    """
    return json.loads(_keyshap.run_gsv_json(oracle, str(groups), **kwargs))


def plan_gkr(annotations, groups, **kwargs):
    """Erase plans for every person in a COCO keypoint file, as dicts."""
    text = _keyshap.plan_gkr_jsonl(str(annotations), str(groups), **kwargs)
    return [json.loads(line) for line in text.splitlines() if line]


__all__ = [
    "KeyshapError",
    "cluster",
    "confidence_correlation",
    "exact_shapley",
    "exact_shapley_fn",
    "interdependency",
    "keypoint_connectivity",
    "keypoint_names",
    "load_delta_csv",
    "normalize_nonneg",
    "perturbation_influence",
    "plan_gkr",
    "query_count",
    "render_heatmap",
    "run_cli",
    "run_gsv",
]
