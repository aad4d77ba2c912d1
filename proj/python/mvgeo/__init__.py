"""Multi-view street-level object matching and geo-localization."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import __version__, run_pipeline as _run_pipeline, sweep as _sweep


def run_pipeline(root, detections, config=None, jobs=1):
    """Match and localize a dataset. Returns (matches, objects) as parsed JSON."""
    matches, objects = _run_pipeline(str(root), str(detections), config or MatchingConfig(), jobs)  # noqa: F405
    return _json.loads(matches)["matches"], _json.loads(objects)["objects"]


def sweep(base, axis, values, seeds=20, matching=None, jobs=1):
    """Noise sweep as a list of dicts, one per value."""
    text = _sweep(base, axis, list(values), seeds, matching or MatchingConfig(), jobs)  # noqa: F405
    header, *rows = text.strip().splitlines()
    keys = header.split(",")
    out = []
    for row in rows:
        rec = dict(zip(keys, row.split(",")))
        for k in keys:
            if k == "seeds":
                rec[k] = int(rec[k])
            elif k != "axis":
                rec[k] = float(rec[k])
        out.append(rec)
    return out
