"""Forwarding datasets, bundled fixtures and JSON/CSV serialization.

Dataset CSV grammar (UTF-8, LF newlines)::

    # info_id: B                      <- optional metadata comments
    # post_time: 2020-02-02T10:41
    # clock_offset: 2                 <- hours subtracted from the time column
    # note: free text
    elapsed_hours,cumulative_count    <- optional header
    Around 2h,15
    3h,1281
    0.1667,597

A time cell is a number with an optional ``h`` or ``min`` unit (bare numbers
are hours) and an optional ``Around`` prefix marking the value as
approximate.
"""

from __future__ import annotations

import csv
import dataclasses
import io as _io
import json
import math
import re
from dataclasses import dataclass
from datetime import datetime
from importlib import resources

import numpy as np

from .errors import ValidationError
from .models import Phase1Params, Phase2Params

__all__ = [
    "ForwardingDataset",
    "parse_dataset",
    "serialize_dataset",
    "load_dataset",
    "load_fixture",
    "load_params",
    "published_params",
    "reference_fits",
    "FIXTURES",
]

HEADER = ("elapsed_hours", "cumulative_count")
FIXTURES = ("A", "B", "C")

_TIME_RE = re.compile(r"^(?P<around>around\s+)?(?P<num>[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(?P<unit>h|min)?$", re.I)


@dataclass(frozen=True)
class ForwardingDataset:
    """Observed cumulative forwarding counts of one piece of information.

    ``times`` are hours elapsed since the information was posted.
    ``approximate[k]`` flags rows whose time was reported only roughly.
    """

    info_id: str
    times: tuple
    counts: tuple
    approximate: tuple = ()
    post_time: datetime | None = None
    note: str = ""

    def __post_init__(self):
        if not self.approximate:
            object.__setattr__(self, "approximate", (False,) * len(self.times))
        _validate(self.times, self.counts)
        if len(self.approximate) != len(self.times):
            raise ValidationError("approximate flags do not match the row count")

    @property
    def t(self):
        return np.asarray(self.times, dtype=float)

    @property
    def c(self):
        return np.asarray(self.counts, dtype=float)

    @property
    def observations(self):
        return list(zip(self.times, self.counts))

    def __len__(self):
        return len(self.times)

    def window(self, t_max):
        """Rows with elapsed time ``<= t_max``."""
        keep = [i for i, t in enumerate(self.times) if t <= t_max + 1e-12]
        return dataclasses.replace(
            self,
            times=tuple(self.times[i] for i in keep),
            counts=tuple(self.counts[i] for i in keep),
            approximate=tuple(self.approximate[i] for i in keep),
        )


def _validate(times, counts):
    if len(times) == 0:
        raise ValidationError("dataset has no observations")
    if len(times) != len(counts):
        raise ValidationError("times and counts differ in length")
    for k, (t, c) in enumerate(zip(times, counts)):
        if not math.isfinite(t) or t < 0:
            raise ValidationError(f"row {k}: elapsed time {t!r} must be finite and >= 0")
        if not isinstance(c, int) or c < 0:
            raise ValidationError(f"row {k}: count {c!r} must be a nonnegative integer")
        if k:
            if t == times[k - 1]:
                raise ValidationError(f"row {k}: duplicate time {t!r}")
            if t < times[k - 1]:
                raise ValidationError(f"row {k}: time {t!r} is earlier than the previous row")
            if c < counts[k - 1]:
                raise ValidationError(f"row {k}: count {c} decreases from {counts[k - 1]}")


def _parse_time(cell, row):
    m = _TIME_RE.match(cell.strip())
    if not m:
        raise ValidationError(f"row {row}: cannot parse time {cell!r}")
    value = float(m["num"])
    if (m["unit"] or "h").lower() == "min":
        value /= 60.0
    return value, m["around"] is not None


def _parse_count(cell, row):
    try:
        value = float(cell)
    except ValueError:
        raise ValidationError(f"row {row}: cannot parse count {cell!r}") from None
    if not value.is_integer():
        raise ValidationError(f"row {row}: count {cell!r} is not an integer")
    return int(value)


def parse_dataset(text, info_id=None):
    """Parse the dataset CSV grammar into a :class:`ForwardingDataset`.

    Raises
    ------
    ValidationError
        On malformed cells, an empty table, repeated or decreasing times, or
        decreasing counts.  The message names the offending row.
    """
    meta = {}
    rows = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].partition(":")
            if sep:
                k = key.strip().lower()
                v = value.strip()
                meta[k] = f"{meta[k]} | {v}" if k == "note" and k in meta else v
            continue
        rows.append(stripped)
    reader = list(csv.reader(rows))
    if reader and tuple(c.strip().lower() for c in reader[0]) == HEADER:
        reader = reader[1:]

    offset = float(meta.get("clock_offset", 0.0))
    times, counts, approx = [], [], []
    for k, cells in enumerate(reader):
        if len(cells) != 2:
            raise ValidationError(f"row {k}: expected 2 columns, got {len(cells)}")
        t, rough = _parse_time(cells[0], k)
        times.append(t - offset)
        counts.append(_parse_count(cells[1], k))
        approx.append(rough)
    if offset:
        # float subtraction may leave -0.0 or 1e-16 around the origin
        times = [0.0 if abs(t) < 1e-12 else t for t in times]

    post_time = meta.get("post_time")
    return ForwardingDataset(
        info_id=info_id or meta.get("info_id", ""),
        times=tuple(times),
        counts=tuple(counts),
        approximate=tuple(approx),
        post_time=datetime.fromisoformat(post_time) if post_time else None,
        note=meta.get("note", ""),
    )


def serialize_dataset(ds):
    """Inverse of :func:`parse_dataset` (times written as plain hours)."""
    buf = _io.StringIO()
    buf.write(f"# info_id: {ds.info_id}\n")
    if ds.post_time is not None:
        buf.write(f"# post_time: {ds.post_time.isoformat()}\n")
    if ds.note:
        buf.write(f"# note: {ds.note}\n")
    buf.write(",".join(HEADER) + "\n")
    for t, c, rough in zip(ds.times, ds.counts, ds.approximate):
        cell = f"Around {t!r}h" if rough else repr(t)
        buf.write(f"{cell},{c}\n")
    return buf.getvalue()


def load_dataset(path, info_id=None):
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh.read(), info_id=info_id)


def fixture_text(name):
    return resources.files("dtsfi.data").joinpath(f"info_{name.lower()}.csv").read_text(encoding="utf-8")


def load_fixture(name):
    """Bundled forwarding series ``"A"``, ``"B"`` or ``"C"``."""
    name = name.upper()
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    return parse_dataset(fixture_text(name))


def posting_gap(old, new):
    """Hours between the posting times of two datasets."""
    if old.post_time is None or new.post_time is None:
        raise ValidationError("both datasets need a post_time")
    return (new.post_time - old.post_time).total_seconds() / 3600.0


# --------------------------------------------------------------------------
# Parameter files
# --------------------------------------------------------------------------

_P1_KEYS = {f.name for f in dataclasses.fields(Phase1Params)}
_P2_KEYS = {f.name for f in dataclasses.fields(Phase2Params)}


def params_from_mapping(d):
    """Build parameter objects from a flat mapping keyed by symbol name.

    Returns a :class:`Phase1Params`, a :class:`Phase2Params`, or a pair when
    both sets of keys are present.  ``s10`` may be omitted from a combined
    mapping, in which case ``s20`` is used for it.
    """
    d = dict(d)
    has1 = {"beta1", "p1", "alpha1"} <= d.keys()
    has2 = _P2_KEYS <= d.keys()
    if has1 and has2:
        d.setdefault("s10", d["s20"])
        return Phase1Params.from_dict(d), Phase2Params.from_dict(d)
    if has2:
        return Phase2Params.from_dict(d)
    if has1 and "s10" in d:
        return Phase1Params.from_dict(d)
    raise ValidationError("parameter mapping matches neither phase-1 nor phase-2 keys")


def params_to_mapping(params):
    if isinstance(params, tuple):
        out = {}
        for p in params:
            out.update(p.to_dict())
        return out
    return params.to_dict()


def load_params(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    raw = {k: v for k, v in raw.items() if not k.startswith("_")}
    return params_from_mapping(raw)


def _bundled_params(filename):
    raw = json.loads(resources.files("dtsfi.data").joinpath(filename).read_text(encoding="utf-8"))
    return {k: params_from_mapping({kk: vv for kk, vv in v.items() if not kk.startswith("_")})
            for k, v in raw.items()}


def published_params():
    """Parameter tables reported alongside the datasets.

    Keys: ``"B_phase1"`` (old information B, stand-alone), ``"C_lti"`` (C
    posted after B settled), ``"A_early"`` (A before B was posted) and
    ``"AB_sti"`` (joint A/B spread, a ``(Phase1Params, Phase2Params)`` pair).
    """
    return _bundled_params("published.json")


def reference_fits():
    """Bundled least-squares fits to the fixtures, keyed like :func:`published_params`.

    ``"C_lti"`` was fitted with the published ``"B_phase1"`` trajectory as the
    old information; there is no ``"B_phase1"`` entry.  Reproduce with
    ``demos/02_fit_fixtures.py``.
    """
    return _bundled_params("reference_fits.json")


def to_jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats for ``json.dump``."""
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
