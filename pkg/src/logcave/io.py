"""Plain-text body specifications and data-file writers.

Body specification grammar
--------------------------
One ``key=value`` pair per line; blank lines and ``#`` comments are
ignored; vectors are comma-separated, matrix rows are separated by ``;``::

    kind=box                      kind=ball          kind=polytope
    lower=-1,-1                   dimension=3        A=1,0;-1,0;0,1;0,-1
    upper=1,1                     radius=1           b=1,1,1,1
                                                     circumradius=1.5   # optional

An intersection names its two operands in sections ``[first]`` and
``[second]``; deeper nesting uses dotted section paths such as
``[first.second]``::

    kind=intersection
    [first]
    kind=box
    lower=-1,-1
    upper=1,1
    [second]
    kind=ball
    dimension=2
    radius=0.7071
"""
from __future__ import annotations

import csv
import json
import re

import numpy as np

from .geometry import AxisBox, Ball, Intersection, Polytope, box_ball


class SpecError(ValueError):
    """Malformed body specification or experiment configuration."""


def _vector(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise SpecError(f"bad number list {text!r}") from exc


def _matrix(text):
    return [_vector(row) for row in text.split(";") if row.strip()]


def _sections(text):
    sections = {"": {}}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current in sections:
                raise SpecError(f"line {lineno}: duplicate section [{current}]")
            sections[current] = {}
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        sections[current][key] = value
    return sections


def _build(sections, path):
    try:
        entry = sections[path]
    except KeyError:
        raise SpecError(f"missing section [{path}]") from None
    kind = entry.get("kind")
    try:
        if kind == "box":
            return AxisBox(_vector(entry["lower"]), _vector(entry["upper"]))
        if kind == "ball":
            return Ball(float(entry.get("radius", 1.0)), int(entry["dimension"]))
        if kind == "polytope":
            R = entry.get("circumradius")
            return Polytope(_matrix(entry["A"]), _vector(entry["b"]),
                            None if R is None else float(R))
        if kind == "intersection":
            prefix = f"{path}." if path else ""
            return Intersection(_build(sections, prefix + "first"),
                                _build(sections, prefix + "second"))
    except KeyError as exc:
        raise SpecError(f"section [{path}] of kind {kind!r} lacks key {exc}") from None
    raise SpecError(f"unknown body kind {kind!r} in section [{path}]")


def parse_body_spec(text):
    """Build a body from the key-value specification text."""
    return _build(_sections(text), "")


def _fmt(values):
    return ",".join(repr(float(v)) for v in values)


def format_body_spec(body):
    """Inverse of ``parse_body_spec``."""
    lines = []

    def emit(b, path):
        if path:
            lines.append(f"[{path}]")
        if isinstance(b, AxisBox):
            lines.extend(["kind=box", f"lower={_fmt(b.lower)}", f"upper={_fmt(b.upper)}"])
        elif isinstance(b, Ball):
            lines.extend(["kind=ball", f"dimension={b.dimension}", f"radius={b.radius!r}"])
        elif isinstance(b, Polytope):
            lines.extend(["kind=polytope", "A=" + ";".join(_fmt(r) for r in b.A),
                          f"b={_fmt(b.b)}", f"circumradius={b.circumradius!r}"])
        elif isinstance(b, Intersection):
            lines.append("kind=intersection")
            prefix = f"{path}." if path else ""
            emit(b.first, prefix + "first")
            emit(b.second, prefix + "second")
        else:
            raise TypeError(f"cannot serialise {type(b).__name__}")

    emit(body, "")
    return "\n".join(lines) + "\n"


_ALIAS = re.compile(r"^(box|ball|boxball)(\d+)$")


def resolve_body(name):
    """Body from an alias (``box{n}``, ``ball{n}``, ``boxball{n}``) or a spec file path.

    Returns ``(body, reference_volume)``; the reference mirrors the usual
    normalisations (``2^n`` for boxes, the exact volume for unit balls,
    ``0.2 * 2^n`` for box-and-ball, and the bounding-box volume otherwise).
    """
    m = _ALIAS.match(name)
    if m:
        kind, n = m.group(1), int(m.group(2))
        if n < 1:
            raise SpecError("dimension must be positive")
        if kind == "box":
            return AxisBox.cube(n), 2.0**n
        if kind == "ball":
            from .volume import ball_volume

            return Ball(1.0, n), ball_volume(n)
        return box_ball(n), 0.2 * 2.0**n
    try:
        with open(name) as fh:
            body = parse_body_spec(fh.read())
    except OSError as exc:
        raise SpecError(f"cannot read body spec {name!r}: {exc.strerror}") from None
    lo, hi = body.bounding_box()
    return body, float(np.prod(hi - lo))


# ---------------------------------------------------------------------------
# data files


def write_trajectory_csv(path, states):
    states = np.asarray(states)
    n = states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step"] + [f"x{i}" for i in range(n)])
        for k, row in enumerate(states):
            w.writerow([k] + [repr(float(v)) for v in row])


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def write_events_jsonl(path, events):
    with open(path, "w") as fh:
        for e in events:
            fh.write(json.dumps(e.to_json()) + "\n")


def read_events_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_bound_reports(path, reports):
    from .diagnostics import BoundReport

    with open(path, "w") as fh:
        fh.write(BoundReport.HEADER + "\n")
        for r in reports:
            fh.write(r.to_csv_row() + "\n")


VOLUME_HEADER = ["body", "n", "sampler", "phases", "samples", "volume", "normalized",
                 "seconds", "seed"]


def append_volume_row(path, row):
    """Append one row to a volume CSV, writing the header for a new file."""
    import os

    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(VOLUME_HEADER)
        w.writerow([row[k] for k in VOLUME_HEADER])
