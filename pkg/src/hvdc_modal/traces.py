"""Uniformly sampled waveforms and their CSV form."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Trace:
    name: str
    unit: str
    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError(f"trace {self.name!r} needs at least 2 samples")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            (self.name, self.unit, self.t0, self.dt) == (other.name, other.unit, other.t0, other.dt)
            and np.array_equal(self.samples, other.samples)
        )

    @property
    def t(self):
        return self.t0 + self.dt * np.arange(self.samples.size)

    def with_samples(self, samples, name=None, unit=None):
        return Trace(name or self.name, unit or self.unit, self.t0, self.dt, samples)

    def index_at(self, t):
        """First sample index whose time is >= t."""
        k = int(np.ceil((t - self.t0) / self.dt - 1e-9))
        return min(max(k, 0), self.samples.size)

    def decimate(self, factor):
        factor = int(factor)
        if factor < 1:
            raise ValueError("decimation factor must be >= 1")
        return Trace(self.name, self.unit, self.t0, self.dt * factor, self.samples[::factor])


def write_traces_csv(path, traces):
    """One time column plus one column per trace, all on a shared grid."""
    traces = list(traces)
    if not traces:
        raise ValueError("nothing to write")
    ref = traces[0]
    for tr in traces[1:]:
        if len(tr) != len(ref) or tr.dt != ref.dt or tr.t0 != ref.t0:
            raise ValueError(f"trace {tr.name!r} is not on the shared time grid")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s"] + [f"{tr.name}_{tr.unit}" for tr in traces])
        t = ref.t
        cols = np.column_stack([tr.samples for tr in traces])
        for k in range(t.size):
            w.writerow([repr(float(t[k]))] + [repr(float(v)) for v in cols[k]])


def read_traces_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    t = body[:, 0]
    dt = float(t[1] - t[0])
    out = []
    for j, col in enumerate(header[1:], start=1):
        name, _, unit = col.rpartition("_")
        out.append(Trace(name, unit, float(t[0]), dt, body[:, j]))
    return out
