"""Path representation, seeded samplers, and grid-level primitives.

Paths are piecewise-linear functions stored as node arrays. Samplers draw on
a uniform grid; deterministic transforms may insert interpolated nodes (level
crossings), so ``Path`` carries an explicit time array rather than assuming
uniform spacing everywhere.

Every sampler is a pure function of ``(grid, stream)``: the same inputs give
bit-identical output arrays.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import first_crossing

KINDS = ("free", "bridge", "meander_type", "excursion", "first_passage")

_RESAMPLE_LIMIT = 100


class PathInvariantError(ValueError):
    """A path violates the structural invariants of its kind tag."""


class ArgmaxTieError(RuntimeError):
    """The maximum is attained at two or more grid nodes."""


class ResampleLimitError(RuntimeError):
    """A rejection sampler failed to produce a valid path; signals numerical
    misconfiguration (interior exact zeros should have probability ~0)."""


class ExtensionLimitError(RuntimeError):
    """A horizon-doubling simulation hit its extension cap before the target
    level was reached."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon] with n_steps equal steps."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (self.horizon > 0):
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps}")

    @property
    def spacing(self) -> float:
        return self.horizon / self.n_steps

    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * (self.horizon / self.n_steps)
        t[-1] = self.horizon
        return t


@dataclass(frozen=True)
class RngStream:
    """Counter-based seeding: (master_seed, stream_id) names an independent
    reproducible random stream."""

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.SFC64(ss))


@dataclass(frozen=True, eq=False)
class Path:
    """A sampled continuous function: strictly increasing times, one value
    per node, and a kind tag that fixes endpoint/shape invariants."""

    times: np.ndarray
    values: np.ndarray
    kind: str = "free"
    level: float | None = None  # first-passage target

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=np.float64)
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if t.ndim != 1 or v.shape != t.shape or t.size < 2:
            raise PathInvariantError("times/values must be matching 1-d arrays with >= 2 nodes")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise PathInvariantError("times must start at 0 and strictly increase")
        if self.kind not in KINDS:
            raise PathInvariantError(f"unknown kind {self.kind!r}")
        self._check_kind(v)
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def _check_kind(self, v):
        kind = self.kind
        if kind == "bridge":
            if v[0] != 0.0 or v[-1] != 0.0:
                raise PathInvariantError("bridge must be pinned to 0 at both ends")
        elif kind == "meander_type":
            if v[0] != 0.0 or v.max() != v[-1]:
                raise PathInvariantError("meander_type must start at 0 and attain its max at the end")
        elif kind == "excursion":
            if v[0] != 0.0 or v[-1] != 0.0 or not np.all(v[1:-1] > 0.0):
                raise PathInvariantError("excursion must be 0 at the ends and positive inside")
        elif kind == "first_passage":
            if self.level is None or not (self.level > 0):
                raise PathInvariantError("first_passage requires a positive level")
            if v[0] != 0.0 or v[-1] != self.level or not np.all(v[:-1] < self.level):
                raise PathInvariantError("first_passage must stay below its level until the end")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    def is_uniform(self) -> bool:
        dt = np.diff(self.times)
        return bool(np.all(np.abs(dt - dt[0]) <= 1e-12 * self.horizon))

    def value_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    @classmethod
    def on_grid(cls, grid: TimeGrid, values, kind="free", level=None) -> "Path":
        return cls(grid.times(), values, kind, level)


def _bm_values(grid: TimeGrid, gen: np.random.Generator) -> np.ndarray:
    inc = gen.standard_normal(grid.n_steps)
    inc *= math.sqrt(grid.spacing)
    v = np.empty(grid.n_steps + 1)
    v[0] = 0.0
    np.cumsum(inc, out=v[1:])
    return v


def _bridge_values(grid: TimeGrid, gen: np.random.Generator,
                   end: float = 0.0) -> np.ndarray:
    """Brownian bridge 0 -> end on [0, 1]: B(t) - t B(1) + t*end."""
    b = _bm_values(grid, gen)
    t = grid.times()
    v = b - t * b[-1]
    if end != 0.0:
        v += t * end
    v[0] = 0.0
    v[-1] = end
    return v


def _require_unit_horizon(grid: TimeGrid):
    if grid.horizon != 1.0:
        raise ValueError(f"sampler requires horizon 1, got {grid.horizon}")


def sample_bm(grid: TimeGrid, rng: RngStream) -> Path:
    """Standard Brownian motion from 0, independent Gaussian increments."""
    return Path.on_grid(grid, _bm_values(grid, rng.generator()), "free")


def sample_bridge(grid: TimeGrid, rng: RngStream) -> Path:
    """Brownian bridge on [0, 1], pinned to 0 at both ends exactly.

    The continuous bridge has a strictly positive maximum almost surely, but
    a coarse grid can miss it (probability O(1/n_steps) of all interior
    nodes negative); such draws are resampled so the discrete argmax is a
    proper interior node.
    """
    _require_unit_horizon(grid)
    gen = rng.generator()
    for _ in range(_RESAMPLE_LIMIT):
        v = _bridge_values(grid, gen)
        if v.max() > 0.0:
            return Path.on_grid(grid, v, "bridge")
    raise ResampleLimitError("bridge sampler: no positive interior node")


def sample_meander_reversed(grid: TimeGrid, rng: RngStream) -> Path:
    """Time-space reversed Brownian meander, built by reflecting a sampled
    bridge around its argmax. Ends at twice the bridge maximum."""
    from .transforms import t_me

    return t_me(sample_bridge(grid, rng))


def sample_bes3(grid: TimeGrid, rng: RngStream) -> Path:
    """BES(3) from 0: Euclidean norm of three independent Brownian motions."""
    gen = rng.generator()
    a = _bm_values(grid, gen)
    b = _bm_values(grid, gen)
    c = _bm_values(grid, gen)
    return Path.on_grid(grid, np.sqrt(a * a + b * b + c * c), "free")


def sample_excursion(grid: TimeGrid, rng: RngStream) -> Path:
    """Normalized Brownian excursion as a 3-d Bessel bridge: norm of three
    independent standard bridges, resampled if any interior node is exactly 0."""
    _require_unit_horizon(grid)
    gen = rng.generator()
    for _ in range(_RESAMPLE_LIMIT):
        a = _bridge_values(grid, gen)
        b = _bridge_values(grid, gen)
        c = _bridge_values(grid, gen)
        v = np.sqrt(a * a + b * b + c * c)
        if np.all(v[1:-1] > 0.0):
            return Path.on_grid(grid, v, "excursion")
    raise ResampleLimitError("excursion sampler: interior zeros persisted")


def sample_first_passage_bridge(x: float, grid: TimeGrid, rng: RngStream) -> Path:
    """First-passage bridge of length 1 from 0 to x: time-space reversal of a
    BES(3) bridge from 0 to x (norm of a 3-d Brownian bridge to (x, 0, 0))."""
    if not (x > 0):
        raise ValueError(f"level must be > 0, got {x}")
    _require_unit_horizon(grid)
    gen = rng.generator()
    for _ in range(_RESAMPLE_LIMIT):
        a = _bridge_values(grid, gen, end=x)
        b = _bridge_values(grid, gen)
        c = _bridge_values(grid, gen)
        r = np.sqrt(a * a + b * b + c * c)
        if np.all(r[1:-1] > 0.0):
            v = x - r[::-1]
            v[0] = 0.0
            v[-1] = x
            return Path.on_grid(grid, v, "first_passage", level=x)
    raise ResampleLimitError("first-passage sampler: interior zeros persisted")


def hitting_time(path: Path, y: float):
    """First time the linear interpolant reaches level y, or None."""
    return first_crossing(path.times, path.values, y)


def argmax_unique(path: Path):
    """(index, time) of the unique strictly largest node value.

    Raises ArgmaxTieError when the maximum is attained at several nodes;
    callers decide whether to resample or reject.
    """
    v = path.values
    i = int(np.argmax(v))
    if np.count_nonzero(v == v[i]) > 1:
        raise ArgmaxTieError("maximum attained at multiple grid nodes")
    return i, float(path.times[i])


# ---------------------------------------------------------------------------
# serialization


def path_to_csv(path: Path) -> str:
    buf = io.StringIO()
    buf.write("t,v\n")
    for t, v in zip(path.times, path.values):
        buf.write(f"{t:.17g},{v:.17g}\n")
    return buf.getvalue()


def path_from_csv(text: str, kind: str = "free", level=None) -> Path:
    data = "\n".join(line for line in text.splitlines()
                     if line and not line.startswith("#")
                     and not line.startswith("t,"))
    rows = np.loadtxt(io.StringIO(data), delimiter=",", ndmin=2)
    return Path(rows[:, 0], rows[:, 1], kind, level)


def path_to_json_dict(path: Path) -> dict:
    d = {
        "horizon": path.horizon,
        "n_steps": path.n_steps,
        "kind": path.kind,
        "values": path.values.tolist(),
    }
    if path.level is not None:
        d["level"] = path.level
    if not path.is_uniform():
        d["times"] = path.times.tolist()
    return d


def path_from_json_dict(d: dict) -> Path:
    if "times" in d:
        times = np.asarray(d["times"])
    else:
        times = TimeGrid(d["horizon"], d["n_steps"]).times()
    return Path(times, np.asarray(d["values"]), d.get("kind", "free"), d.get("level"))


def path_to_json(path: Path) -> str:
    return json.dumps(path_to_json_dict(path))
