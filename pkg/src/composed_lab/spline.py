"""Linear splines, their function-space norm, and the staircase constructions.

The norm of a univariate function is taken as

    ||f|| = 1/2 * max( sum of |slope changes| , |f'(-inf) + f'(+inf)| )

which for a linear spline counts the jumps from the left extrapolation slope
into the first segment and from the last segment into the right slope.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInput, InvalidParameter
from .valid_set import AdjacencyStats, ValidSet, adjacency_stats, cell_bounds, project_many

_GAP_RTOL = 1e-9


@dataclass(frozen=True)
class StaircaseSpec:
    """Piecewise-constant target on N ascending closed intervals with a constant gap."""

    intervals: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        iv = np.array(self.intervals, dtype=float).reshape(-1, 2)
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if len(iv) < 1 or len(iv) != len(vals):
            raise InvalidInput("need one value per interval and at least one interval")
        if not (np.all(np.isfinite(iv)) and np.all(np.isfinite(vals))):
            raise InvalidInput("intervals and values must be finite")
        if np.any(iv[:, 1] <= iv[:, 0]):
            raise InvalidInput("every interval must have positive length")
        gaps = iv[1:, 0] - iv[:-1, 1]
        if len(gaps):
            if np.any(gaps <= 0):
                raise InvalidInput("intervals must be ascending and disjoint")
            scale = max(1.0, float(np.abs(iv).max()))
            if np.ptp(gaps) > _GAP_RTOL * scale:
                raise InvalidInput("the gap between consecutive intervals must be constant")
        if np.any(np.all(vals[1:] == vals[:-1], axis=1)):
            raise InvalidInput("consecutive values must differ")
        iv.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "intervals", iv)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.intervals)

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @property
    def delta(self) -> float:
        """Gap between consecutive intervals (infinite for a single interval)."""
        if self.n == 1:
            return float("inf")
        return float(np.mean(self.intervals[1:, 0] - self.intervals[:-1, 1]))

    @property
    def min_interval_len(self) -> float:
        return float(np.min(self.intervals[:, 1] - self.intervals[:, 0]))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.intervals[0, 0]), float(self.intervals[-1, 1])

    def coordinate(self, j: int) -> "StaircaseSpec":
        """Univariate staircase of output coordinate j, merging runs of equal values."""
        col = self.values[:, j]
        iv, vals = [list(self.intervals[0])], [col[0]]
        for (xl, xu), v in zip(self.intervals[1:], col[1:]):
            if v == vals[-1]:
                iv[-1][1] = xu
            else:
                iv.append([xl, xu])
                vals.append(v)
        return StaircaseSpec(np.array(iv), np.array(vals))

    def target(self, x) -> np.ndarray:
        """f*(x) for points inside X, shape (n, k); NaN rows for points in a gap."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = self.interval_index(x)
        out = np.full((len(x), self.k), np.nan)
        inside = idx >= 0
        out[inside] = self.values[idx[inside]]
        return out

    def interval_index(self, x) -> np.ndarray:
        """Index of the interval containing each x, or -1 outside X."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        i = np.searchsorted(self.intervals[:, 0], x, side="right") - 1
        ok = (i >= 0) & (x <= self.intervals[np.clip(i, 0, None), 1])
        return np.where(ok, i, -1)

    def grid(self, n_points: int | None = None) -> np.ndarray:
        """Dense grid inside X: 10^4 points or 100 per interval, whichever is larger."""
        if n_points is None:
            n_points = max(10_000, 100 * self.n)
        lengths = self.intervals[:, 1] - self.intervals[:, 0]
        per = np.maximum(2, np.round(n_points * lengths / lengths.sum()).astype(int))
        return np.concatenate(
            [np.linspace(xl, xu, m) for (xl, xu), m in zip(self.intervals, per)]
        )

    def to_dict(self) -> dict:
        return {"intervals": self.intervals.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StaircaseSpec":
        return cls(np.array(d["intervals"], dtype=float), np.array(d["values"], dtype=float))

    @classmethod
    def load(cls, path) -> "StaircaseSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def from_values(cls, values, delta: float, lengths=1.0, start: float = 0.0) -> "StaircaseSpec":
        vals = np.asarray(values, dtype=float)
        n = len(vals)
        lengths = np.broadcast_to(np.asarray(lengths, dtype=float), (n,))
        lefts = start + np.concatenate([[0.0], np.cumsum(lengths[:-1] + delta)])
        return cls(np.stack([lefts, lefts + lengths], axis=1), vals)

    @classmethod
    def rounding_staircase(cls, n: int, delta: float) -> "StaircaseSpec":
        """f*(x) = round(x) on the union of [i - (1-delta)/2, i + (1-delta)/2], i = 1..n."""
        if not 0 < delta < 1:
            raise InvalidParameter("delta must lie in (0, 1)")
        centers = np.arange(1, n + 1, dtype=float)
        half = (1 - delta) / 2
        return cls(np.stack([centers - half, centers + half], axis=1), centers)


@dataclass(frozen=True)
class LinearSpline:
    """Continuous piecewise-linear function through ascending knots, linear beyond the ends."""

    x: np.ndarray
    y: np.ndarray
    left_slope: float = 0.0
    right_slope: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float).ravel()
        y = np.array(self.y, dtype=float).ravel()
        if len(x) < 1 or len(x) != len(y):
            raise InvalidInput("a spline needs at least one knot and one value per knot")
        if np.any(np.diff(x) <= 0):
            raise InvalidInput("knots must be strictly ascending")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInput("knots must be finite")
        if not (np.isfinite(self.left_slope) and np.isfinite(self.right_slope)):
            raise InvalidInput("extrapolation slopes must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "left_slope", float(self.left_slope))
        object.__setattr__(self, "right_slope", float(self.right_slope))

    @property
    def segment_slopes(self) -> np.ndarray:
        return np.diff(self.y) / np.diff(self.x)

    @property
    def slopes(self) -> np.ndarray:
        """Left extrapolation slope, segment slopes, right extrapolation slope."""
        return np.concatenate([[self.left_slope], self.segment_slopes, [self.right_slope]])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.x, self.y)
        out = np.where(t < self.x[0], self.y[0] + self.left_slope * (t - self.x[0]), out)
        out = np.where(t > self.x[-1], self.y[-1] + self.right_slope * (t - self.x[-1]), out)
        return out

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "left_slope": self.left_slope,
            "right_slope": self.right_slope,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSpline":
        return cls(d["x"], d["y"], d["left_slope"], d["right_slope"])


def spline_norm(f: LinearSpline) -> float:
    s = f.slopes
    total_variation = float(np.sum(np.abs(np.diff(s))))
    return 0.5 * max(total_variation, abs(f.left_slope + f.right_slope))


def _univariate(spec: StaircaseSpec) -> np.ndarray:
    if spec.k != 1:
        raise InvalidInput("expected a univariate staircase; decompose per coordinate")
    return spec.values[:, 0]


def staircase_std_interpolant(spec: StaircaseSpec) -> LinearSpline:
    """Flat on each interval, straight across each gap, flat beyond the ends."""
    y = _univariate(spec)
    return LinearSpline(spec.intervals.ravel(), np.repeat(y, 2), 0.0, 0.0)


def _coordinate_step_sums(spec: StaircaseSpec) -> np.ndarray:
    if spec.n == 1:
        return np.zeros(spec.k)
    return np.abs(np.diff(spec.values, axis=0)).sum(axis=0) / spec.delta


def std_lower_bound(spec: StaircaseSpec, stats: AdjacencyStats | None = None) -> float:
    """Sum of |steps| / gap, maximised over output coordinates."""
    return float(np.max(_coordinate_step_sums(spec)))


def base_upper_bound(spec: StaircaseSpec, stats: AdjacencyStats) -> float:
    """max(|J|U/gap + |I|U/min_len, U/min_len), summed over output coordinates."""
    if spec.n == 1:
        return 0.0
    d, dx = spec.delta, spec.min_interval_len
    total = 0.0
    for j in range(stats.k):
        U = stats.U[j]
        n_adj = stats.n_adjacent[j] - stats.n_flat[j]
        n_non = stats.n_nonadjacent[j]
        total += max(n_non * U / d + n_adj * U / dx, U / dx)
    return float(total)


def min_cell_width(values) -> float:
    v = np.unique(np.asarray(values, dtype=float))
    return float(np.min(np.diff(v))) if len(v) > 1 else float("inf")


def default_epsilon(V: ValidSet) -> float:
    w = min(min_cell_width(V.coordinate_values(j)) for j in range(V.k))
    return 1e-4 * (w if np.isfinite(w) else 1.0)


def _clip(s: float, lo: float, hi: float) -> float:
    return float(min(max(s, lo), hi))


def _construct_univariate(spec: StaircaseSpec, coord_values: np.ndarray, eps: float) -> LinearSpline:
    y = spec.values[:, 0]
    n = spec.n
    iv = spec.intervals
    lo_all, hi_all = cell_bounds(coord_values)
    pos = np.searchsorted(coord_values, y)
    if np.any(pos >= len(coord_values)) or np.any(coord_values[np.minimum(pos, len(coord_values) - 1)] != y):
        raise InvalidInput("staircase values must belong to the valid set")
    lo, hi = lo_all[pos], hi_all[pos]
    if n == 1:
        return LinearSpline(iv[0], [y[0], y[0]], 0.0, 0.0)

    half_gap = spec.delta / 2
    adjacent = np.abs(np.diff(pos)) == 1
    up = np.diff(y) > 0

    # knots[i] holds the knots of interval i (entry, optional apex, exit).
    # None marks the free end knots chosen afterwards.
    knots: list[list] = []
    for i in range(n):
        xl, xu = iv[i]
        came_up = None if i == 0 else bool(up[i - 1])
        goes_up = None if i == n - 1 else bool(up[i])
        adj_prev = i > 0 and adjacent[i - 1]
        adj_next = i < n - 1 and adjacent[i]

        if came_up is None:
            entry = None
        elif adj_prev:
            entry = (xl - half_gap, lo[i] if came_up else hi[i])
        else:
            entry = (xl, lo[i] + eps if came_up else hi[i] - eps)

        if goes_up is None:
            exit_ = None
        elif adj_next:
            exit_ = (xu + half_gap, hi[i] if goes_up else lo[i])
        else:
            exit_ = (xu, hi[i] - eps if goes_up else lo[i] + eps)

        pts = [entry]
        turning = came_up is not None and goes_up is not None and came_up != goes_up
        if turning and adj_prev and adj_next:
            apex = lo[i] + eps if came_up else hi[i] - eps
            pts.append(((xl + xu) / 2, apex))
        pts.append(exit_)
        knots.append(pts)

    flat = [p for pts in knots for p in pts]
    # adjacent pairs meet at the same gap midpoint; keep one copy
    merged: list = []
    for p in flat:
        if p is not None and merged and merged[-1] is not None and np.isclose(p[0], merged[-1][0], rtol=0, atol=1e-12):
            if abs(p[1] - merged[-1][1]) > 1e-9 * max(1.0, abs(p[1])):
                raise AssertionError("adjacent cells must share their boundary")
            continue
        merged.append(p)
    inner = merged[1:-1]

    def feasible_slope_range(x_free, xk, yk, i):
        # slopes from a free knot at x_free to (xk, yk) keeping the free value in [lo+eps, hi-eps]
        a, b = lo[i] + eps, hi[i] - eps
        dx = xk - x_free
        s1, s2 = (yk - a) / dx, (yk - b) / dx
        return min(s1, s2), max(s1, s2)

    # left free end: interval 0 entry at its left edge
    x0 = iv[0, 0]
    xk, yk = inner[0]
    s_nb = (inner[1][1] - inner[0][1]) / (inner[1][0] - inner[0][0]) if len(inner) > 1 else 0.0
    smin, smax = feasible_slope_range(x0, xk, yk, 0)
    s_left = _clip(s_nb, smin, smax)
    y0 = yk - s_left * (xk - x0)

    # right free end: last interval exit at its right edge
    xn = iv[-1, 1]
    xk, yk = inner[-1]
    s_nb = (inner[-1][1] - inner[-2][1]) / (inner[-1][0] - inner[-2][0]) if len(inner) > 1 else 0.0
    smin, smax = feasible_slope_range(xn, xk, yk, n - 1)
    s_right = _clip(s_nb, smin, smax)
    yn = yk + s_right * (xn - xk)

    xs = [x0] + [p[0] for p in inner] + [xn]
    ys = [y0] + [p[1] for p in inner] + [yn]
    return LinearSpline(xs, ys, s_left, s_right)


def _check_epsilon(coord_values: np.ndarray, eps: float) -> None:
    if not eps > 0:
        raise InvalidParameter("epsilon must be positive")
    if eps >= min_cell_width(coord_values) / 2:
        raise InvalidParameter("epsilon must be smaller than half the minimum cell width")


def base_construction(spec: StaircaseSpec, V: ValidSet, eps: float | None = None) -> LinearSpline:
    """Explicit low-norm f with project(f(x)) = f*(x) on X (univariate outputs).

    Each interval enters its projection cell from the side of the previous
    value and leaves toward the next one. Intervals that keep the direction
    cross the cell; turning intervals stay near the inner edge. When a
    neighbouring value is adjacent (no valid value between them) the segment
    is stretched to the midpoint of the gap where the two cells touch.
    """
    y = _univariate(spec)
    if V.k != 1:
        raise InvalidInput("valid set must be univariate")
    for v in y:
        if v not in V:
            raise InvalidInput(f"staircase value {v} is not in the valid set")
    coord = V.coordinate_values(0)
    eps = default_epsilon(V) if eps is None else float(eps)
    _check_epsilon(coord, eps)
    return _construct_univariate(spec, coord, eps)


def base_construction_multi(spec: StaircaseSpec, V: ValidSet, eps: float | None = None) -> list[LinearSpline]:
    """One univariate construction per output coordinate, against that coordinate's values."""
    if spec.k != V.k:
        raise InvalidInput("staircase values and valid set differ in dimension")
    for v in spec.values:
        if v not in V:
            raise InvalidInput(f"staircase value {v.tolist()} is not in the valid set")
    eps = default_epsilon(V) if eps is None else float(eps)
    out = []
    for j in range(spec.k):
        coord = V.coordinate_values(j)
        _check_epsilon(coord, eps)
        out.append(_construct_univariate(spec.coordinate(j), coord, eps))
    return out


def evaluate_multi(fs: list[LinearSpline], x) -> np.ndarray:
    return np.stack([f(x) for f in fs], axis=-1)


def composition_matches(fs, spec: StaircaseSpec, V: ValidSet, grid=None) -> float:
    """Fraction of grid points of X where project(f(x)) equals f*(x)."""
    if isinstance(fs, LinearSpline):
        fs = [fs]
    x = spec.grid() if grid is None else np.asarray(grid, dtype=float)
    pred = project_many(evaluate_multi(fs, x), V)
    want = project_many(spec.target(x), V)
    return float(np.mean(pred == want))


def epsilon_slack(spec: StaircaseSpec, eps: float) -> float:
    """c * eps allowance for the inward eps-shifts of the construction."""
    if spec.n == 1:
        return 0.0
    return 8.0 * spec.n * spec.k * eps / min(spec.delta, spec.min_interval_len)


def theorem_report(spec: StaircaseSpec, V: ValidSet, eps: float | None = None, spec_id: str = "") -> dict:
    """Bounds, measured construction norm, and ratios for one staircase.

    Raises AssertionError if the construction fails to reproduce f* on the
    grid, or (when gap <= min interval length, the regime where the bound
    argument applies) if its norm exceeds the upper bound plus slack.
    """
    eps = default_epsilon(V) if eps is None else float(eps)
    stats = adjacency_stats(spec, V)
    lower = std_lower_bound(spec, stats)
    upper = base_upper_bound(spec, stats)
    fs = base_construction_multi(spec, V, eps)
    measured = float(sum(spline_norm(f) for f in fs))
    match = composition_matches(fs, spec, V)
    if match != 1.0:
        raise AssertionError(f"construction reproduces f* on only {match:.4%} of the grid")
    slack = epsilon_slack(spec, eps)
    regime_ok = spec.n == 1 or spec.delta <= spec.min_interval_len
    bound_holds = measured <= upper + slack
    if regime_ok and not bound_holds:
        raise AssertionError(f"measured norm {measured} exceeds bound {upper} + {slack}")

    n, d, dx = spec.n, spec.delta, spec.min_interval_len
    if n > 1:
        n_adj = stats.n_adjacent - stats.n_flat
        denom = float(np.sum(stats.U * (stats.n_nonadjacent + d * n_adj / dx)))
        ratio_bound = n * float(np.max(stats.L)) / denom if denom > 0 else float("inf")
    else:
        ratio_bound = float("nan")
    return {
        "spec_id": spec_id,
        "N": n,
        "k": spec.k,
        "delta": d,
        "delta_x": dx,
        "epsilon": eps,
        "stats": stats.as_dict(),
        "lower": lower,
        "upper": upper,
        "measured": measured,
        "ratio": lower / measured if measured > 0 else float("inf"),
        "ratio_bound": ratio_bound,
        "slack": slack,
        "bound_holds": bool(bound_holds),
        "bound_regime": bool(regime_ok),
        "grid_match": match,
    }


CSV_FIELDS = ["spec_id", "N", "delta", "delta_x", "I", "J", "L", "U", "lower", "upper", "measured", "ratio"]


def report_csv_row(report: dict) -> dict:
    s = report["stats"]

    def join(xs):
        return ";".join(repr(float(x)) if isinstance(x, float) else str(x) for x in xs)

    return {
        "spec_id": report["spec_id"],
        "N": report["N"],
        "delta": report["delta"],
        "delta_x": report["delta_x"],
        "I": join(s["I"]),
        "J": join(s["J"]),
        "L": join(s["L"]),
        "U": join(s["U"]),
        "lower": report["lower"],
        "upper": report["upper"],
        "measured": report["measured"],
        "ratio": report["ratio"],
    }
