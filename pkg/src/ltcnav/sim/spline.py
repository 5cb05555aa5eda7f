"""Natural cubic splines through voxel knots, arc length, and pure pursuit."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ltcnav.errors import ContractViolation

# 5-point Gauss-Legendre rule on [-1, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
ARC_TOL = 1e-9
SAMPLE_SPACING = 0.05  # metres between precomputed points used for nearest-point queries


class DegenerateSegment(ContractViolation):
    pass


@dataclass
class SplinePath:
    knots: np.ndarray                    # (n, 3)
    curve: CubicSpline
    table_t: np.ndarray = field(repr=False)   # increasing parameter values
    table_s: np.ndarray = field(repr=False)   # arc length at table_t
    samples_s: np.ndarray = field(repr=False)
    samples_p: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return float(self.table_s[-1])

    @property
    def t_max(self) -> float:
        return float(len(self.knots) - 1)

    def __call__(self, t, nu: int = 0) -> np.ndarray:
        return self.curve(t, nu)

    def t_at(self, s: float) -> float:
        s = float(np.clip(s, 0.0, self.length))
        t = float(np.interp(s, self.table_s, self.table_t))
        for _ in range(3):  # Newton on s(t) = s using the tabulated neighbourhood
            i = int(np.clip(np.searchsorted(self.table_t, t) - 1, 0, len(self.table_t) - 2))
            s_t = self.table_s[i] + _gauss_length(self.curve, self.table_t[i], t)
            speed = np.linalg.norm(self.curve(t, 1))
            if speed <= 0:
                break
            t = float(np.clip(t - (s_t - s) / speed, 0.0, self.t_max))
        return t

    def point_at(self, s: float) -> np.ndarray:
        return self.curve(self.t_at(s))

    def nearest_s(self, p, lo: float = 0.0, hi: float | None = None) -> float:
        """Arc length of the sampled point nearest ``p`` within [lo, hi]."""
        hi = self.length if hi is None else hi
        sel = (self.samples_s >= lo - 1e-12) & (self.samples_s <= hi + 1e-12)
        if not sel.any():
            return float(np.clip(lo, 0, self.length))
        idx = np.flatnonzero(sel)
        d = np.sum((self.samples_p[idx] - np.asarray(p, dtype=float)) ** 2, axis=1)
        return float(self.samples_s[idx[int(np.argmin(d))]])


def _gauss_length(curve, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    speeds = np.linalg.norm(curve(mid + half * _GL_X, 1), axis=1)
    return float(half * np.dot(_GL_W, speeds))


def _adaptive(curve, a, b, whole, ts, ss, depth=0):
    m = 0.5 * (a + b)
    left, right = _gauss_length(curve, a, m), _gauss_length(curve, m, b)
    if depth >= 12 or abs(left + right - whole) <= ARC_TOL:
        ts.append(b)
        ss.append(ss[-1] + left + right)
        return
    _adaptive(curve, a, m, left, ts, ss, depth + 1)
    _adaptive(curve, m, b, right, ts, ss, depth + 1)


def fit_spline(knots) -> SplinePath:
    """Natural cubic spline parameterised by knot index, with an adaptive arc-length table."""
    k = np.asarray(knots, dtype=float)
    if k.ndim != 2 or k.shape[1] != 3 or len(k) < 2:
        raise ContractViolation("need at least two 3-D knots")
    steps = np.linalg.norm(np.diff(k, axis=0), axis=1)
    if np.any(steps == 0):
        raise DegenerateSegment(f"duplicate consecutive knots at index {int(np.argmin(steps))}")
    curve = CubicSpline(np.arange(len(k), dtype=float), k, bc_type="natural")
    ts, ss = [0.0], [0.0]
    for i in range(len(k) - 1):
        a, b = float(i), float(i + 1)
        _adaptive(curve, a, b, _gauss_length(curve, a, b), ts, ss)
    table_t, table_s = np.array(ts), np.array(ss)
    n = max(int(np.ceil(table_s[-1] / SAMPLE_SPACING)), 1)
    samples_s = np.linspace(0.0, table_s[-1], n + 1)
    samples_t = np.interp(samples_s, table_s, table_t)
    return SplinePath(k, curve, table_t, table_s, samples_s, curve(samples_t))


def pursuit_point(spline: SplinePath, position, lookahead: float = 3.0) -> np.ndarray:
    """Point one look-ahead arc length past the nearest point, clamped to the end."""
    s = spline.nearest_s(position)
    return spline.point_at(min(s + lookahead, spline.length))


@dataclass
class PursuitTracker:
    """Pure pursuit with a monotone progress estimate along the current spline."""
    lookahead: float = 3.0
    window: float = 6.0      # how far ahead of the last progress the nearest point may jump
    spline: SplinePath | None = None
    progress: float = 0.0

    def reset(self, spline: SplinePath, position) -> None:
        """Adopt a new spline, restarting progress at its globally nearest point."""
        self.spline = spline
        self.progress = spline.nearest_s(position)

    def target(self, position) -> np.ndarray:
        if self.spline is None:
            raise ContractViolation("no spline to pursue")
        s = self.spline.nearest_s(position, self.progress, self.progress + self.window)
        self.progress = max(self.progress, s)
        return self.spline.point_at(min(self.progress + self.lookahead, self.spline.length))

    def lookahead_s(self) -> float:
        return min(self.progress + self.lookahead, self.spline.length)
