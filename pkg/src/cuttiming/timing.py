"""Scoring of actual and counterfactual plays.

Per frame, the receiver's value is their mean weighted control over the
area where they could meet a pass thrown now. Per scenario, the value is the
best 15-frame moving average of that series. The timing score compares the
actual play with the best shifted one.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .control import ControlParams, Grid, wuppcf
from .counterfactual import XI_MAX, XI_MIN, build_scenario, marking_defender
from .dataio import OFFENSE, FrameTable
from .detect import MovementSequence
from .errors import SpanTooShort

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TimingParams:
    v_disc: float = 12.0  # m/s
    window: int = 15
    eval_start_offset: int = 15

    def __post_init__(self):
        if not self.v_disc > 0:
            raise ValueError("v_disc must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1")


@dataclass(frozen=True)
class ReachableArea:
    tau: float
    theta: float
    center: np.ndarray
    radius: float
    cells: np.ndarray  # (m, 2) cell centres


def intercept(pos, vel, disc_pos, v_disc: float) -> tuple[float, float] | None:
    """Earliest time a disc thrown at ``v_disc`` meets a player moving straight.

    Solves ``|d + tau v| = tau v_disc`` with ``d = pos - disc_pos``. Returns
    ``(tau, theta)`` with ``theta`` the throw heading, or None when the
    player outruns every throw.
    """
    if not v_disc > 0:
        raise ValueError("v_disc must be positive")
    dx, dy = pos[0] - disc_pos[0], pos[1] - disc_pos[1]
    vx, vy = vel[0], vel[1]
    c = dx * dx + dy * dy
    if c == 0.0:
        return 0.0, math.atan2(vy, vx) if (vx or vy) else 0.0
    a = vx * vx + vy * vy - v_disc * v_disc
    b = 2.0 * (dx * vx + dy * vy)
    roots = []
    if abs(a) < 1e-12:
        if b < 0:
            roots.append(-c / b)
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0:
            return None
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        if q != 0.0:
            roots.extend([q / a, c / q])
        else:
            roots.append(-b / (2 * a))
    positive = [r for r in roots if r > 0]
    if not positive:
        return None
    tau = min(positive)
    cx, cy = pos[0] + tau * vx, pos[1] + tau * vy
    return tau, math.atan2(cy - disc_pos[1], cx - disc_pos[0])


def _cells_in_circle(center, radius: float, grid: Grid) -> np.ndarray:
    cx, cy = center
    xs, ys = grid.xs(), grid.ys()
    ix = np.flatnonzero((xs >= cx - radius) & (xs <= cx + radius))
    iy = np.flatnonzero((ys >= cy - radius) & (ys <= cy + radius))
    if not ix.size or not iy.size:
        return np.empty((0, 2))
    gx, gy = np.meshgrid(xs[ix], ys[iy])
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    inside = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2 <= radius * radius
    return pts[inside]


def _circle_meets_field(center, radius: float, grid: Grid) -> bool:
    qx = min(max(center[0], 0.0), grid.length)
    qy = min(max(center[1], 0.0), grid.width)
    return math.hypot(center[0] - qx, center[1] - qy) <= radius


def _nearest_cell(point, grid: Grid) -> np.ndarray:
    ix = int(np.clip(math.floor(point[0] / grid.cell), 0, grid.nx - 1))
    iy = int(np.clip(math.floor(point[1] / grid.cell), 0, grid.ny - 1))
    return np.array([[(ix + 0.5) * grid.cell, (iy + 0.5) * grid.cell]])


def reachable_area(pos, vel, disc_pos, params: TimingParams | None = None,
                   grid: Grid | None = None) -> ReachableArea | None:
    """Circle of cells around the predicted catch point.

    Centre ``pos + tau vel``, radius ``|vel| tau / 2``. When no cell centre
    falls inside but the circle touches the field, the cell nearest the
    centre stands in; a circle entirely off the field yields no cells.
    """
    params = params or TimingParams()
    grid = grid or Grid()
    hit = intercept(pos, vel, disc_pos, params.v_disc)
    if hit is None:
        return None
    tau, theta = hit
    center = np.array([pos[0] + tau * vel[0], pos[1] + tau * vel[1]])
    radius = 0.5 * math.hypot(vel[0], vel[1]) * tau
    cells = _cells_in_circle(center, radius, grid)
    if not len(cells) and _circle_meets_field(center, radius, grid):
        cells = _nearest_cell(center, grid)
    return ReachableArea(tau, theta, center, radius, cells)


def frame_values(table: FrameTable, i: int, player_ids, cparams: ControlParams | None = None,
                 tparams: TimingParams | None = None, grid: Grid | None = None) -> dict[int, float]:
    """Frame value of each listed player at row ``i``.

    Control is integrated once over the union of the players' areas.
    """
    cparams = cparams or ControlParams()
    tparams = tparams or TimingParams()
    grid = grid or Grid()
    disc = table.pos[i, table.disc_index(i)]
    areas = {}
    for pid in player_ids:
        area = reachable_area(table.pos[i, pid - 1], table.vel[i, pid - 1], disc, tparams, grid)
        areas[pid] = area.cells if area is not None else np.empty((0, 2))
    stacked = [c for c in areas.values() if len(c)]
    if not stacked:
        return {pid: 0.0 for pid in player_ids}
    if len(stacked) == 1:
        union = stacked[0]
        inverse = np.arange(len(union))
    else:
        union, inverse = np.unique(np.concatenate(stacked), axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
    values = wuppcf(table, i, union, cparams).wuppcf
    out, offset = {}, 0
    for pid in player_ids:
        m = len(areas[pid])
        if not m:
            out[pid] = 0.0
            continue
        idx = inverse[offset : offset + m]
        offset += m
        out[pid] = float(math.fsum(values[idx, pid - 1]) / m)
    return out


def v_frame(table: FrameTable, i: int, player_id: int, cparams: ControlParams | None = None,
            tparams: TimingParams | None = None, grid: Grid | None = None) -> float:
    """Mean weighted control of ``player_id`` over their reachable area at row ``i``."""
    return frame_values(table, i, [player_id], cparams, tparams, grid)[player_id]


def v_scenario(series, frames=None, window: int = 15) -> tuple[float, int]:
    """Best mean of ``window`` consecutive values following some frame ``t``.

    Returns the value and ``t`` (a frame number when ``frames`` is given,
    else an index). Windows lie fully inside the series.
    """
    values = [float(v) for v in series]
    n = len(values)
    if n < window + 1:
        raise SpanTooShort(f"{n} frames cannot hold a {window}-frame window after a start frame")
    best, best_t = -math.inf, 0
    for t in range(n - window):
        m = math.fsum(values[t + 1 : t + 1 + window]) / window
        if m > best:
            best, best_t = m, t
    return best, (int(frames[best_t]) if frames is not None else best_t)


def evaluation_rows(table: FrameTable, seq: MovementSequence, tparams: TimingParams | None = None) -> range:
    """Rows scored for every shift of ``seq``: from before the earliest
    possible onset through the end of the actual cut."""
    tparams = tparams or TimingParams()
    sl = table.possession_slice(seq.possession_id)
    first = max(sl.start, seq.t0 + XI_MIN - tparams.eval_start_offset)
    return range(first, seq.end + 1)


@dataclass
class TimingReport:
    sequence: dict
    xi_values: list[int]
    frames: list[int]
    v_frame: dict[int, list[float]]
    v_scenario: list[float]
    argmax_frame: list[int]
    v_timing: float | None = None
    best_xi: int | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "sequence": self.sequence,
            "xi_values": self.xi_values,
            "v_scenario": self.v_scenario,
            "argmax_frame": self.argmax_frame,
            "v_timing": self.v_timing,
            "best_xi": self.best_xi,
        }
        out.update(self.meta)
        return out

    def frame_rows(self) -> list[tuple]:
        rows = []
        for xi in self.xi_values:
            for f, v in zip(self.frames, self.v_frame[xi]):
                rows.append((xi, f, v))
        return rows


def v_timing(v_scenario_by_xi: dict[int, float]) -> tuple[float | None, int | None]:
    """Actual-play score minus the best shifted score, and that best shift.

    Ties between shifts go to the first in ascending order. Without both the
    actual play and a shifted scenario both results are None.
    """
    others = [(xi, v) for xi, v in sorted(v_scenario_by_xi.items()) if xi != 0]
    if not others or 0 not in v_scenario_by_xi:
        return None, None
    best_xi, best = others[0]
    for xi, v in others[1:]:
        if v > best:
            best_xi, best = xi, v
    return v_scenario_by_xi[0] - best, best_xi


def scenario_series(table: FrameTable, seq: MovementSequence, xi: int, rows, defender: int,
                    cparams: ControlParams, tparams: TimingParams, grid: Grid,
                    derivatives: str = "carry", cache: dict | None = None) -> list[float]:
    """Frame values of the receiver over ``rows`` in the ``xi`` scenario."""
    sc = build_scenario(table, seq, xi, defender_id=defender, derivatives=derivatives)
    t = sc.table
    out = []
    for r in rows:
        j = r - sc.row0
        key = None
        if cache is not None:
            key = (r, t.pos[j].tobytes(), t.vel[j].tobytes())
            if key in cache:
                out.append(cache[key])
                continue
        v = v_frame(t, j, seq.player_id, cparams, tparams, grid)
        if key is not None:
            cache[key] = v
        out.append(v)
    return out


def _series_task(args):
    return scenario_series(*args)


def assemble_report(table: FrameTable, seq: MovementSequence, xis, rows, defender: int,
                    series, tparams: TimingParams | None = None) -> TimingReport:
    """Reduce per-scenario series (in ``xis`` order) to a report."""
    tparams = tparams or TimingParams()
    xis = [int(x) for x in xis]
    frames = [int(table.frames[r]) for r in rows]
    scores, argmax = [], []
    for s in series:
        value, t = v_scenario(s, frames, tparams.window)
        scores.append(value)
        argmax.append(t)
    timing, best = v_timing(dict(zip(xis, scores)))
    info = {
        "possession_id": seq.possession_id,
        "player_id": seq.player_id,
        "defender_id": defender,
        "start": int(table.frames[seq.start]),
        "t0": int(table.frames[seq.t0]),
        "end": int(table.frames[seq.end]),
    }
    return TimingReport(info, xis, frames, dict(zip(xis, [list(s) for s in series])), scores, argmax, timing, best)


def sweep(table: FrameTable, seq: MovementSequence, cparams: ControlParams | None = None,
          tparams: TimingParams | None = None, grid: Grid | None = None,
          xis=range(XI_MIN, XI_MAX + 1), jobs: int = 1, derivatives: str = "carry") -> TimingReport:
    """Score every shift of one cut and reduce to the timing score."""
    cparams = cparams or ControlParams()
    tparams = tparams or TimingParams()
    grid = grid or Grid()
    xis = [int(x) for x in xis]
    rows = list(evaluation_rows(table, seq, tparams))
    if len(rows) < tparams.window + 1:
        raise SpanTooShort(f"{len(rows)} frames cannot hold a {tparams.window}-frame window after a start frame")
    defender = marking_defender(table, seq)
    if jobs > 1:
        args = [(table, seq, xi, rows, defender, cparams, tparams, grid, derivatives, None) for xi in xis]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            series = list(pool.map(_series_task, args))
    else:
        cache: dict = {}
        series = [scenario_series(table, seq, xi, rows, defender, cparams, tparams, grid, derivatives, cache)
                  for xi in xis]
    return assemble_report(table, seq, xis, rows, defender, series, tparams)


def team_frame_values(table: FrameTable, i: int, cparams: ControlParams | None = None,
                      tparams: TimingParams | None = None, grid: Grid | None = None) -> dict[int, float]:
    """Frame values of all offensive players not holding the disc at row ``i``."""
    h = table.holder_id(i)
    ids = [int(k) for k in table.objects_of(OFFENSE, i) if int(k) != h]
    return frame_values(table, i, ids, cparams, tparams, grid)
