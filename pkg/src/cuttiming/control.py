"""Pitch control adapted to Ultimate, and its pass-feasibility weighting.

Layers computed per frame and grid cell, per player:

* ``ppcf``   -- classic potential pitch control, every player, fixed reaction time.
* ``uppcf``  -- the disc holder and defenders stalling them are removed, and the
  reaction time grows with the angle between a player's heading and the disc.
* ``wuppcf`` -- ``uppcf`` times a disc-distance weight and a marker-screen weight.

Control probabilities come from forward-Euler integration of the coupled
control ODE, done cell by cell in a compiled kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .dataio import DEFENSE, DISC, FIELD_LENGTH, FIELD_WIDTH, OFFENSE, FrameTable, ObjectState

LAYERS = ("ppcf", "uppcf", "wuppcf", "w_d", "w_s")


@dataclass(frozen=True)
class ControlParams:
    lam: float = 4.3  # control rate, 1/s
    v_max: float = 5.0  # m/s
    sigma_arrival: float = 0.45  # s
    dT: float = 0.04  # s
    T_max: float = 10.0  # s
    stall_radius: float = 3.0  # m
    arm_scale_d: float = 30.0  # m
    wd_scale: float = 20.0  # m
    ws_floor: float = 0.05
    converge: float = 0.99
    base_reaction_time: float = 0.7  # s, classic layer only
    still_speed: float = 0.1  # m/s, below this a heading is undefined
    arm_orientation: str = "path"  # or "velocity"

    def __post_init__(self):
        for name in ("lam", "v_max", "sigma_arrival", "dT", "T_max", "stall_radius",
                     "arm_scale_d", "wd_scale", "ws_floor", "converge"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.dT < self.T_max:
            raise ValueError("dT must be smaller than T_max")
        if self.arm_orientation not in ("path", "velocity"):
            raise ValueError(f"unknown arm orientation {self.arm_orientation!r}")


@dataclass(frozen=True)
class Grid:
    """Regular grid of cell centres covering the field, origin at a corner."""

    cell: float = 1.0
    length: float = FIELD_LENGTH
    width: float = FIELD_WIDTH

    @property
    def nx(self) -> int:
        return int(math.ceil(self.length / self.cell - 1e-9))

    @property
    def ny(self) -> int:
        return int(math.ceil(self.width / self.cell - 1e-9))

    @property
    def shape(self) -> tuple[int, int]:
        """``(ny, nx)``, image order."""
        return self.ny, self.nx

    def xs(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.cell

    def ys(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.cell

    def centers(self) -> np.ndarray:
        """``(ny * nx, 2)`` cell centres, row-major with x varying fastest."""
        gx, gy = np.meshgrid(self.xs(), self.ys())
        return np.column_stack([gx.ravel(), gy.ravel()])

    def index(self, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
        return iy * self.nx + ix

    def metadata(self) -> dict:
        return {"cell": self.cell, "nx": self.nx, "ny": self.ny, "origin": [0.0, 0.0],
                "length": self.length, "width": self.width}


@dataclass(frozen=True)
class ControlField:
    """Control layers for one frame over a set of cells.

    Per-player layers have shape ``(n_cells, 15)``; excluded players and the
    disc hold zeros. ``converged`` is False where the integration hit
    ``T_max`` before the summed control reached ``converge``.
    """

    frame: int
    cells: np.ndarray
    uppcf: np.ndarray
    wuppcf: np.ndarray
    w_d: np.ndarray
    w_s: np.ndarray
    included: np.ndarray
    converged: np.ndarray
    ppcf: np.ndarray | None = None

    def layer(self, name: str, team: int | None = OFFENSE, cls: np.ndarray | None = None) -> np.ndarray:
        """Per-cell values of a layer; player layers are summed over ``team``."""
        if name in ("w_d", "w_s"):
            return getattr(self, name)
        values = getattr(self, name)
        if values is None:
            raise ValueError(f"layer {name} was not computed")
        if team is None or cls is None:
            return values.sum(axis=1)
        return values[:, cls == team].sum(axis=1)


# ---------------------------------------------------------------------------
# scalar pieces


def _angle(u, v) -> float:
    nu, nv = math.hypot(u[0], u[1]), math.hypot(v[0], v[1])
    if nu == 0.0 or nv == 0.0:
        return 0.0
    c = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.acos(max(-1.0, min(1.0, c)))


def reaction_angle(pos, vel, disc_pos, marked_pos=None, still_speed: float = 0.1) -> float:
    """Angle (rad) between a player's heading and the disc, or, for defenders,
    the smaller of that and the angle to the player they mark."""
    if math.hypot(vel[0], vel[1]) < still_speed:
        return math.pi
    to_disc = (disc_pos[0] - pos[0], disc_pos[1] - pos[1])
    theta = _angle(to_disc, vel)
    if marked_pos is not None:
        to_mark = (marked_pos[0] - pos[0], marked_pos[1] - pos[1])
        theta = min(theta, _angle(to_mark, vel))
    return theta


def reaction_time_from_angle(theta: float) -> float:
    return 0.1 + theta / math.pi


def reaction_time(player: ObjectState, disc: ObjectState, marked: ObjectState | None = None,
                  still_speed: float = 0.1) -> float:
    """Direction-dependent reaction time in seconds, within [0.1, 1.1]."""
    m = None
    if marked is not None and player.cls == "defense":
        m = marked.pos
    return reaction_time_from_angle(reaction_angle(player.pos, player.vel, disc.pos, m, still_speed))


def arrival_time(pos, vel, cell, rt: float, v_max: float) -> float:
    """Expected time to reach ``cell``: react while drifting, then run at top speed."""
    sx, sy = pos[0] + vel[0] * rt, pos[1] + vel[1] * rt
    return rt + math.hypot(cell[0] - sx, cell[1] - sy) / v_max


def arrival_probability(T: float, tau: float, sigma: float = 0.45) -> float:
    """Probability of having reached the cell by time ``T`` (logistic in ``T``)."""
    z = -math.pi / (math.sqrt(3.0) * sigma) * (T - tau)
    if z > 700:
        return 0.0
    return 1.0 / (1.0 + math.exp(z))


def arm_half_length(pass_length: np.ndarray | float, scale: float = 30.0):
    """Virtual arm reach of the marker for a pass of the given length."""
    return 1.0 - np.minimum(np.asarray(pass_length, dtype=float) / scale, 1.0)


def distance_weight(cells: np.ndarray, disc_pos, params: ControlParams | None = None) -> np.ndarray:
    params = params or ControlParams()
    cells = np.atleast_2d(np.asarray(cells, dtype=float))
    d = np.hypot(cells[:, 0] - disc_pos[0], cells[:, 1] - disc_pos[1])
    return np.exp(-d / params.wd_scale)


def segment_intersection(p1, p2, q1, q2, eps: float = 1e-12):
    """Intersection point of segments p1-p2 and q1-q2, vectorised over rows.

    Returns ``(hit, point)`` where ``hit`` is a boolean array and ``point``
    the crossing (NaN where there is none). Collinear overlaps count as no hit.
    """
    p1, p2, q1, q2 = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (p1, p2, q1, q2))
    r = p2 - p1
    s = q2 - q1
    denom = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
    qp = q1 - p1
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / denom
        u = (qp[:, 0] * r[:, 1] - qp[:, 1] * r[:, 0]) / denom
    hit = (np.abs(denom) > eps) & (t >= -eps) & (t <= 1 + eps) & (u >= -eps) & (u <= 1 + eps)
    point = np.where(hit[:, None], p1 + np.clip(t, 0, 1)[:, None] * r, np.nan)
    return hit, point


def screen_weight(cells: np.ndarray, disc_pos, marker_pos, params: ControlParams | None = None,
                  marker_vel=None) -> np.ndarray:
    """Obstruction weight of the marker's arms on the pass from the disc to each cell.

    The arms form a segment of length ``2 r`` centred on the marker, laid
    perpendicular to the pass (or to the marker's velocity with
    ``arm_orientation="velocity"``). A pass crossing the arms is weighted by
    the crossing's distance from the marker over ``r``, floored at
    ``ws_floor``; other passes get 1.
    """
    params = params or ControlParams()
    cells = np.atleast_2d(np.asarray(cells, dtype=float))
    ws = np.ones(len(cells))
    if marker_pos is None:
        return ws
    disc = np.asarray(disc_pos, dtype=float)
    marker = np.asarray(marker_pos, dtype=float)
    path = cells - disc
    length = np.hypot(path[:, 0], path[:, 1])
    r = arm_half_length(length, params.arm_scale_d)
    if params.arm_orientation == "velocity" and marker_vel is not None and np.hypot(*marker_vel) > 0:
        normal = np.broadcast_to(np.array([-marker_vel[1], marker_vel[0]]) / np.hypot(*marker_vel), path.shape)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            normal = np.column_stack([-path[:, 1], path[:, 0]]) / length[:, None]
    live = (r > 0) & (length > 0)
    if not live.any():
        return ws
    idx = np.flatnonzero(live)
    arm_a = marker - normal[idx] * r[idx, None]
    arm_b = marker + normal[idx] * r[idx, None]
    hit, point = segment_intersection(np.broadcast_to(disc, (len(idx), 2)), cells[idx], arm_a, arm_b)
    d = np.hypot(point[:, 0] - marker[0], point[:, 1] - marker[1])
    w = np.clip(np.where(hit, d / r[idx], 1.0), params.ws_floor, 1.0)
    ws[idx] = np.where(hit, w, 1.0)
    return ws


# ---------------------------------------------------------------------------
# player set and integration


def marker_of(table: FrameTable, i: int) -> int:
    """Defender nearest to the disc holder at row ``i`` (0 without a holder)."""
    h = table.holder_id(i)
    if not h:
        return 0
    defenders = np.flatnonzero(table.cls[i] == DEFENSE)
    d = np.hypot(*(table.pos[i, defenders] - table.pos[i, h - 1]).T)
    return int(defenders[np.argmin(d)]) + 1


def uppcf_filter(table: FrameTable, i: int, stall_radius: float = 3.0) -> np.ndarray:
    """Boolean mask of objects that take part in the Ultimate control model.

    The disc never does; the holder and every defender within
    ``stall_radius`` of the holder are dropped too.
    """
    keep = table.cls[i] != DISC
    h = table.holder_id(i)
    if h:
        keep[h - 1] = False
        near = np.hypot(*(table.pos[i] - table.pos[i, h - 1]).T) <= stall_radius
        keep &= ~(near & (table.cls[i] == DEFENSE))
    return keep


def player_reaction_times(table: FrameTable, i: int, params: ControlParams) -> np.ndarray:
    disc = table.pos[i, table.disc_index(i)]
    rts = np.zeros(table.cls.shape[1])
    for k in range(len(rts)):
        c = table.cls[i, k]
        if c == DISC:
            continue
        marked = None
        if c == DEFENSE and table.closest[i, k]:
            marked = table.pos[i, table.closest[i, k] - 1]
        theta = reaction_angle(table.pos[i, k], table.vel[i, k], disc, marked, params.still_speed)
        rts[k] = reaction_time_from_angle(theta)
    return rts


@numba.njit(cache=True)
def _integrate(cells, start, rt, lam, v_max, k_logistic, dT, n_steps, converge):
    m = cells.shape[0]
    P = start.shape[0]
    out = np.zeros((m, P))
    ok = np.zeros(m, dtype=np.bool_)
    rate = lam * dT
    inc = np.empty(P)
    acc = np.empty(P)
    # exp(-k (T - tau)) advances by a constant factor per step
    decay = math.exp(-k_logistic * dT)
    e = np.empty(P)
    for c in range(m):
        cx = cells[c, 0]
        cy = cells[c, 1]
        for p in range(P):
            dx = cx - start[p, 0]
            dy = cy - start[p, 1]
            z = k_logistic * (rt[p] + math.sqrt(dx * dx + dy * dy) / v_max)
            e[p] = math.inf if z > 700.0 else math.exp(z)
            acc[p] = 0.0
        total = 0.0
        for step in range(n_steps):
            if total >= converge:
                break
            free = 1.0 - total
            for p in range(P):
                inc[p] = free * rate[p] / (1.0 + e[p])
                e[p] *= decay
            added = 0.0
            for p in range(P):
                added += inc[p]
            if added > free:
                # forward Euler overshoot: scale the step so the sum lands on 1
                scale = free / added
                for p in range(P):
                    inc[p] *= scale
                added = free
            for p in range(P):
                acc[p] += inc[p]
            total += added
        ok[c] = total >= converge
        for p in range(P):
            out[c, p] = min(max(acc[p], 0.0), 1.0)
    return out, ok


def integrate_control(cells: np.ndarray, pos: np.ndarray, vel: np.ndarray, rt: np.ndarray,
                      include: np.ndarray, params: ControlParams) -> tuple[np.ndarray, np.ndarray]:
    """Control probabilities ``(n_cells, n_players)`` for players with given reaction times.

    Players drift at their current velocity during their reaction time; the
    ODE is stepped from ``T = 0`` until the summed control reaches
    ``params.converge`` or ``T_max`` is hit.
    """
    cells = np.ascontiguousarray(np.atleast_2d(cells), dtype=np.float64)
    active = np.flatnonzero(include)
    start = np.ascontiguousarray((pos + vel * rt[:, None])[active], dtype=np.float64)
    lam = np.full(len(active), float(params.lam))
    k = math.pi / (math.sqrt(3.0) * params.sigma_arrival)
    n_steps = int(round(params.T_max / params.dT))
    part, ok = _integrate(cells, start, np.ascontiguousarray(rt[active], dtype=np.float64), lam,
                          float(params.v_max), k, float(params.dT), n_steps, float(params.converge))
    out = np.zeros((len(cells), len(pos)))
    out[:, active] = part
    return out, ok


def integrate_ppcf(table: FrameTable, i: int, cells, params: ControlParams | None = None,
                   include: np.ndarray | None = None) -> np.ndarray:
    """Ultimate-adapted control of every object at row ``i`` over ``cells``."""
    params = params or ControlParams()
    if include is None:
        include = uppcf_filter(table, i, params.stall_radius)
    rt = player_reaction_times(table, i, params)
    out, _ = integrate_control(cells, table.pos[i], table.vel[i], rt, include, params)
    return out


def wuppcf(table: FrameTable, i: int, cells: np.ndarray | None = None, params: ControlParams | None = None,
           grid: Grid | None = None, with_ppcf: bool = False) -> ControlField:
    """All control layers at row ``i``, on ``cells`` or the full ``grid``."""
    params = params or ControlParams()
    if cells is None:
        cells = (grid or Grid()).centers()
    cells = np.atleast_2d(np.asarray(cells, dtype=float))
    disc = table.pos[i, table.disc_index(i)]
    include = uppcf_filter(table, i, params.stall_radius)
    rt = player_reaction_times(table, i, params)
    uppcf, ok = integrate_control(cells, table.pos[i], table.vel[i], rt, include, params)

    marker = marker_of(table, i)
    w_d = distance_weight(cells, disc, params)
    w_s = screen_weight(
        cells, disc,
        table.pos[i, marker - 1] if marker else None,
        params,
        table.vel[i, marker - 1] if marker else None,
    )
    ppcf = None
    if with_ppcf:
        players = table.cls[i] != DISC
        fixed = np.full(len(rt), params.base_reaction_time)
        ppcf, _ = integrate_control(cells, table.pos[i], table.vel[i], fixed, players, params)
    return ControlField(
        frame=int(table.frames[i]),
        cells=cells,
        uppcf=uppcf,
        wuppcf=uppcf * (w_d * w_s)[:, None],
        w_d=w_d,
        w_s=w_s,
        included=include,
        converged=ok,
        ppcf=ppcf,
    )


def field_to_rows(field: ControlField, cls: np.ndarray, grid: Grid | None = None) -> dict:
    """JSON-ready export: grid metadata plus one row per cell."""
    rows = []
    for c, (x, y) in enumerate(field.cells):
        row = {"x": float(x), "y": float(y), "w_d": float(field.w_d[c]), "w_s": float(field.w_s[c]),
               "uppcf_offense": float(field.uppcf[c, cls == OFFENSE].sum()),
               "wuppcf_offense": float(field.wuppcf[c, cls == OFFENSE].sum())}
        if field.ppcf is not None:
            row["ppcf_offense"] = float(field.ppcf[c, cls == OFFENSE].sum())
        rows.append(row)
    return {"frame": field.frame, "grid": (grid or Grid()).metadata(), "rows": rows}
