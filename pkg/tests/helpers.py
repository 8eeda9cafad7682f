"""Hand-built tables for tests that need direct control over kinematics."""

import numpy as np

from cuttiming.dataio import DEFENSE, DISC, OFFENSE, FrameTable
from cuttiming.synth import formation


def static_table(n=60, holder=1, possession=0, first_frame=0, positions=None):
    """Everyone standing in formation, pairs (k, k + 7), disc on ``holder``."""
    base = formation() if positions is None else np.asarray(positions, dtype=float)
    if holder:
        base = base.copy()
        base[14] = base[holder - 1]
    pos = np.broadcast_to(base, (n, 15, 2)).copy()
    cls = np.array([OFFENSE] * 7 + [DEFENSE] * 7 + [DISC])
    closest = np.array(list(range(8, 15)) + list(range(1, 8)) + [0])
    held = np.zeros((n, 15), dtype=bool)
    if holder:
        held[:, holder - 1] = True
    return FrameTable(
        frames=np.arange(first_frame, first_frame + n),
        cls=np.broadcast_to(cls, (n, 15)).copy(),
        pos=pos,
        vel=np.zeros((n, 15, 2)),
        acc=np.zeros((n, 15, 2)),
        closest=np.broadcast_to(closest, (n, 15)).copy(),
        holder=held,
        possession=np.full(n, possession),
    )


def set_track(table, obj_id, pos=None, vel=None, acc=None, rows=slice(None)):
    """Copy of ``table`` with some kinematics of one object overwritten."""
    changes = {}
    for name, value in (("pos", pos), ("vel", vel), ("acc", acc)):
        if value is None:
            continue
        arr = getattr(table, name).copy()
        arr[rows, obj_id - 1] = value
        changes[name] = arr
    return table.evolve(**changes)


def set_holder(table, rows, obj_id):
    held = table.holder.copy()
    held[rows] = False
    if obj_id:
        held[rows, obj_id - 1] = True
    return table.evolve(holder=held)
