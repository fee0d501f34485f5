"""Trajectory and report serialization.

Trajectories go to line-oriented CSV with a commented header; values are
printed with %.17g so a round trip through the file reproduces every
float bit for bit.  Reports are flat key-value text.  Output is
deterministic except for the timestamp header line, which can be
suppressed.
"""

import datetime

import numpy as np

from .dynamics import Trajectory
from .errors import ValidationError


def fmt(x):
    """Shortest exact decimal form of a float (17 significant digits)."""
    return "%.17g" % x


def _timestamp_line():
    now = datetime.datetime.now(datetime.timezone.utc)
    return "# timestamp: %s\n" % now.strftime("%Y-%m-%dT%H:%M:%SZ")


def trajectory_columns(dim):
    cols = ["t"]
    cols += ["x%d" % (i + 1) for i in range(dim)]
    cols += ["v%d" % (i + 1) for i in range(dim)]
    cols += ["H", "r", "rdot", "Tperp", "Uperp"]
    return cols


def write_trajectory(traj, path, scenario=None, timestamp=True):
    """Write one trajectory as commented-header CSV."""
    dim = traj.dim
    with open(path, "w") as fh:
        fh.write("# stifflab trajectory\n")
        if timestamp:
            fh.write(_timestamp_line())
        if scenario:
            fh.write("# scenario: %s\n" % scenario)
        if traj.epsilon is not None:
            fh.write("# mode: stiff\n")
            fh.write("# epsilon: %s\n" % fmt(traj.epsilon))
        else:
            fh.write("# mode: effective\n")
        fh.write("# samples: %d\n" % len(traj))
        fh.write("# steps: %d\n" % traj.n_steps)
        fh.write("# flags: %s\n"
                 % (",".join(traj.flags) if traj.flags else "none"))
        fh.write("# columns: %s\n" % ",".join(trajectory_columns(dim)))
        rows = np.column_stack([traj.times, traj.xs, traj.vs, traj.energy,
                                traj.r, traj.rdot, traj.t_perp, traj.u_perp])
        for row in rows:
            fh.write(",".join(fmt(val) for val in row))
            fh.write("\n")


def read_trajectory(path):
    """Parse a trajectory file back into a Trajectory.

    The stored columns fully determine the kinematic fields; h_r is
    reconstructed from Tperp/rdot where possible (NaN elsewhere), which
    is enough for every diagnostic that reads files.
    """
    meta = {}
    data = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, val = body.partition(":")
                    meta[key.strip()] = val.strip()
                continue
            data.append([float(tok) for tok in line.split(",")])
    if not data:
        raise ValidationError("trajectory file %s has no data rows" % path)
    arr = np.asarray(data, dtype=float)
    ncol = arr.shape[1]
    if (ncol - 6) % 2 != 0 or ncol < 8:
        raise ValidationError(
            "trajectory file %s has %d columns; expected 2 dim + 6"
            % (path, ncol))
    dim = (ncol - 6) // 2
    times = arr[:, 0]
    xs = arr[:, 1:1 + dim]
    vs = arr[:, 1 + dim:1 + 2 * dim]
    energy = arr[:, 1 + 2 * dim]
    r = arr[:, 2 + 2 * dim]
    rdot = arr[:, 3 + 2 * dim]
    t_perp = arr[:, 4 + 2 * dim]
    u_perp = arr[:, 5 + 2 * dim]
    with np.errstate(divide="ignore", invalid="ignore"):
        h_r = np.sqrt(2.0 * t_perp / rdot ** 2)
    eps = None
    if meta.get("mode") == "stiff":
        eps = float(meta.get("epsilon"))
    flags = []
    if meta.get("flags") not in (None, "none"):
        flags = meta["flags"].split(",")
    return Trajectory(times, xs, vs, energy, r, rdot, t_perp, u_perp, h_r,
                      epsilon=eps, flags=flags,
                      n_steps=int(meta.get("steps", 0)))


def write_report(path, title, pairs, timestamp=True):
    """Flat key-value report; ``pairs`` is an iterable of (key, value)."""
    with open(path, "w") as fh:
        fh.write("# stifflab %s\n" % title)
        if timestamp:
            fh.write(_timestamp_line())
        for key, val in pairs:
            if isinstance(val, float):
                val = fmt(val)
            fh.write("%s = %s\n" % (key, val))


def write_series(path, columns, arrays, timestamp=True):
    """CSV of aligned 1-D series with a commented column header."""
    with open(path, "w") as fh:
        fh.write("# stifflab series\n")
        if timestamp:
            fh.write(_timestamp_line())
        fh.write("# columns: %s\n" % ",".join(columns))
        for row in zip(*arrays):
            fh.write(",".join(fmt(val) for val in row))
            fh.write("\n")
