"""Trajectory CSV export."""

import numpy as np

from .constants import CSV_DIGITS

SCALAR_COLUMNS = ("norm_x", "norm_u", "norm_udot", "norm_e", "norm_ed", "V_theta", "V_phi",
                  "alpha", "margin_x", "margin_u", "margin_udot", "margin_ed")


def trajectory_columns(traj):
    n = traj.x.shape[1]
    m = traj.u.shape[1]
    names = ["t"]
    names += [f"x{i + 1}" for i in range(n)]
    names += [f"xr{i + 1}" for i in range(n)]
    names += [f"u{i + 1}" for i in range(m)]
    names += [f"udot{i + 1}" for i in range(m)]
    names += list(SCALAR_COLUMNS)
    data = np.column_stack([traj.t, traj.x, traj.xr, traj.u, traj.u_dot]
                           + [traj.derived[c] for c in SCALAR_COLUMNS])
    return names, data


def format_trajectory_csv(traj):
    names, data = trajectory_columns(traj)
    fmt = f"{{:.{CSV_DIGITS}g}}"
    lines = [",".join(names)]
    for row in data:
        lines.append(",".join(fmt.format(v) for v in row))
    return "\n".join(lines) + "\n"


def write_trajectory_csv(traj, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trajectory_csv(traj))


def read_trajectory_csv(path):
    """Column name -> float array."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}
