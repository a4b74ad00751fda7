"""Dense per-vehicle simulation records and their CSV form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHANNELS = ("t", "s", "v", "a", "u", "w", "Delta", "Delta0", "delta1", "delta2", "e1", "e2", "y")
CSV_HEADER = "s_or_t,vehicle," + ",".join(CHANNELS)


@dataclass
class Trajectory:
    """Per-vehicle series on a strictly increasing grid.

    ``domain`` is ``"space"`` (grid is position, ``t`` holds passage times) or
    ``"time"`` (grid is time, ``s`` holds positions). Every channel is an array
    of shape ``(len(grid), n_vehicles)``; channels that were not computed are
    filled with NaN.
    """

    domain: str
    grid: np.ndarray
    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.domain not in ("space", "time"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.grid.ndim != 1 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("trajectory grid must be strictly increasing")
        shapes = {np.shape(v) for v in self.channels.values()}
        if len(shapes) > 1:
            raise ValueError(f"channel shapes differ: {shapes}")
        n = self.n_vehicles
        for name in CHANNELS:
            if name not in self.channels:
                self.channels[name] = np.full((self.grid.size, n), np.nan)
            else:
                self.channels[name] = np.asarray(self.channels[name], dtype=float)
            if self.channels[name].shape[0] != self.grid.size:
                raise ValueError(f"channel {name} length does not match the grid")

    @property
    def n_vehicles(self) -> int:
        for v in self.channels.values():
            return np.shape(v)[1]
        return 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def window(self, lo: float, hi: float) -> "Trajectory":
        """Restriction to grid values in ``[lo, hi]``."""
        m = (self.grid >= lo) & (self.grid <= hi)
        return Trajectory(self.domain, self.grid[m], {k: v[m] for k, v in self.channels.items()})

    def to_array(self) -> np.ndarray:
        """Rows ``(grid, vehicle, *CHANNELS)``, grid-major then vehicle."""
        n_grid, n_veh = self.grid.size, self.n_vehicles
        cols = [np.repeat(self.grid, n_veh), np.tile(np.arange(n_veh, dtype=float), n_grid)]
        cols += [self.channels[c].reshape(-1) for c in CHANNELS]
        return np.column_stack(cols)


def write_csv(traj: Trajectory, path) -> None:
    fmt = ["%.12g", "%d"] + ["%.12g"] * len(CHANNELS)
    np.savetxt(path, traj.to_array(), fmt=fmt, delimiter=",", header=CSV_HEADER, comments="")


def read_csv(path, domain: str) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        header = fh.readline().strip()
    if header != CSV_HEADER:
        raise ValueError(f"unexpected trajectory header: {header!r}")
    n_veh = int(data[:, 1].max()) + 1
    grid = data[::n_veh, 0]
    chans = {c: data[:, 2 + j].reshape(grid.size, n_veh) for j, c in enumerate(CHANNELS)}
    return Trajectory(domain, grid, chans)
