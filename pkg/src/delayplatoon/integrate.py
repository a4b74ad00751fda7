"""Fixed-step classical Runge-Kutta integration."""

from __future__ import annotations

import numpy as np

from .errors import NonFinite


def rk4_step(field, x, y, h):
    # The last stage is taken one ulp inside the step, so a field that is only
    # piecewise smooth in x (breakpoints on the grid) is sampled on the piece
    # the step lies in; the first stage sees the right limit at x.
    k1 = field(x, y)
    k2 = field(x + 0.5 * h, y + 0.5 * h * k1)
    k3 = field(x + 0.5 * h, y + 0.5 * h * k2)
    k4 = field(np.nextafter(x + h, x), y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_rk4(field, state, grid):
    """Integrate ``dy/dx = field(x, y)`` over ``grid`` with classical RK4.

    The step is taken from consecutive grid values, so a non-uniform grid is
    allowed, but no step adaptation is ever performed.

    Parameters
    ----------
    field : callable
        ``field(x, y) -> dy/dx`` on 1-D float arrays.
    state : array_like
        Initial state at ``grid[0]``.
    grid : array_like
        Strictly increasing independent-variable values.

    Returns
    -------
    ndarray of shape ``(len(grid), len(state))``.
    """
    grid = np.asarray(grid, dtype=float)
    y = np.array(state, dtype=float)
    out = np.empty((grid.size, y.size))
    out[0] = y
    # overflow is reported through NonFinite, not through float warnings
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(grid.size - 1):
            x = grid[k]
            y = rk4_step(field, x, y, grid[k + 1] - x)
            if not np.all(np.isfinite(y)):
                raise NonFinite(f"non-finite state after step at x={x:.6g}")
            out[k + 1] = y
    return out


def uniform_grid(start: float, end: float, step: float) -> np.ndarray:
    """Grid from ``start`` to ``end`` with spacing ``step``; ``end`` must be reachable."""
    if not step > 0:
        raise ValueError("step must be positive")
    if not end > start:
        raise ValueError("end must exceed start")
    n = int(round((end - start) / step))
    if n < 1 or abs(start + n * step - end) > 1e-9 * max(1.0, abs(end)):
        raise ValueError(f"step {step} does not divide [{start}, {end}]")
    return np.linspace(start, end, n + 1)
