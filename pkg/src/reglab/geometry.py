"""Uniform grids, flat/Reifenberg-rough domains and ball utilities (n = 2)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_DIRECTIONS = 180
# relative tolerance for node-in-ball tests, avoids flicker at lattice radii
_BALL_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on [0, extent]^2.

    Nodal arrays have shape ``(n + 1, n + 1)`` and are indexed ``[row, col]``
    with ``x = col * h`` and ``y = row * h``.
    """

    cells_per_side: int
    extent: float

    @property
    def h(self) -> float:
        return self.extent / self.cells_per_side

    @property
    def shape(self) -> tuple[int, int]:
        return (self.cells_per_side + 1, self.cells_per_side + 1)

    @property
    def n_nodes(self) -> int:
        return (self.cells_per_side + 1) ** 2

    @property
    def diagonal(self) -> float:
        return self.extent * math.sqrt(2.0)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        t = np.arange(self.cells_per_side + 1) * self.h
        X, Y = np.meshgrid(t, t, indexing="xy")
        return X, Y

    def quad_weights(self) -> np.ndarray:
        """Trapezoid node weights; they sum to extent**2 exactly."""
        w1 = np.full(self.cells_per_side + 1, self.h)
        w1[0] = w1[-1] = 0.5 * self.h
        return np.outer(w1, w1)

    def nearest_node(self, point) -> tuple[int, int]:
        i = int(round(float(point[0]) / self.h))
        j = int(round(float(point[1]) / self.h))
        n = self.cells_per_side
        return min(max(j, 0), n), min(max(i, 0), n)

    def node_point(self, node: tuple[int, int]) -> tuple[float, float]:
        return (node[1] * self.h, node[0] * self.h)


def build_grid(cells_per_side: int, extent: float = 1.0) -> Grid:
    if int(cells_per_side) != cells_per_side or cells_per_side < 4:
        raise ValueError(f"cells_per_side must be an integer >= 4, got {cells_per_side}")
    if not extent > 0:
        raise ValueError(f"extent must be positive, got {extent}")
    return Grid(int(cells_per_side), float(extent))


@dataclass(frozen=True)
class Ball:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")


@dataclass
class Domain:
    """Discrete domain: interior nodes are free, boundary nodes carry Dirichlet data.

    ``boundary_heights`` samples the lower boundary graph at every node
    column; flatness is measured on these samples.
    """

    grid: Grid
    interior_mask: np.ndarray
    boundary_mask: np.ndarray
    r0: float
    delta: float
    kind: str = "square"
    seed: int | None = None
    boundary_heights: np.ndarray = field(default=None, repr=False)

    @property
    def closure_mask(self) -> np.ndarray:
        return self.interior_mask | self.boundary_mask

    def check(self) -> None:
        if np.any(self.interior_mask & self.boundary_mask):
            raise ValueError("interior and boundary node sets overlap")
        inside = self.closure_mask
        I = self.interior_mask
        if np.any(I[0, :]) or np.any(I[-1, :]) or np.any(I[:, 0]) or np.any(I[:, -1]):
            raise ValueError("interior node on the grid edge")
        nb_ok = inside[:-2, 1:-1] & inside[2:, 1:-1] & inside[1:-1, :-2] & inside[1:-1, 2:]
        if np.any(I[1:-1, 1:-1] & ~nb_ok):
            raise ValueError("interior node with a neighbour outside the closure")


def _edge_mask(shape) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
    return m


def _neighbour_of(mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mask)
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


def _triangle_wave(t: np.ndarray) -> np.ndarray:
    return 4.0 * np.abs(t - np.floor(t + 0.5)) - 1.0


def reifenberg_profile(x: np.ndarray, delta: float, r0: float, seed: int,
                       levels: int = 4) -> np.ndarray:
    """Lacunary sum of triangle waves, zero mean level.

    Scale j has period rho_j = r0 / 2**j and amplitude kappa * delta * rho_j.
    With kappa = 1 / (4 + 8 * levels) every window of radius rho deviates from
    the line through its centre (with the one-sided slope of the coarse
    components) by at most delta * rho.
    """
    rng = np.random.default_rng(seed)
    phases = rng.random(levels)
    signs = rng.choice([-1.0, 1.0], size=levels)
    kappa = 1.0 / (4.0 + 8.0 * levels)
    y = np.zeros_like(np.asarray(x, dtype=float))
    for j in range(levels):
        rho_j = r0 / 2.0 ** j
        y = y + signs[j] * kappa * delta * rho_j * _triangle_wave(x / rho_j + phases[j])
    return y


def make_domain(grid: Grid, kind: str = "square", delta: float = 0.0,
                r0: float | None = None, seed: int = 0, levels: int = 4) -> Domain:
    if r0 is None:
        r0 = grid.extent
    if not 0.0 <= delta < 0.5:
        raise ValueError(f"delta must lie in [0, 1/2), got {delta}")
    if not 0.0 < r0 <= grid.extent:
        raise ValueError(f"r0 must lie in (0, extent], got {r0}")
    shape = grid.shape
    edge = _edge_mask(shape)
    if kind == "square":
        dom = Domain(grid, ~edge, edge.copy(), r0, delta, "square", None,
                     np.zeros(shape[1]))
        dom.check()
        return dom
    if kind != "reifenberg":
        raise ValueError(f"unknown domain kind {kind!r}")

    X, Y = grid.coords()
    base = 0.25 * grid.extent
    heights = base + reifenberg_profile(X[0], delta, r0, seed, levels)
    if heights.min() < grid.h or heights.max() > grid.extent - 4 * grid.h:
        raise ValueError("perturbed boundary leaves the grid extent")
    above = Y > heights[None, :] + 1e-12 * grid.extent
    interior = above & ~edge
    boundary = (~interior) & (_neighbour_of(interior) | (edge & (Y >= heights[None, :])))
    dom = Domain(grid, interior, boundary, r0, delta, "reifenberg", seed, heights)
    dom.check()
    return dom


def domain_from_mask(grid: Grid, closure: np.ndarray, r0: float | None = None) -> Domain:
    """Rebuild a domain from its closure mask (as stored in mask files)."""
    closure = np.asarray(closure, dtype=bool)
    if closure.shape != grid.shape:
        raise ValueError("mask shape does not match grid")
    edge = _edge_mask(grid.shape)
    interior = np.zeros_like(closure)
    interior[1:-1, 1:-1] = (closure[1:-1, 1:-1] & closure[:-2, 1:-1] & closure[2:, 1:-1]
                            & closure[1:-1, :-2] & closure[1:-1, 2:])
    interior &= ~edge
    boundary = closure & ~interior
    # lower boundary graph: midway below the first interior node of each column
    heights = np.zeros(grid.shape[1])
    for c in range(grid.shape[1]):
        rows = np.flatnonzero(closure[:, c])
        if rows.size and rows[0] > 0:
            heights[c] = (rows[0] - 0.5) * grid.h
    kind = "square" if closure.all() else "mask"
    return Domain(grid, interior, boundary, grid.extent if r0 is None else r0, 0.0,
                  kind, None, heights)


def dyadic_scales(r0: float, rmin: float) -> list[float]:
    scales = []
    rho = r0
    while rho >= rmin * (1 - 1e-12):
        scales.append(rho)
        rho /= 2.0
    return scales


def _slab_halfwidth(pts: np.ndarray, directions: np.ndarray) -> float:
    # line through the origin (the boundary point itself), best of the directions
    normals = np.stack([-np.sin(directions), np.cos(directions)], axis=1)
    dist = np.abs(pts @ normals.T)
    return float(dist.max(axis=0).min())


def measure_flatness(domain: Domain, r0: float) -> float:
    """Largest relative slab half-width of the lower boundary over dyadic scales.

    For every boundary sample xi and rho = r0, r0/2, ... >= 4h the boundary
    points inside B_rho(xi) are fitted by a line through xi (180 directions);
    the smallest half-width over rho is the local flatness. Returns the sup.
    """
    grid = domain.grid
    if r0 < 4 * grid.h * (1 - 1e-12):
        raise ValueError(f"r0 = {r0} is below the resolvable scale 4h = {4 * grid.h}")
    xs = np.arange(grid.shape[1]) * grid.h
    pts = np.stack([xs, np.asarray(domain.boundary_heights, dtype=float)], axis=1)
    directions = np.arange(N_DIRECTIONS) * (math.pi / N_DIRECTIONS)
    worst = 0.0
    for rho in dyadic_scales(r0, 4 * grid.h):
        for k in range(len(pts)):
            d = pts - pts[k]
            near = (d ** 2).sum(axis=1) <= rho * rho * (1 + _BALL_TOL)
            worst = max(worst, _slab_halfwidth(d[near], directions) / rho)
    return worst


def cells_in_ball(domain_or_grid, ball: Ball, restrict_to_domain: bool = False) -> np.ndarray:
    """Boolean node mask of the closed ball, optionally intersected with the interior."""
    if isinstance(domain_or_grid, Domain):
        grid = domain_or_grid.grid
    else:
        grid = domain_or_grid
        if restrict_to_domain:
            raise ValueError("restrict_to_domain needs a Domain")
    X, Y = grid.coords()
    cx, cy = ball.center
    mask = (X - cx) ** 2 + (Y - cy) ** 2 <= ball.radius ** 2 * (1 + _BALL_TOL)
    if restrict_to_domain:
        mask &= domain_or_grid.interior_mask
    return mask


def lattice_disk(radius_cells: float) -> list[tuple[int, int]]:
    """Row offsets and half-widths (dj, w) of the closed lattice disk."""
    R = int(math.floor(radius_cells * (1 + _BALL_TOL)))
    r2 = radius_cells * radius_cells * (1 + _BALL_TOL)
    rows = []
    for dj in range(-R, R + 1):
        w = int(math.floor(math.sqrt(max(r2 - dj * dj, 0.0))))
        while (w + 1) ** 2 + dj * dj <= r2:
            w += 1
        while w > 0 and w * w + dj * dj > r2:
            w -= 1
        rows.append((dj, w))
    return rows


def lattice_disk_count(radius_cells: float) -> int:
    return sum(2 * w + 1 for _, w in lattice_disk(radius_cells))
