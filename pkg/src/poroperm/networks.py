"""Pore networks: construction, node-pressure solves and Darcy upscaling.

A network is a graph of cylindrical channels between nodes. A horizontal
pressure difference is imposed between the inlet column (left) and the
outlet column (right); Poiseuille conductances and nodal mass balance
give a sparse SPD linear system for the interior node pressures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg, splu

DEFAULT_RADIUS = 1.0e-5  # m; reported quantities are normalized and invariant to this

# Above this node count the direct factorization is replaced by CG.
_ITERATIVE_NODE_LIMIT = 100_000
_CG_TOL = 1.0e-12


class NetworkParameterError(ValueError):
    """Invalid arguments for a network builder."""


class NetworkConstructionError(RuntimeError):
    """Degenerate geometry made construction impossible."""


@dataclass(frozen=True)
class PoreNetwork:
    """Immutable channel network with inlet/outlet columns.

    Channels are stored as parallel arrays. ``open`` is the default
    open/closed state; solves may override it with an explicit mask.
    """

    nodes: np.ndarray            # (N, 2) coordinates, m
    channel_a: np.ndarray        # (M,) endpoint node ids
    channel_b: np.ndarray        # (M,)
    radii: np.ndarray            # (M,) m
    lengths: np.ndarray          # (M,) m
    open: np.ndarray             # (M,) bool
    inlet_nodes: np.ndarray      # node ids on the left boundary
    outlet_nodes: np.ndarray     # node ids on the right boundary
    span_length: float           # inlet-to-outlet distance, m
    cross_section: float         # transverse extent x unit depth, m^2
    theta0: float                # initial porosity

    def __post_init__(self):
        n = len(self.nodes)
        a, b = self.channel_a, self.channel_b
        if np.any(a == b):
            raise NetworkConstructionError("channel with identical endpoints")
        if a.min(initial=0) < 0 or max(a.max(initial=0), b.max(initial=0)) >= n:
            raise NetworkConstructionError("channel endpoint out of range")
        key = np.minimum(a, b) * n + np.maximum(a, b)
        if len(np.unique(key)) != len(key):
            raise NetworkConstructionError("duplicate channel")
        if np.any(self.radii <= 0) or np.any(self.lengths <= 0):
            raise NetworkConstructionError("non-positive channel radius or length")
        inlet, outlet = set(self.inlet_nodes.tolist()), set(self.outlet_nodes.tolist())
        if not inlet or not outlet or inlet & outlet:
            raise NetworkConstructionError("inlet/outlet sets must be disjoint and nonempty")
        if self.total_volume <= 0:
            raise NetworkConstructionError("zero total channel volume")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_channels(self) -> int:
        return len(self.channel_a)

    @property
    def channel_volumes(self) -> np.ndarray:
        return math.pi * self.radii**2 * self.lengths

    @property
    def total_volume(self) -> float:
        return float(self.channel_volumes.sum())


@dataclass(frozen=True)
class PressureSolution:
    """Node pressures and channel flows for one open/closed configuration."""

    node_pressures: np.ndarray   # (N,) Pa
    channel_flows: np.ndarray    # (M,) m^3/s, signed a -> b
    total_flow: float            # m^3/s into the outlet

    conservation_residual: float = field(default=0.0)


def build_rectangular(nx: int, ny: int, spacing: float, radius: float = DEFAULT_RADIUS,
                      theta0: float = 0.4) -> PoreNetwork:
    """Axis-aligned grid of nx*ny nodes with horizontal and vertical channels."""
    _check_grid_args(nx, ny, spacing, radius, min_ny=1)
    nodes, node_id = _grid_nodes(nx, ny, spacing)
    a, b, length = [], [], []
    for iy in range(ny):
        for ix in range(nx - 1):
            a.append(node_id(ix, iy)); b.append(node_id(ix + 1, iy)); length.append(spacing)
    for iy in range(ny - 1):
        for ix in range(nx):
            a.append(node_id(ix, iy)); b.append(node_id(ix, iy + 1)); length.append(spacing)
    return _finish_grid(nodes, a, b, length, nx, ny, spacing, radius, theta0)


def build_triangular(nx: int, ny: int, spacing: float, radius: float = DEFAULT_RADIUS,
                     theta0: float = 0.4) -> PoreNetwork:
    """Rectangular grid plus one diagonal per cell.

    The diagonal of cell (ix, iy) joins the corners with even ix+iy parity,
    so interior nodes of the even sublattice reach coordination eight while
    the odd sublattice stays at four.
    """
    _check_grid_args(nx, ny, spacing, radius, min_ny=1)
    base = build_rectangular(nx, ny, spacing, radius, theta0)
    a = list(base.channel_a)
    b = list(base.channel_b)
    length = list(base.lengths)
    node_id = lambda ix, iy: iy * nx + ix
    diag = spacing * math.sqrt(2.0)
    for iy in range(ny - 1):
        for ix in range(nx - 1):
            if (ix + iy) % 2 == 0:
                a.append(node_id(ix, iy)); b.append(node_id(ix + 1, iy + 1))
            else:
                a.append(node_id(ix + 1, iy)); b.append(node_id(ix, iy + 1))
            length.append(diag)
    return _finish_grid(base.nodes, a, b, length, nx, ny, spacing, radius, theta0)


def build_unstructured_triangular(target_nodes: int, domain: tuple[float, float] = (99.0, 59.0),
                                  seed: int = 0, radius: float = DEFAULT_RADIUS,
                                  theta0: float = 0.4) -> PoreNetwork:
    """Delaunay network over quasi-uniform random points plus fixed boundary columns.

    Interior points are rejection-sampled with minimum spacing 0.7 times the
    average spacing implied by the target count; channels are the Delaunay
    edges with true Euclidean lengths. Deterministic for a fixed seed.
    """
    from scipy.spatial import Delaunay

    if target_nodes < 4:
        raise NetworkParameterError("target_nodes must be at least 4")
    width, height = float(domain[0]), float(domain[1])
    if width <= 0 or height <= 0:
        raise NetworkParameterError("domain extents must be positive")

    avg_spacing = math.sqrt(width * height / target_nodes)
    n_col = max(2, round(height / avg_spacing))
    ys = np.linspace(0.0, height, n_col)
    left = np.column_stack([np.zeros(n_col), ys])
    right = np.column_stack([np.full(n_col, width), ys])
    points = [left, right]

    n_interior = target_nodes - 2 * n_col
    if n_interior > 0:
        rng = np.random.default_rng(seed)
        r_min = 0.7 * avg_spacing
        interior = _poisson_like_points(rng, n_interior, width, height, r_min,
                                        np.vstack(points))
        points.append(interior)
    pts = np.vstack(points)

    try:
        tri = Delaunay(pts)
    except Exception as exc:  # QhullError for degenerate inputs
        raise NetworkConstructionError(f"Delaunay triangulation failed: {exc}") from exc

    simplices = tri.simplices
    edges = np.vstack([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [2, 0]]])
    edges.sort(axis=1)
    edges = np.unique(edges, axis=0)
    lengths = np.linalg.norm(pts[edges[:, 0]] - pts[edges[:, 1]], axis=1)

    # Convex-hull slivers produce edges spanning far beyond the sampling
    # spacing (up to inlet-to-outlet shortcuts); drop them.
    column_spacing = height / (n_col - 1)
    keep = lengths <= 2.0 * max(avg_spacing, column_spacing)
    if keep.sum() >= 1:
        edges = edges[keep]
        lengths = lengths[keep]

    inlet = np.flatnonzero(pts[:, 0] == 0.0)
    outlet = np.flatnonzero(pts[:, 0] == width)
    radii = np.full(len(edges), float(radius))
    return PoreNetwork(
        nodes=pts, channel_a=edges[:, 0].astype(np.int64), channel_b=edges[:, 1].astype(np.int64),
        radii=radii, lengths=lengths, open=np.ones(len(edges), dtype=bool),
        inlet_nodes=inlet, outlet_nodes=outlet,
        span_length=width, cross_section=height,
        theta0=float(theta0),
    )


def _poisson_like_points(rng, count, width, height, r_min, existing):
    """Dart-throwing with a uniform grid hash for the min-spacing test."""
    cell = r_min / math.sqrt(2.0)
    grid: dict[tuple[int, int], list[int]] = {}
    accepted: list[np.ndarray] = []
    all_pts: list[np.ndarray] = [p for p in existing]

    def grid_key(p):
        return (int(p[0] / cell), int(p[1] / cell))

    def ok(p):
        gx, gy = grid_key(p)
        reach = 2
        for dx in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                for idx in grid.get((gx + dx, gy + dy), ()):
                    q = all_pts[idx]
                    if (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 < r_min * r_min:
                        return False
        return True

    for i, p in enumerate(existing):
        grid.setdefault(grid_key(p), []).append(i)

    attempts = 0
    max_attempts = 200 * count
    margin = 0.5 * r_min
    while len(accepted) < count and attempts < max_attempts:
        batch = rng.uniform([margin, 0.0], [width - margin, height],
                            size=(min(4 * (count - len(accepted)) + 64, 65536), 2))
        for p in batch:
            attempts += 1
            if ok(p):
                all_pts.append(p)
                grid.setdefault(grid_key(p), []).append(len(all_pts) - 1)
                accepted.append(p)
                if len(accepted) >= count:
                    break
        if attempts >= max_attempts:
            break
    if not accepted:
        return np.empty((0, 2))
    return np.asarray(accepted)


def solve_pressure(net: PoreNetwork, delta_p: float, eta: float,
                   open_mask: np.ndarray | None = None) -> PressureSolution:
    """Solve the nodal mass-balance system under a horizontal pressure drop.

    Inlet nodes are held at ``delta_p``, outlet nodes at 0. Components of the
    open subgraph touching neither boundary get pressure 0 and no flow. The
    total flow is the sum of channel flows into the outlet column.
    """
    if delta_p <= 0 or eta <= 0:
        raise NetworkParameterError("delta_p and eta must be positive")
    mask = net.open if open_mask is None else np.asarray(open_mask, dtype=bool)
    n = net.n_nodes
    a = net.channel_a[mask]
    b = net.channel_b[mask]
    g = math.pi * net.radii[mask] ** 4 / (8.0 * eta * net.lengths[mask])

    pressures = np.zeros(n)
    flows = np.zeros(net.n_channels)
    if len(a) == 0:
        pressures[net.inlet_nodes] = delta_p
        return PressureSolution(pressures, flows, 0.0)

    # Restrict to components that touch the inlet or the outlet.
    adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    boundary_labels = np.unique(np.concatenate([labels[net.inlet_nodes],
                                                labels[net.outlet_nodes]]))
    active = np.isin(labels, boundary_labels)

    is_dirichlet = np.zeros(n, dtype=bool)
    is_dirichlet[net.inlet_nodes] = True
    is_dirichlet[net.outlet_nodes] = True
    dirichlet_values = np.zeros(n)
    dirichlet_values[net.inlet_nodes] = delta_p

    unknown = active & ~is_dirichlet
    unknown_ids = np.flatnonzero(unknown)
    col_of = np.full(n, -1, dtype=np.int64)
    col_of[unknown_ids] = np.arange(len(unknown_ids))

    pressures[is_dirichlet & active] = dirichlet_values[is_dirichlet & active]

    if len(unknown_ids) > 0:
        # Graph Laplacian restricted to unknown nodes; Dirichlet neighbours
        # contribute to the right-hand side.
        rows, cols, vals = [], [], []
        rhs = np.zeros(len(unknown_ids))
        ia, ib = col_of[a], col_of[b]
        ua = ia >= 0
        ub = ib >= 0
        # diagonal accumulation
        diag = np.zeros(len(unknown_ids))
        np.add.at(diag, ia[ua], g[ua])
        np.add.at(diag, ib[ub], g[ub])
        both = ua & ub
        rows.append(ia[both]); cols.append(ib[both]); vals.append(-g[both])
        rows.append(ib[both]); cols.append(ia[both]); vals.append(-g[both])
        only_a = ua & ~ub
        np.add.at(rhs, ia[only_a], g[only_a] * dirichlet_values[b[only_a]])
        only_b = ub & ~ua
        np.add.at(rhs, ib[only_b], g[only_b] * dirichlet_values[a[only_b]])

        m = len(unknown_ids)
        rows.append(np.arange(m)); cols.append(np.arange(m)); vals.append(diag)
        lap = coo_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(m, m)).tocsc()
        if m > _ITERATIVE_NODE_LIMIT:
            sol, info = cg(lap, rhs, rtol=_CG_TOL, atol=0.0)
            if info != 0:
                raise RuntimeError(f"CG failed to converge (info={info})")
        else:
            sol = splu(lap).solve(rhs)
        pressures[unknown_ids] = sol

    flows[mask] = g * (pressures[a] - pressures[b])

    outlet_set = np.zeros(n, dtype=bool)
    outlet_set[net.outlet_nodes] = True
    into_outlet = outlet_set[b] & ~outlet_set[a]
    out_of_outlet = outlet_set[a] & ~outlet_set[b]
    q = flows[mask]
    total = float(q[into_outlet].sum() - q[out_of_outlet].sum())

    residual = _conservation_residual(net, mask, flows, is_dirichlet)
    return PressureSolution(pressures, flows, total, residual)


def _conservation_residual(net, mask, flows, is_dirichlet):
    n = net.n_nodes
    net_flow = np.zeros(n)
    q = flows[mask]
    np.subtract.at(net_flow, net.channel_a[mask], q)
    np.add.at(net_flow, net.channel_b[mask], q)
    interior = ~is_dirichlet
    scale = np.abs(q).max() if len(q) else 0.0
    if scale == 0.0 or not interior.any():
        return 0.0
    return float(np.abs(net_flow[interior]).max() / scale)


def network_permeability(net: PoreNetwork, solution: PressureSolution,
                         delta_p: float, eta: float) -> float:
    """Darcy upscaling of the total flow: kappa = Q * eta * L / (A * delta_p)."""
    if delta_p <= 0:
        raise NetworkParameterError("delta_p must be positive")
    return solution.total_flow * eta * net.span_length / (net.cross_section * delta_p)


def network_porosity(net: PoreNetwork, open_mask: np.ndarray | None = None) -> float:
    """Porosity scaled by the open channel volume fraction."""
    mask = net.open if open_mask is None else np.asarray(open_mask, dtype=bool)
    return net.theta0 * float(net.channel_volumes[mask].sum()) / net.total_volume


def is_percolating(net: PoreNetwork, open_mask: np.ndarray | None = None) -> bool:
    """True when the open subgraph connects the inlet to the outlet."""
    mask = net.open if open_mask is None else np.asarray(open_mask, dtype=bool)
    a = net.channel_a[mask]
    b = net.channel_b[mask]
    if len(a) == 0:
        return False
    adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(net.n_nodes,) * 2)
    _, labels = connected_components(adj, directed=False)
    return bool(np.isin(labels[net.inlet_nodes], labels[net.outlet_nodes]).any())


def save_network(net: PoreNetwork, path) -> None:
    """Plain-text edge list: header, node lines, channel lines."""
    with open(path, "w") as fh:
        fh.write(f"nodes {net.n_nodes} channels {net.n_channels} theta0 {net.theta0!r}\n")
        fh.write(f"span {net.span_length!r} cross_section {net.cross_section!r}\n")
        fh.write(f"inlet {' '.join(map(str, net.inlet_nodes.tolist()))}\n")
        fh.write(f"outlet {' '.join(map(str, net.outlet_nodes.tolist()))}\n")
        for x, y in net.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for i in range(net.n_channels):
            fh.write(f"{net.channel_a[i]} {net.channel_b[i]} "
                     f"{float(net.radii[i])!r} {float(net.lengths[i])!r} {int(net.open[i])}\n")


def load_network(path) -> PoreNetwork:
    with open(path) as fh:
        header = fh.readline().split()
        n, m, theta0 = int(header[1]), int(header[3]), float(header[5])
        geom = fh.readline().split()
        span, cross = float(geom[1]), float(geom[3])
        inlet = np.array([int(t) for t in fh.readline().split()[1:]], dtype=np.int64)
        outlet = np.array([int(t) for t in fh.readline().split()[1:]], dtype=np.int64)
        nodes = np.array([[float(t) for t in fh.readline().split()] for _ in range(n)])
        rows = [fh.readline().split() for _ in range(m)]
    a = np.array([int(r[0]) for r in rows], dtype=np.int64)
    b = np.array([int(r[1]) for r in rows], dtype=np.int64)
    radii = np.array([float(r[2]) for r in rows])
    lengths = np.array([float(r[3]) for r in rows])
    open_flags = np.array([bool(int(r[4])) for r in rows])
    return PoreNetwork(nodes, a, b, radii, lengths, open_flags, inlet, outlet,
                       span, cross, theta0)


def _check_grid_args(nx, ny, spacing, radius, min_ny):
    if nx < 2 or ny < min_ny:
        raise NetworkParameterError(f"grid needs nx >= 2 and ny >= {min_ny}")
    if spacing <= 0 or radius <= 0:
        raise NetworkParameterError("spacing and radius must be positive")


def _grid_nodes(nx, ny, spacing):
    ys, xs = np.mgrid[0:ny, 0:nx]
    nodes = np.column_stack([xs.ravel() * spacing, ys.ravel() * spacing]).astype(float)
    return nodes, lambda ix, iy: iy * nx + ix


def _finish_grid(nodes, a, b, length, nx, ny, spacing, radius, theta0):
    m = len(a)
    inlet = np.arange(ny, dtype=np.int64) * nx
    outlet = inlet + (nx - 1)
    cross = spacing * max(ny - 1, 1)
    return PoreNetwork(
        nodes=np.asarray(nodes, dtype=float),
        channel_a=np.asarray(a, dtype=np.int64), channel_b=np.asarray(b, dtype=np.int64),
        radii=np.full(m, float(radius)), lengths=np.asarray(length, dtype=float),
        open=np.ones(m, dtype=bool),
        inlet_nodes=inlet, outlet_nodes=outlet,
        span_length=spacing * (nx - 1), cross_section=cross,
        theta0=float(theta0),
    )
