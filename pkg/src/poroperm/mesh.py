"""Structured triangular meshes and Taylor-Hood finite element assembly.

The rectangular domain is split into square cells, each cut into two
triangles. Displacements use quadratic basis functions on vertex and
edge-midpoint nodes; pressure uses linear basis functions on the vertices.
All bilinear forms are integrated with a six-point rule that is exact for
polynomials up to degree four.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

PROBLEM_HIGH_PUMP = "high_pump_pressure"
PROBLEM_SQUEEZE = "squeeze"

# Boundary tags. Both problems inject on the left wall and drain on the
# right; the squeeze problem additionally splits the top and bottom walls
# into a loaded middle half and traction-free outer quarters.
_TAGS_HIGH_PUMP = ("top", "left", "bottom", "right")
_TAGS_SQUEEZE = ("top_center", "top_outer", "left",
                 "bottom_outer", "bottom_center", "right")

INLET_TAG = "left"
OUTLET_TAG = "right"


class MeshParameterError(ValueError):
    """Invalid meshing or assembly parameters."""


# Six-point triangle quadrature, exact through degree four. Weights sum to
# the reference-triangle area 1/2.
_QA1, _QA2 = 0.445948490915965, 0.091576213509771
_QUAD_POINTS = np.array([
    [_QA1, _QA1], [1.0 - 2.0 * _QA1, _QA1], [_QA1, 1.0 - 2.0 * _QA1],
    [_QA2, _QA2], [1.0 - 2.0 * _QA2, _QA2], [_QA2, 1.0 - 2.0 * _QA2],
])
_QUAD_WEIGHTS = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3) / 2.0

_P1_REF_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def _p2_values(points: np.ndarray) -> np.ndarray:
    """Quadratic basis values, shape (n_points, 6)."""
    xi, eta = points[:, 0], points[:, 1]
    lam = np.stack([1.0 - xi - eta, xi, eta], axis=1)
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ], axis=1)


def _p2_ref_grads(points: np.ndarray) -> np.ndarray:
    """Quadratic basis reference gradients, shape (n_points, 6, 2)."""
    xi, eta = points[:, 0], points[:, 1]
    l0, l1, l2 = 1.0 - xi - eta, xi, eta
    d0, d1, d2 = _P1_REF_GRADS
    out = np.empty((len(points), 6, 2))
    out[:, 0] = np.outer(4 * l0 - 1, d0)
    out[:, 1] = np.outer(4 * l1 - 1, d1)
    out[:, 2] = np.outer(4 * l2 - 1, d2)
    out[:, 3] = 4 * (np.outer(l0, d1) + np.outer(l1, d0))
    out[:, 4] = 4 * (np.outer(l1, d2) + np.outer(l2, d1))
    out[:, 5] = 4 * (np.outer(l2, d0) + np.outer(l0, d2))
    return out


_QP_P2_VALS = _p2_values(_QUAD_POINTS)            # (6, 6)
_QP_P2_GRADS = _p2_ref_grads(_QUAD_POINTS)        # (6, 6, 2)
_QP_P1_VALS = np.stack([1.0 - _QUAD_POINTS[:, 0] - _QUAD_POINTS[:, 1],
                        _QUAD_POINTS[:, 0], _QUAD_POINTS[:, 1]], axis=1)
_CENTROID_P2_GRADS = _p2_ref_grads(np.array([[1 / 3, 1 / 3]]))[0]  # (6, 2)


@dataclass(frozen=True)
class BoundaryEdge:
    """One element face on the domain boundary."""
    v_a: int            # endpoint vertex ids (P2 node ids coincide)
    v_b: int
    midpoint: int       # P2 edge-midpoint node id
    element: int        # adjacent triangle
    tag: str
    length: float
    normal: tuple[float, float]


@dataclass(frozen=True)
class TriMesh:
    """Structured triangulation of [0, L] x [0, H] with tagged boundary."""
    L: float
    H: float
    dx: float
    dy: float
    problem_kind: str
    diagonal: str
    vertices: np.ndarray            # (n_v, 2)
    triangles: np.ndarray           # (n_t, 3) vertex ids, positively oriented
    tri_nodes: np.ndarray           # (n_t, 6) P2 node ids: vertices then midpoints
    midpoint_coords: np.ndarray     # (n_e, 2)
    boundary_edges: tuple[BoundaryEdge, ...]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_p2_nodes(self) -> int:
        return len(self.vertices) + len(self.midpoint_coords)

    @property
    def p2_coords(self) -> np.ndarray:
        return np.vstack([self.vertices, self.midpoint_coords])

    @property
    def element_centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def boundary_tags(self) -> tuple[str, ...]:
        if self.problem_kind == PROBLEM_HIGH_PUMP:
            return _TAGS_HIGH_PUMP
        return _TAGS_SQUEEZE

    def boundary_nodes(self, tags, include_midpoints: bool = True) -> np.ndarray:
        """Sorted P2 node ids lying on the edges with the given tags."""
        if isinstance(tags, str):
            tags = (tags,)
        nodes = set()
        for e in self.boundary_edges:
            if e.tag in tags:
                nodes.update((e.v_a, e.v_b))
                if include_midpoints:
                    nodes.add(e.midpoint)
        return np.array(sorted(nodes), dtype=int)


def _cell_count(length: float, spacing: float, name: str) -> int:
    n = round(length / spacing)
    if n < 1 or abs(n * spacing - length) > 1e-9 * length:
        raise MeshParameterError(f"{name} must divide the domain evenly")
    return n


def build_rect_mesh(L: float, H: float, dx: float, dy: float,
                    problem_kind: str = PROBLEM_HIGH_PUMP,
                    diagonal: str = "right") -> TriMesh:
    """Mesh the rectangle with two triangles per cell.

    ``diagonal='right'`` cuts every cell from its lower-left to upper-right
    corner; ``'alternating'`` flips the cut on odd rows, which makes the mesh
    mirror symmetric about y = H/2 when the number of rows is even.
    """
    if problem_kind not in (PROBLEM_HIGH_PUMP, PROBLEM_SQUEEZE):
        raise MeshParameterError(f"unknown problem kind {problem_kind!r}")
    if diagonal not in ("right", "alternating"):
        raise MeshParameterError(f"unknown diagonal mode {diagonal!r}")
    if L <= 0 or H <= 0 or dx <= 0 or dy <= 0:
        raise MeshParameterError("domain and spacing sizes must be positive")
    nx = _cell_count(L, dx, "dx")
    ny = _cell_count(H, dy, "dy")

    xs = np.linspace(0.0, L, nx + 1)
    ys = np.linspace(0.0, H, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(ix, iy):
        return iy * (nx + 1) + ix

    triangles = []
    for iy in range(ny):
        flip = diagonal == "alternating" and iy % 2 == 1
        for ix in range(nx):
            v00, v10 = vid(ix, iy), vid(ix + 1, iy)
            v01, v11 = vid(ix, iy + 1), vid(ix + 1, iy + 1)
            if flip:
                triangles.append((v00, v10, v01))
                triangles.append((v10, v11, v01))
            else:
                triangles.append((v00, v10, v11))
                triangles.append((v00, v11, v01))
    triangles = np.array(triangles, dtype=int)

    n_v = len(vertices)
    edge_ids: dict[tuple[int, int], int] = {}
    edge_use: dict[tuple[int, int], list[int]] = {}
    tri_nodes = np.empty((len(triangles), 6), dtype=int)
    tri_nodes[:, :3] = triangles
    for t, (a, b, c) in enumerate(triangles):
        for k, (p, q) in enumerate(((a, b), (b, c), (c, a))):
            key = (p, q) if p < q else (q, p)
            eid = edge_ids.setdefault(key, len(edge_ids))
            edge_use.setdefault(key, []).append(t)
            tri_nodes[t, 3 + k] = n_v + eid

    midpoint_coords = np.empty((len(edge_ids), 2))
    for (p, q), eid in edge_ids.items():
        midpoint_coords[eid] = 0.5 * (vertices[p] + vertices[q])

    boundary = []
    tol = 1e-9 * max(L, H)
    for (p, q), elems in edge_use.items():
        if len(elems) != 1:
            continue
        xa, ya = vertices[p]
        xb, yb = vertices[q]
        xm, ym = 0.5 * (xa + xb), 0.5 * (ya + yb)
        if abs(xa) < tol and abs(xb) < tol:
            wall, normal = "left", (-1.0, 0.0)
        elif abs(xa - L) < tol and abs(xb - L) < tol:
            wall, normal = "right", (1.0, 0.0)
        elif abs(ya - H) < tol and abs(yb - H) < tol:
            wall, normal = "top", (0.0, 1.0)
        elif abs(ya) < tol and abs(yb) < tol:
            wall, normal = "bottom", (0.0, -1.0)
        else:
            continue  # interior diagonal that happens to be used once: impossible
        tag = _wall_tag(wall, xm, L, problem_kind)
        length = float(np.hypot(xb - xa, yb - ya))
        boundary.append(BoundaryEdge(int(p), int(q), int(n_v + edge_ids[(p, q) if p < q else (q, p)]),
                                     int(elems[0]), tag, length, normal))

    return TriMesh(L, H, dx, dy, problem_kind, diagonal, vertices, triangles,
                   tri_nodes, midpoint_coords, tuple(boundary))


def _wall_tag(wall: str, x_mid: float, L: float, problem_kind: str) -> str:
    if problem_kind == PROBLEM_HIGH_PUMP:
        return wall
    if wall in ("left", "right"):
        return wall
    center = 0.25 * L < x_mid < 0.75 * L
    if wall == "top":
        return "top_center" if center else "top_outer"
    return "bottom_center" if center else "bottom_outer"


def _element_geometry(mesh: TriMesh):
    """Jacobian inverse transposes and determinants for every triangle."""
    coords = mesh.vertices[mesh.triangles]      # (n_t, 3, 2)
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0):
        raise MeshParameterError("mesh contains non-positively oriented triangles")
    inv_jt = np.empty((len(coords), 2, 2))
    inv_jt[:, 0, 0] = e2[:, 1]
    inv_jt[:, 0, 1] = -e1[:, 1]
    inv_jt[:, 1, 0] = -e2[:, 0]
    inv_jt[:, 1, 1] = e1[:, 0]
    inv_jt /= det[:, None, None]
    return inv_jt, det


def _p2_phys_grads(inv_jt: np.ndarray) -> np.ndarray:
    """Physical quadratic basis gradients, shape (n_t, n_q, 6, 2)."""
    return np.einsum("eij,qaj->eqai", inv_jt, _QP_P2_GRADS)


def assemble_a(mesh: TriMesh, lam: float, mu: float) -> sp.csr_matrix:
    """Elasticity form: lam (div u, div w) + 2 mu (eps(u), eps(w))."""
    if lam < 0 or mu <= 0:
        raise MeshParameterError("requires lam >= 0 and mu > 0")
    inv_jt, det = _element_geometry(mesh)
    g = _p2_phys_grads(inv_jt)
    gx, gy = g[..., 0], g[..., 1]
    w = _QUAD_WEIGHTS

    def form(pa, pb):
        return np.einsum("q,e,eqa,eqb->eab", w, det, pa, pb)

    xx_x, yy_y = form(gx, gx), form(gy, gy)
    xy = lam * form(gx, gy) + mu * form(gy, gx)
    kxx = (lam + 2 * mu) * xx_x + mu * yy_y
    kyy = (lam + 2 * mu) * yy_y + mu * xx_x

    n_u = mesh.n_p2_nodes
    nodes = mesh.tri_nodes
    rows_x = np.repeat(nodes, 6, axis=1)
    cols_x = np.tile(nodes, (1, 6))
    blocks = [
        (rows_x, cols_x, kxx),
        (rows_x, cols_x + n_u, xy),
        (rows_x + n_u, cols_x, xy.transpose(0, 2, 1)),
        (rows_x + n_u, cols_x + n_u, kyy),
    ]
    rows = np.concatenate([b[0].ravel() for b in blocks])
    cols = np.concatenate([b[1].ravel() for b in blocks])
    vals = np.concatenate([b[2].reshape(len(nodes), -1).ravel() for b in blocks])
    return sp.coo_matrix((vals, (rows, cols)), shape=(2 * n_u, 2 * n_u)).tocsr()


def assemble_b(mesh: TriMesh) -> sp.csr_matrix:
    """Coupling form (p, div w): rows are pressure nodes, columns displacement dofs."""
    inv_jt, det = _element_geometry(mesh)
    g = _p2_phys_grads(inv_jt)
    bx = np.einsum("q,e,qi,eqb->eib", _QUAD_WEIGHTS, det, _QP_P1_VALS, g[..., 0])
    by = np.einsum("q,e,qi,eqb->eib", _QUAD_WEIGHTS, det, _QP_P1_VALS, g[..., 1])

    n_u = mesh.n_p2_nodes
    rows = np.repeat(mesh.triangles, 6, axis=1)
    cols = np.tile(mesh.tri_nodes[:, None, :], (1, 3, 1))
    r = np.concatenate([rows.ravel(), rows.ravel()])
    c = np.concatenate([cols.ravel(), (cols + n_u).ravel()])
    v = np.concatenate([bx.ravel(), by.ravel()])
    return sp.coo_matrix((v, (r, c)), shape=(mesh.n_vertices, 2 * n_u)).tocsr()


def p1_laplacian(mesh: TriMesh, coeff: np.ndarray) -> sp.csr_matrix:
    """Pressure-space Laplacian with an elementwise-constant coefficient."""
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), (mesh.n_triangles,))
    inv_jt, det = _element_geometry(mesh)
    gl = np.einsum("eij,aj->eai", inv_jt, _P1_REF_GRADS)     # (n_t, 3, 2)
    local = np.einsum("e,e,eai,ebi->eab", coeff, 0.5 * det, gl, gl)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n_p = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n_p, n_p)).tocsr()


def assemble_c(mesh: TriMesh, kappa_field: np.ndarray, eta: float) -> sp.csr_matrix:
    """Flow form: sum over elements of (kappa/eta) grad p . grad q."""
    kappa_field = np.asarray(kappa_field, dtype=float)
    if eta <= 0:
        raise MeshParameterError("viscosity eta must be positive")
    if np.any(kappa_field < 0):
        raise MeshParameterError("permeability field must be nonnegative")
    return p1_laplacian(mesh, kappa_field / eta)


def assemble_stabilization(mesh: TriMesh, beta: float) -> sp.csr_matrix:
    """beta times the unit-coefficient pressure Laplacian."""
    if beta < 0:
        raise MeshParameterError("stabilization parameter beta must be >= 0")
    return p1_laplacian(mesh, np.full(mesh.n_triangles, beta))


def stabilization_parameter(mesh: TriMesh, lam: float, mu: float) -> float:
    """Mesh-dependent pressure stabilization weight (m^2/Pa)."""
    return float(np.hypot(mesh.dx, mesh.dy) / (4.0 * (lam + 2.0 * mu)))


def assemble_loads(mesh: TriMesh, problem_kind: str, p_pump: float,
                   sigma0: float = 0.0) -> np.ndarray:
    """Boundary load vector on the displacement space.

    Both problems carry the pump pressure as a normal load on the inlet
    wall. The squeeze problem adds a uniform vertical traction pressing the
    middle halves of the top and bottom walls toward the centerline.
    """
    if problem_kind != mesh.problem_kind:
        raise MeshParameterError("problem kind does not match the mesh tags")
    n_u = mesh.n_p2_nodes
    h = np.zeros(2 * n_u)
    for e in mesh.boundary_edges:
        # quadratic trace integrals: endpoints len/6, midpoint 2 len/3
        w_end, w_mid = e.length / 6.0, 2.0 * e.length / 3.0
        if e.tag == INLET_TAG:
            # -p_pump * w . n with n = (-1, 0) on the inlet wall
            h[e.v_a] += p_pump * w_end
            h[e.v_b] += p_pump * w_end
            h[e.midpoint] += p_pump * w_mid
        elif e.tag == "top_center":
            h[n_u + e.v_a] -= sigma0 * w_end
            h[n_u + e.v_b] -= sigma0 * w_end
            h[n_u + e.midpoint] -= sigma0 * w_mid
        elif e.tag == "bottom_center":
            h[n_u + e.v_a] += sigma0 * w_end
            h[n_u + e.v_b] += sigma0 * w_end
            h[n_u + e.midpoint] += sigma0 * w_mid
    return h


def dirichlet_displacement_dofs(mesh: TriMesh) -> np.ndarray:
    """Sorted displacement dof indices pinned to zero by the problem kind."""
    n_u = mesh.n_p2_nodes
    if mesh.problem_kind == PROBLEM_HIGH_PUMP:
        # impermeable-wall sliding: u_y = 0 top and bottom, u_x = 0 right
        uy = mesh.boundary_nodes(("top", "bottom")) + n_u
        ux = mesh.boundary_nodes("right")
        return np.unique(np.concatenate([ux, uy]))
    nodes = mesh.boundary_nodes("right")
    return np.unique(np.concatenate([nodes, nodes + n_u]))


def dirichlet_pressure(mesh: TriMesh, p_pump: float):
    """(node ids, values) of the strongly imposed pressure boundary data."""
    inlet = mesh.boundary_nodes(INLET_TAG, include_midpoints=False)
    outlet = mesh.boundary_nodes(OUTLET_TAG, include_midpoints=False)
    nodes = np.concatenate([inlet, outlet])
    values = np.concatenate([np.full(len(inlet), float(p_pump)),
                             np.zeros(len(outlet))])
    order = np.argsort(nodes)
    return nodes[order], values[order]


@dataclass(frozen=True)
class TaylorHoodSystem:
    """Assembled time-independent pieces of the coupled system."""
    mesh: TriMesh
    n_u: int                        # displacement nodes (dofs are 2 n_u)
    n_p: int                        # pressure nodes
    A: sp.csr_matrix
    B: sp.csr_matrix
    S: sp.csr_matrix
    h: np.ndarray
    fixed_u_dofs: np.ndarray
    pressure_nodes: np.ndarray      # Dirichlet pressure node ids
    pressure_values: np.ndarray


def build_system(mesh: TriMesh, lam: float, mu: float, beta: float,
                 p_pump: float, sigma0: float = 0.0) -> TaylorHoodSystem:
    """Assemble every matrix that does not depend on the permeability field."""
    nodes, values = dirichlet_pressure(mesh, p_pump)
    return TaylorHoodSystem(
        mesh=mesh,
        n_u=mesh.n_p2_nodes,
        n_p=mesh.n_vertices,
        A=assemble_a(mesh, lam, mu),
        B=assemble_b(mesh),
        S=assemble_stabilization(mesh, beta),
        h=assemble_loads(mesh, mesh.problem_kind, p_pump, sigma0),
        fixed_u_dofs=dirichlet_displacement_dofs(mesh),
        pressure_nodes=nodes,
        pressure_values=values,
    )


def element_divergence(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    """Centroid value of div u per element for displacement coefficients u."""
    inv_jt, _ = _element_geometry(mesh)
    g = np.einsum("eij,aj->eai", inv_jt, _CENTROID_P2_GRADS)     # (n_t, 6, 2)
    n_u = mesh.n_p2_nodes
    ux = u[mesh.tri_nodes]
    uy = u[mesh.tri_nodes + n_u]
    return np.einsum("ea,ea->e", ux, g[..., 0]) + np.einsum("ea,ea->e", uy, g[..., 1])


def vertex_divergence(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    """Per-vertex div u, averaging the corner values of adjacent elements.

    The elementwise field from :func:`element_divergence` is discontinuous;
    this recovered nodal field is what field plots and point probes use.
    """
    inv_jt, _ = _element_geometry(mesh)
    n_u = mesh.n_p2_nodes
    ux = u[mesh.tri_nodes]
    uy = u[mesh.tri_nodes + n_u]
    acc = np.zeros(mesh.n_vertices)
    cnt = np.zeros(mesh.n_vertices)
    corner_grads = _p2_ref_grads(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    for k in range(3):
        g = np.einsum("eij,aj->eai", inv_jt, corner_grads[k])
        div = (np.einsum("ea,ea->e", ux, g[..., 0])
               + np.einsum("ea,ea->e", uy, g[..., 1]))
        np.add.at(acc, mesh.triangles[:, k], div)
        np.add.at(cnt, mesh.triangles[:, k], 1.0)
    return acc / cnt


def element_pressure_gradient(mesh: TriMesh, p: np.ndarray) -> np.ndarray:
    """Constant per-element gradient of the linear pressure field, (n_t, 2)."""
    inv_jt, _ = _element_geometry(mesh)
    gl = np.einsum("eij,aj->eai", inv_jt, _P1_REF_GRADS)
    return np.einsum("ea,eai->ei", p[mesh.triangles], gl)


def _single_element_mesh(coords3: np.ndarray) -> TriMesh:
    coords3 = np.asarray(coords3, dtype=float)
    mids = 0.5 * (coords3 + np.roll(coords3, -1, axis=0))
    return TriMesh(1.0, 1.0, 1.0, 1.0, PROBLEM_HIGH_PUMP, "right",
                   coords3, np.array([[0, 1, 2]]),
                   np.array([[0, 1, 2, 3, 4, 5]]), mids, ())


def element_stiffness(coords3, lam: float, mu: float) -> np.ndarray:
    """Dense 12x12 elasticity matrix of one triangle, dofs [x0..x5, y0..y5]."""
    return assemble_a(_single_element_mesh(coords3), lam, mu).toarray()


def element_coupling(coords3) -> np.ndarray:
    """Dense 3x12 pressure-divergence coupling matrix of one triangle."""
    return assemble_b(_single_element_mesh(coords3)).toarray()


def element_pressure_laplacian(coords3) -> np.ndarray:
    """Dense 3x3 unit-coefficient pressure Laplacian of one triangle."""
    return p1_laplacian(_single_element_mesh(coords3), 1.0).toarray()
