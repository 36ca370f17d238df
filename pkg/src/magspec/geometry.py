"""Discrete models of closed manifolds: the circle, flat tori and the unit sphere.

Every builder returns a :class:`DiscretizedManifold` carrying the metric data
used downstream: vertex volumes (lumped mass), edge lengths, stiffness
conductances, perimeter weights (dual-facet measure of an edge, used for
boundary areas of vertex subsets) and frustration weights (edge volume over
edge length, used for the L1 twisted-derivative integral).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

COT_CLAMP = 1e-8


class GeometryError(ValueError):
    """Raised for invalid builder arguments."""


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class DiscretizedManifold:
    """Weighted graph/mesh model of a closed Riemannian manifold.

    Edges are stored once, oriented ``edges[e] = (u, v)``.  Faces and
    homology generators are oriented edge cycles given as
    ``(edge_indices, signs)`` pairs, ``sign = +1`` when the cycle traverses
    the edge along its stored orientation.
    """

    kind: str
    dimension: int
    vertices: np.ndarray
    vertex_volume: np.ndarray
    edges: np.ndarray
    edge_length: np.ndarray
    conductance: np.ndarray
    perimeter_weight: np.ndarray
    frustration_weight: np.ndarray
    face_edges: np.ndarray
    face_signs: np.ndarray
    face_vertices: np.ndarray
    face_area: np.ndarray
    homology_generators: tuple
    ricci_lower_bound: float
    params: dict = field(default_factory=dict)
    fingerprint: str = ""

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_volume)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.face_area)

    @property
    def volume(self) -> float:
        return float(self.vertex_volume.sum())

    @property
    def is_structured(self) -> bool:
        return self.kind in ("circle", "torus")

    def describe(self) -> str:
        p = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.kind}({p})"

    def grid_axes(self):
        """Stencil data for structured grids.

        Returns a list with one entry per axis: ``(h, fwd_vertex, fwd_edge,
        bwd_vertex, bwd_edge)`` where ``fwd_edge[u]`` is the edge from ``u``
        to ``fwd_vertex[u]`` traversed along its stored orientation and
        ``bwd_edge[u]`` the edge from ``bwd_vertex[u]`` to ``u``.
        """
        if self.kind == "circle":
            n = self.params["n_verts"]
            idx = np.arange(n)
            h = self.params["L"] / n
            return [(h, (idx + 1) % n, idx, (idx - 1) % n, (idx - 1) % n)]
        if self.kind == "torus":
            n1, n2 = self.params["n1"], self.params["n2"]
            h1 = self.params["L1"] / n1
            h2 = self.params["L2"] / n2
            N = n1 * n2
            j, i = np.divmod(np.arange(N), n1)
            vid = lambda a, b: (a % n1) + n1 * (b % n2)  # noqa: E731
            xs = (h1, vid(i + 1, j), vid(i, j), vid(i - 1, j), vid(i - 1, j))
            ys = (h2, vid(i, j + 1), N + vid(i, j), vid(i, j - 1), N + vid(i, j - 1))
            return [xs, ys]
        raise GeometryError(f"no stencil for model kind {self.kind!r}")

    def write_off(self, path) -> None:
        """Write vertices and triangulated faces in OFF format."""
        verts = np.asarray(self.vertices, dtype=float)
        if verts.shape[1] < 3:
            verts = np.hstack([verts, np.zeros((len(verts), 3 - verts.shape[1]))])
        tris = []
        for fv in self.face_vertices:
            for t in range(1, len(fv) - 1):
                tris.append((fv[0], fv[t], fv[t + 1]))
        with open(path, "w") as fh:
            fh.write("OFF\n")
            fh.write(f"{len(verts)} {len(tris)} 0\n")
            for x in verts:
                fh.write(f"{x[0]:.17g} {x[1]:.17g} {x[2]:.17g}\n")
            for t in tris:
                fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def _finish(**kw) -> DiscretizedManifold:
    tag = repr((kw["kind"], sorted(kw["params"].items()),
                len(kw["vertex_volume"]), len(kw["edges"])))
    kw["fingerprint"] = hashlib.sha1(tag.encode()).hexdigest()[:16]
    for name in ("vertices", "vertex_volume", "edge_length", "conductance",
                 "perimeter_weight", "frustration_weight", "face_area"):
        kw[name] = _frozen(kw[name], float)
    for name in ("edges", "face_edges", "face_signs", "face_vertices"):
        kw[name] = _frozen(kw[name], np.int64)
    kw["homology_generators"] = tuple(
        (_frozen(e, np.int64), _frozen(s, np.int64)) for e, s in kw["homology_generators"]
    )
    return DiscretizedManifold(**kw)


def circle_grid(L: float, n_verts: int) -> DiscretizedManifold:
    """Uniform cycle graph discretizing the circle of length ``L``."""
    if not L > 0:
        raise GeometryError(f"circle length must be positive, got {L}")
    if n_verts < 8:
        raise GeometryError(f"need at least 8 vertices, got {n_verts}")
    n = int(n_verts)
    h = L / n
    idx = np.arange(n)
    ang = 2 * np.pi * idx / n
    R = L / (2 * np.pi)
    ones = np.ones(n)
    return _finish(
        kind="circle",
        dimension=1,
        vertices=np.column_stack([R * np.cos(ang), R * np.sin(ang)]),
        vertex_volume=h * ones,
        edges=np.column_stack([idx, (idx + 1) % n]),
        edge_length=h * ones,
        conductance=ones / h,
        perimeter_weight=ones,
        frustration_weight=ones,
        face_edges=np.zeros((0, 0)),
        face_signs=np.zeros((0, 0)),
        face_vertices=np.zeros((0, 0)),
        face_area=np.zeros(0),
        homology_generators=[(idx, ones)],
        ricci_lower_bound=0.0,
        params={"L": float(L), "n_verts": n},
    )


def torus_grid(L1: float, L2: float, n1: int, n2: int) -> DiscretizedManifold:
    """Periodic ``n1 x n2`` rectangular grid on the flat torus ``[0,L1) x [0,L2)``.

    Vertex ``(i, j)`` has index ``i + n1*j``; x-edge ``(i,j)->(i+1,j)`` has
    the same index as its tail vertex and y-edge ``(i,j)->(i,j+1)`` is offset
    by ``n1*n2``.
    """
    if not (L1 > 0 and L2 > 0):
        raise GeometryError(f"torus side lengths must be positive, got {L1}, {L2}")
    if n1 < 8 or n2 < 8:
        raise GeometryError(f"need at least 8 vertices per direction, got {n1}x{n2}")
    n1, n2 = int(n1), int(n2)
    h1, h2 = L1 / n1, L2 / n2
    N = n1 * n2
    jj, ii = np.divmod(np.arange(N), n1)
    vid = lambda a, b: (a % n1) + n1 * (b % n2)  # noqa: E731
    xe = np.column_stack([vid(ii, jj), vid(ii + 1, jj)])
    ye = np.column_stack([vid(ii, jj), vid(ii, jj + 1)])
    ones = np.ones(N)
    face_edges = np.column_stack([vid(ii, jj), N + vid(ii + 1, jj), vid(ii, jj + 1), N + vid(ii, jj)])
    face_signs = np.tile([1, 1, -1, -1], (N, 1))
    face_vertices = np.column_stack([vid(ii, jj), vid(ii + 1, jj), vid(ii + 1, jj + 1), vid(ii, jj + 1)])
    gx = np.arange(n1)
    gy = N + n1 * np.arange(n2)
    return _finish(
        kind="torus",
        dimension=2,
        vertices=np.column_stack([ii * h1, jj * h2]),
        vertex_volume=h1 * h2 * ones,
        edges=np.vstack([xe, ye]),
        edge_length=np.concatenate([h1 * ones, h2 * ones]),
        conductance=np.concatenate([(h2 / h1) * ones, (h1 / h2) * ones]),
        perimeter_weight=np.concatenate([h2 * ones, h1 * ones]),
        frustration_weight=np.concatenate([h2 * ones, h1 * ones]),
        face_edges=face_edges,
        face_signs=face_signs,
        face_vertices=face_vertices,
        face_area=h1 * h2 * ones,
        homology_generators=[(gx, np.ones(n1)), (gy, np.ones(n2))],
        ricci_lower_bound=0.0,
        params={"L1": float(L1), "L2": float(L2), "n1": n1, "n2": n2},
    )


def _icosahedron():
    t = (1 + 5 ** 0.5) / 2
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _subdivide(verts, faces):
    verts = list(verts)
    cache = {}

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            m = verts[a] + verts[b]
            verts.append(m / np.linalg.norm(m))
            cache[key] = len(verts) - 1
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(verts), np.array(out)


def icosphere(subdivisions: int) -> DiscretizedManifold:
    """Unit-sphere triangle mesh from a repeatedly subdivided icosahedron.

    Conductances are cotangent weights clamped below at ``1e-8``; vertex
    volumes are barycentric-lumped triangle areas; the perimeter weight of an
    edge is its circumcentric dual-edge length (clamped at 0).
    """
    if not (2 <= subdivisions <= 7):
        raise GeometryError(f"subdivisions must lie in [2, 7], got {subdivisions}")
    verts, faces = _icosahedron()
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
    faces = np.asarray(faces, dtype=np.int64)
    # outward orientation
    p0, p1, p2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    nrm = np.cross(p1 - p0, p2 - p0)
    flip = np.einsum("ij,ij->i", nrm, p0 + p1 + p2) < 0
    faces[flip] = faces[flip][:, ::-1]
    p0, p1, p2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    area = 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)

    half = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    lo = np.minimum(half[:, 0], half[:, 1])
    hi = np.maximum(half[:, 0], half[:, 1])
    edges, inv = np.unique(np.column_stack([lo, hi]), axis=0, return_inverse=True)
    inv = inv.ravel()
    F = len(faces)
    face_edges = inv.reshape(3, F).T
    face_signs = np.where(half[:, 0] < half[:, 1], 1, -1).reshape(3, F).T

    # cotangent of the angle opposite each half-edge
    def cot(a, b, c):
        u, v = a - c, b - c
        return np.einsum("ij,ij->i", u, v) / np.linalg.norm(np.cross(u, v), axis=1)

    cot_opp = np.concatenate([cot(p0, p1, p2), cot(p1, p2, p0), cot(p2, p0, p1)])
    E = len(edges)
    cot_sum = np.bincount(inv, weights=cot_opp, minlength=E)
    tri_third = np.bincount(inv, weights=np.tile(area / 3.0, 3), minlength=E)
    length = np.linalg.norm(verts[edges[:, 0]] - verts[edges[:, 1]], axis=1)
    mass = np.bincount(faces.ravel(), weights=np.repeat(area / 3.0, 3), minlength=len(verts))

    return _finish(
        kind="sphere",
        dimension=2,
        vertices=verts,
        vertex_volume=mass,
        edges=edges,
        edge_length=length,
        conductance=np.maximum(0.5 * cot_sum, COT_CLAMP),
        perimeter_weight=np.maximum(0.5 * length * cot_sum, 0.0),
        frustration_weight=tri_third / length,
        face_edges=face_edges,
        face_signs=face_signs,
        face_vertices=faces,
        face_area=area,
        homology_generators=[],
        ricci_lower_bound=1.0,
        params={"subdivisions": int(subdivisions)},
    )
