"""Frustration indices and magnetic Cheeger constants of vertex subsets.

The frustration of a subset is the minimum over vertex angles ``psi`` of

    F(psi) = sum_{e=(u,v) inside the subset} q_e |wrap(theta_e + psi_v - psi_u)|,

the U(1) geodesic defect of ``tau = exp(i psi)`` along each edge, weighted by
the edge's frustration weight.  Every reported Cheeger value is the ratio of
a concrete feasible family of subsets, hence an upper bound on the constant.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.cluster.vq import kmeans2
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import kernels
from .eigensolve import DEFAULT_SEED, Spectrum
from .geometry import DiscretizedManifold
from .magnetic import MagneticPotential

DIRECTION = "upper-bound-on-h_k"
N_STARTS = 8
KMEANS_RESTARTS = 16
REFINE = 16


class EmptySubsetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VertexSubset:
    indices: np.ndarray
    vol: float
    cut_edges: np.ndarray

    @property
    def size(self) -> int:
        return len(self.indices)


def subset(M: DiscretizedManifold, indices) -> VertexSubset:
    idx = np.unique(np.asarray(indices, dtype=np.int64))
    if idx.size == 0:
        raise EmptySubsetError("vertex subset is empty")
    if idx[0] < 0 or idx[-1] >= M.n_vertices:
        raise IndexError("vertex index out of range")
    inset = np.zeros(M.n_vertices, bool)
    inset[idx] = True
    cut = np.flatnonzero(inset[M.edges[:, 0]] != inset[M.edges[:, 1]])
    idx.flags.writeable = False
    return VertexSubset(indices=idx, vol=float(M.vertex_volume[idx].sum()), cut_edges=cut)


def _as_subset(M, omega):
    return omega if isinstance(omega, VertexSubset) else subset(M, omega)


def boundary_area(M: DiscretizedManifold, omega) -> float:
    """Sum of perimeter weights over edges leaving the subset."""
    om = _as_subset(M, omega)
    return float(M.perimeter_weight[om.cut_edges].sum())


def _induced(M, P, idx):
    N = M.n_vertices
    local = np.full(N, -1, dtype=np.int64)
    local[idx] = np.arange(len(idx))
    u, v = M.edges.T
    mask = (local[u] >= 0) & (local[v] >= 0)
    return local[u[mask]], local[v[mask]], P.edge_phase[mask], M.frustration_weight[mask]


def _incidence_csr(n, lu, lv, th, q):
    # incidence at lu sees defect th + psi_lv - psi_lu; at lv the negated phase
    rows = np.concatenate([lu, lv])
    cols = np.concatenate([lv, lu])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    ophase = np.concatenate([th, -th])[order]
    weight = np.concatenate([q, q])[order]
    indptr = np.searchsorted(rows, np.arange(n + 1)).astype(np.int64)
    return indptr, cols.astype(np.int64), np.ascontiguousarray(ophase), np.ascontiguousarray(weight)


def minimize_frustration(M: DiscretizedManifold, P: MagneticPotential, omega, *,
                         starts: int = N_STARTS, rtol: float = 1e-10, max_sweeps: int = 10_000,
                         seed: int = DEFAULT_SEED):
    """Best ``(value, psi)`` found for the frustration of a subset.

    Each start fixes the gauge along a BFS spanning tree of the induced
    subgraph (zero defect on tree edges, so only the independent cycle
    defects remain) and then runs cyclic coordinate descent.  Starts differ in
    the BFS root and, for odd starts, a seeded perturbation of the angles.
    ``psi`` is indexed like the sorted subset.
    """
    P.check_host(M)
    om = _as_subset(M, omega)
    idx = om.indices
    n = len(idx)
    lu, lv, th, q = _induced(M, P, idx)
    psi_best = np.zeros(n)
    if len(lu) == 0:
        return 0.0, psi_best
    G = sp.csr_matrix((np.ones(len(lu)), (lu, lv)), shape=(n, n))
    ncomp, labels = connected_components(G, directed=False)
    if len(lu) <= n - ncomp:
        # induced subgraph is a forest: the tree gauge already has zero defect
        psi = np.zeros(n)
        _apply_tree_gauge(G, lu, lv, th, labels, ncomp, 0, starts, psi)
        return 0.0, psi
    indptr, nbr, ophase, weight = _incidence_csr(n, lu, lv, th, q)
    best = np.inf
    for s in range(starts):
        psi = np.zeros(n)
        _apply_tree_gauge(G, lu, lv, th, labels, ncomp, s, starts, psi)
        f0 = kernels.frustration_objective(indptr, nbr, ophase, weight, psi)
        if f0 <= 1e-14 * max(1.0, float(q.sum())):
            return 0.0, psi
        if s % 2 == 1:
            rng = np.random.default_rng([seed, s])
            psi += (0.25 * np.pi * s / starts) * rng.uniform(-1.0, 1.0, n)
        val, _ = kernels.frustration_descent(indptr, nbr, ophase, weight, psi, max_sweeps, rtol)
        if val < best:
            best, psi_best = val, psi.copy()
    return float(best), psi_best


def _apply_tree_gauge(G, lu, lv, th, labels, ncomp, s, starts, psi):
    n = G.shape[0]
    phase = sp.csr_matrix((np.concatenate([th, -th]), (np.concatenate([lu, lv]), np.concatenate([lv, lu]))),
                          shape=(n, n))
    pred_phase = np.zeros(n)
    pred = np.full(n, -1, dtype=np.int64)
    orders = []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        root = members[(s * len(members)) // starts]
        order, preds = breadth_first_order(G, root, directed=False, return_predecessors=True)
        sel = order[1:]
        pred[sel] = preds[sel]
        pred_phase[sel] = np.asarray(phase[pred[sel], sel]).ravel()
        orders.append(order)
    order = np.concatenate(orders).astype(np.int64)
    kernels.tree_gauge(order, pred, pred_phase, psi)


def frustration_index(M: DiscretizedManifold, P: MagneticPotential, omega, **kw) -> float:
    """Discrete frustration index of a nonempty vertex subset."""
    return minimize_frustration(M, P, omega, **kw)[0]


def cheeger_ratio(M: DiscretizedManifold, P: MagneticPotential, omega, **kw) -> float:
    """``(frustration + boundary area) / volume``."""
    return _evaluate(M, P, _as_subset(M, omega), **kw)["phi"]


def _evaluate(M, P, om, provenance="", **kw):
    iota = frustration_index(M, P, om, **kw)
    area = boundary_area(M, om)
    return {"iota": iota, "area": area, "vol": om.vol, "phi": (iota + area) / om.vol,
            "size": om.size, "provenance": provenance, "indices": om.indices}


@dataclass(eq=False)
class CheegerReport:
    k: int
    value: float
    parts: list
    labels: np.ndarray
    candidates_tried: int
    near_exact: bool = False
    model: str = ""
    potential: str = ""
    directionality: str = DIRECTION
    provenance: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "value": self.value,
            "directionality": self.directionality,
            "near_exact": self.near_exact,
            "model": self.model,
            "potential": self.potential,
            "candidates_tried": self.candidates_tried,
            "parts": [{k: v for k, v in p.items() if k != "indices"} for p in self.parts],
            "provenance": self.provenance,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write_partition_csv(self, path) -> None:
        """``vertex,part`` rows; ``-1`` marks vertices in no reported subset."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex", "part"])
            for u, p in enumerate(self.labels):
                w.writerow([u, int(p)])


def _prefix_stats(M, order):
    """Volume and boundary area of every prefix ``order[:m]``, ``m = 1..N-1``."""
    N = M.n_vertices
    rank = np.empty(N, dtype=np.int64)
    rank[order] = np.arange(N)
    ru, rv = rank[M.edges[:, 0]], rank[M.edges[:, 1]]
    lo, hi = np.minimum(ru, rv), np.maximum(ru, rv)
    # edge is cut by prefix m iff lo < m <= hi
    delta = np.zeros(N + 1)
    np.add.at(delta, lo + 1, M.perimeter_weight)
    np.add.at(delta, hi + 1, -M.perimeter_weight)
    area = np.cumsum(delta)[1:N]
    vol = np.cumsum(M.vertex_volume[order])[: N - 1]
    return vol, area


def _coordinate_orders(M):
    """Vertex orderings whose prefixes are axis-aligned caps, arcs or strips."""
    X = np.asarray(M.vertices)
    out = []
    if M.kind == "circle":
        ang = np.arctan2(X[:, 1], X[:, 0])
        n = M.n_vertices
        for off in (0, n // 4, n // 2, (3 * n) // 4):
            out.append((f"arc@{off}", np.roll(np.arange(n), -off)))
        out.append(("angle", np.argsort(ang, kind="stable")))
    else:
        for a in range(X.shape[1]):
            o = np.argsort(X[:, a], kind="stable")
            out += [(f"axis{a}+", o), (f"axis{a}-", o[::-1])]
    return out


def _box_candidates(M):
    if M.kind != "torus":
        return []
    n1, n2 = M.params["n1"], M.params["n2"]
    j, i = np.divmod(np.arange(M.n_vertices), n1)
    out = []
    for a in range(1, n1 + 1):
        for b in range(1, n2 + 1):
            if a == n1 and b == n2:
                continue
            out.append((f"box{a}x{b}", np.flatnonzero((i < a) & (j < b))))
    return out


def _sweep_candidates(M, S):
    fams = []
    if S is not None and S.k >= 1:
        mag = np.abs(S.eigenvectors[:, 0])
        o = np.lexsort((np.arange(M.n_vertices), -mag))
        fams += [("sweep|x1|-super", o), ("sweep|x1|-sub", o[::-1])]
    return fams + _coordinate_orders(M)


def estimate_h1(M: DiscretizedManifold, P: MagneticPotential, S: Spectrum | None = None, *,
                seed: int = DEFAULT_SEED, **kw) -> CheegerReport:
    """Smallest Cheeger ratio over sweep sets of ``|x_1|``, axis-aligned sets and the full set.

    Candidates are visited in increasing order of ``area / vol``, a lower
    bound on their ratio, and the search stops once that bound exceeds the
    best ratio found.
    """
    P.check_host(M)
    N = M.n_vertices
    cands = []  # (lower bound, provenance, indices or (order, m))
    cands.append((0.0, "full", None, N))
    for name, order in _sweep_candidates(M, S):
        vol, area = _prefix_stats(M, order)
        for m in range(1, N):
            cands.append((area[m - 1] / vol[m - 1], f"{name}[{m}]", order, m))
    for name, idx in _box_candidates(M):
        om = subset(M, idx)
        cands.append((boundary_area(M, om) / om.vol, name, idx, -1))
    cands.sort(key=lambda c: (c[0], c[1]))
    # screen with a single start (an upper bound on each ratio), then refine
    # the most promising sets with the full multi-start search
    screened = []
    best_screen = np.inf
    for lb, name, order, m in cands:
        if lb >= best_screen:
            break
        if order is None:
            idx = np.arange(N)
        elif m < 0:
            idx = order
        else:
            idx = order[:m]
        ev = _evaluate(M, P, subset(M, idx), provenance=name, seed=seed, starts=1)
        screened.append((lb, ev))
        best_screen = min(best_screen, ev["phi"])
    tried = len(screened)
    screened.sort(key=lambda c: (c[1]["phi"], c[1]["provenance"]))
    best = None
    for lb, ev in screened[:REFINE]:
        if best is not None and lb >= best["phi"]:
            continue
        full = _evaluate(M, P, subset(M, ev["indices"]), provenance=ev["provenance"], seed=seed, **kw)
        if full["phi"] > ev["phi"]:
            full = ev
        if best is None or full["phi"] < best["phi"]:
            best = full
    labels = np.full(N, -1, dtype=np.int64)
    labels[best["indices"]] = 0
    return CheegerReport(k=1, value=float(best["phi"]), parts=[best], labels=labels,
                         candidates_tried=tried, near_exact=(M.kind == "circle"),
                         model=M.describe(), potential=P.descriptor,
                         provenance=[best["provenance"]])


def _best_component(M, P, idx, provenance, **kw):
    """Connected component of the induced subgraph with the smallest ratio."""
    inset = np.zeros(M.n_vertices, bool)
    inset[idx] = True
    u, v = M.edges.T
    mask = inset[u] & inset[v]
    G = sp.csr_matrix((np.ones(mask.sum()), (u[mask], v[mask])), shape=(M.n_vertices,) * 2)
    _, lab = connected_components(G, directed=False)
    best = None
    for c in np.unique(lab[idx]):
        comp = idx[lab[idx] == c]
        ev = _evaluate(M, P, subset(M, comp), provenance=provenance, **kw)
        if best is None or ev["phi"] < best["phi"]:
            best = ev
    return best


def _partition_value(M, P, parts, provenance, **kw):
    evs = [_best_component(M, P, p, provenance, **kw) for p in parts]
    return max(e["phi"] for e in evs), evs


def _spectral_features(X):
    # gauge-invariant embedding: x(u) x(u)^H / |x(u)|
    nrm = np.linalg.norm(X, axis=1)
    nrm = np.where(nrm > 0, nrm, 1.0)
    k = X.shape[1]
    iu = np.triu_indices(k)
    outer = X[:, :, None] * X[:, None, :].conj() / nrm[:, None, None]
    flat = outer[:, iu[0], iu[1]]
    return np.hstack([flat.real, flat.imag])


def _kmeans_partitions(X, k, seed):
    feats = _spectral_features(X)
    out = []
    for r in range(KMEANS_RESTARTS):
        rng = np.random.default_rng([seed, r])
        _, lab = kmeans2(feats, k, minit="++", seed=rng, missing="warn")
        out.append(lab)
    return out


def _equal_volume_partitions(M, k):
    parts = []
    mu = M.vertex_volume
    for name, order in _coordinate_orders(M):
        cum = np.cumsum(mu[order])
        tot = cum[-1]
        shifts = [0.0, 0.5] if (M.kind in ("circle", "torus")) else [0.0]
        for sh in shifts:
            edges = (np.arange(1, k) + sh) * tot / k
            cuts = np.searchsorted(cum, edges)
            chunks = np.split(order, cuts)
            if sh:
                # wrap the tail into the first chunk for periodic coordinates
                chunks = [np.concatenate([chunks[-1], chunks[0]])] + chunks[1:-1]
            chunks = [c for c in chunks if len(c)]
            if len(chunks) == k:
                parts.append((f"equal-{name}+{sh}", chunks))
    return parts


def estimate_hk(M: DiscretizedManifold, P: MagneticPotential, S: Spectrum, k: int, *,
                seed: int = DEFAULT_SEED, **kw) -> CheegerReport:
    """Upper bound on the k-way constant from spectral and axis-aligned partitions.

    Spectral candidates cluster the gauge-invariant embedding
    ``x(u) x(u)^H`` of the first ``k`` eigenvectors with seeded k-means;
    each part is replaced by its best connected component, which keeps the
    parts disjoint and never raises their ratio.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if S.k < k:
        raise ValueError(f"spectrum holds {S.k} eigenvectors, need {k}")
    P.check_host(M)
    N = M.n_vertices
    candidates = []
    for r, lab in enumerate(_kmeans_partitions(S.eigenvectors[:, :k], k, seed)):
        parts = [np.flatnonzero(lab == c) for c in range(k)]
        parts = [p for p in parts if len(p)]
        if len(parts) == k:
            candidates.append((f"kmeans[{r}]", parts))
    if k > 1:
        candidates += _equal_volume_partitions(M, k)
    best_val, best_evs, best_name = np.inf, None, None
    seen = set()
    for name, parts in candidates:
        key = tuple(sorted(tuple(p[:3]) + (len(p),) for p in parts))
        if key in seen:
            continue
        seen.add(key)
        val, evs = _partition_value(M, P, parts, name, seed=seed, **kw)
        if val < best_val:
            best_val, best_evs, best_name = val, evs, name
    tried = len(seen)
    if k == 1:
        h1 = estimate_h1(M, P, S, seed=seed, **kw)
        tried += h1.candidates_tried
        if best_evs is None or h1.value <= best_val:
            best_val, best_evs, best_name = h1.value, h1.parts, h1.provenance[0]
    if best_evs is None:
        raise RuntimeError(f"no feasible {k}-way partition found")
    labels = np.full(N, -1, dtype=np.int64)
    for p, ev in enumerate(best_evs):
        labels[ev["indices"]] = p
    return CheegerReport(k=k, value=float(best_val), parts=best_evs, labels=labels,
                         candidates_tried=tried, near_exact=False,
                         model=M.describe(), potential=P.descriptor, provenance=[best_name])
