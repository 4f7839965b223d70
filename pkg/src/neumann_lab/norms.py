"""Discrete L2, sup and Holder-scale norms.

The Holder seminorm of a sampled field is the exact maximum of
|v(x) - v(y)| / |x - y|^alpha over all unordered node pairs.  Two
strategies compute it:

* ``brute_force`` scans every pair (in cache-sized square tiles);
* ``pruned`` scans the same tiles ordered by decreasing value spread
  and skips a tile when an upper bound on its best quotient -- the
  smaller of the global bound 2 max|v| and the tile's own value spread,
  divided by a lower bound on its minimum pair distance -- cannot
  exceed the running maximum.

Both strategies apply identical per-pair arithmetic, so the returned
maxima agree bitwise; only witness tie-breaking may differ.  Volume
fields use Euclidean distance between nodes; boundary fields use
arclength along the boundary loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInput
from .field import BoundaryFunction, GridFunction, gradient

TILE = 512

STRATEGIES = ("brute_force", "pruned")


@dataclass(frozen=True)
class HolderParams:
    """Exponent, derivative order and pair strategy for Holder norms."""

    alpha: float
    derivative_order: int = 0
    pair_strategy: str = "brute_force"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.derivative_order not in (0, 1, 2):
            raise ConfigError(f"derivative order must be 0, 1 or 2, got {self.derivative_order}")
        if self.pair_strategy not in STRATEGIES:
            raise ConfigError(f"unknown pair strategy {self.pair_strategy!r}")


@dataclass
class HolderReport:
    """Norm breakdown: per-order sup norms, top-order seminorm, witness."""

    sup_norms: tuple          # orders 0..k, each the max over derivative components
    seminorm: float           # max over top-order components of the pairwise seminorm
    witness: tuple            # pair of node coordinates attaining the seminorm
    total: float              # sum(sup_norms) + seminorm
    pairs_evaluated: int

    def to_json(self):
        return {
            "sup_norms": [float(v) for v in self.sup_norms],
            "seminorm": float(self.seminorm),
            "witness": [[float(c) for c in np.atleast_1d(p)] for p in self.witness],
            "total": float(self.total),
            "pairs_evaluated": int(self.pairs_evaluated),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(sup_norms=tuple(obj["sup_norms"]), seminorm=obj["seminorm"],
                   witness=tuple(np.asarray(p) for p in obj["witness"]),
                   total=obj["total"], pairs_evaluated=obj["pairs_evaluated"])


def l2_norm(u):
    """Quadrature-weighted L2 norm of a volume or boundary field."""
    if isinstance(u, BoundaryFunction):
        return float(np.sqrt(np.dot(u.mesh.w_bnd, u.values**2)))
    return float(np.sqrt(np.dot(u.mesh.w_vol, u.interior**2)))


# ---------------------------------------------------------------------------
# pairwise maximum kernel

def _as_points(coords, n):
    """Coordinates as an (n, d) array; 1D inputs become a column."""
    pts = np.asarray(coords, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] != n:
        raise ConfigError(f"coordinates must have shape ({n}, d), got {pts.shape}")
    return pts


def _tiles_euclidean(coords, comps):
    """Sorted order, tile slices and per-tile stats for the Euclidean metric."""
    n = coords.shape[0]
    if coords.shape[1] > 1:
        order = np.lexsort((coords[:, 1], coords[:, 0]))
    else:
        order = np.argsort(coords[:, 0], kind="stable")
    P = coords[order]
    V = np.ascontiguousarray(comps[:, order])
    cuts = list(range(0, n, TILE)) + [n]
    chunks = [slice(cuts[k], cuts[k + 1]) for k in range(len(cuts) - 1)]
    lo = np.array([P[c].min(axis=0) for c in chunks])
    hi = np.array([P[c].max(axis=0) for c in chunks])
    vlo = np.array([V[:, c].min(axis=1) for c in chunks]).T  # (m, nchunks)
    vhi = np.array([V[:, c].max(axis=1) for c in chunks]).T
    tiles = []
    nc = len(chunks)
    for p in range(nc):
        for q in range(p, nc):
            gap = np.maximum(0.0, np.maximum(lo[q] - hi[p], lo[p] - hi[q]))
            dmin = float(np.sqrt((gap**2).sum()))
            spread = np.maximum(vhi[:, p], vhi[:, q]) - np.minimum(vlo[:, p], vlo[:, q])
            tiles.append((p, q, dmin, spread))
    # decreasing value spread (max over components), deterministic tie-break
    tiles.sort(key=lambda t: (-float(t[3].max()), t[0], t[1]))
    return order, P, V, chunks, tiles


def _tile_d2(P, chunks, p, q, period):
    cp, cq = chunks[p], chunks[q]
    if period is None:
        diff = P[cp, None, :] - P[None, cq, :]
        d2 = (diff**2).sum(axis=2)
    else:
        d = np.abs(P[cp, None, 0] - P[None, cq, 0])
        d = np.minimum(d, period - d)
        d2 = d * d
    if p == q:
        m = cp.stop - cp.start
        r = np.arange(m)
        d2[r[None, :] <= r[:, None]] = np.inf
    d2[d2 == 0.0] = np.inf
    return d2


def pairwise_holder_max(coords, comps, alphas, strategy="brute_force", period=None):
    """Maximum Holder quotients for several components and exponents.

    coords: (n, d) node positions (with ``period`` set, coords[:, 0] is
    an arclength coordinate on a loop of that length).  comps: (m, n)
    sampled fields sharing those nodes.  Returns (best, witnesses,
    pairs_evaluated) where best has shape (m, len(alphas)) and
    witnesses holds the lexicographically smallest attaining node-index
    pair per entry (ties may resolve differently under pruning).
    """
    comps = np.atleast_2d(np.asarray(comps, dtype=float))
    coords = _as_points(coords, comps.shape[1])
    n = coords.shape[0]
    if n < 2:
        raise DegenerateInput("need at least two nodes for a pairwise seminorm")
    if np.all(coords.max(axis=0) == coords.min(axis=0)):
        raise DegenerateInput("all nodes coincide")
    alphas = tuple(float(a) for a in alphas)
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {a}")
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown pair strategy {strategy!r}")

    order, P, V, chunks, tiles = _tiles_euclidean(coords, comps)
    m, na = comps.shape[0], len(alphas)
    gmax = 2.0 * np.abs(V).max(axis=1)            # per component
    best = np.full((m, na), -np.inf)
    cand = [[[] for _ in range(na)] for _ in range(m)]
    pairs = 0

    for p, q, dmin, spread in tiles:
        live = np.ones((m, na), dtype=bool)
        if strategy == "pruned":
            num = np.minimum(gmax, spread)         # (m,)
            for ia, a in enumerate(alphas):
                if dmin > 0.0:
                    bound = num * dmin**(-a)
                else:
                    bound = np.where(num > 0.0, np.inf, 0.0)
                live[:, ia] = bound > best[:, ia]
            if not live.any():
                continue
        d2 = _tile_d2(P, chunks, p, q, period)
        had_mask = not np.all(np.isfinite(d2))
        mask = ~np.isfinite(d2) if had_mask else None
        with np.errstate(divide="ignore"):
            ld = np.log(d2)
        cp, cq = chunks[p], chunks[q]
        if p == q:
            mm = cp.stop - cp.start
            pairs += mm * (mm - 1) // 2
        else:
            pairs += (cp.stop - cp.start) * (cq.stop - cq.start)
        dv = {}
        for ia, a in enumerate(alphas):
            if not live[:, ia].any():
                continue
            w = np.exp(ld * (-0.5 * a))
            for ic in range(m):
                if not live[ic, ia]:
                    continue
                if ic not in dv:
                    dv[ic] = np.abs(V[ic, cp, None] - V[ic, None, cq])
                quot = dv[ic] * w
                if had_mask:
                    quot[mask] = -1.0
                tile_max = float(quot.max())
                if tile_max > best[ic, ia]:
                    best[ic, ia] = tile_max
                    cand[ic][ia] = [(p, q)]
                elif tile_max == best[ic, ia]:
                    cand[ic][ia].append((p, q))

    witnesses = np.zeros((m, na, 2), dtype=int)
    for ic in range(m):
        for ia, a in enumerate(alphas):
            witnesses[ic, ia] = _resolve_witness(
                P, V, chunks, order, cand[ic][ia], ic, a, best[ic, ia], period)
    return best, witnesses, pairs


def _resolve_witness(P, V, chunks, order, tile_list, ic, alpha, value, period):
    """Lexicographically smallest original-index pair attaining ``value``."""
    best_pair = None
    for p, q in tile_list:
        d2 = _tile_d2(P, chunks, p, q, period)
        with np.errstate(divide="ignore"):
            w = np.exp(np.log(d2) * (-0.5 * alpha))
        cp, cq = chunks[p], chunks[q]
        quot = np.abs(V[ic, cp, None] - V[ic, None, cq]) * w
        mask = ~np.isfinite(d2)
        if mask.any():
            quot[mask] = -1.0
        ii, jj = np.nonzero(quot == value)
        for a_, b_ in zip(ii, jj):
            oi = int(order[cp.start + a_])
            oj = int(order[cq.start + b_])
            pair = (min(oi, oj), max(oi, oj))
            if best_pair is None or pair < best_pair:
                best_pair = pair
    return best_pair if best_pair is not None else (0, 0)


# ---------------------------------------------------------------------------
# public norm operations

def _field_samples(values, coords, period):
    """Normalize op input to (values, coords, period)."""
    if isinstance(values, GridFunction):
        return values.all_values(), values.all_xy(), None
    if isinstance(values, BoundaryFunction):
        mesh = values.mesh
        if mesh.dim == 2:
            return values.values, mesh.arc[:, None], mesh.boundary_measure
        return values.values, mesh.boundary_xy, None
    if coords is None:
        raise ConfigError("raw sample arrays need explicit coordinates")
    return np.asarray(values, dtype=float), np.asarray(coords, dtype=float), period


def holder_seminorm(values, params, coords=None, period=None):
    """Exact pairwise Holder seminorm of sampled values.

    ``values`` may be a GridFunction (Euclidean node distances), a
    BoundaryFunction (arclength distances along the loop), or a raw
    array with explicit ``coords``.  Returns (seminorm, witness) with
    the witness as a pair of node coordinates.
    """
    vals, xy, per = _field_samples(values, coords, period)
    vals = np.asarray(vals, dtype=float)
    xy = _as_points(xy, vals.shape[0])
    best, wit, _ = pairwise_holder_max(xy, vals[None, :], (params.alpha,),
                                       strategy=params.pair_strategy, period=per)
    i, j = wit[0, 0]
    return float(best[0, 0]), (xy[i].copy(), xy[j].copy())


def _derivative_stack(u, k):
    """Component fields of each derivative order 0..k."""
    if isinstance(u, GridFunction):
        stack = [[u]]
        current = [u]
        for _ in range(k):
            current = [c for comp in current for c in gradient(comp)]
            stack.append(current)
        return stack
    # boundary field: derivatives along the boundary
    mesh = u.mesh
    stack = [[u]]
    if mesh.dim == 1:
        # a two-point boundary has no tangential direction; higher
        # derivative orders contribute nothing
        zero = BoundaryFunction.zeros(mesh)
        for _ in range(k):
            stack.append([zero])
        return stack
    edge = mesh.w_bnd / mesh.h_theta      # dl/dtheta at the nodes
    current = u
    for _ in range(k):
        dv = (np.roll(current.values, -1) - np.roll(current.values, 1)) / (2 * mesh.h_theta)
        current = BoundaryFunction(mesh, dv / edge)
        stack.append([current])
    return stack


def _comp_values(comp):
    if isinstance(comp, GridFunction):
        return comp.all_values()
    return comp.values


def holder_report_bundle(u, k, alphas, pair_strategy="pruned"):
    """HolderReports of one field for several exponents in a single pass.

    The derivative fields and the pairwise distance work are shared
    across exponents, which is what makes the estimate sweeps cheap.
    """
    if k not in (0, 1, 2):
        raise ConfigError(f"derivative order must be 0, 1 or 2, got {k}")
    stack = _derivative_stack(u, k)
    sup_norms = tuple(
        float(max(np.abs(_comp_values(c)).max() for c in comps)) for comps in stack)
    top = stack[k]
    vals = np.vstack([_comp_values(c) for c in top])
    if isinstance(u, BoundaryFunction) and u.mesh.dim == 1:
        # only the order-0 seminorm is meaningful on a two-point boundary
        if k == 0:
            xy = u.mesh.boundary_xy
            best, wit, pairs = pairwise_holder_max(xy, vals, alphas)
        else:
            best = np.zeros((vals.shape[0], len(alphas)))
            wit = np.zeros((vals.shape[0], len(alphas), 2), dtype=int)
            xy = u.mesh.boundary_xy
            pairs = 0
    else:
        _, xy, per = _field_samples(u if k == 0 else top[0], None, None)
        best, wit, pairs = pairwise_holder_max(xy, vals, alphas,
                                               strategy=pair_strategy, period=per)
    reports = {}
    for ia, a in enumerate(alphas):
        ic = int(np.argmax(best[:, ia]))
        i, j = wit[ic, ia]
        seminorm = float(best[ic, ia])
        reports[a] = HolderReport(
            sup_norms=sup_norms,
            seminorm=seminorm,
            witness=(np.atleast_1d(xy[i]).copy(), np.atleast_1d(xy[j]).copy()),
            total=float(sum(sup_norms) + seminorm),
            pairs_evaluated=int(pairs) * len(top),
        )
    return reports


def c_k_alpha_norm(u, k, alpha, pair_strategy="pruned"):
    """Discrete Holder norm report of order k in C^{k,alpha}.

    The total is sum over orders j <= k of the order-j sup norm (max
    over derivative components) plus the top-order pairwise seminorm
    (max over components).  Boundary fields are differentiated along
    arclength and measured in arclength distance.
    """
    return holder_report_bundle(u, k, (alpha,), pair_strategy)[alpha]
