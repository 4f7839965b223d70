"""Computational domains and boundary-fitted meshes.

Two domain kinds are supported: an interval (a, b) and star-shaped
planar domains whose boundary is a polar graph r = R(theta) with R a
strictly positive trigonometric polynomial.  Both admit a single global
chart, so the mesh is a structured grid in mapped coordinates:

* 1D: midpoint nodes x_j = a + (j + 1/2) h, two boundary nodes at a, b.
* 2D: the map (s, theta) -> (R(theta) s cos theta, R(theta) s sin theta)
  on (0, 1] x [0, 2pi), with staggered radial nodes s_j = (j + 1/2) h_s
  (no node at the pole) and periodic angular nodes theta_i = i h_theta.

Volume quadrature is the midpoint rule in s times the periodic
trapezoid rule in theta (weights J h_s h_theta with J = s R^2);
boundary quadrature is arclength trapezoid weights.  Meshes are
immutable and bit-reproducible for fixed inputs.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass

from .errors import ConfigError, NonPositiveRadius, ResolutionTooSmall

MIN_NODES_1D = 4
MIN_RADIAL = 4
MIN_ANGULAR = 8


def _trig_poly(a0, cos_coeffs, sin_coeffs, theta):
    """Evaluate R(theta) = a0 + sum a_k cos(k t) + b_k sin(k t) and R'."""
    theta = np.asarray(theta, dtype=float)
    r = np.full_like(theta, float(a0))
    rp = np.zeros_like(theta)
    for k, c in enumerate(cos_coeffs, start=1):
        r += c * np.cos(k * theta)
        rp -= c * k * np.sin(k * theta)
    for k, c in enumerate(sin_coeffs, start=1):
        r += c * np.sin(k * theta)
        rp += c * k * np.cos(k * theta)
    return r, rp


@dataclass(frozen=True)
class DomainSpec:
    """Description of a computational domain.

    kind is "interval" (bounds a < b) or "star_shaped" (boundary radius
    R(theta) = a0 + sum a_k cos k theta + b_k sin k theta, a0 > 0).
    """

    kind: str
    a: float = 0.0
    b: float = 1.0
    a0: float = 1.0
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("interval", "star_shaped"):
            raise ConfigError(f"unknown domain kind {self.kind!r}")
        if self.kind == "interval" and not self.a < self.b:
            raise ConfigError(f"interval needs a < b, got ({self.a}, {self.b})")
        if self.kind == "star_shaped" and not self.a0 > 0:
            raise NonPositiveRadius(f"mean radius a0 must be positive, got {self.a0}")
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(c) for c in self.sin_coeffs))

    @property
    def dim(self):
        return 1 if self.kind == "interval" else 2

    @classmethod
    def interval(cls, a=0.0, b=1.0):
        return cls(kind="interval", a=float(a), b=float(b))

    @classmethod
    def star_shaped(cls, a0=1.0, cos_coeffs=(), sin_coeffs=()):
        return cls(kind="star_shaped", a0=float(a0),
                   cos_coeffs=tuple(cos_coeffs), sin_coeffs=tuple(sin_coeffs))

    @classmethod
    def disk(cls, radius=1.0):
        return cls.star_shaped(a0=radius)

    def radius(self, theta):
        """R(theta) and R'(theta) for star-shaped domains."""
        if self.kind != "star_shaped":
            raise ConfigError("radius() only applies to star-shaped domains")
        return _trig_poly(self.a0, self.cos_coeffs, self.sin_coeffs, theta)

    def to_json(self, resolution=None):
        obj = {"kind": self.kind}
        if self.kind == "interval":
            obj["a"] = self.a
            obj["b"] = self.b
        else:
            obj["radius_coeffs"] = {
                "a0": self.a0,
                "cos": list(self.cos_coeffs),
                "sin": list(self.sin_coeffs),
            }
        if resolution is not None:
            obj["resolution"] = [int(v) for v in np.atleast_1d(resolution)]
        return obj

    @classmethod
    def from_json(cls, obj):
        """Parse the JSON object form; returns (spec, resolution or None)."""
        kind = obj.get("kind")
        if kind == "interval":
            spec = cls.interval(obj.get("a", 0.0), obj.get("b", 1.0))
        elif kind == "star_shaped":
            rc = obj.get("radius_coeffs", {})
            spec = cls.star_shaped(rc.get("a0", 1.0), rc.get("cos", ()), rc.get("sin", ()))
        else:
            raise ConfigError(f"unknown domain kind {kind!r}")
        res = obj.get("resolution")
        if res is not None:
            res = tuple(int(v) for v in np.atleast_1d(res))
            if len(res) == 1:
                res = res[0]
        return spec, res


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable structured mesh with quadrature, normals and metric terms.

    Interior nodes are indexed flat; in 2D the flat index of logical
    node (j, i) is j * n_theta + i (radial ring major).  Boundary nodes
    follow: two endpoints in 1D, the n_theta trace nodes at s = 1 in 2D.
    """

    spec: DomainSpec
    dim: int
    interior_xy: np.ndarray      # (Ni, dim)
    boundary_xy: np.ndarray      # (Nb, dim)
    w_vol: np.ndarray            # (Ni,) volume quadrature weights
    w_bnd: np.ndarray            # (Nb,) boundary quadrature weights
    normals: np.ndarray          # (Nb, dim) outward unit normals
    # 1D fields
    n: int = 0
    h: float = 0.0
    x: np.ndarray = None
    # 2D fields
    n_r: int = 0
    n_theta: int = 0
    h_s: float = 0.0
    h_theta: float = 0.0
    s: np.ndarray = None         # (n_r,) staggered radial coordinates
    theta: np.ndarray = None     # (n_theta,)
    R: np.ndarray = None         # R(theta_i), R'(theta_i)
    Rp: np.ndarray = None
    R_half: np.ndarray = None    # at theta_{i+1/2} (for angular face fluxes)
    Rp_half: np.ndarray = None
    x_s: np.ndarray = None       # mapping Jacobian entries at interior nodes
    x_t: np.ndarray = None       # shaped (n_r, n_theta)
    y_s: np.ndarray = None
    y_t: np.ndarray = None
    jdet: np.ndarray = None
    bx_s: np.ndarray = None      # Jacobian entries on the boundary (n_theta,)
    bx_t: np.ndarray = None
    by_s: np.ndarray = None
    by_t: np.ndarray = None
    b_jdet: np.ndarray = None
    arc: np.ndarray = None       # boundary arclength coordinate (n_theta,)

    @property
    def n_interior(self):
        return self.interior_xy.shape[0]

    @property
    def n_boundary(self):
        return self.boundary_xy.shape[0]

    @property
    def area(self):
        return float(self.w_vol.sum())

    @property
    def boundary_measure(self):
        return float(self.w_bnd.sum())

    @property
    def cell_size(self):
        """Largest physical spacing between radially adjacent nodes."""
        if self.dim == 1:
            return self.h
        return float(np.max(self.R) * self.h_s)

    def reshape2d(self, flat):
        return np.asarray(flat).reshape(self.n_r, self.n_theta)

    def interior_coords(self):
        """Coordinate dictionary for expression evaluation at interior nodes."""
        if self.dim == 1:
            return {"x": self.interior_xy[:, 0]}
        xx = self.interior_xy[:, 0]
        yy = self.interior_xy[:, 1]
        ss = np.repeat(self.s, self.n_theta)
        tt = np.tile(self.theta, self.n_r)
        return {"x": xx, "y": yy, "r": np.hypot(xx, yy), "theta": tt, "s": ss}

    def boundary_coords(self):
        if self.dim == 1:
            return {"x": self.boundary_xy[:, 0]}
        xx = self.boundary_xy[:, 0]
        yy = self.boundary_xy[:, 1]
        return {"x": xx, "y": yy, "r": np.hypot(xx, yy), "theta": self.theta,
                "s": np.ones(self.n_theta)}


def _freeze(*arrays):
    for a in arrays:
        if isinstance(a, np.ndarray):
            a.setflags(write=False)


def build_mesh(spec, resolution):
    """Build the boundary-fitted mesh for a domain.

    Parameters
    ----------
    spec : DomainSpec
    resolution : int for intervals (number of cells, >= 4);
        (n_r, n_theta) for star-shaped domains (>= (4, 8)).

    Raises NonPositiveRadius if R(theta) <= 0 at any of 4 * n_theta
    sample angles, ResolutionTooSmall below the minimums.
    """
    if spec.dim == 1:
        n = int(np.atleast_1d(resolution)[0])
        if n < MIN_NODES_1D:
            raise ResolutionTooSmall(f"1D mesh needs n >= {MIN_NODES_1D}, got {n}")
        return _build_interval(spec, n)
    res = np.atleast_1d(resolution)
    if res.size != 2:
        raise ConfigError("star-shaped mesh needs resolution (n_r, n_theta)")
    n_r, n_theta = int(res[0]), int(res[1])
    if n_r < MIN_RADIAL or n_theta < MIN_ANGULAR:
        raise ResolutionTooSmall(
            f"2D mesh needs (n_r, n_theta) >= ({MIN_RADIAL}, {MIN_ANGULAR}), "
            f"got ({n_r}, {n_theta})")
    return _build_star(spec, n_r, n_theta)


def _build_interval(spec, n):
    a, b = spec.a, spec.b
    h = (b - a) / n
    x = a + (np.arange(n) + 0.5) * h
    interior_xy = x[:, None].copy()
    boundary_xy = np.array([[a], [b]])
    w_vol = np.full(n, h)
    w_bnd = np.array([1.0, 1.0])
    normals = np.array([[-1.0], [1.0]])
    mesh = Mesh(spec=spec, dim=1, interior_xy=interior_xy, boundary_xy=boundary_xy,
                w_vol=w_vol, w_bnd=w_bnd, normals=normals, n=n, h=h, x=x)
    _freeze(interior_xy, boundary_xy, w_vol, w_bnd, normals, x)
    return mesh


def _build_star(spec, n_r, n_theta):
    h_s = 1.0 / n_r
    h_theta = 2.0 * np.pi / n_theta
    # positivity check by dense sampling (4 samples per angular cell)
    probe = np.arange(4 * n_theta) * (2.0 * np.pi / (4 * n_theta))
    r_probe, _ = spec.radius(probe)
    if np.any(r_probe <= 0.0):
        bad = probe[np.argmin(r_probe)]
        raise NonPositiveRadius(
            f"R(theta) <= 0 near theta = {bad:.6f} (min {r_probe.min():.3e})")

    s = (np.arange(n_r) + 0.5) * h_s
    theta = np.arange(n_theta) * h_theta
    R, Rp = spec.radius(theta)
    R_half, Rp_half = spec.radius(theta + 0.5 * h_theta)

    S = s[:, None]
    cos_t, sin_t = np.cos(theta)[None, :], np.sin(theta)[None, :]
    Rg, Rpg = R[None, :], Rp[None, :]
    X = S * Rg * cos_t
    Y = S * Rg * sin_t
    x_s = np.broadcast_to(Rg * cos_t, (n_r, n_theta)).copy()
    y_s = np.broadcast_to(Rg * sin_t, (n_r, n_theta)).copy()
    x_t = S * (Rpg * cos_t - Rg * sin_t)
    y_t = S * (Rpg * sin_t + Rg * cos_t)
    jdet = S * Rg**2
    if np.any(jdet <= 0.0):
        raise NonPositiveRadius("mapping Jacobian not positive")

    interior_xy = np.column_stack([X.ravel(), Y.ravel()])
    w_vol = (jdet * h_s * h_theta).ravel().copy()

    bx = R * np.cos(theta)
    by = R * np.sin(theta)
    boundary_xy = np.column_stack([bx, by])
    edge = np.sqrt(R**2 + Rp**2)
    w_bnd = edge * h_theta
    raw = np.column_stack([R * np.cos(theta) + Rp * np.sin(theta),
                           R * np.sin(theta) - Rp * np.cos(theta)])
    normals = raw / np.linalg.norm(raw, axis=1)[:, None]

    bx_s = R * np.cos(theta)
    by_s = R * np.sin(theta)
    bx_t = Rp * np.cos(theta) - R * np.sin(theta)
    by_t = Rp * np.sin(theta) + R * np.cos(theta)
    b_jdet = R**2  # s = 1

    # arclength coordinate of boundary nodes (periodic trapezoid cumulative)
    seg = 0.5 * (edge + np.roll(edge, -1)) * h_theta  # arc from node i to i+1
    arc = np.concatenate([[0.0], np.cumsum(seg[:-1])])

    mesh = Mesh(spec=spec, dim=2, interior_xy=interior_xy, boundary_xy=boundary_xy,
                w_vol=w_vol, w_bnd=w_bnd, normals=normals,
                n_r=n_r, n_theta=n_theta, h_s=h_s, h_theta=h_theta,
                s=s, theta=theta, R=R, Rp=Rp, R_half=R_half, Rp_half=Rp_half,
                x_s=x_s, x_t=x_t, y_s=y_s, y_t=y_t, jdet=jdet,
                bx_s=bx_s, bx_t=bx_t, by_s=by_s, by_t=by_t, b_jdet=b_jdet,
                arc=arc)
    _freeze(interior_xy, boundary_xy, w_vol, w_bnd, normals, s, theta, R, Rp,
            R_half, Rp_half, x_s, x_t, y_s, y_t, jdet, bx_s, bx_t, by_s, by_t,
            b_jdet, arc)
    return mesh


def boundary_normal(mesh, index):
    """Outward unit normal at one boundary node."""
    return mesh.normals[index]


def distance_to_boundary(mesh, points):
    """Sampled distance from points to the boundary node set.

    For intervals this is exact; for star-shaped domains it is the
    minimum distance to the boundary nodes, accurate to O(boundary
    spacing).  Callers add a one-cell safety margin where it matters.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if mesh.dim == 1:
        return np.minimum(pts[:, 0] - mesh.spec.a, mesh.spec.b - pts[:, 0])
    diff = pts[:, None, :] - mesh.boundary_xy[None, :, :]
    return np.sqrt((diff**2).sum(axis=2)).min(axis=1)
