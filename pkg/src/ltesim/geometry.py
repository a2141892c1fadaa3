"""Network layout and user drops.

Sites sit on a hexagonal lattice whose nearest neighbours lie at 30, 90,
..., 330 degrees, so every site hexagon has corners at multiples of 60
degrees and the three sectors (boresights 0, 120, 240 degrees) are rhombi
with circumradius ``isd / sqrt(3)``.  Coordinates are metres.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError

SECTOR_ORIENTATIONS = (0.0, 120.0, 240.0)


def _unit(deg):
    rad = np.deg2rad(deg)
    return np.array([np.cos(rad), np.sin(rad)])


@dataclass(frozen=True)
class Region:
    """Convex polygon, vertices in counter-clockwise order."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidParameterError("region needs at least three 2-D vertices")
        object.__setattr__(self, "vertices", v)

    @property
    def area(self):
        x, y = self.vertices.T
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @property
    def centroid(self):
        x, y = self.vertices.T
        cross = x * np.roll(y, -1) - np.roll(x, -1) * y
        a = 0.5 * cross.sum()
        cx = ((x + np.roll(x, -1)) * cross).sum() / (6 * a)
        cy = ((y + np.roll(y, -1)) * cross).sum() / (6 * a)
        return np.array([cx, cy])

    def contains(self, points, tol=1e-9):
        """Boolean mask of points inside (or on) the polygon."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        edge = b - a
        rel = p[:, None, :] - a[None, :, :]
        cross = edge[None, :, 0] * rel[..., 1] - edge[None, :, 1] * rel[..., 0]
        scale = np.linalg.norm(edge, axis=1).max()
        return np.all(cross >= -tol * scale, axis=1)

    def sample_uniform(self, n, rng):
        """``n`` i.i.d. uniform points, by area-weighted fan triangulation."""
        v = self.vertices
        tri_a = v[0]
        tri_b = v[1:-1]
        tri_c = v[2:]
        e1, e2 = tri_b - tri_a, tri_c - tri_a
        areas = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        idx = rng.choice(len(areas), size=n, p=areas / areas.sum())
        u = rng.random((n, 2))
        flip = u.sum(axis=1) > 1
        u[flip] = 1 - u[flip]
        return tri_a + u[:, :1] * (tri_b[idx] - tri_a) + u[:, 1:] * (tri_c[idx] - tri_a)


@dataclass(frozen=True)
class TransmissionPoint:
    position: np.ndarray
    n_antennas: int
    kind: str  # "macro" | "rru" | "femto"
    tx_power: float  # W
    orientation: float | None = None  # boresight in degrees; None = omni

    def __post_init__(self):
        if self.n_antennas < 1:
            raise InvalidParameterError("a transmission point needs at least one antenna")
        if not self.tx_power > 0:
            raise InvalidParameterError("tx_power must be positive")
        if self.kind not in ("macro", "rru", "femto"):
            raise InvalidParameterError(f"unknown transmission point kind {self.kind!r}")


@dataclass(frozen=True)
class Cell:
    id: int
    parent_site: int
    sector_orientation: float
    tx_points: tuple[TransmissionPoint, ...]

    @property
    def n_antennas(self):
        return sum(tp.n_antennas for tp in self.tx_points)


@dataclass(frozen=True)
class FemtoAP:
    id: int
    position: np.ndarray
    tx_power: float
    n_antennas: int = 1


@dataclass(frozen=True)
class NetworkLayout:
    sites: np.ndarray
    cells: tuple[Cell, ...]
    rrus_per_cell: int
    femtos: tuple[FemtoAP, ...]
    region: Region
    inter_site_distance: float

    @property
    def cell_radius(self):
        return self.inter_site_distance / np.sqrt(3)

    @property
    def n_cells(self):
        return len(self.cells)

    def cell_region(self, cell_id):
        """Rhombic footprint of a sector cell."""
        cell = self.cells[cell_id]
        site = self.sites[cell.parent_site]
        r = self.cell_radius
        th = cell.sector_orientation
        return Region(np.array([site, site + r * _unit(th - 60), site + r * _unit(th),
                                site + r * _unit(th + 60)]))

    def in_sector(self, cell_id, points):
        return self.cell_region(cell_id).contains(points)


def hex_site_positions(rings, isd):
    """Site centres ring by ring; the centre site is index 0."""
    a1 = isd * _unit(30.0)
    a2 = isd * _unit(90.0)
    sites = [(0, 0)]
    # walk each ring starting from the corner in direction a1 * ring
    steps = [(-1, 1), (-1, 0), (0, -1), (1, -1), (1, 0), (0, 1)]
    for ring in range(1, rings + 1):
        q, r = ring, 0
        for dq, dr in steps:
            for _ in range(ring):
                sites.append((q, r))
                q, r = q + dq, r + dr
    qr = np.array(sites, dtype=float)
    return qr[:, :1] * a1 + qr[:, 1:] * a2


def build_hex_grid(rings=1, isd=500.0, rru_fraction=2 / 3, *, rrus_per_cell=0,
                   rru_offset_deg=36.0, cell_power=10 ** 4.6 / 1e3, n_tx=1):
    """Hexagonal macro layout with three sectors per site.

    ``n_tx`` antennas per cell are either all collocated at the site or, with
    ``rrus_per_cell=2``, split as ``n_tx - 4`` at the site and two per RRU.
    Cell power is shared equally across the cell's antennas.
    """
    if rings < 0 or int(rings) != rings:
        raise InvalidParameterError("rings must be a non-negative integer")
    if not isd > 0:
        raise InvalidParameterError("inter-site distance must be positive")
    if not 0 < rru_fraction < 1:
        raise InvalidParameterError("rru_fraction must lie in (0, 1)")
    if rrus_per_cell not in (0, 2):
        raise InvalidParameterError("rrus_per_cell must be 0 or 2")
    rru_ant = 2
    site_ant = n_tx - rru_ant * rrus_per_cell
    if site_ant < 1:
        raise InvalidParameterError(f"n_tx={n_tx} leaves no antennas at the site")

    sites = hex_site_positions(int(rings), isd)
    radius = isd / np.sqrt(3)
    per_antenna = cell_power / n_tx
    cells = []
    for s, site in enumerate(sites):
        for orient in SECTOR_ORIENTATIONS:
            tps = [TransmissionPoint(site.copy(), site_ant, "macro", per_antenna * site_ant, orient)]
            for sign in (-1, 1)[:rrus_per_cell]:
                pos = site + rru_fraction * radius * _unit(orient + sign * rru_offset_deg)
                tps.append(TransmissionPoint(pos, rru_ant, "rru", per_antenna * rru_ant))
            cells.append(Cell(len(cells), s, orient, tuple(tps)))

    r = radius
    hexagon = Region(np.array([sites[0] + r * _unit(60 * i) for i in range(6)]))
    return NetworkLayout(sites, tuple(cells), rrus_per_cell, (), hexagon, float(isd))


@dataclass(frozen=True)
class UserDrop:
    positions: np.ndarray
    velocity: np.ndarray  # km/h
    n_rx_antennas: int = 1
    attachment: np.ndarray = field(default=None)  # -1 = unset; femtos follow cells
    cluster: np.ndarray = field(default=None)  # parent index, -1 = unclustered

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        k = len(pos)
        if k < 1:
            raise InvalidParameterError("a drop needs at least one user")
        vel = np.broadcast_to(np.asarray(self.velocity, dtype=float), (k,)).copy()
        if np.any(vel < 0):
            raise InvalidParameterError("velocity must be non-negative")
        att = np.full(k, -1) if self.attachment is None else np.asarray(self.attachment, dtype=int)
        clu = np.full(k, -1) if self.cluster is None else np.asarray(self.cluster, dtype=int)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocity", vel)
        object.__setattr__(self, "attachment", att)
        object.__setattr__(self, "cluster", clu)

    @property
    def k(self):
        return len(self.positions)

    def subset(self, n):
        """The first ``n`` users (drops are nested by construction)."""
        return UserDrop(self.positions[:n], self.velocity[:n], self.n_rx_antennas,
                        self.attachment[:n], self.cluster[:n])


def drop_users_uniform(layout, k, rng, *, cell=0, velocity=3.0, n_rx=1):
    """``k`` users uniform over one cell's footprint; attachment unset."""
    if k < 1:
        raise InvalidParameterError("k must be at least 1")
    pts = layout.cell_region(cell).sample_uniform(int(k), rng)
    return UserDrop(pts, velocity, n_rx)


def drop_poisson(region, density, rng):
    """Homogeneous Poisson point process on a convex region."""
    if density < 0:
        raise InvalidParameterError("density must be non-negative")
    n = rng.poisson(density * region.area) if density > 0 else 0
    if n == 0:
        return np.empty((0, 2))
    return region.sample_uniform(n, rng)


def drop_user_clusters(region, n_clusters, users_per_cluster, cluster_radius, rng, *,
                       velocity=3.0, n_rx=1):
    """Matérn-style cluster drop with a fixed number of parents.

    Returns ``(drop, centers)``.  Children falling outside ``region`` are
    redrawn, so every user stays both inside its disc and inside the region.
    """
    if not cluster_radius > 0:
        raise InvalidParameterError("cluster radius must be positive")
    if n_clusters < 1 or users_per_cluster < 1:
        raise InvalidParameterError("cluster counts must be at least 1")
    centers = region.sample_uniform(int(n_clusters), rng)
    pts = np.empty((n_clusters * users_per_cluster, 2))
    for c, center in enumerate(centers):
        got = 0
        block = pts[c * users_per_cluster:(c + 1) * users_per_cluster]
        while got < users_per_cluster:
            m = users_per_cluster - got
            rad = cluster_radius * np.sqrt(rng.random(m))
            ang = 2 * np.pi * rng.random(m)
            cand = center + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
            cand = cand[region.contains(cand)]
            block[got:got + len(cand)] = cand
            got += len(cand)
    cluster = np.repeat(np.arange(n_clusters), users_per_cluster)
    return UserDrop(pts, velocity, n_rx, cluster=cluster), centers


def place_femtos_at_centers(layout, centers, n_femto, *, tx_power=0.1):
    """Activate femto APs at the first ``n_femto`` cluster centres."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if n_femto < 0 or n_femto > len(centers):
        raise InvalidParameterError(f"n_femto={n_femto} outside [0, {len(centers)}]")
    femtos = tuple(FemtoAP(i, centers[i].copy(), tx_power) for i in range(int(n_femto)))
    return replace(layout, femtos=femtos)


def attach_users(drop, rx_power, eligible=None):
    """Attach each user to the candidate with the largest mean received power.

    ``rx_power`` is ``(k, n_candidates)``: cells first, then femtos, holding
    pathloss and shadowing but no fast fading.  ``eligible`` optionally masks
    candidates.  ``np.argmax`` returns the first maximum, i.e. the lowest id.
    """
    p = np.asarray(rx_power, dtype=float)
    if eligible is not None:
        p = np.where(np.asarray(eligible, dtype=bool)[None, :], p, -np.inf)
    att = np.argmax(p, axis=1)
    return replace(drop, attachment=att)
