"""Coordinate systems, UTM projection, and elementary 2D transforms.

All projected coordinates are meters east/north relative to a fixed
projection origin (the first GNSS fix of a recording session).  The
projection is standard UTM on the WGS84 ellipsoid; the underlying
transverse Mercator mapping uses the Krüger series in the third
flattening, which is accurate to well below a millimeter anywhere
within a zone.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, MapWeldError, StateError

# WGS84 ellipsoid
_A = 6378137.0
_F = 1.0 / 298.257223563
_E2 = _F * (2.0 - _F)
_E = math.sqrt(_E2)
_N = _F / (2.0 - _F)

_K0 = 0.9996
_FALSE_EASTING = 500000.0
_FALSE_NORTHING_SOUTH = 10000000.0

# Rectifying radius: A / (1 + n) * (1 + n^2/4 + n^4/64 + n^6/256)
_A1 = _A / (1.0 + _N) * (1.0 + _N**2 / 4.0 + _N**4 / 64.0 + _N**6 / 256.0)

# Krüger series coefficients, 6th order in the third flattening n.
_ALPHA = (
    _N / 2.0 - 2.0 / 3.0 * _N**2 + 5.0 / 16.0 * _N**3 + 41.0 / 180.0 * _N**4
    - 127.0 / 288.0 * _N**5 + 7891.0 / 37800.0 * _N**6,
    13.0 / 48.0 * _N**2 - 3.0 / 5.0 * _N**3 + 557.0 / 1440.0 * _N**4
    + 281.0 / 630.0 * _N**5 - 1983433.0 / 1935360.0 * _N**6,
    61.0 / 240.0 * _N**3 - 103.0 / 140.0 * _N**4 + 15061.0 / 26880.0 * _N**5
    + 167603.0 / 181440.0 * _N**6,
    49561.0 / 161280.0 * _N**4 - 179.0 / 168.0 * _N**5
    + 6601661.0 / 7257600.0 * _N**6,
    34729.0 / 80640.0 * _N**5 - 3418889.0 / 1995840.0 * _N**6,
    212378941.0 / 319334400.0 * _N**6,
)
_BETA = (
    _N / 2.0 - 2.0 / 3.0 * _N**2 + 37.0 / 96.0 * _N**3 - 1.0 / 360.0 * _N**4
    - 81.0 / 512.0 * _N**5 + 96199.0 / 604800.0 * _N**6,
    1.0 / 48.0 * _N**2 + 1.0 / 15.0 * _N**3 - 437.0 / 1440.0 * _N**4
    + 46.0 / 105.0 * _N**5 - 1118711.0 / 3870720.0 * _N**6,
    17.0 / 480.0 * _N**3 - 37.0 / 840.0 * _N**4 - 209.0 / 4480.0 * _N**5
    + 5569.0 / 90720.0 * _N**6,
    4397.0 / 161280.0 * _N**4 - 11.0 / 504.0 * _N**5
    - 830251.0 / 7257600.0 * _N**6,
    4583.0 / 161280.0 * _N**5 - 108847.0 / 3991680.0 * _N**6,
    20648693.0 / 638668800.0 * _N**6,
)

# UTM is defined between 80 degrees south and 84 degrees north.
UTM_LAT_MIN = -80.0
UTM_LAT_MAX = 84.0


class ProjectionDomainError(ValueError, MapWeldError):
    """Latitude outside the UTM band or otherwise unprojectable point."""


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 geographic position in degrees, elevation in meters."""

    lat: float
    lon: float
    ele: float | None = None

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class LocalPoint:
    """Grid position in meters east (x) / north (y); z passes through untouched."""

    x: float
    y: float
    z: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite local point ({self.x}, {self.y})")
        if self.z is not None and not math.isfinite(self.z):
            raise ValueError(f"non-finite z {self.z}")


def utm_zone(lon: float) -> int:
    """UTM zone number (1..60) for a longitude in degrees."""
    zone = int(math.floor((lon + 180.0) / 6.0)) + 1
    return 1 if zone == 61 else zone  # lon == 180 wraps into zone 1


def _tm_forward(lat: float, lon: float, lon0: float) -> tuple[float, float]:
    """Transverse Mercator forward mapping (unscaled, meridian at lon0)."""
    phi = math.radians(lat)
    lam = math.radians(lon - lon0)
    if lam > math.pi:
        lam -= 2.0 * math.pi
    elif lam < -math.pi:
        lam += 2.0 * math.pi

    tau = math.tan(phi)
    sigma = math.sinh(_E * math.atanh(_E * tau / math.hypot(1.0, tau)))
    taup = tau * math.hypot(1.0, sigma) - sigma * math.hypot(1.0, tau)

    xi = math.atan2(taup, math.cos(lam))
    eta = math.asinh(math.sin(lam) / math.hypot(taup, math.cos(lam)))
    xi_s, eta_s = xi, eta
    for j, a in enumerate(_ALPHA, start=1):
        xi_s += a * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_s += a * math.cos(2 * j * xi) * math.sinh(2 * j * eta)
    return _A1 * eta_s, _A1 * xi_s  # (easting-like, northing-like)


def _taupf(tau: float) -> float:
    sigma = math.sinh(_E * math.atanh(_E * tau / math.hypot(1.0, tau)))
    return tau * math.hypot(1.0, sigma) - sigma * math.hypot(1.0, tau)


def _tauf(taup: float) -> float:
    """Invert tau' -> tau by Newton iteration (converges in <= 5 steps)."""
    e2m = 1.0 - _E2
    tau = taup / e2m
    stol = math.sqrt(np.finfo(float).eps) / 10.0 * max(1.0, abs(taup))
    for _ in range(5):
        taupa = _taupf(tau)
        dtau = ((taup - taupa) * (1.0 + e2m * tau * tau)
                / (e2m * math.hypot(1.0, tau) * math.hypot(1.0, taupa)))
        tau += dtau
        if abs(dtau) < stol:
            break
    return tau


def _tm_inverse(x: float, y: float, lon0: float) -> tuple[float, float]:
    """Transverse Mercator inverse mapping (unscaled, meridian at lon0)."""
    eta = x / _A1
    xi = y / _A1
    xi_p, eta_p = xi, eta
    for j, b in enumerate(_BETA, start=1):
        xi_p -= b * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_p -= b * math.cos(2 * j * xi) * math.sinh(2 * j * eta)

    taup = math.sin(xi_p) / math.hypot(math.sinh(eta_p), math.cos(xi_p))
    lam = math.atan2(math.sinh(eta_p), math.cos(xi_p))
    phi = math.atan(_tauf(taup))
    lon = lon0 + math.degrees(lam)
    if lon > 180.0:
        lon -= 360.0
    elif lon < -180.0:
        lon += 360.0
    return math.degrees(phi), lon


class UtmProjector:
    """UTM projection anchored at a fixed origin.

    The zone is derived once from the origin and kept for the whole
    session, so a map straddling a zone boundary stays in one seamless
    frame.  ``project`` maps the origin to (0, 0).
    """

    def __init__(self, origin: GeoPoint):
        if not (UTM_LAT_MIN <= origin.lat <= UTM_LAT_MAX):
            raise ProjectionDomainError(
                f"origin latitude {origin.lat} outside UTM band "
                f"[{UTM_LAT_MIN}, {UTM_LAT_MAX}]")
        self.origin = origin
        self.zone = utm_zone(origin.lon)
        self.south = origin.lat < 0.0
        self._lon0 = float(self.zone * 6 - 183)
        self._origin_e, self._origin_n = self._absolute(origin.lat, origin.lon)

    def _absolute(self, lat: float, lon: float) -> tuple[float, float]:
        u, v = _tm_forward(lat, lon, self._lon0)
        easting = _K0 * u + _FALSE_EASTING
        northing = _K0 * v
        if self.south:
            northing += _FALSE_NORTHING_SOUTH
        return easting, northing

    def project(self, p: GeoPoint) -> LocalPoint:
        """Project a geographic point into the origin-relative grid frame."""
        if not (UTM_LAT_MIN <= p.lat <= UTM_LAT_MAX):
            raise ProjectionDomainError(
                f"latitude {p.lat} outside UTM band [{UTM_LAT_MIN}, {UTM_LAT_MAX}]")
        e, n = self._absolute(p.lat, p.lon)
        return LocalPoint(e - self._origin_e, n - self._origin_n, p.ele)

    def unproject(self, p: LocalPoint) -> GeoPoint:
        """Inverse of :meth:`project`; z becomes the elevation."""
        easting = p.x + self._origin_e
        northing = p.y + self._origin_n
        if self.south:
            northing -= _FALSE_NORTHING_SOUTH
        lat, lon = _tm_inverse((easting - _FALSE_EASTING) / _K0,
                               northing / _K0, self._lon0)
        return GeoPoint(lat, lon, p.z)

    def to_metadata(self) -> dict:
        return {"origin": {"lat": self.origin.lat, "lon": self.origin.lon,
                           "ele": self.origin.ele},
                "zone": self.zone, "south": self.south}

    @classmethod
    def from_metadata(cls, meta: dict) -> "UtmProjector":
        try:
            o = meta["origin"]
            return cls(GeoPoint(o["lat"], o["lon"], o.get("ele")))
        except (KeyError, TypeError) as exc:
            raise StateError(f"invalid projector metadata: {exc}") from exc


def project(p: GeoPoint, proj: UtmProjector) -> LocalPoint:
    if proj is None:
        raise StateError("projector not initialized")
    return proj.project(p)


def unproject(p: LocalPoint, proj: UtmProjector) -> GeoPoint:
    if proj is None:
        raise StateError("projector not initialized")
    return proj.unproject(p)


class RigidTransform2D:
    """Proper rigid motion of the plane: x' = R x + t."""

    def __init__(self, rotation, translation):
        r = np.asarray(rotation, dtype=float)
        t = np.asarray(translation, dtype=float).reshape(2)
        if r.shape != (2, 2):
            raise ValueError(f"rotation must be 2x2, got {r.shape}")
        if not np.allclose(r.T @ r, np.eye(2), atol=1e-9):
            raise ValueError("rotation matrix is not orthonormal")
        if np.linalg.det(r) < 0.0:
            raise ValueError("rotation matrix is a reflection (det < 0)")
        self.rotation = r
        self.rotation.setflags(write=False)
        self.translation = t
        self.translation.setflags(write=False)

    @classmethod
    def identity(cls) -> "RigidTransform2D":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_angle(cls, theta: float, translation=(0.0, 0.0)) -> "RigidTransform2D":
        c, s = math.cos(theta), math.sin(theta)
        return cls(np.array([[c, -s], [s, c]]), translation)

    @property
    def angle(self) -> float:
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    def apply_xy(self, xy: np.ndarray) -> np.ndarray:
        """Transform an (N, 2) array of coordinates."""
        xy = np.asarray(xy, dtype=float)
        return xy @ self.rotation.T + self.translation

    def __repr__(self):
        return (f"RigidTransform2D(angle={math.degrees(self.angle):.6f} deg, "
                f"t=({self.translation[0]:.3f}, {self.translation[1]:.3f}))")


def apply_rigid(t: RigidTransform2D, pts) -> list[LocalPoint]:
    """Apply a rigid transform to a sequence of LocalPoints; z untouched."""
    out = []
    for p in pts:
        x, y = t.rotation @ (p.x, p.y) + t.translation
        out.append(LocalPoint(float(x), float(y), p.z))
    return out


@dataclass
class Trajectory:
    """Ordered, timestamped poses, either in the local or the global frame."""

    timestamps: np.ndarray
    points: list  # LocalPoint or GeoPoint, matching `frame`
    frame: str = "local"  # "local" | "global"

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        if len(self.timestamps) != len(self.points):
            raise ValueError("timestamp/point count mismatch")
        if len(self.points) < 2:
            raise ValueError("trajectory needs at least 2 poses")
        if np.any(np.diff(self.timestamps) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")
        if self.frame not in ("local", "global"):
            raise ValueError(f"unknown frame {self.frame!r}")

    def __len__(self):
        return len(self.points)

    def xy(self) -> np.ndarray:
        """(N, 2) array of planar coordinates; local frame only."""
        if self.frame != "local":
            raise StateError("xy() requires a local-frame trajectory")
        return np.array([[p.x, p.y] for p in self.points], dtype=float)

    def projected(self, proj: UtmProjector) -> "Trajectory":
        if self.frame != "global":
            raise StateError("projected() requires a global-frame trajectory")
        return Trajectory(self.timestamps.copy(),
                          [proj.project(p) for p in self.points], "local")

    def with_xy(self, xy: np.ndarray) -> "Trajectory":
        """Copy of the trajectory with replaced planar coordinates."""
        if self.frame != "local":
            raise StateError("with_xy() requires a local-frame trajectory")
        pts = [LocalPoint(float(x), float(y), p.z)
               for (x, y), p in zip(xy, self.points)]
        return Trajectory(self.timestamps.copy(), pts, "local")


def read_trajectory_csv(text: str | bytes) -> Trajectory:
    """Parse a trajectory CSV.

    Header decides the frame: ``timestamp,lat,lon[,ele]`` is global,
    ``timestamp,x,y[,z]`` is local.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise DataError("empty trajectory file") from None

    if header[:3] == ["timestamp", "lat", "lon"]:
        frame, has_z = "global", len(header) > 3 and header[3] == "ele"
    elif header[:3] == ["timestamp", "x", "y"]:
        frame, has_z = "local", len(header) > 3 and header[3] == "z"
    else:
        raise DataError(f"unrecognized trajectory header {header}")

    ts, pts = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            ts.append(float(row[0]))
            a, b = float(row[1]), float(row[2])
            c = float(row[3]) if has_z and len(row) > 3 and row[3].strip() else None
            pts.append(GeoPoint(a, b, c) if frame == "global"
                       else LocalPoint(a, b, c))
        except (ValueError, IndexError) as exc:
            raise DataError(f"bad trajectory row at line {lineno}: {exc}") from exc
    try:
        return Trajectory(np.array(ts), pts, frame)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def write_trajectory_csv(traj: Trajectory) -> str:
    if traj.frame == "global":
        header = "timestamp,lat,lon,ele"
        rows = ((t, p.lat, p.lon, p.ele) for t, p in zip(traj.timestamps, traj.points))
    else:
        header = "timestamp,x,y,z"
        rows = ((t, p.x, p.y, p.z) for t, p in zip(traj.timestamps, traj.points))
    lines = [header]
    for t, a, b, c in rows:
        zs = "" if c is None else repr(float(c))
        lines.append(f"{float(t)!r},{float(a)!r},{float(b)!r},{zs}")
    return "\n".join(lines) + "\n"
