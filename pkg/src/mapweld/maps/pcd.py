"""ASCII PCD point-cloud reader/writer.

Supports the field layouts ``x y z`` and ``x y z intensity`` in the
ASCII variant only; coordinates round-trip losslessly (written with
full double precision).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FormatError


@dataclass
class PointCloudMap:
    xyz: np.ndarray  # (N, 3) float64
    intensity: np.ndarray | None = None

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(self.xyz)):
            raise ValueError("point cloud contains non-finite coordinates")
        if self.intensity is not None:
            self.intensity = np.asarray(self.intensity, dtype=float).reshape(-1)
            if len(self.intensity) != len(self.xyz):
                raise ValueError("intensity length mismatch")

    def __len__(self):
        return len(self.xyz)

    def __eq__(self, other):
        if not isinstance(other, PointCloudMap):
            return NotImplemented
        if not np.array_equal(self.xyz, other.xyz):
            return False
        if (self.intensity is None) != (other.intensity is None):
            return False
        return self.intensity is None or np.array_equal(self.intensity,
                                                        other.intensity)


def load_pcd(data: bytes | str) -> PointCloudMap:
    if isinstance(data, bytes):
        data = data.decode("ascii")
    fields = None
    n_points = None
    data_section = False
    rows = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if data_section:
            rows.append([float(v) for v in line.split()])
            continue
        key, _, rest = line.partition(" ")
        key = key.upper()
        if key == "FIELDS":
            fields = rest.split()
            if fields not in (["x", "y", "z"], ["x", "y", "z", "intensity"]):
                raise FormatError(f"unsupported PCD field layout {fields}")
        elif key == "POINTS":
            n_points = int(rest)
        elif key == "DATA":
            if rest.strip() != "ascii":
                raise FormatError(f"unsupported PCD data format {rest!r}")
            if fields is None:
                raise FormatError("PCD header missing FIELDS before DATA")
            data_section = True
        elif key in ("VERSION", "SIZE", "TYPE", "COUNT", "WIDTH", "HEIGHT",
                     "VIEWPOINT"):
            continue
        else:
            raise FormatError(f"unknown PCD header entry {key!r} at line {lineno}")

    if not data_section:
        raise FormatError("PCD file has no DATA section")
    width = len(fields)
    if any(len(r) != width for r in rows):
        raise FormatError("PCD row width does not match FIELDS")
    if n_points is not None and len(rows) != n_points:
        raise FormatError(f"PCD declares {n_points} points, found {len(rows)}")

    arr = np.array(rows, dtype=float).reshape(-1, width)
    intensity = arr[:, 3] if width == 4 else None
    return PointCloudMap(arr[:, :3], intensity)


def save_pcd(cloud: PointCloudMap) -> bytes:
    has_i = cloud.intensity is not None
    fields = "x y z intensity" if has_i else "x y z"
    count = len(cloud)
    header = [
        "# .PCD v0.7 - Point Cloud Data file format",
        "VERSION 0.7",
        f"FIELDS {fields}",
        "SIZE " + " ".join(["8"] * (4 if has_i else 3)),
        "TYPE " + " ".join(["F"] * (4 if has_i else 3)),
        "COUNT " + " ".join(["1"] * (4 if has_i else 3)),
        f"WIDTH {count}",
        "HEIGHT 1",
        "VIEWPOINT 0 0 0 1 0 0 0",
        f"POINTS {count}",
        "DATA ascii",
    ]
    lines = header
    for i in range(count):
        x, y, z = (float(v) for v in cloud.xyz[i])
        row = f"{x!r} {y!r} {z!r}"
        if has_i:
            row += f" {float(cloud.intensity[i])!r}"
        lines.append(row)
    return ("\n".join(lines) + "\n").encode("ascii")
