"""Triangle-soup scene meshes and ray picking.

A mesh stands in for the spatial map of the scene: gaze rays are intersected
against it to measure distances. Geometry lives in the world frame, in
millimeters.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

RAY_EPSILON = 1e-9


@dataclass(frozen=True, eq=False)
class SceneMesh:
    """Immutable triangle soup: array of shape (n_triangles, 3 vertices, xyz)."""

    triangles: np.ndarray

    def __post_init__(self):
        tris = np.array(self.triangles, dtype=float)
        if tris.ndim != 3 or tris.shape[1:] != (3, 3) or tris.shape[0] < 1:
            raise ValueError("mesh needs at least one triangle of three xyz vertices")
        if not np.all(np.isfinite(tris)):
            raise ValueError("mesh vertices must be finite")
        tris.setflags(write=False)
        object.__setattr__(self, "triangles", tris)

    def __len__(self) -> int:
        return int(self.triangles.shape[0])

    def first_hit(self, origin, direction):
        """Nearest positive ray-triangle intersection (Moller-Trumbore).

        Returns (distance, triangle_index) or None. Ties on distance go to
        the lowest triangle index so picking is deterministic.
        """
        o = np.asarray(origin, dtype=float)
        d = np.asarray(direction, dtype=float)
        v0 = self.triangles[:, 0]
        e1 = self.triangles[:, 1] - v0
        e2 = self.triangles[:, 2] - v0
        h = np.cross(d, e2)
        a = np.einsum("ij,ij->i", e1, h)
        valid = np.abs(a) > RAY_EPSILON
        f = np.where(valid, 1.0 / np.where(valid, a, 1.0), 0.0)
        s = o - v0
        u = f * np.einsum("ij,ij->i", s, h)
        valid &= (u >= 0.0) & (u <= 1.0)
        q = np.cross(s, e1)
        v = f * (q @ d)
        valid &= (v >= 0.0) & (u + v <= 1.0)
        t = f * np.einsum("ij,ij->i", e2, q)
        valid &= t > RAY_EPSILON
        if not np.any(valid):
            return None
        t_masked = np.where(valid, t, np.inf)
        idx = int(np.argmin(t_masked))  # argmin takes the first (lowest) index on ties
        return float(t_masked[idx]), idx

    def to_text(self) -> str:
        lines = ["# triangle soup: one 'x y z' vertex per line, 3 lines per triangle"]
        for tri in self.triangles:
            for vtx in tri:
                lines.append(f"{float(vtx[0])!r} {float(vtx[1])!r} {float(vtx[2])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SceneMesh":
        vertices = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 3 coordinates, got {len(parts)}")
            vertices.append([float(p) for p in parts])
        if not vertices or len(vertices) % 3 != 0:
            raise ValueError(f"vertex count {len(vertices)} is not a positive multiple of 3")
        tris = np.asarray(vertices, dtype=float).reshape(-1, 3, 3)
        return cls(tris)

    @classmethod
    def load(cls, path) -> "SceneMesh":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def make_quad(corner_a, corner_b, corner_c, corner_d) -> SceneMesh:
    """Two-triangle quad; corners given in winding order."""
    a, b, c, d = (np.asarray(p, dtype=float) for p in (corner_a, corner_b, corner_c, corner_d))
    return SceneMesh(np.array([[a, b, c], [a, c, d]]))


def make_box(center, half_extents) -> SceneMesh:
    """Axis-aligned box as 12 triangles."""
    c = np.asarray(center, dtype=float)
    h = np.asarray(half_extents, dtype=float)
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    corners = c + signs * h
    # vertex indices per face of the sign-ordered corner cube
    faces = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x- / x+
        (0, 4, 5, 1), (2, 3, 7, 6),  # y- / y+
        (0, 2, 6, 4), (1, 5, 7, 3),  # z- / z+
    ]
    tris = []
    for i, j, k, l in faces:
        tris.append([corners[i], corners[j], corners[k]])
        tris.append([corners[i], corners[k], corners[l]])
    return SceneMesh(np.asarray(tris))


def icosphere(radius: float, center, subdivisions: int = 2) -> SceneMesh:
    """Geodesic sphere from a subdivided icosahedron (20 * 4^n triangles)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts[0])
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    tris = [np.array([verts[i], verts[j], verts[k]]) for i, j, k in faces]
    for _ in range(subdivisions):
        refined = []
        for tri in tris:
            a, b, c = tri
            ab = (a + b) / 2.0
            bc = (b + c) / 2.0
            ca = (c + a) / 2.0
            ab, bc, ca = (v / np.linalg.norm(v) for v in (ab, bc, ca))
            refined += [np.array([a, ab, ca]), np.array([ab, b, bc]),
                        np.array([ca, bc, c]), np.array([ab, bc, ca])]
        tris = refined
    out = np.asarray(tris) * radius + np.asarray(center, dtype=float)
    return SceneMesh(out)
