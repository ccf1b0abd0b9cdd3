"""Uniform hexahedral meshes of the unit cube.

Cells are indexed ``i + n*j + n*n*l`` (x fastest).  Faces are grouped by the
axis of their normal; inside each group the face at lattice position
``(i, j, l)`` along that axis comes first-index fastest as well.  Every face
carries one global frame ``(t1, t2, normal)`` shared by both adjacent cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# local face order inside a cell: -x, +x, -y, +y, -z, +z
LOCAL_FACE_AXIS = np.array([0, 0, 1, 1, 2, 2])
LOCAL_FACE_SIGN = np.array([-1.0, 1.0, -1.0, 1.0, -1.0, 1.0])

_EYE = np.eye(3)
# axis-canonical frames: normal e_a -> (t1, t2) with t1 x t2 = e_a
FRAMES = {
    0: (_EYE[1], _EYE[2]),
    1: (_EYE[2], _EYE[0]),
    2: (_EYE[0], _EYE[1]),
}


@dataclass(frozen=True)
class Face:
    id: int
    center: np.ndarray
    normal: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    area: float
    boundary: bool


@dataclass(frozen=True)
class Cell:
    id: int
    origin: np.ndarray
    h: float

    @property
    def center(self) -> np.ndarray:
        return self.origin + 0.5 * self.h

    @property
    def volume(self) -> float:
        return self.h**3


@dataclass(frozen=True)
class LocalFace:
    """A face as seen from one cell: shared frame plus the cell's normal sign."""

    id: int
    center: np.ndarray
    normal: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    area: float
    sign: float

    @property
    def outward(self) -> np.ndarray:
        return self.sign * self.normal


@dataclass(frozen=True)
class Element:
    """Geometry of one cell together with its six faces in local order."""

    id: int
    center: np.ndarray
    h: float
    faces: tuple[LocalFace, ...]

    @property
    def volume(self) -> float:
        return self.h**3


class Mesh:
    """Uniform octree-refined mesh of ``[0, 1]^3``.

    The mesh is immutable after construction.  Bulk data are kept as arrays
    (``cell_origins``, ``face_centers``, ``cell_faces`` ...) for vectorized
    assembly; ``cells`` and ``faces`` expose record views.
    """

    def __init__(self, level: int):
        if not isinstance(level, (int, np.integer)) or level < 1:
            raise ValueError(f"mesh level must be a positive integer, got {level!r}")
        self.level = int(level)
        n = 2 ** (self.level - 1)
        self.n = n
        self.h = 1.0 / n

        idx = np.arange(n)
        I, J, L = np.meshgrid(idx, idx, idx, indexing="ij")
        # x fastest: flatten in Fortran order over (i, j, l)
        ijk = np.stack([I.ravel("F"), J.ravel("F"), L.ravel("F")], axis=1)
        self.cell_ijk = ijk
        self.cell_origins = ijk * self.h

        per_axis = n * n * (n + 1)
        self.faces_per_axis = per_axis
        centers, normals, t1s, t2s, minus, plus = [], [], [], [], [], []
        for axis in range(3):
            # lattice: index along `axis` runs 0..n, others 0..n-1
            shape = [n, n, n]
            shape[axis] = n + 1
            grids = np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")
            pos = np.stack([g.ravel("F") for g in grids], axis=1)
            c = (pos + 0.5) * self.h
            c[:, axis] = pos[:, axis] * self.h
            centers.append(c)
            normals.append(np.tile(_EYE[axis], (len(pos), 1)))
            t1, t2 = FRAMES[axis]
            t1s.append(np.tile(t1, (len(pos), 1)))
            t2s.append(np.tile(t2, (len(pos), 1)))
            lo = pos.copy()
            lo[:, axis] -= 1
            hi = pos
            minus.append(self._cell_id_or_none(lo))
            plus.append(self._cell_id_or_none(hi))
        self.face_centers = np.concatenate(centers)
        self.face_normals = np.concatenate(normals)
        self.face_t1 = np.concatenate(t1s)
        self.face_t2 = np.concatenate(t2s)
        # face_cells[:, 0] sees the face as its +axis face (sign +1),
        # face_cells[:, 1] as its -axis face (sign -1)
        self.face_cells = np.stack([np.concatenate(minus), np.concatenate(plus)], axis=1)
        self.face_axis = np.repeat(np.arange(3), per_axis)
        self.boundary = (self.face_cells < 0).any(axis=1)
        self.face_area = self.h**2

        cell_faces = np.empty((n**3, 6), dtype=np.int64)
        for lf in range(6):
            axis = LOCAL_FACE_AXIS[lf]
            pos = ijk.copy()
            if LOCAL_FACE_SIGN[lf] > 0:
                pos[:, axis] += 1
            cell_faces[:, lf] = axis * per_axis + self._face_index(pos, axis)
        self.cell_faces = cell_faces
        self.cell_face_signs = np.tile(LOCAL_FACE_SIGN, (n**3, 1))

        for arr in (self.cell_ijk, self.cell_origins, self.face_centers, self.face_normals,
                    self.face_t1, self.face_t2, self.face_cells, self.face_axis,
                    self.boundary, self.cell_faces, self.cell_face_signs):
            arr.setflags(write=False)

    def _cell_id_or_none(self, pos):
        n = self.n
        ok = ((pos >= 0) & (pos < n)).all(axis=1)
        ids = pos[:, 0] + n * pos[:, 1] + n * n * pos[:, 2]
        return np.where(ok, ids, -1)

    def _face_index(self, pos, axis):
        n = self.n
        shape = [n, n, n]
        shape[axis] = n + 1
        return pos[:, 0] + shape[0] * pos[:, 1] + shape[0] * shape[1] * pos[:, 2]

    @property
    def n_cells(self) -> int:
        return self.n**3

    @property
    def n_faces(self) -> int:
        return 3 * self.faces_per_axis

    @property
    def cell_centers(self) -> np.ndarray:
        return self.cell_origins + 0.5 * self.h

    @cached_property
    def cells(self) -> list[Cell]:
        return [Cell(i, self.cell_origins[i], self.h) for i in range(self.n_cells)]

    @cached_property
    def faces(self) -> list[Face]:
        return [
            Face(f, self.face_centers[f], self.face_normals[f], self.face_t1[f],
                 self.face_t2[f], self.face_area, bool(self.boundary[f]))
            for f in range(self.n_faces)
        ]

    def cell_to_faces(self, cell: int) -> list[tuple[int, float]]:
        return [(int(f), float(s)) for f, s in zip(self.cell_faces[cell], self.cell_face_signs[cell])]

    def local_faces(self, cell: int) -> list[LocalFace]:
        out = []
        for f, s in zip(self.cell_faces[cell], self.cell_face_signs[cell]):
            out.append(LocalFace(int(f), self.face_centers[f], self.face_normals[f],
                                 self.face_t1[f], self.face_t2[f], self.face_area, float(s)))
        return out

    def element(self, cell: int) -> Element:
        return Element(int(cell), self.cell_centers[cell], self.h, tuple(self.local_faces(cell)))

    def outward_normal(self, cell: int, face: int) -> np.ndarray:
        """Unit outward normal of ``face`` with respect to ``cell``."""
        hits = np.nonzero(self.cell_faces[cell] == face)[0]
        if len(hits) == 0:
            raise ValueError(f"face {face} is not a face of cell {cell}")
        return self.cell_face_signs[cell, hits[0]] * self.face_normals[face]

    def to_json(self) -> str:
        """Debug dump: arrays of records keyed by id."""
        cells = [
            {"id": i, "origin": self.cell_origins[i].tolist(), "h": self.h,
             "faces": self.cell_faces[i].tolist(), "signs": self.cell_face_signs[i].tolist()}
            for i in range(self.n_cells)
        ]
        faces = [
            {"id": f, "center": self.face_centers[f].tolist(),
             "normal": self.face_normals[f].tolist(), "t1": self.face_t1[f].tolist(),
             "t2": self.face_t2[f].tolist(), "area": self.face_area,
             "boundary": bool(self.boundary[f]), "cells": self.face_cells[f].tolist()}
            for f in range(self.n_faces)
        ]
        return json.dumps({"level": self.level, "h": self.h, "cells": cells, "faces": faces})


def build_mesh(level: int) -> Mesh:
    return Mesh(level)
