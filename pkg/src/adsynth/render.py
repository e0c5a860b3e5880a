"""Depth-sensor adaptation: capsule rasterization of skeleton clips."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .skeleton import BONES, SkeletonError, yaw_matrix

__all__ = [
    "RenderError",
    "CameraModel",
    "quantize",
    "dequantize",
    "render_frame",
    "render_depth",
    "silhouette_series",
    "depth_features",
    "DEPTH_FEATURE_NAMES",
    "DepthFeatureExtractor",
    "write_pgm",
    "read_pgm",
    "write_depth_frames",
]

MAX_DEPTH_CODE = 65535
DEFAULT_RADIUS = 0.05


class RenderError(SkeletonError):
    pass


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera; ``rotation``/``translation`` map world to camera coordinates."""

    width: int = 320
    height: int = 240
    fx: float = 280.0
    fy: float = 280.0
    cx: float | None = None
    cy: float | None = None
    near: float = 0.5
    far: float = 6.0
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise RenderError("image must be at least 16x16")
        if not 0 < self.near < self.far:
            raise RenderError("need 0 < near < far")
        if self.fx <= 0 or self.fy <= 0:
            raise RenderError("focal lengths must be positive")
        if self.cx is None:
            object.__setattr__(self, "cx", (self.width - 1) / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", (self.height - 1) / 2.0)
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @property
    def step(self):
        """Depth represented by one quantization code."""
        return (self.far - self.near) / (MAX_DEPTH_CODE - 1)

    def orbit(self, degrees, pivot):
        """The same camera after orbiting ``degrees`` about the vertical axis through ``pivot``."""
        pivot = np.asarray(pivot, dtype=float)
        r_inv = yaw_matrix(-degrees)
        # world point X is seen as the original camera would see R^-1 (X - pivot) + pivot
        rotation = self.rotation @ r_inv
        translation = self.rotation @ (pivot - r_inv @ pivot) + self.translation
        return CameraModel(self.width, self.height, self.fx, self.fy, self.cx, self.cy, self.near, self.far,
                           rotation, translation)


def quantize(depth, camera):
    """Map depths in [near, far] to codes 1..65535; anything else becomes 0."""
    d = np.asarray(depth, dtype=float)
    inside = (d >= camera.near) & (d <= camera.far)
    code = np.zeros(d.shape, dtype=np.uint16)
    code[inside] = 1 + np.rint((d[inside] - camera.near) / camera.step).astype(np.int64)
    return code


def dequantize(code, camera):
    c = np.asarray(code, dtype=float)
    return np.where(c > 0, camera.near + (c - 1) * camera.step, 0.0)


def _sphere_hits(D, rdrd, center, r):
    oc = -center
    bb = D @ oc
    cc = oc @ oc - r * r
    h = bb * bb - rdrd * cc
    t = np.full(len(D), np.inf)
    ok = h >= 0
    t[ok] = (-bb[ok] - np.sqrt(h[ok])) / rdrd[ok]
    return t


def _capsule_hits(D, a, b, r):
    """Ray parameter of the first hit of rays ``s * D`` (origin 0) with a capsule.

    The capsule is the union of a finite cylinder side and two end spheres,
    so the first hit is the minimum over the three pieces.
    """
    rdrd = np.einsum("ij,ij->i", D, D)
    t = np.minimum(_sphere_hits(D, rdrd, a, r), _sphere_hits(D, rdrd, b, r))
    ba = b - a
    baba = ba @ ba
    if baba < 1e-18:
        return t
    oa = -a
    bard = D @ ba
    baoa = ba @ oa
    qa = baba * rdrd - bard * bard
    qb = baba * (D @ oa) - baoa * bard
    qc = baba * (oa @ oa) - baoa * baoa - r * r * baba
    h = qb * qb - qa * qc
    side = (h >= 0) & (qa > 1e-18)
    ts = np.full(len(D), np.inf)
    ts[side] = (-qb[side] - np.sqrt(h[side])) / qa[side]
    y = baoa + ts * bard
    body = side & (y > 0) & (y < baba)
    t[body] = np.minimum(t[body], ts[body])
    return t


def render_frame(points, camera, bone_radius_m=DEFAULT_RADIUS, bones=BONES):
    """Z-buffered capsule rendering of one pose (world coordinates, shape (25, 3))."""
    P = np.asarray(points, dtype=float) @ camera.rotation.T + camera.translation
    W, H = camera.width, camera.height
    zbuf = np.full((H, W), np.inf)
    r = bone_radius_m
    for i, j in bones:
        a, b = P[int(i)], P[int(j)]
        zmin = min(a[2], b[2]) - r
        zmax = max(a[2], b[2]) + r
        if zmax < camera.near or zmin > camera.far:
            continue
        if zmin > 1e-6:
            us = camera.cx + camera.fx * np.array([a[0], b[0]]) / np.array([a[2], b[2]])
            vs = camera.cy - camera.fy * np.array([a[1], b[1]]) / np.array([a[2], b[2]])
            pad_u = camera.fx * r / zmin + 1
            pad_v = camera.fy * r / zmin + 1
            u0 = max(0, int(np.floor(us.min() - pad_u)))
            u1 = min(W - 1, int(np.ceil(us.max() + pad_u)))
            v0 = max(0, int(np.floor(vs.min() - pad_v)))
            v1 = min(H - 1, int(np.ceil(vs.max() + pad_v)))
        else:
            u0, u1, v0, v1 = 0, W - 1, 0, H - 1
        if u0 > u1 or v0 > v1:
            continue
        uu, vv = np.meshgrid(np.arange(u0, u1 + 1), np.arange(v0, v1 + 1))
        D = np.stack(
            [(uu.ravel() - camera.cx) / camera.fx, -(vv.ravel() - camera.cy) / camera.fy, np.ones(uu.size)], axis=1
        )
        t = _capsule_hits(D, a, b, r)
        t[(t < camera.near) | (t > camera.far)] = np.inf
        block = zbuf[v0 : v1 + 1, u0 : u1 + 1]
        np.minimum(block, t.reshape(block.shape), out=block)
    zbuf[~np.isfinite(zbuf)] = 0.0
    return quantize(np.where(zbuf > 0, zbuf, -1.0), camera)


def render_depth(clip, camera=None, bone_radius_m=DEFAULT_RADIUS, frame_step=1):
    """Render every ``frame_step``-th frame of a clip into 16-bit depth frames."""
    camera = camera or CameraModel()
    if bone_radius_m <= 0:
        raise RenderError("bone radius must be positive")
    return [render_frame(p, camera, bone_radius_m) for p in clip.positions[::frame_step]]


def silhouette_series(frames):
    """Per-frame (area, centroid_x, centroid_y, bounding_height) over non-empty frames."""
    rows = []
    for f in frames:
        mask = np.asarray(f) > 0
        if not mask.any():
            continue
        vs, us = np.nonzero(mask)
        rows.append((float(mask.sum()), float(us.mean()), float(vs.mean()), float(vs.max() - vs.min() + 1)))
    if not rows:
        raise RenderError("all depth frames are empty; silhouette undefined")
    return np.array(rows)


DEPTH_SERIES = ("area", "centroid_x", "centroid_y", "bounding_height")
DEPTH_FEATURE_NAMES = tuple(
    f"{name}_{stat}" for name in DEPTH_SERIES for stat in ("mean", "rom", "mean_speed", "speed_rom")
)


def depth_features(frames, fps=30.0):
    """Summary vector over silhouette statistics (see DEPTH_FEATURE_NAMES).

    Speeds are absolute frame-to-frame changes times ``fps``.
    """
    frames = list(frames)
    if not frames:
        raise RenderError("no depth frames")
    S = silhouette_series(frames)
    if len(S) >= 2:
        sp = np.abs(np.diff(S, axis=0)) * fps
    else:
        sp = np.zeros((1, S.shape[1]))
    out = []
    for k in range(S.shape[1]):
        out += [S[:, k].mean(), np.ptp(S[:, k]), sp[:, k].mean(), np.ptp(sp[:, k])]
    return np.array(out)


class DepthFeatureExtractor(TransformerMixin, BaseEstimator):
    """Render clips to depth and summarize their silhouettes.

    Parameters
    ----------
    camera : CameraModel or None
    bone_radius_m : float, default=0.05
    frame_step : int, default=1
        Render every n-th frame; speeds use the reduced frame rate.
    """

    def __init__(self, camera=None, bone_radius_m=DEFAULT_RADIUS, frame_step=1):
        self.camera = camera
        self.bone_radius_m = bone_radius_m
        self.frame_step = frame_step

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        rows = []
        for clip in X:
            frames = render_depth(clip, self.camera, self.bone_radius_m, self.frame_step)
            rows.append(depth_features(frames, clip.fps / self.frame_step))
        return np.vstack(rows)

    def get_feature_names_out(self, input_features=None):
        return np.array(DEPTH_FEATURE_NAMES, dtype=object)


def write_pgm(frame, path):
    """16-bit binary PGM (P5, maxval 65535, big-endian)."""
    f = np.asarray(frame, dtype=np.uint16)
    h, w = f.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{MAX_DEPTH_CODE}\n".encode("ascii"))
        fh.write(f.astype(">u2").tobytes())


def read_pgm(path):
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        startpos = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if startpos == pos:
            raise RenderError(f"{path}: truncated PGM header")
        tokens.append(data[startpos:pos])
    if tokens[0] != b"P5":
        raise RenderError(f"{path}: not a binary PGM")
    w, h, maxval = (int(x) for x in tokens[1:])
    if maxval != MAX_DEPTH_CODE:
        raise RenderError(f"{path}: expected maxval {MAX_DEPTH_CODE}, got {maxval}")
    body = data[pos + 1 : pos + 1 + 2 * w * h]
    if len(body) != 2 * w * h:
        raise RenderError(f"{path}: truncated PGM data")
    return np.frombuffer(body, dtype=">u2").reshape(h, w).astype(np.uint16)


def write_depth_frames(frames, directory, prefix="depth"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(len(frames))))
    paths = []
    for i, f in enumerate(frames):
        p = directory / f"{prefix}_{i:0{width}d}.pgm"
        write_pgm(f, p)
        paths.append(p)
    return paths
