"""Stroke geometry: absolute coordinates, Cartesian offsets, polar offsets.

A stroke sequence is a float64 array of shape ``[N, 3]`` with columns
``(x, y, p)``. ``p`` is the pen flag: 1 means the segment *ending* at this
point is drawn, 0 means it is an invisible travel move. The y axis points up;
UI captures in screen coordinates must flip y before entering this module.

All functions are pure and never mutate their inputs.
"""

from __future__ import annotations

import numpy as np


class EmptySequenceError(ValueError):
    """Raised when an operation requires at least one stroke point."""


def as_points(seq) -> np.ndarray:
    """Coerce to a validated ``[N, 3]`` float64 point array."""
    pts = np.asarray(seq, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an [N, 3] array of (x, y, p), got shape {pts.shape}")
    if not np.all(np.isfinite(pts[:, :2])):
        raise ValueError("stroke coordinates must be finite")
    p = pts[:, 2]
    if not np.all((p == 0.0) | (p == 1.0)):
        raise ValueError("pen flag must be exactly 0 or 1")
    return pts


def coords_to_offsets(seq) -> np.ndarray:
    """Absolute points -> per-step offsets ``(dx, dy, p)``.

    The first offset is taken relative to the origin, so the output has the
    same length as the input and :func:`offsets_to_coords` is an exact
    inverse.
    """
    pts = as_points(seq)
    if len(pts) == 0:
        raise EmptySequenceError("cannot take offsets of an empty stroke sequence")
    out = pts.copy()
    out[1:, :2] = pts[1:, :2] - pts[:-1, :2]
    return out


def offsets_to_coords(offsets) -> np.ndarray:
    """Per-step offsets -> absolute points (cumulative sum). Inverse of
    :func:`coords_to_offsets`."""
    offs = as_points(offsets)
    out = offs.copy()
    if len(out):
        out[:, :2] = np.cumsum(offs[:, :2], axis=0)
    return out


def cartesian_to_polar(offsets) -> np.ndarray:
    """``(dx, dy, p)`` offsets -> ``(theta, r, p)`` with theta in [-pi, pi).

    A zero-length offset gets the canonical direction theta = 0 so that the
    representation stays unique.
    """
    offs = as_points(offsets)
    dx, dy = offs[:, 0], offs[:, 1]
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    # arctan2 maps the negative-x axis to +pi; our canonical interval is [-pi, pi)
    theta[theta == np.pi] = -np.pi
    theta[r == 0.0] = 0.0
    return np.stack([theta, r, offs[:, 2]], axis=1)


def polar_to_cartesian(polar) -> np.ndarray:
    """``(theta, r, p)`` -> ``(dx, dy, p)``. Inverse of :func:`cartesian_to_polar`."""
    po = np.asarray(polar, dtype=np.float64)
    if po.size == 0:
        return po.reshape(0, 3)
    if po.ndim != 2 or po.shape[1] != 3:
        raise ValueError(f"expected an [N, 3] array of (theta, r, p), got shape {po.shape}")
    if np.any(po[:, 1] < 0):
        raise ValueError("radius must be non-negative")
    theta, r = po[:, 0], po[:, 1]
    return np.stack([r * np.cos(theta), r * np.sin(theta), po[:, 2]], axis=1)


def apply_affine(seq, shear_x: float, scale_x: float, scale_y: float) -> np.ndarray:
    """Shear horizontally by ``shear_x`` (x += shear_x * y), then scale axes.

    Pen flags and sequence length are untouched. Scales must be positive.
    """
    if scale_x <= 0 or scale_y <= 0:
        raise ValueError(f"scales must be positive, got ({scale_x}, {scale_y})")
    pts = as_points(seq)
    out = pts.copy()
    out[:, 0] = scale_x * (pts[:, 0] + shear_x * pts[:, 1])
    out[:, 1] = scale_y * pts[:, 1]
    return out


def pen_run_slices(points) -> list[tuple[int, int]]:
    """Index ranges ``[start, stop)`` of the pen-down runs of a sequence.

    A run is a maximal group of drawn segments; the returned slice covers the
    run's anchor point through its last drawn point, i.e. the polyline that a
    renderer would draw for it.
    """
    pts = as_points(points)
    p = pts[:, 2].astype(np.int64)
    runs: list[tuple[int, int]] = []
    n = len(p)
    i = 0
    while i < n:
        if p[i] == 1:
            j = i
            while j + 1 < n and p[j + 1] == 1:
                j += 1
            runs.append((max(i - 1, 0), j + 1))
            i = j + 1
        else:
            i += 1
    return runs
