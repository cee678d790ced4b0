"""Hot inner loops of the data pipeline, JIT-compiled when numba is enabled.

These functions are written in nopython-compatible numpy so the same source
runs both compiled and interpreted (see :mod:`cursive.accel`). They avoid
allocating per point and use only IEEE-strict arithmetic (no fastmath), so
compiled and fallback paths produce identical bits for identical inputs.
"""

from __future__ import annotations

import math

import numpy as np

from .accel import maybe_njit

# token stream status codes shared with tokenizer.grammar scanning
OK = 0
ERR_RANGE = 1          # id outside [0, vocab)
ERR_EXPECTED_RP = 2    # something other than an RP token after a THETA token
ERR_UNEXPECTED_RP = 3  # RP token at a pair boundary
ERR_PAD_BEFORE_END = 4
ERR_TOKEN_AFTER_END = 5
ERR_MISSING_END = 6


@maybe_njit
def downsample_keep_mask(p, keys, drop_fraction):
    """Choose which points of one sequence survive downsampling.

    ``p`` is the pen-flag column, ``keys`` one uniform random per point.
    Removes ``floor(drop_fraction * n)`` points, chosen as the interior
    points with the smallest keys. A point is interior when it neither
    starts nor ends a pen-down run, i.e. ``0 < i < n-1`` with
    ``p[i] == 1 and p[i+1] == 1``. Returns a boolean keep mask.
    """
    n = p.shape[0]
    keep = np.ones(n, dtype=np.bool_)
    if n < 3:
        return keep
    interior = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(1, n - 1):
        if p[i] == 1.0 and p[i + 1] == 1.0:
            interior[m] = i
            m += 1
    target = int(math.floor(drop_fraction * n))
    k = target if target < m else m
    if k <= 0:
        return keep
    ikeys = np.empty(m, dtype=np.float64)
    for j in range(m):
        ikeys[j] = keys[interior[j]]
    order = np.argsort(ikeys)
    for j in range(k):
        keep[interior[order[j]]] = False
    return keep


@maybe_njit
def bin_theta_scalar(theta, theta_bins):
    idx = int(math.floor((theta + math.pi) / (2.0 * math.pi) * theta_bins))
    if idx < 0:
        idx = 0
    if idx > theta_bins - 1:
        idx = theta_bins - 1
    return idx


@maybe_njit
def bin_r_scalar(r, r_bins, r_max, r_edges, uniform):
    """Radius bin index; ``r_edges`` is consulted only for non-uniform spacing."""
    if r >= r_max:
        return r_bins - 1
    if r <= 0.0:
        return 0
    if uniform:
        idx = int(math.floor(r / r_max * r_bins))
    else:
        idx = int(np.searchsorted(r_edges, r, side="right")) - 1
    if idx < 0:
        idx = 0
    if idx > r_bins - 1:
        idx = r_bins - 1
    return idx


@maybe_njit
def assemble_chunk(
    pool_pts,      # [P, 3] all pool words' points, concatenated
    word_starts,   # [W+1] prefix offsets into pool_pts
    word_xmin,     # [W] per-word bounding-box x minimum
    word_xmax,     # [W]
    word_idx,      # [n, words_per_seq] chosen pool indices
    shear,         # [n] augmentation draws
    scale_x,       # [n]
    scale_y,       # [n]
    drop,          # [n]
    keys_flat,     # [sum raw points] uniform randoms for downsampling
    key_starts,    # [n+1] prefix offsets into keys_flat
    gap,           # inter-word pen-up gap width (canvas units)
    theta_bins,
    r_bins,
    r_max,
    r_edges,
    uniform_r,
    max_context,
    out_tokens,    # [worst-case total] uint16, filled compactly
):
    """Build one chunk of training sequences end to end.

    For each row of ``word_idx``: concatenate the words left to right with a
    pen-up gap, shear/scale, downsample, convert to polar offsets, bin, and
    emit the token stream ``(theta rp)* WORD ... END``. Returns per-sequence
    stream lengths (-1 marks a sequence that exceeded ``max_context`` and
    must be redrawn), the number of radius clips, and the total tokens
    written.
    """
    n = word_idx.shape[0]
    wps = word_idx.shape[1]
    pad_id = theta_bins + 2 * r_bins
    end_id = pad_id + 1
    word_id = pad_id + 2
    lengths = np.full(n, -1, dtype=np.int64)
    clipped = 0
    pos = 0
    for s in range(n):
        raw = key_starts[s + 1] - key_starts[s]
        pts = np.empty((raw, 3), dtype=np.float64)
        word_end = np.empty(wps, dtype=np.int64)
        cursor = 0.0
        j = 0
        for k in range(wps):
            w = word_idx[s, k]
            a, b = word_starts[w], word_starts[w + 1]
            off = cursor - word_xmin[w]
            for i in range(a, b):
                pts[j, 0] = pool_pts[i, 0] + off
                pts[j, 1] = pool_pts[i, 1]
                pts[j, 2] = pool_pts[i, 2]
                j += 1
            if k > 0:
                # the jump from the previous word is a travel move
                pts[j - (b - a), 2] = 0.0
            word_end[k] = j
            cursor += (word_xmax[w] - word_xmin[w]) + gap
        sh, sx, sy = shear[s], scale_x[s], scale_y[s]
        for i in range(raw):
            pts[i, 0] = sx * (pts[i, 0] + sh * pts[i, 1])
            pts[i, 1] = sy * pts[i, 1]
        keep = downsample_keep_mask(
            pts[:, 2], keys_flat[key_starts[s]:key_starts[s + 1]], drop[s]
        )
        kept = 0
        for i in range(raw):
            if keep[i]:
                kept += 1
        stream_len = 2 * kept + wps + 1
        if stream_len > max_context:
            continue  # flagged by lengths[s] == -1; driver redraws
        prev_x = 0.0
        prev_y = 0.0
        cur_word = 0
        q = pos
        for i in range(raw):
            if not keep[i]:
                continue
            while i >= word_end[cur_word]:
                out_tokens[q] = word_id
                q += 1
                cur_word += 1
            dx = pts[i, 0] - prev_x
            dy = pts[i, 1] - prev_y
            prev_x = pts[i, 0]
            prev_y = pts[i, 1]
            r = math.hypot(dx, dy)
            if r == 0.0:
                theta = 0.0
            else:
                theta = math.atan2(dy, dx)
                if theta == math.pi:
                    theta = -math.pi
            if r > r_max:
                clipped += 1
            ti = bin_theta_scalar(theta, theta_bins)
            ri = bin_r_scalar(r, r_bins, r_max, r_edges, uniform_r)
            out_tokens[q] = ti
            out_tokens[q + 1] = theta_bins + 2 * ri + int(pts[i, 2])
            q += 2
        while cur_word < wps:
            out_tokens[q] = word_id
            q += 1
            cur_word += 1
        out_tokens[q] = end_id
        q += 1
        lengths[s] = q - pos
        pos = q
    return lengths, clipped, pos
