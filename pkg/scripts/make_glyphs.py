#!/usr/bin/env python3
"""Author the glyph template file shipped as cursive/glyphs.json.

Coordinates are y-up with the baseline at y=0 and the x-height at y=1.
Ascenders reach ~1.6, descenders ~-0.75, capitals ~1.6. Stroke 0 is the main
pen-down polyline; later strokes are detached marks (i-dots, t-crosses, ...)
drawn immediately after the main stroke, matching how the training data is
entered. Run this script from the repo root to regenerate the JSON.
"""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "cursive" / "glyphs.json"


def arc(cx, cy, rx, ry, a0, a1, n=8):
    """Elliptical arc, angles in degrees, y-up, inclusive endpoints."""
    out = []
    for i in range(n):
        a = math.radians(a0 + (a1 - a0) * i / (n - 1))
        out.append([cx + rx * math.cos(a), cy + ry * math.sin(a)])
    return out


def line(x0, y0, x1, y1, n=3):
    return [[x0 + (x1 - x0) * t / (n - 1), y0 + (y1 - y0) * t / (n - 1)] for t in range(n)]


def g(advance, *strokes):
    return {"advance": advance, "strokes": [s for s in strokes]}


def bowl(cx=0.3, w=0.29, n=9):
    """Closed-ish oval drawn counterclockwise starting from the upper right."""
    return arc(cx, 0.5, w, 0.5, 40, 320, n)


GLYPHS = {}

# ---- lowercase ----------------------------------------------------------
GLYPHS["a"] = g(0.72, [[0.0, 0.08]] + bowl() + line(0.6, 0.35, 0.62, 0.06, 2) + [[0.72, 0.16]])
GLYPHS["b"] = g(0.62, [[0.0, 0.08]] + line(0.18, 0.6, 0.28, 1.6, 3) + line(0.26, 1.1, 0.3, 0.05, 3)
                + arc(0.32, 0.42, 0.26, 0.42, -80, 80, 7) + [[0.5, 0.55], [0.62, 0.2]])
GLYPHS["c"] = g(0.64, [[0.0, 0.1]] + arc(0.34, 0.5, 0.28, 0.48, 45, 315, 9) + [[0.64, 0.14]])
GLYPHS["d"] = g(0.74, [[0.0, 0.08]] + bowl() + line(0.6, 1.6, 0.64, 0.06, 4) + [[0.74, 0.16]])
GLYPHS["e"] = g(0.6, [[0.0, 0.1], [0.38, 0.52]] + arc(0.28, 0.6, 0.24, 0.4, 0, 250, 8)
                + [[0.4, 0.05], [0.6, 0.14]])
GLYPHS["f"] = g(0.58, [[0.0, 0.1]] + arc(0.42, 1.25, 0.22, 0.38, 200, 60, 6)
                + line(0.34, 1.0, 0.3, -0.45, 4) + arc(0.2, -0.45, 0.12, 0.28, -60, -200, 5)
                + [[0.34, 0.25], [0.58, 0.16]])
GLYPHS["g"] = g(0.7, [[0.0, 0.08]] + bowl() + line(0.6, 0.4, 0.58, -0.45, 3)
                + arc(0.38, -0.42, 0.22, 0.33, -40, -160, 5) + [[0.7, 0.1]])
GLYPHS["h"] = g(0.68, [[0.0, 0.08]] + line(0.2, 0.8, 0.24, 1.6, 3) + line(0.24, 1.0, 0.26, 0.05, 3)
                + arc(0.42, 0.55, 0.18, 0.45, 180, 20, 6) + [[0.6, 0.05], [0.68, 0.15]])
GLYPHS["i"] = g(0.42, [[0.0, 0.08], [0.16, 0.7], [0.2, 1.0], [0.24, 0.5], [0.28, 0.06], [0.42, 0.16]],
                [[0.2, 1.32], [0.23, 1.36]])
GLYPHS["j"] = g(0.46, [[0.0, 0.08], [0.2, 0.7], [0.24, 1.0], [0.24, -0.4]]
                + arc(0.04, -0.4, 0.2, 0.32, 0, -140, 5),
                [[0.24, 1.32], [0.27, 1.36]])
GLYPHS["k"] = g(0.62, [[0.0, 0.08]] + line(0.18, 0.8, 0.2, 1.6, 3) + line(0.2, 1.0, 0.22, 0.05, 3)
                + [[0.46, 0.85], [0.26, 0.5], [0.52, 0.05], [0.62, 0.15]])
GLYPHS["l"] = g(0.5, [[0.0, 0.08]] + arc(0.22, 1.05, 0.16, 0.55, 220, -60, 7)
                + [[0.3, 0.05], [0.5, 0.15]])
GLYPHS["m"] = g(0.92, [[0.0, 0.08], [0.08, 0.6], [0.1, 0.95]] + arc(0.24, 0.55, 0.14, 0.42, 160, 20, 5)
                + [[0.38, 0.05]] + arc(0.52, 0.55, 0.14, 0.42, 160, 20, 5)
                + [[0.66, 0.05]] + arc(0.76, 0.5, 0.12, 0.4, 160, 20, 4) + [[0.92, 0.14]])
GLYPHS["n"] = g(0.7, [[0.0, 0.08], [0.1, 0.6], [0.12, 0.95]] + arc(0.3, 0.52, 0.17, 0.45, 160, 20, 6)
                + [[0.5, 0.05], [0.6, 0.3], [0.7, 0.14]])
GLYPHS["o"] = g(0.66, [[0.0, 0.08]] + bowl(0.32, 0.3) + [[0.5, 0.9], [0.66, 0.55]])
GLYPHS["p"] = g(0.66, [[0.0, 0.1], [0.14, 0.7], [0.16, 1.0], [0.18, -0.7], [0.2, 0.2]]
                + arc(0.36, 0.5, 0.22, 0.45, 140, -80, 7) + [[0.66, 0.12]])
GLYPHS["q"] = g(0.68, [[0.0, 0.08]] + bowl() + line(0.6, 0.3, 0.56, -0.5, 3)
                + [[0.66, -0.3], [0.68, 0.1]])
GLYPHS["r"] = g(0.56, [[0.0, 0.08], [0.14, 0.6], [0.18, 1.0], [0.22, 0.75],
                       [0.38, 0.95], [0.46, 0.75], [0.44, 0.3], [0.56, 0.14]])
GLYPHS["s"] = g(0.56, [[0.0, 0.08], [0.3, 0.6], [0.36, 0.95]]
                + arc(0.26, 0.72, 0.16, 0.25, 60, 210, 4)
                + arc(0.3, 0.3, 0.2, 0.3, 130, -60, 5) + [[0.38, 0.06], [0.56, 0.14]])
GLYPHS["t"] = g(0.54, [[0.0, 0.08]] + line(0.2, 0.7, 0.26, 1.4, 3) + line(0.26, 0.9, 0.3, 0.05, 3)
                + [[0.42, 0.1], [0.54, 0.16]],
                line(0.06, 0.98, 0.5, 1.02, 3))
GLYPHS["u"] = g(0.7, [[0.0, 0.08], [0.08, 0.6], [0.1, 0.95]] + arc(0.28, 0.5, 0.17, 0.45, 180, 320, 5)
                + [[0.48, 0.9], [0.52, 0.4], [0.58, 0.06], [0.7, 0.16]])
GLYPHS["v"] = g(0.62, [[0.0, 0.08], [0.08, 0.7], [0.12, 0.95], [0.3, 0.06], [0.46, 0.95],
                       [0.54, 0.75], [0.62, 0.6]])
GLYPHS["w"] = g(0.88, [[0.0, 0.08], [0.06, 0.7], [0.1, 0.95], [0.24, 0.06], [0.4, 0.9],
                       [0.54, 0.06], [0.7, 0.9], [0.78, 0.6], [0.88, 0.5]])
GLYPHS["x"] = g(0.62, [[0.0, 0.1], [0.14, 0.8], [0.2, 0.95], [0.5, 0.1], [0.62, 0.16]],
                [[0.5, 0.95], [0.2, 0.1]])
GLYPHS["y"] = g(0.68, [[0.0, 0.08], [0.1, 0.7], [0.12, 0.95], [0.3, 0.1], [0.46, 0.9], [0.5, 0.5],
                       [0.46, -0.45]] + arc(0.26, -0.42, 0.2, 0.3, -30, -150, 4) + [[0.68, 0.08]])
GLYPHS["z"] = g(0.6, [[0.0, 0.1], [0.12, 0.8], [0.16, 0.95], [0.46, 0.92], [0.14, 0.1],
                      [0.48, 0.08], [0.6, 0.16]])

# ---- uppercase (print-style capitals, cap height 1.6) -------------------
GLYPHS["A"] = g(0.82, line(0.0, 0.0, 0.38, 1.6, 4) + line(0.38, 1.6, 0.76, 0.0, 4),
                line(0.16, 0.6, 0.6, 0.6, 3))
GLYPHS["B"] = g(0.74, line(0.08, 0.0, 0.08, 1.6, 3) + arc(0.08, 1.22, 0.5, 0.38, 90, -90, 6)
                + arc(0.08, 0.42, 0.56, 0.42, 90, -90, 6))
GLYPHS["C"] = g(0.78, arc(0.44, 0.8, 0.38, 0.8, 55, 305, 9))
GLYPHS["D"] = g(0.8, line(0.08, 0.0, 0.08, 1.6, 3) + arc(0.08, 0.8, 0.62, 0.8, 90, -90, 8))
GLYPHS["E"] = g(0.7, line(0.62, 1.6, 0.08, 1.6, 2) + line(0.08, 1.6, 0.08, 0.0, 3)
                + line(0.08, 0.0, 0.62, 0.0, 2), line(0.08, 0.82, 0.5, 0.82, 2))
GLYPHS["F"] = g(0.66, line(0.6, 1.6, 0.08, 1.6, 2) + line(0.08, 1.6, 0.08, 0.0, 3),
                line(0.08, 0.82, 0.48, 0.82, 2))
GLYPHS["G"] = g(0.82, arc(0.44, 0.8, 0.38, 0.8, 55, 300, 9) + [[0.64, 0.55], [0.42, 0.55]])
GLYPHS["H"] = g(0.8, line(0.08, 1.6, 0.08, 0.0, 3) + line(0.08, 0.8, 0.68, 0.8, 3)
                + line(0.68, 0.8 + 1e-9, 0.68, 1.6, 2) + line(0.68, 1.6, 0.68, 0.0, 3))
GLYPHS["I"] = g(0.36, line(0.18, 1.6, 0.18, 0.0, 4))
GLYPHS["J"] = g(0.56, line(0.44, 1.6, 0.44, 0.3, 3) + arc(0.26, 0.3, 0.18, 0.3, 0, -180, 4))
GLYPHS["K"] = g(0.76, line(0.08, 1.6, 0.08, 0.0, 3) + [[0.08, 0.7], [0.62, 1.6]]
                + [[0.28, 0.95], [0.68, 0.0]])
GLYPHS["L"] = g(0.64, line(0.08, 1.6, 0.08, 0.0, 3) + line(0.08, 0.0, 0.58, 0.0, 2))
GLYPHS["M"] = g(0.94, [[0.06, 0.0], [0.1, 1.6], [0.46, 0.35], [0.82, 1.6], [0.86, 0.0]])
GLYPHS["N"] = g(0.84, [[0.08, 0.0], [0.08, 1.6], [0.7, 0.0], [0.7, 1.6]])
GLYPHS["O"] = g(0.86, arc(0.44, 0.8, 0.38, 0.8, 90, 450, 10))
GLYPHS["P"] = g(0.7, line(0.08, 0.0, 0.08, 1.6, 3) + arc(0.08, 1.14, 0.52, 0.44, 90, -90, 6))
GLYPHS["Q"] = g(0.88, arc(0.44, 0.8, 0.38, 0.8, 90, 450, 10), [[0.54, 0.36], [0.82, -0.1]])
GLYPHS["R"] = g(0.76, line(0.08, 0.0, 0.08, 1.6, 3) + arc(0.08, 1.14, 0.52, 0.44, 90, -90, 6)
                + [[0.3, 0.72], [0.68, 0.0]])
GLYPHS["S"] = g(0.68, arc(0.4, 1.2, 0.28, 0.4, 60, 180, 4) + arc(0.36, 0.78, 0.3, 0.42, 120, -60, 5)
                + arc(0.34, 0.38, 0.3, 0.38, 90, -120, 5))
GLYPHS["T"] = g(0.72, line(0.06, 1.6, 0.66, 1.6, 3) + line(0.36, 1.6, 0.36, 0.0, 4))
GLYPHS["U"] = g(0.8, line(0.1, 1.6, 0.1, 0.45, 3) + arc(0.4, 0.45, 0.3, 0.45, 180, 360, 5)
                + line(0.7, 0.45, 0.7, 1.6, 3))
GLYPHS["V"] = g(0.78, [[0.06, 1.6], [0.38, 0.0], [0.7, 1.6]])
GLYPHS["W"] = g(1.08, [[0.04, 1.6], [0.26, 0.0], [0.52, 1.3], [0.78, 0.0], [1.0, 1.6]])
GLYPHS["X"] = g(0.74, line(0.06, 1.6, 0.66, 0.0, 3), line(0.66, 1.6, 0.06, 0.0, 3))
GLYPHS["Y"] = g(0.74, [[0.06, 1.6], [0.38, 0.75], [0.7, 1.6]], line(0.38, 0.75, 0.38, 0.0, 3))
GLYPHS["Z"] = g(0.72, [[0.08, 1.6], [0.64, 1.6], [0.08, 0.0], [0.66, 0.0]])

# ---- digits (height ~1.5) ------------------------------------------------
GLYPHS["0"] = g(0.7, arc(0.35, 0.75, 0.28, 0.75, 90, 450, 9))
GLYPHS["1"] = g(0.44, [[0.08, 1.2], [0.26, 1.5], [0.26, 0.0]])
GLYPHS["2"] = g(0.66, arc(0.32, 1.12, 0.26, 0.38, 150, -10, 5) + [[0.1, 0.05], [0.6, 0.0]])
GLYPHS["3"] = g(0.64, arc(0.3, 1.14, 0.26, 0.36, 140, -90, 5) + arc(0.32, 0.4, 0.28, 0.4, 90, -140, 6))
GLYPHS["4"] = g(0.7, [[0.46, 0.0], [0.46, 1.5], [0.08, 0.45], [0.64, 0.45]])
GLYPHS["5"] = g(0.66, [[0.56, 1.5], [0.14, 1.5], [0.1, 0.85]]
                + arc(0.32, 0.48, 0.28, 0.45, 110, -120, 6))
GLYPHS["6"] = g(0.66, [[0.54, 1.45]] + arc(0.5, 0.9, 0.44, 0.6, 120, 180, 3)
                + arc(0.34, 0.38, 0.26, 0.38, 180, -180, 7))
GLYPHS["7"] = g(0.62, [[0.06, 1.5], [0.58, 1.5], [0.24, 0.0]])
GLYPHS["8"] = g(0.66, arc(0.33, 1.1, 0.24, 0.36, 90, -270 + 20, 6)
                + arc(0.33, 0.38, 0.28, 0.38, 70, -290 + 70, 7) + [[0.33, 1.46]])
GLYPHS["9"] = g(0.66, arc(0.32, 1.04, 0.26, 0.4, 0, 360, 7) + [[0.56, 0.9], [0.36, 0.0]])

# ---- punctuation ---------------------------------------------------------
GLYPHS["."] = g(0.26, [[0.1, 0.02], [0.13, 0.05]])
GLYPHS[","] = g(0.26, [[0.12, 0.08], [0.14, 0.0], [0.06, -0.22]])
GLYPHS["!"] = g(0.3, line(0.14, 1.5, 0.14, 0.35, 4), [[0.14, 0.06], [0.16, 0.02]])
GLYPHS["?"] = g(0.56, arc(0.28, 1.15, 0.22, 0.35, 160, -40, 6) + [[0.28, 0.55], [0.28, 0.35]],
                [[0.28, 0.06], [0.3, 0.02]])
GLYPHS["("] = g(0.4, arc(0.5, 0.65, 0.3, 1.0, 115, 245, 6))
GLYPHS[")"] = g(0.4, arc(-0.1, 0.65, 0.3, 1.0, 65, -65, 6))
GLYPHS["'"] = g(0.22, [[0.1, 1.5], [0.06, 1.2]])
GLYPHS['"'] = g(0.38, [[0.1, 1.5], [0.06, 1.2]], [[0.26, 1.5], [0.22, 1.2]])


def build():
    glyphs = {}
    for ch, spec in GLYPHS.items():
        strokes = [[[round(x, 4), round(y, 4)] for x, y in s] for s in spec["strokes"]]
        glyphs[ch] = {
            "strokes": strokes,
            "advance": spec["advance"],
            "entry": strokes[0][0],
            "exit": strokes[-1][-1],
        }
    return {"format_version": 1, "units": "x_height", "glyphs": glyphs}


if __name__ == "__main__":
    doc = build()
    OUT.write_text(json.dumps(doc, indent=1))
    print(f"wrote {OUT} with {len(doc['glyphs'])} glyphs")
