"""Instance construction: grid costs, image histograms, random generation, CSV files.

Pixels are indexed row-major over a w-by-h grid, so grid costs, image
histograms, and the flattened plan all agree on ordering.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .problem import Problem, build_problem

# Cost matrices have (w*h)^2 entries; cap them well below typical RAM.
DEFAULT_CELL_CAP = 1 << 25


def _grid_coords(w: int, h: int, cell_cap: int) -> tuple[np.ndarray, np.ndarray]:
    if w < 1 or h < 1:
        raise ValueError("grid dimensions must be at least 1")
    n = w * h
    if n * n > cell_cap:
        raise ValueError(
            f"cost matrix would hold {n * n} entries, above the cap of {cell_cap}"
        )
    idx = np.arange(n)
    return idx // w, idx % w


def cost_manhattan(w: int, h: int, cell_cap: int = DEFAULT_CELL_CAP) -> np.ndarray:
    """Manhattan distances between all pixel pairs of a w-by-h grid."""
    rows, cols = _grid_coords(w, h, cell_cap)
    return (
        np.abs(rows[:, None] - rows[None, :]) + np.abs(cols[:, None] - cols[None, :])
    ).astype(np.float64)


def cost_euclidean(w: int, h: int, cell_cap: int = DEFAULT_CELL_CAP) -> np.ndarray:
    """Euclidean distances between all pixel pairs of a w-by-h grid."""
    rows, cols = _grid_coords(w, h, cell_cap)
    return np.sqrt(
        (rows[:, None] - rows[None, :]) ** 2.0 + (cols[:, None] - cols[None, :]) ** 2.0
    )


def parse_pgm(data) -> np.ndarray:
    """Parse a plain-text ("P2") grayscale PGM into an h-by-w float array."""
    if isinstance(data, bytes):
        data = data.decode("ascii", errors="replace")
    lines = [line.split("#", 1)[0] for line in data.splitlines()]
    tokens = " ".join(lines).split()
    if not tokens or tokens[0] != "P2":
        raise ValueError("not a plain PGM (P2) image")
    if len(tokens) < 4:
        raise ValueError("truncated PGM header")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        pixels = np.array([int(t) for t in tokens[4:]], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"malformed PGM token: {exc}") from exc
    if w < 1 or h < 1 or maxval < 1:
        raise ValueError("PGM header has non-positive dimensions or max value")
    if pixels.size != w * h:
        raise ValueError(f"PGM payload has {pixels.size} pixels, expected {w * h}")
    if np.any(pixels < 0) or np.any(pixels > maxval):
        raise ValueError("PGM pixel outside [0, maxval]")
    return pixels.reshape(h, w)


def image_to_distribution(pgm_bytes, noise_floor: float, downsample: bool = False) -> np.ndarray:
    """Turn a plain PGM into a probability vector over its pixels.

    With ``downsample`` every other pixel is skipped in both directions (a
    28x28 image becomes 14x14).  ``noise_floor`` is added to every pixel
    before normalisation, which keeps zero-background images usable.
    """
    if noise_floor < 0:
        raise ValueError("noise_floor must be nonnegative")
    img = parse_pgm(pgm_bytes)
    if downsample:
        img = img[::2, ::2]
    masses = img.reshape(-1) + noise_floor
    total = float(masses.sum())
    if total <= 0:
        raise ValueError("image has zero total intensity and no noise floor")
    return masses / total


def gen_random_instance(n: int, seed: int) -> Problem:
    """Reproducible random instance.

    Costs are i.i.d. uniform on [0, 1], rescaled so the maximum entry is 1.
    Marginals are uniform on the simplex: exponential draws (minus the log of
    uniforms) normalised by their sum.  All randomness comes from numpy's
    PCG64 generator seeded directly with ``seed``; the draw order is cost
    matrix, then row weights, then column weights, so instances are
    bit-reproducible.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    C = rng.random((n, n))
    peak = float(C.max())
    if peak > 0:
        C = C / peak
    r = -np.log1p(-rng.random(n))
    c = -np.log1p(-rng.random(n))
    return build_problem(C, r, c)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_matrix_csv(M, path) -> None:
    M = np.asarray(M, dtype=np.float64)
    lines = [",".join(_fmt(v) for v in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n")


def save_vector_csv(v, path) -> None:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    Path(path).write_text("\n".join(_fmt(x) for x in v) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)


def load_vector_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.float64).reshape(-1)
