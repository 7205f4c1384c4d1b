"""31-channel Felzenszwalb HOG on a square cell grid.

Layout per cell: 18 contrast-sensitive orientations, 9 contrast-insensitive
orientations, 4 texture (gradient energy) channels. Orientation votes are split
linearly between the two nearest bins and spatially between the neighbouring
cells; each cell is normalised by the four 2x2-cell blocks containing it,
truncated at 0.2.
"""
from __future__ import annotations

from functools import lru_cache

import cv2
import numpy as np

N_ORIENT = 9
N_CHANNELS = 31
_CLIP = 0.2
# intensities are in [0, 1]; this matches the usual 1e-4 on a 0-255 scale
_EPS = 1e-4 / 255.0**2


def _gradients(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude and signed angle of the strongest-channel gradient. image: (N, H, W, C)."""
    n, h, w, c = image.shape
    # stack the batch vertically; horizontal derivatives never cross images and
    # the rows where vertical ones would are overwritten below
    flat = image.reshape(n * h, w * c)
    kx = np.zeros((1, 2 * c + 1), dtype=image.dtype)
    kx[0, 0], kx[0, -1] = -0.5, 0.5
    ky = np.array([[-0.5], [0.0], [0.5]], dtype=image.dtype)
    dx = cv2.filter2D(flat, -1, kx, borderType=cv2.BORDER_REPLICATE).reshape(image.shape)
    dy = cv2.filter2D(flat, -1, ky, borderType=cv2.BORDER_REPLICATE).reshape(image.shape)
    # one-sided differences on the border
    dx[:, :, 0] = image[:, :, 1] - image[:, :, 0]
    dx[:, :, -1] = image[:, :, -1] - image[:, :, -2]
    dy[:, 0] = image[:, 1] - image[:, 0]
    dy[:, -1] = image[:, -1] - image[:, -2]
    mag2 = dx * dx + dy * dy
    # strongest channel per pixel; argmax keeps the earlier channel on ties
    pick = np.argmax(mag2, axis=-1).ravel() + np.arange(0, mag2.size, c)
    shape = mag2.shape[:-1]
    gx = dx.reshape(-1)[pick].reshape(shape)
    gy = dy.reshape(-1)[pick].reshape(shape)
    return np.sqrt(mag2.reshape(-1)[pick].reshape(shape)), np.arctan2(gy, gx)


@lru_cache(maxsize=64)
def _pool_matrix(n_pix: int, cell: int, dtype: str) -> np.ndarray:
    """(n_pix // cell, n_pix) linear weights of each pixel towards each cell centre."""
    n = n_pix // cell
    centres = (np.arange(n) + 0.5) * cell
    pix = np.arange(n * cell) + 0.5
    mat = np.zeros((n, n_pix), dtype=dtype)
    mat[:, : n * cell] = np.maximum(0.0, 1.0 - np.abs(pix[None, :] - centres[:, None]) / cell)
    mat.flags.writeable = False
    return mat


def _pool(votes: np.ndarray, cell: int) -> np.ndarray:
    """Bilinear spatial pooling of (N, H, W, B) pixel votes into (N, H//cell, W//cell, B) cells."""
    n, h, w, b = votes.shape
    rows = _pool_matrix(h, cell, votes.dtype.str)
    cols = _pool_matrix(w, cell, votes.dtype.str)
    pooled = (rows @ votes.reshape(n, h, w * b)).reshape(-1, w, b)
    return (cols @ pooled).reshape(n, rows.shape[0], cols.shape[0], b)


def _fhog_batch(image: np.ndarray, cell_size: int) -> np.ndarray:
    mag, ang = _gradients(image)
    n_bins = 2 * N_ORIENT
    pos = ang * (n_bins / (2 * np.pi))
    pos[pos < 0] += n_bins
    lo = pos.astype(np.intp)
    frac = pos - lo
    lo %= n_bins
    hi = lo + 1
    hi[hi == n_bins] = 0

    votes = np.zeros(mag.shape + (n_bins,), dtype=image.dtype)
    flat = votes.reshape(-1)
    base = np.arange(0, flat.size, n_bins)
    # lo != hi always, so the second scatter never overwrites the first
    hv = mag * frac
    flat[base + hi.ravel()] = hv.ravel()
    flat[base + lo.ravel()] = (mag - hv).ravel()
    return _normalize(_pool(votes, cell_size))


def fhog(image: np.ndarray, cell_size: int = 4) -> np.ndarray:
    """fHOG of an (..., H, W, C) image in [0, 1]; returns (..., H//cell, W//cell, 31)."""
    image = np.asarray(image)
    if image.dtype.kind != "f":
        image = image.astype(np.float64) / 255.0
    elif image.dtype not in (np.float32, np.float64):
        image = image.astype(np.float64)
    if image.ndim == 2:
        image = image[..., None]
    h, w = image.shape[-3:-1]
    if h < cell_size or w < cell_size or h < 2 or w < 2:
        raise ValueError(f"image {w}x{h} is smaller than one {cell_size}px cell")
    lead = image.shape[:-3]
    stack = np.ascontiguousarray(image).reshape((-1,) + image.shape[-3:])
    out = _fhog_batch(stack, cell_size)
    return out.reshape(lead + out.shape[1:])


def _normalize(hist: np.ndarray) -> np.ndarray:
    insens = hist[..., :N_ORIENT] + hist[..., N_ORIENT:]
    energy = np.einsum("...k,...k->...", insens, insens)
    pad = [(0, 0)] * (energy.ndim - 2) + [(1, 1), (1, 1)]
    e = np.pad(energy, pad, mode="edge")
    # 2x2 block sums, block (i, j) covering padded cells i..i+1, j..j+1
    blocks = e[..., :-1, :-1] + e[..., 1:, :-1] + e[..., :-1, 1:] + e[..., 1:, 1:]
    norms = [
        1.0 / np.sqrt(blocks[..., di : di + hist.shape[-3], dj : dj + hist.shape[-2]] + _EPS)
        for di in (0, 1)
        for dj in (0, 1)
    ]
    out = np.zeros(hist.shape[:-1] + (N_CHANNELS,), dtype=hist.dtype)
    for b, n in enumerate(norms):
        sens = np.minimum(hist * n[..., None], _CLIP)
        out[..., : 2 * N_ORIENT] += 0.5 * sens
        out[..., 2 * N_ORIENT : 3 * N_ORIENT] += 0.5 * np.minimum(insens * n[..., None], _CLIP)
        out[..., 3 * N_ORIENT + b] = 0.2357 * sens.sum(axis=-1)
    return out
