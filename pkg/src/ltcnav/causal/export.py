"""File exports for saliency maps and coefficient tensors."""
from __future__ import annotations

import csv
import os

import numpy as np

from ltcnav.causal.saliency import SaliencyMap
from ltcnav.pnm import write_pgm, write_ppm

OVERLAY_COLOR = np.array([255.0, 40.0, 40.0])


def saliency_to_uint8(saliency: SaliencyMap) -> np.ndarray:
    return np.round(saliency.values * 255).astype(np.uint8)


def overlay(frame: np.ndarray, saliency: SaliencyMap, alpha: float = 0.6) -> np.ndarray:
    """Blend a saliency heat color onto an (H, W, 3) uint8 frame, weighted per pixel."""
    w = alpha * saliency.values[..., None]
    out = (1 - w) * frame.astype(float) + w * OVERLAY_COLOR
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def export_saliency(prefix: str | os.PathLike, frame: np.ndarray, saliency: SaliencyMap) -> tuple[str, str]:
    """Write ``<prefix>.pgm`` (grayscale map) and ``<prefix>_overlay.ppm``."""
    pgm, ppm = f"{prefix}.pgm", f"{prefix}_overlay.ppm"
    write_pgm(pgm, saliency_to_uint8(saliency))
    write_ppm(ppm, overlay(frame, saliency))
    return pgm, ppm


def export_coefficients_csv(path: str | os.PathLike, tensor: np.ndarray) -> None:
    """Rows of (i, j, k, value); 2-D tensors use k = 0."""
    t = np.asarray(tensor)
    if t.ndim == 2:
        t = t[:, :, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "k", "value"])
        for (i, j, k), v in np.ndenumerate(t):
            w.writerow([i, j, k, repr(float(v))])
