"""Geometric augmentations producing style-consistent view pairs.

Six ops: horizontal flip, vertical flip, rotation (0..360 deg), zoom
(ratio 0.8..1.2), elastic deformation and pixel shift (up to 20 px).
Images are resampled bilinearly, masks nearest-neighbour with the identical
geometry; out-of-frame pixels are filled with -1 (background after [-1, 1]
normalization) for images and 0 for masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import ndimage

from .data import ModalityId, Sample

OP_KINDS = ("hflip", "vflip", "rotate", "zoom", "elastic", "shift")

ELASTIC_ALPHA_DEFAULT = 34.0  # displacement scale at 128x128, scaled with size
ELASTIC_SIGMA_DEFAULT = 4.0


class AugmentError(ValueError):
    """Raised for parameters outside the declared ranges."""


@dataclass(frozen=True)
class AugmentOp:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in OP_KINDS:
            raise AugmentError(f"unknown op kind {self.kind!r}")
        p = self.params
        if self.kind == "rotate":
            if not 0.0 <= p["angle_deg"] < 360.0:
                raise AugmentError(f"rotate angle {p['angle_deg']} outside [0, 360)")
        elif self.kind == "zoom":
            if not 0.8 <= p["ratio"] <= 1.2:
                raise AugmentError(f"zoom ratio {p['ratio']} outside [0.8, 1.2]")
        elif self.kind == "shift":
            if abs(p["dx_px"]) > 20 or abs(p["dy_px"]) > 20:
                raise AugmentError(f"shift ({p['dx_px']}, {p['dy_px']}) outside +-20 px")
        elif self.kind == "elastic":
            if p["alpha"] <= 0 or p["sigma"] <= 0:
                raise AugmentError("elastic needs alpha > 0 and sigma > 0")

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass
class ViewPair:
    """Two style-consistent views of one sample, with matching transformed masks."""

    view1: Sample
    view2: Sample
    op1: AugmentOp
    op2: AugmentOp
    source_subject: str
    modality: ModalityId


def _displacement_coords(op: AugmentOp, height: int, width: int) -> np.ndarray:
    """Sampling coordinates (2, H, W) in input space for the given geometric op."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    if op.kind == "rotate":
        # inverse rotation about the image center
        a = np.deg2rad(op.params["angle_deg"])
        c, s = np.cos(a), np.sin(a)
        dy, dx = yy - cy, xx - cx
        return np.stack([cy + c * dy - s * dx, cx + s * dy + c * dx])
    if op.kind == "zoom":
        r = op.params["ratio"]
        return np.stack([cy + (yy - cy) / r, cx + (xx - cx) / r])
    if op.kind == "shift":
        return np.stack([yy - op.params["dy_px"], xx - op.params["dx_px"]])
    if op.kind == "elastic":
        alpha, sigma = op.params["alpha"], op.params["sigma"]
        scale = min(height, width) / 128.0
        rng = np.random.default_rng(op.params["seed"])
        disp = rng.uniform(-1.0, 1.0, size=(2, height, width))
        disp = np.stack([ndimage.gaussian_filter(d, sigma * scale) for d in disp])
        return np.stack([yy, xx]) + disp * alpha * scale
    raise AugmentError(f"{op.kind} has no displacement field")


def apply(op: AugmentOp, image: np.ndarray, mask: np.ndarray | None = None):
    """Apply one op to an image and (optionally) its region masks.

    Returns (image', mask'); mask' is None when no mask was given. The image
    stays clipped to [-1, 1] and the mask stays binary.
    """
    if image.ndim != 2:
        raise AugmentError(f"expected a 2D image, got shape {image.shape}")
    if op.kind == "hflip":
        out = np.ascontiguousarray(image[:, ::-1])
        out_mask = None if mask is None else np.ascontiguousarray(mask[..., ::-1])
        return out, out_mask
    if op.kind == "vflip":
        out = np.ascontiguousarray(image[::-1, :])
        out_mask = None if mask is None else np.ascontiguousarray(mask[..., ::-1, :])
        return out, out_mask

    coords = _displacement_coords(op, image.shape[0], image.shape[1])
    out = ndimage.map_coordinates(
        image.astype(np.float64), coords, order=1, mode="constant", cval=-1.0
    )
    out = np.clip(out, -1.0, 1.0).astype(image.dtype)
    out_mask = None
    if mask is not None:
        planes = [
            ndimage.map_coordinates(plane, coords, order=0, mode="constant", cval=0)
            for plane in np.atleast_3d(mask.reshape(-1, *image.shape))
        ]
        out_mask = (np.stack(planes) > 0).astype(np.uint8)
        if mask.ndim == 2:
            out_mask = out_mask[0]
    return out, out_mask


def sample_op(rng: np.random.Generator, kind: str) -> AugmentOp:
    if kind == "rotate":
        return AugmentOp("rotate", {"angle_deg": float(rng.uniform(0.0, 360.0))})
    if kind == "zoom":
        return AugmentOp("zoom", {"ratio": float(rng.uniform(0.8, 1.2))})
    if kind == "shift":
        return AugmentOp(
            "shift",
            {"dx_px": int(rng.integers(-20, 21)), "dy_px": int(rng.integers(-20, 21))},
        )
    if kind == "elastic":
        return AugmentOp(
            "elastic",
            {
                "alpha": ELASTIC_ALPHA_DEFAULT,
                "sigma": ELASTIC_SIGMA_DEFAULT,
                "seed": int(rng.integers(0, 2**31 - 1)),
            },
        )
    return AugmentOp(kind)


def make_view_pair(sample: Sample, rng: np.random.Generator) -> ViewPair:
    """Two distinct ops drawn from the six kinds, applied to the same sample."""
    if sample.mask is None:
        raise AugmentError(f"sample {sample.subject_id} has no mask; view pairs need one")
    kinds = rng.choice(len(OP_KINDS), size=2, replace=False)
    op1 = sample_op(rng, OP_KINDS[int(kinds[0])])
    op2 = sample_op(rng, OP_KINDS[int(kinds[1])])
    img1, mask1 = apply(op1, sample.image, sample.mask)
    img2, mask2 = apply(op2, sample.image, sample.mask)
    return ViewPair(
        view1=Sample(sample.subject_id, sample.modality, img1, mask1),
        view2=Sample(sample.subject_id, sample.modality, img2, mask2),
        op1=op1,
        op2=op2,
        source_subject=sample.subject_id,
        modality=sample.modality,
    )
