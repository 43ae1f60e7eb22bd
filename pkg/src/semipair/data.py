"""Semi-paired multimodal dataset model, split planning and synthetic generation.

A dataset is a set of subjects. Each subject owns one anatomy (content field)
and up to M modality images of it. Paired subjects expose several modalities
for training; unpaired/val/test subjects expose exactly one. For synthetic
data the withheld modality images are kept as privileged reference images so
translation quality can be scored against an analytic target.

On-disk layout::

    root/
      manifest.json                     # version, dims, modalities, records
      data/<subject>_<mod>.f32          # raw little-endian float32, H*W
      data/<subject>_<mod>.mask.u8      # raw uint8, R*H*W region planes
      data/<subject>_<mod>.ref.f32      # withheld reference image (synthetic)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

MANIFEST_VERSION = 1
SPLITS = ("train", "val", "test")
DEFAULT_MODALITY_NAMES = ("T1ce", "T1", "T2", "Flair")
DEFAULT_REGION_NAMES = ("WT", "TC")


class DatasetError(Exception):
    """Raised for malformed manifests, missing files or invalid dataset state."""


@dataclass(frozen=True)
class ModalityId:
    """A modality slot: dense index in [0, M) plus a display name."""

    index: int
    name: str


@dataclass
class Sample:
    """One image of one modality of one subject, optionally with region masks.

    image: (H, W) float32 in [-1, 1].
    mask:  (R, H, W) uint8 in {0, 1}, one plane per target region, or None.
    """

    subject_id: str
    modality: ModalityId
    image: np.ndarray
    mask: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


@dataclass
class SubjectRecord:
    subject_id: str
    available_modalities: tuple[int, ...]
    paired: bool
    split: str

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise DatasetError(f"unknown split {self.split!r} for {self.subject_id}")
        if self.paired and len(self.available_modalities) < 2:
            raise DatasetError(f"paired subject {self.subject_id} has <2 modalities")
        if not self.paired and len(self.available_modalities) != 1:
            raise DatasetError(f"unpaired subject {self.subject_id} must have exactly 1 modality")


@dataclass
class SynthSpec:
    """Recipe for the synthetic dataset. Identical spec => bit-identical dataset."""

    n_subjects: int = 120
    paired_fraction: float = 0.25  # fraction of *train* subjects that stay paired
    n_val: int = 12
    n_test: int = 12
    height: int = 128
    width: int = 128
    n_modalities: int = 4
    seed: int = 0
    # tumor geometry, axis lengths as fractions of min(H, W)
    axis_range: tuple[float, float] = (0.10, 0.22)
    core_ratio_range: tuple[float, float] = (0.35, 0.60)
    # per-modality style map: image = bias + gain * u**gamma with
    # u = c (sign=+1, tumor bright) or 1-c (sign=-1, tumor dark)
    modality_styles: tuple[tuple[float, float, float, int], ...] = (
        (1.5, -0.80, 0.9, +1),
        (1.3, -0.70, 1.2, -1),
        (1.6, -0.85, 0.8, +1),
        (1.4, -0.75, 1.1, -1),
    )
    modality_names: tuple[str, ...] = DEFAULT_MODALITY_NAMES
    region_names: tuple[str, ...] = DEFAULT_REGION_NAMES

    @property
    def n_train(self) -> int:
        return self.n_subjects - self.n_val - self.n_test

    @property
    def n_paired(self) -> int:
        return int(round(self.paired_fraction * self.n_train))

    def validate(self) -> None:
        if self.n_modalities < 1:
            raise DatasetError("need at least one modality")
        if self.n_modalities > len(self.modality_styles):
            raise DatasetError("not enough modality_styles entries for n_modalities")
        if self.n_train < 1:
            raise DatasetError("n_subjects too small for the requested val/test sizes")
        if not 0.0 <= self.paired_fraction <= 1.0:
            raise DatasetError("paired_fraction must be in [0, 1]")
        for gain, bias, gamma, sign in self.modality_styles[: self.n_modalities]:
            if gain <= 0 or gamma <= 0 or sign not in (-1, +1):
                raise DatasetError("style params require gain>0, gamma>0, sign in {-1,+1}")
            if not (-1.0 < bias and bias + gain < 1.0):
                raise DatasetError("style map must keep images strictly inside [-1, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        for key in ("axis_range", "core_ratio_range", "modality_names", "region_names"):
            if key in d:
                d[key] = tuple(d[key])
        if "modality_styles" in d:
            d["modality_styles"] = tuple(tuple(s) for s in d["modality_styles"])
        return cls(**d)


@dataclass
class SemiPairedDataset:
    """Immutable-after-build collection of records, samples and reference images."""

    records: list[SubjectRecord]
    samples: dict[tuple[str, int], Sample]
    height: int
    width: int
    modality_names: tuple[str, ...]
    region_names: tuple[str, ...]
    references: dict[tuple[str, int], np.ndarray] = field(default_factory=dict)
    synth_spec: SynthSpec | None = None

    @property
    def n_modalities(self) -> int:
        return len(self.modality_names)

    @property
    def n_regions(self) -> int:
        return len(self.region_names)

    def modality(self, index: int) -> ModalityId:
        return ModalityId(index, self.modality_names[index])

    def records_for(self, split: str) -> list[SubjectRecord]:
        return [r for r in self.records if r.split == split]

    def sample(self, subject_id: str, modality_index: int) -> Sample:
        key = (subject_id, modality_index)
        if key not in self.samples:
            raise DatasetError(f"no sample for subject {subject_id} modality {modality_index}")
        return self.samples[key]

    def samples_for(self, split: str) -> list[Sample]:
        out = []
        for rec in self.records_for(split):
            for m in rec.available_modalities:
                out.append(self.sample(rec.subject_id, m))
        return out

    def reference_image(self, subject_id: str, modality_index: int) -> np.ndarray:
        """Ground-truth image of a modality, whether available or withheld."""
        key = (subject_id, modality_index)
        if key in self.samples:
            return self.samples[key].image
        if key in self.references:
            return self.references[key]
        raise DatasetError(
            f"no reference image for subject {subject_id} modality {modality_index}"
        )

    def has_reference(self, subject_id: str, modality_index: int) -> bool:
        key = (subject_id, modality_index)
        return key in self.samples or key in self.references

    def signature(self) -> dict:
        """Dims and naming that a checkpoint must match to be evaluated here."""
        return {
            "height": self.height,
            "width": self.width,
            "modality_names": list(self.modality_names),
            "region_names": list(self.region_names),
        }

    def validate(self) -> None:
        seen = set()
        for rec in self.records:
            if rec.subject_id in seen:
                raise DatasetError(f"duplicate subject {rec.subject_id}")
            seen.add(rec.subject_id)
            if rec.split in ("val", "test") and rec.paired:
                raise DatasetError(f"{rec.split} subject {rec.subject_id} must be unpaired")
            for m in rec.available_modalities:
                if not 0 <= m < self.n_modalities:
                    raise DatasetError(f"subject {rec.subject_id}: modality {m} out of range")
                s = self.sample(rec.subject_id, m)
                if s.image.shape != (self.height, self.width):
                    raise DatasetError(
                        f"subject {rec.subject_id} modality {m}: image shape "
                        f"{s.image.shape} != ({self.height}, {self.width})"
                    )
        # per-modality balance of single-modality subjects, per split
        for split in SPLITS:
            counts = np.zeros(self.n_modalities, dtype=int)
            for rec in self.records_for(split):
                if not rec.paired:
                    counts[rec.available_modalities[0]] += 1
            if counts.sum() and counts.max() - counts.min() > 1:
                raise DatasetError(f"unbalanced modality assignment in split {split!r}: {counts}")


def expand_modality_label(modality: ModalityId | int, n_modalities: int, height: int, width: int) -> np.ndarray:
    """One-hot modality label expanded to image size: (M, H, W), plane `index` all ones."""
    index = modality.index if isinstance(modality, ModalityId) else int(modality)
    if not 0 <= index < n_modalities:
        raise DatasetError(f"modality index {index} out of range [0, {n_modalities})")
    planes = np.zeros((n_modalities, height, width), dtype=np.float32)
    planes[index] = 1.0
    return planes


def plan_splits(
    subjects: Sequence[str],
    n_train: int,
    n_val: int,
    n_test: int,
    n_paired: int,
    n_modalities: int,
    seed: int,
) -> list[SubjectRecord]:
    """Partition subjects into train/val/test and pick per-subject modalities.

    The first ``n_paired`` train subjects keep all modalities; every other
    subject is reduced to a single modality, assigned round-robin within its
    split so per-modality counts differ by at most one. Pure function of its
    arguments: same seed, same partition.
    """
    subjects = list(subjects)
    if n_paired > n_train:
        raise ValueError(f"n_paired={n_paired} exceeds n_train={n_train}")
    if min(n_train, n_val, n_test, n_paired) < 0:
        raise ValueError("split counts must be non-negative")
    if n_train + n_val + n_test > len(subjects):
        raise ValueError(
            f"insufficient subjects: need {n_train + n_val + n_test}, have {len(subjects)}"
        )
    rng = np.random.default_rng(seed)
    order = [subjects[i] for i in rng.permutation(len(subjects))]
    all_mods = tuple(range(n_modalities))

    records: list[SubjectRecord] = []
    cursor = 0
    for sid in order[:n_paired]:
        records.append(SubjectRecord(sid, all_mods, paired=True, split="train"))
    cursor = n_paired

    def take_single(count: int, split: str) -> None:
        nonlocal cursor
        mod_order = rng.permutation(n_modalities)
        for i in range(count):
            sid = order[cursor + i]
            m = int(mod_order[i % n_modalities])
            records.append(SubjectRecord(sid, (m,), paired=False, split=split))
        cursor += count

    take_single(n_train - n_paired, "train")
    take_single(n_val, "val")
    take_single(n_test, "test")
    return records


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

def style_apply(spec: SynthSpec, modality_index: int, content: np.ndarray) -> np.ndarray:
    """Map a content field in [0, 1] to a modality image, monotone and invertible."""
    gain, bias, gamma, sign = spec.modality_styles[modality_index]
    u = content if sign > 0 else 1.0 - content
    return (bias + gain * np.power(u, gamma)).astype(content.dtype)


def style_invert(spec: SynthSpec, modality_index: int, image: np.ndarray) -> np.ndarray:
    """Inverse of :func:`style_apply`; recovers the content field."""
    gain, bias, gamma, sign = spec.modality_styles[modality_index]
    u = np.power(np.clip((image - bias) / gain, 0.0, 1.0), 1.0 / gamma)
    return u if sign > 0 else 1.0 - u


def _smooth_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Smooth random field in [0, 1]: coarse uniform grid upsampled with splines."""
    coarse = rng.uniform(0.0, 1.0, size=(6, 6))
    f = ndimage.zoom(coarse, (height / 6, width / 6), order=3, mode="nearest")
    f = f[:height, :width]
    lo, hi = f.min(), f.max()
    return (f - lo) / (hi - lo) if hi > lo else np.zeros_like(f)


def _ellipse_mask(
    height: int, width: int, cy: float, cx: float, ay: float, ax: float, theta: float
) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    c, s = math.cos(theta), math.sin(theta)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return ((u / ax) ** 2 + (v / ay) ** 2 <= 1.0).astype(np.uint8)


def _subject_content(rng: np.random.Generator, spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """One content field in [0, 1] plus its (R, H, W) region masks."""
    h, w = spec.height, spec.width
    scale = min(h, w)
    background = 0.18 + 0.16 * _smooth_field(rng, h, w)
    for _ in range(100):
        ay = rng.uniform(*spec.axis_range) * scale
        ax = rng.uniform(*spec.axis_range) * scale
        r = max(ay, ax)
        # keep the whole tumor inside the frame, resampling degenerate draws
        if 2 * r + 4 >= min(h, w):
            continue
        cy = rng.uniform(r + 2, h - r - 3)
        cx = rng.uniform(r + 2, w - r - 3)
        theta = rng.uniform(0.0, math.pi)
        ratio = rng.uniform(*spec.core_ratio_range)
        wt = _ellipse_mask(h, w, cy, cx, ay, ax, theta)
        tc = _ellipse_mask(h, w, cy, cx, ay * ratio, ax * ratio, theta)
        if wt.sum() >= 12 and tc.sum() >= 3:
            break
    else:
        raise DatasetError("could not place a tumor inside the frame")
    content = background + 0.35 * wt + 0.30 * tc
    masks = np.stack([wt, tc]).astype(np.uint8)
    return np.clip(content, 0.0, 1.0), masks


def synth_generate(spec: SynthSpec) -> SemiPairedDataset:
    """Generate a deterministic synthetic semi-paired dataset.

    Every subject gets all M modality images of one shared content field;
    the split plan decides which are exposed as samples. Withheld images are
    kept as privileged references (analytic translation ground truth: the
    target of a->b for subject x is exactly x's modality-b image).
    """
    spec.validate()
    names = tuple(spec.modality_names[: spec.n_modalities]) or tuple(
        f"M{i}" for i in range(spec.n_modalities)
    )
    if len(names) < spec.n_modalities:
        names = tuple(f"M{i}" for i in range(spec.n_modalities))
    subjects = [f"s{i:04d}" for i in range(spec.n_subjects)]
    records = plan_splits(
        subjects, spec.n_train, spec.n_val, spec.n_test, spec.n_paired, spec.n_modalities, spec.seed
    )
    by_id = {r.subject_id: r for r in records}

    rng = np.random.default_rng(spec.seed)
    samples: dict[tuple[str, int], Sample] = {}
    references: dict[tuple[str, int], np.ndarray] = {}
    for sid in subjects:  # fixed order keeps generation deterministic
        content, masks = _subject_content(rng, spec)
        rec = by_id[sid]
        for m in range(spec.n_modalities):
            image = style_apply(spec, m, content).astype(np.float32)
            if m in rec.available_modalities:
                samples[(sid, m)] = Sample(sid, ModalityId(m, names[m]), image, masks.copy())
            else:
                references[(sid, m)] = image

    ds = SemiPairedDataset(
        records=records,
        samples=samples,
        height=spec.height,
        width=spec.width,
        modality_names=names,
        region_names=tuple(spec.region_names),
        references=references,
        synth_spec=spec,
    )
    ds.validate()
    return ds


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _sample_stem(ds: SemiPairedDataset, subject_id: str, modality_index: int) -> str:
    return f"{subject_id}_{ds.modality_names[modality_index]}"


def save_dataset(ds: SemiPairedDataset, root: str | Path) -> None:
    root = Path(root)
    data_dir = root / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": MANIFEST_VERSION,
        "n_modalities": ds.n_modalities,
        "modality_names": list(ds.modality_names),
        "height": ds.height,
        "width": ds.width,
        "region_names": list(ds.region_names),
        "records": [
            {
                "subject_id": r.subject_id,
                "paired": r.paired,
                "split": r.split,
                "modalities": list(r.available_modalities),
            }
            for r in ds.records
        ],
        "references": sorted([sid, m] for (sid, m) in ds.references),
    }
    if ds.synth_spec is not None:
        manifest["synth_spec"] = ds.synth_spec.to_dict()
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for (sid, m), sample in ds.samples.items():
        stem = _sample_stem(ds, sid, m)
        (data_dir / f"{stem}.f32").write_bytes(
            np.ascontiguousarray(sample.image, dtype="<f4").tobytes()
        )
        if sample.mask is not None:
            (data_dir / f"{stem}.mask.u8").write_bytes(
                np.ascontiguousarray(sample.mask, dtype=np.uint8).tobytes()
            )
    for (sid, m), image in ds.references.items():
        stem = _sample_stem(ds, sid, m)
        (data_dir / f"{stem}.ref.f32").write_bytes(
            np.ascontiguousarray(image, dtype="<f4").tobytes()
        )


def _read_f32(path: Path, height: int, width: int, subject_id: str) -> np.ndarray:
    if not path.exists():
        raise DatasetError(f"subject {subject_id}: missing sample file {path.name}")
    raw = path.read_bytes()
    if len(raw) != height * width * 4:
        raise DatasetError(
            f"subject {subject_id}: {path.name} has {len(raw)} bytes, "
            f"expected {height * width * 4}"
        )
    arr = np.frombuffer(raw, dtype="<f4").reshape(height, width).copy()
    if np.isnan(arr).any():
        raise DatasetError(f"subject {subject_id}: NaN pixels in {path.name}")
    return arr


def load_dataset(root: str | Path) -> SemiPairedDataset:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest.json is not valid JSON: {exc}") from exc
    for key in ("version", "n_modalities", "modality_names", "height", "width", "records"):
        if key not in manifest:
            raise DatasetError(f"manifest.json missing key {key!r}")
    if manifest["version"] != MANIFEST_VERSION:
        raise DatasetError(f"unsupported manifest version {manifest['version']}")

    names = tuple(manifest["modality_names"])
    height, width = int(manifest["height"]), int(manifest["width"])
    regions = tuple(manifest.get("region_names", DEFAULT_REGION_NAMES))
    records = [
        SubjectRecord(
            r["subject_id"], tuple(int(m) for m in r["modalities"]), bool(r["paired"]), r["split"]
        )
        for r in manifest["records"]
    ]
    data_dir = root / "data"
    samples: dict[tuple[str, int], Sample] = {}
    for rec in records:
        for m in rec.available_modalities:
            stem = f"{rec.subject_id}_{names[m]}"
            image = _read_f32(data_dir / f"{stem}.f32", height, width, rec.subject_id)
            mask_path = data_dir / f"{stem}.mask.u8"
            mask = None
            if mask_path.exists():
                raw = mask_path.read_bytes()
                if len(raw) != len(regions) * height * width:
                    raise DatasetError(
                        f"subject {rec.subject_id}: {mask_path.name} has {len(raw)} bytes, "
                        f"expected {len(regions) * height * width}"
                    )
                mask = np.frombuffer(raw, dtype=np.uint8).reshape(len(regions), height, width).copy()
            samples[(rec.subject_id, m)] = Sample(rec.subject_id, ModalityId(m, names[m]), image, mask)

    references: dict[tuple[str, int], np.ndarray] = {}
    for sid, m in manifest.get("references", []):
        stem = f"{sid}_{names[m]}"
        references[(sid, int(m))] = _read_f32(
            data_dir / f"{stem}.ref.f32", height, width, sid
        )

    spec = None
    if "synth_spec" in manifest:
        spec = SynthSpec.from_dict(manifest["synth_spec"])
    ds = SemiPairedDataset(
        records=records,
        samples=samples,
        height=height,
        width=width,
        modality_names=names,
        region_names=regions,
        references=references,
        synth_spec=spec,
    )
    ds.validate()
    return ds
