"""Two-step curriculum trainer: style-consistent intra-modality epochs first,
then alternating paired/unpaired inter-modality updates, with Adam, a flat-
then-linear learning rate schedule, JSONL loss logging and checkpointing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict, replace
from enum import IntEnum
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import torch
from torch import Tensor

from .augment import ViewPair, make_view_pair
from .data import Sample, SemiPairedDataset
from .losses import (
    LossInputError,
    LossReport,
    LossWeights,
    PATTERN_INTRA,
    PATTERN_PAIRED_INTER,
    PATTERN_UNPAIRED_INTER,
    adversarial_loss,
    cls_loss_fake,
    cls_loss_real,
    compose_L_D,
    compose_L_G,
    content_consistency_loss,
    dice_loss,
    generator_adversarial_loss,
    reconstruction_loss,
    style_consistency_loss,
    style_l2_regularizer,
    supervised_translation_loss,
)
from .networks import (
    Checkpoint,
    ContentCode,
    Generator,
    ModelConfig,
    build_networks,
    load_checkpoint,
    save_checkpoint,
)


class TrainingError(RuntimeError):
    pass


class CurriculumStep(IntEnum):
    STEP1 = 1
    STEP2 = 2


@dataclass
class TrainConfig:
    epochs_step1: int = 20
    epochs_step2: int = 30
    batch_size: int = 8
    lr_init: float = 1e-4
    lr_final: float = 1e-6
    lr_flat_epochs: int = 40
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    weights: LossWeights = field(default_factory=LossWeights)
    n_s: int = 8
    seed: int = 0
    checkpoint_interval: int = 10
    base_width: int = 32
    content_levels: int = 4
    disc_levels: int = 4
    style_levels: int = 4
    # ablation switches
    use_content_consistency: bool = True
    use_translation_loss: bool = True
    end_to_end: bool = False
    disentangle: bool = True

    def __post_init__(self) -> None:
        if self.epochs_step1 < 0 or self.epochs_step2 < 0 or self.total_epochs < 1:
            raise TrainingError("epoch counts must be non-negative with at least one epoch")
        if self.lr_flat_epochs > self.total_epochs:
            raise TrainingError("lr_flat_epochs must not exceed the total epoch count")
        if self.batch_size < 1:
            raise TrainingError("batch_size must be >= 1")

    @property
    def total_epochs(self) -> int:
        return self.epochs_step1 + self.epochs_step2

    def to_flat_dict(self) -> dict:
        d = asdict(self)
        d.update(d.pop("weights"))
        return d

    @classmethod
    def from_flat_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        weight_keys = [k for k in LossWeights().__dict__ if k in d]
        weights = LossWeights(**{k: d.pop(k) for k in weight_keys})
        known = {f for f in cls.__dataclass_fields__ if f != "weights"}
        unknown = set(d) - known
        if unknown:
            raise TrainingError(f"unknown config keys: {sorted(unknown)}")
        return cls(weights=weights, **d)


def train_config_hash(config: TrainConfig) -> str:
    blob = json.dumps(config.to_flat_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def phase_for(epoch: int, config: TrainConfig) -> CurriculumStep:
    """Curriculum step of a 1-based epoch: Step1 first, Step2 for the rest."""
    if not 1 <= epoch <= config.total_epochs:
        raise ValueError(f"epoch {epoch} outside [1, {config.total_epochs}]")
    return CurriculumStep.STEP1 if epoch <= config.epochs_step1 else CurriculumStep.STEP2


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Flat at lr_init through lr_flat_epochs, then linear to lr_final at the end."""
    if not 1 <= epoch <= config.total_epochs:
        raise ValueError(f"epoch {epoch} outside [1, {config.total_epochs}]")
    if epoch <= config.lr_flat_epochs or config.total_epochs == config.lr_flat_epochs:
        return config.lr_init
    t = (epoch - config.lr_flat_epochs) / (config.total_epochs - config.lr_flat_epochs)
    return config.lr_init + (config.lr_final - config.lr_init) * t


@dataclass
class TrainResult:
    out_dir: Path
    log_path: Path
    checkpoint_paths: list[Path]
    final_path: Path
    best_path: Path | None
    best_epoch: int | None
    best_val_dice: float | None
    log_lines: list[str]


class Trainer:
    def __init__(self, dataset: SemiPairedDataset, config: TrainConfig, out_dir: str | Path):
        dataset.validate()
        self.dataset = dataset
        self.config = config
        self.out_dir = Path(out_dir)
        self.model_config = ModelConfig(
            height=dataset.height,
            width=dataset.width,
            n_modalities=dataset.n_modalities,
            n_regions=dataset.n_regions,
            n_s=config.n_s,
            content_levels=config.content_levels,
            disc_levels=config.disc_levels,
            style_levels=config.style_levels,
            base_width=config.base_width,
        )
        torch.manual_seed(config.seed)
        self.generator, self.discriminator = build_networks(self.model_config)
        betas = (config.adam_beta1, config.adam_beta2)
        self.opt_g = torch.optim.Adam(self.generator.parameters(), lr=config.lr_init, betas=betas)
        self.opt_d = torch.optim.Adam(
            self.discriminator.parameters(), lr=config.lr_init, betas=betas
        )
        seeds = np.random.SeedSequence(config.seed).spawn(3)
        self.data_rng = np.random.default_rng(seeds[0])
        self.aug_rng = np.random.default_rng(seeds[1])
        self.pair_rng = np.random.default_rng(seeds[2])

        train_recs = dataset.records_for("train")
        self.paired_subjects = [r for r in train_recs if r.paired]
        if not any(not r.paired for r in train_recs):
            raise TrainingError("training needs at least one unpaired train subject")
        self.train_samples: list[Sample] = dataset.samples_for("train")
        for s in self.train_samples:
            if s.mask is None:
                raise TrainingError(f"train sample {s.subject_id} has no mask")
        self._paired_stream = self._paired_pair_stream() if self.paired_subjects else None

    # ------------------------------------------------------------------
    # batch plumbing
    # ------------------------------------------------------------------

    def _tensorize(self, samples: Sequence[Sample]) -> tuple[Tensor, Tensor, Tensor]:
        imgs = torch.from_numpy(np.stack([s.image for s in samples])).unsqueeze(1).float()
        mods = torch.tensor([s.modality.index for s in samples], dtype=torch.long)
        masks = torch.from_numpy(np.stack([s.mask for s in samples])).float()
        return imgs, mods, masks

    def _seg_term(self, pred: Tensor, mask: Tensor) -> Tensor:
        terms = [dice_loss(pred[:, r], mask[:, r]) for r in range(pred.shape[1])]
        return torch.stack(terms).mean()

    def units_per_epoch(self, step: CurriculumStep) -> int:
        if step == CurriculumStep.STEP1:
            return len(self.train_samples)
        return len(self._make_unpaired_couples(np.random.default_rng(0)))

    def _batches(self, items: list, size: int) -> Iterator[list]:
        for i in range(0, len(items), size):
            yield items[i : i + size]

    def _make_unpaired_couples(self, rng: np.random.Generator) -> list[tuple[Sample, Sample]]:
        """Seeded shuffle, then greedy matching into cross-subject, cross-modality couples."""
        pool = [self.train_samples[i] for i in rng.permutation(len(self.train_samples))]
        couples = []
        while len(pool) >= 2:
            first = pool.pop(0)
            partner_idx = None
            for j, cand in enumerate(pool):
                if (
                    cand.subject_id != first.subject_id
                    and cand.modality.index != first.modality.index
                ):
                    partner_idx = j
                    break
            if partner_idx is None:
                break
            couples.append((first, pool.pop(partner_idx)))
        return couples

    def _paired_pair_stream(self) -> Iterator[tuple[Sample, Sample]]:
        """Endless deterministic stream of same-subject, distinct-modality pairs."""
        while True:
            order = self.pair_rng.permutation(len(self.paired_subjects))
            for idx in order:
                rec = self.paired_subjects[int(idx)]
                mods = self.pair_rng.choice(rec.available_modalities, size=2, replace=False)
                yield (
                    self.dataset.sample(rec.subject_id, int(mods[0])),
                    self.dataset.sample(rec.subject_id, int(mods[1])),
                )

    # ------------------------------------------------------------------
    # loss computation (forward only; no parameter updates)
    # ------------------------------------------------------------------

    def step1_discriminator_losses(self, batch: Sequence[ViewPair]):
        terms = {"adv": [], "cls_real": []}
        for views in (
            [vp.view1 for vp in batch],
            [vp.view2 for vp in batch],
        ):
            imgs, mods, _ = self._tensorize(views)
            with torch.no_grad():
                s = self.generator.encode_style(imgs, mods)
                c = self.generator.encode_content(imgs, mods)
                recon = self.generator.decode_translation(c, s)
            d_real = self.discriminator(imgs)
            d_recon = self.discriminator(recon)
            terms["adv"].append(adversarial_loss(d_real.src, d_recon.src))
            terms["cls_real"].append(cls_loss_real(d_real.cls, mods))
        adv = torch.stack(terms["adv"]).mean()
        cls_real = torch.stack(terms["cls_real"]).mean()
        return compose_L_D(adv, cls_real), {"adv": adv, "cls_real": cls_real}

    def step1_generator_losses(self, batch: Sequence[ViewPair]):
        imgs1, mods, masks1 = self._tensorize([vp.view1 for vp in batch])
        imgs2, _, masks2 = self._tensorize([vp.view2 for vp in batch])
        per_view = {"adv_g": [], "cls_fake": [], "rec": [], "seg": []}
        styles = []
        for imgs, masks in ((imgs1, masks1), (imgs2, masks2)):
            s = self.generator.encode_style(imgs, mods)
            c = self.generator.encode_content(imgs, mods)
            seg = self.generator.decode_segmentation(c)
            styles.append(s)
            if self.config.disentangle:
                recon = self.generator.decode_translation(c, s)
                d_recon = self.discriminator(recon)
                per_view["adv_g"].append(generator_adversarial_loss(d_recon.src))
                per_view["cls_fake"].append(cls_loss_fake(d_recon.cls, mods))
                per_view["rec"].append(reconstruction_loss(recon, imgs))
            per_view["seg"].append(self._seg_term(seg, masks))
        if not self.config.disentangle:
            seg = torch.stack(per_view["seg"]).mean()
            terms = {"seg": seg}
            return self.config.weights.lambda_seg * seg, terms
        terms = {k: torch.stack(v).mean() for k, v in per_view.items()}
        terms["sty"] = style_consistency_loss(styles[0], styles[1])
        terms["style_l2"] = style_l2_regularizer(styles)
        total = compose_L_G(PATTERN_INTRA, self.config.weights, terms)
        return total, terms

    def _validate_paired(self, batch: Sequence[tuple[Sample, Sample]]) -> None:
        for a, b in batch:
            if a.subject_id != b.subject_id:
                raise TrainingError(
                    f"paired batch mixes subjects {a.subject_id} and {b.subject_id}"
                )
            if a.modality.index == b.modality.index:
                raise TrainingError(f"paired batch needs two distinct modalities")

    def _validate_unpaired(self, batch: Sequence[tuple[Sample, Sample]]) -> None:
        for a, b in batch:
            if a.subject_id == b.subject_id:
                raise TrainingError("unpaired couples must come from different subjects")
            if a.modality.index == b.modality.index:
                raise TrainingError("unpaired couples need two distinct modalities")

    def _inter_discriminator_losses(self, batch: Sequence[tuple[Sample, Sample]]):
        xa, ma, _ = self._tensorize([p[0] for p in batch])
        xb, mb, _ = self._tensorize([p[1] for p in batch])
        with torch.no_grad():
            outputs, _ = self.generator.forward_pair(xa, ma, xb, mb)
        d_real_a, d_real_b = self.discriminator(xa), self.discriminator(xb)
        d_recon_a = self.discriminator(outputs.recon_a)
        d_recon_b = self.discriminator(outputs.recon_b)
        d_trans_ab = self.discriminator(outputs.trans_ab)
        d_trans_ba = self.discriminator(outputs.trans_ba)
        adv_a = adversarial_loss(d_real_a.src, d_recon_a.src, d_trans_ab.src)
        adv_b = adversarial_loss(d_real_b.src, d_recon_b.src, d_trans_ba.src)
        adv = (adv_a + adv_b) / 2
        cls_real = (cls_loss_real(d_real_a.cls, ma) + cls_loss_real(d_real_b.cls, mb)) / 2
        return compose_L_D(adv, cls_real), {"adv": adv, "cls_real": cls_real}

    def _inter_generator_terms(self, batch: Sequence[tuple[Sample, Sample]]):
        xa, ma, mask_a = self._tensorize([p[0] for p in batch])
        xb, mb, mask_b = self._tensorize([p[1] for p in batch])
        outputs, codes = self.generator.forward_pair(xa, ma, xb, mb)
        d_recon_a = self.discriminator(outputs.recon_a)
        d_recon_b = self.discriminator(outputs.recon_b)
        d_trans_ab = self.discriminator(outputs.trans_ab)
        d_trans_ba = self.discriminator(outputs.trans_ba)
        adv_g = (
            generator_adversarial_loss(d_recon_a.src, d_trans_ab.src)
            + generator_adversarial_loss(d_recon_b.src, d_trans_ba.src)
        ) / 2
        cls_fake = (
            cls_loss_fake(d_recon_a.cls, ma, d_trans_ab.cls, mb)
            + cls_loss_fake(d_recon_b.cls, mb, d_trans_ba.cls, ma)
        ) / 2
        rec = (
            reconstruction_loss(outputs.recon_a, xa) + reconstruction_loss(outputs.recon_b, xb)
        ) / 2
        seg = (
            self._seg_term(outputs.seg_a, mask_a) + self._seg_term(outputs.seg_b, mask_b)
        ) / 2
        terms = {
            "adv_g": adv_g,
            "cls_fake": cls_fake,
            "rec": rec,
            "seg": seg,
            "style_l2": style_l2_regularizer([codes["s_a"], codes["s_b"]]),
        }
        return terms, outputs, codes, (xa, xb)

    def paired_generator_losses(self, batch: Sequence[tuple[Sample, Sample]]):
        terms, outputs, codes, (xa, xb) = self._inter_generator_terms(batch)
        allow_missing = set()
        if self.config.use_content_consistency:
            terms["con"] = content_consistency_loss(codes["c_a"], codes["c_b"])
        else:
            allow_missing.add("con")
        if self.config.use_translation_loss:
            terms["tran"] = (
                supervised_translation_loss(outputs.trans_ab, xb)
                + supervised_translation_loss(outputs.trans_ba, xa)
            ) / 2
        else:
            allow_missing.add("tran")
        total = compose_L_G(
            PATTERN_PAIRED_INTER, self.config.weights, terms, allow_missing=allow_missing
        )
        return total, terms

    def unpaired_generator_losses(self, batch: Sequence[tuple[Sample, Sample]]):
        terms, _, _, _ = self._inter_generator_terms(batch)
        total = compose_L_G(PATTERN_UNPAIRED_INTER, self.config.weights, terms)
        return total, terms

    # ------------------------------------------------------------------
    # updates
    # ------------------------------------------------------------------

    def apply_discriminator_update(self, total: Tensor) -> None:
        self.opt_d.zero_grad(set_to_none=True)
        self.opt_g.zero_grad(set_to_none=True)
        total.backward()
        self.opt_d.step()

    def apply_generator_update(self, total: Tensor) -> None:
        self.opt_g.zero_grad(set_to_none=True)
        self.opt_d.zero_grad(set_to_none=True)
        total.backward()
        self.opt_g.step()

    def _report(self, pattern: str, d_terms: dict, g_terms: dict) -> LossReport:
        weights = self.config.weights
        g_floats = {k: float(v.detach()) for k, v in g_terms.items()}
        g_weights = {k: weights.for_term(k) if k != "seg" or True else 1.0 for k in g_floats}
        d_floats = {k: float(v.detach()) for k, v in d_terms.items()}
        report = LossReport(
            pattern=pattern,
            g_terms=g_floats,
            g_weights={k: weights.for_term(k) for k in g_floats},
            total_g=sum(weights.for_term(k) * v for k, v in g_floats.items()),
            d_terms=d_floats,
            d_weights={"adv": -1.0, "cls_real": 1.0} if d_floats else {},
            total_d=(-d_floats["adv"] + d_floats["cls_real"]) if d_floats else 0.0,
        )
        bad = report.nan_terms()
        if bad:
            raise TrainingError(f"non-finite loss term(s): {', '.join(sorted(set(bad)))}")
        return report

    def step1_iteration(self, batch: Sequence[ViewPair]) -> LossReport:
        for vp in batch:
            if vp.view1.mask is None or vp.view2.mask is None:
                raise TrainingError("step1 views need masks")
        d_terms = {}
        if self.config.disentangle:
            d_total, d_terms = self.step1_discriminator_losses(batch)
            self.apply_discriminator_update(d_total)
        g_total, g_terms = self.step1_generator_losses(batch)
        self.apply_generator_update(g_total)
        pattern = PATTERN_INTRA if self.config.disentangle else "seg_only"
        return self._report(pattern, d_terms, g_terms)

    def step2_iteration(
        self,
        paired_batch: Sequence[tuple[Sample, Sample]] | None,
        unpaired_batch: Sequence[tuple[Sample, Sample]],
    ) -> list[LossReport]:
        reports = []
        if paired_batch:
            self._validate_paired(paired_batch)
            d_total, d_terms = self._inter_discriminator_losses(paired_batch)
            self.apply_discriminator_update(d_total)
            g_total, g_terms = self.paired_generator_losses(paired_batch)
            self.apply_generator_update(g_total)
            reports.append(self._report(PATTERN_PAIRED_INTER, d_terms, g_terms))
        self._validate_unpaired(unpaired_batch)
        d_total, d_terms = self._inter_discriminator_losses(unpaired_batch)
        self.apply_discriminator_update(d_total)
        g_total, g_terms = self.unpaired_generator_losses(unpaired_batch)
        self.apply_generator_update(g_total)
        reports.append(self._report(PATTERN_UNPAIRED_INTER, d_terms, g_terms))
        return reports

    # ------------------------------------------------------------------
    # the curriculum loop
    # ------------------------------------------------------------------

    def _set_lr(self, lr: float) -> None:
        for opt in (self.opt_g, self.opt_d):
            for group in opt.param_groups:
                group["lr"] = lr

    def _run_step1_epoch(self, epoch: int, step_tag: int, log: list[str]) -> None:
        order = self.data_rng.permutation(len(self.train_samples))
        shuffled = [self.train_samples[int(i)] for i in order]
        pairs = [make_view_pair(s, self.aug_rng) for s in shuffled]
        for it, batch in enumerate(self._batches(pairs, self.config.batch_size)):
            report = self.step1_iteration(batch)
            log.append(
                report.to_json_line(
                    epoch=epoch, step=step_tag, iteration=it, lr=lr_at(epoch, self.config)
                )
            )

    def _run_step2_epoch(self, epoch: int, step_tag: int, log: list[str]) -> None:
        couples = self._make_unpaired_couples(self.data_rng)
        for it, batch in enumerate(self._batches(couples, self.config.batch_size)):
            paired_batch = None
            if self._paired_stream is not None and self.config.disentangle:
                paired_batch = [next(self._paired_stream) for _ in range(len(batch))]
            for report in self.step2_iteration(paired_batch, batch):
                log.append(
                    report.to_json_line(
                        epoch=epoch, step=step_tag, iteration=it, lr=lr_at(epoch, self.config)
                    )
                )

    def validation_dice(self) -> float:
        """Mean over modalities of mean per-sample dice (regions averaged)."""
        from .evaluate import dice_score

        by_modality: dict[int, list[float]] = {}
        for sample in self.dataset.samples_for("val"):
            probs = self.predict([sample])[0]
            pred = (probs >= 0.5).astype(np.uint8)
            scores = [
                dice_score(pred[r], sample.mask[r]) for r in range(self.dataset.n_regions)
            ]
            by_modality.setdefault(sample.modality.index, []).append(float(np.mean(scores)))
        if not by_modality:
            raise TrainingError("validation split is empty")
        return float(np.mean([np.mean(v) for v in by_modality.values()]))

    def train(self) -> TrainResult:
        cfg = self.config
        self.out_dir.mkdir(parents=True, exist_ok=True)
        log_path = self.out_dir / "train_log.jsonl"
        log: list[str] = []
        checkpoint_paths: list[Path] = []
        best_path: Path | None = None
        best_epoch: int | None = None
        best_val = -1.0

        for epoch in range(1, cfg.total_epochs + 1):
            self._set_lr(lr_at(epoch, cfg))
            if cfg.end_to_end:
                self._run_step1_epoch(epoch, 0, log)
                self._run_step2_epoch(epoch, 0, log)
                step = CurriculumStep.STEP2
            else:
                step = phase_for(epoch, cfg)
                if step == CurriculumStep.STEP1:
                    self._run_step1_epoch(epoch, 1, log)
                else:
                    self._run_step2_epoch(epoch, 2, log)
            if step == CurriculumStep.STEP2 or cfg.end_to_end:
                val = self.validation_dice()
                log.append(json.dumps({"epoch": epoch, "val_dice": val}, sort_keys=True))
                if val > best_val:
                    best_val = val
                    best_epoch = epoch
                    best_path = self.out_dir / "best.bin"
                    self._save(best_path, epoch, best_val_dice=best_val)
            if cfg.checkpoint_interval and epoch % cfg.checkpoint_interval == 0:
                path = self.out_dir / f"ckpt_ep{epoch}.bin"
                self._save(path, epoch)
                checkpoint_paths.append(path)

        final_path = self.out_dir / f"ckpt_ep{cfg.total_epochs}.bin"
        if not final_path.exists():
            self._save(final_path, cfg.total_epochs)
            checkpoint_paths.append(final_path)
        log_path.write_text("\n".join(log) + "\n")
        return TrainResult(
            out_dir=self.out_dir,
            log_path=log_path,
            checkpoint_paths=checkpoint_paths,
            final_path=final_path,
            best_path=best_path,
            best_epoch=best_epoch,
            best_val_dice=best_val if best_epoch is not None else None,
            log_lines=log,
        )

    def _save(self, path: Path, epoch: int, **extra_fields) -> None:
        extra = {
            "train_config": self.config.to_flat_dict(),
            "train_config_hash": train_config_hash(self.config),
            "data_signature": self.dataset.signature(),
            **extra_fields,
        }
        save_checkpoint(path, self.generator, self.discriminator, epoch, extra)

    # ------------------------------------------------------------------
    # prediction
    # ------------------------------------------------------------------

    def predict(self, samples: Sequence[Sample]) -> list[np.ndarray]:
        return predict_with(self.generator, samples)


def predict_with(generator: Generator, samples: Sequence[Sample]) -> list[np.ndarray]:
    """Per-sample segmentation probabilities (R, H, W); samples never interact."""
    generator.eval()
    out = []
    with torch.no_grad():
        for s in samples:
            img = torch.from_numpy(s.image).float().view(1, 1, *s.image.shape)
            mod = torch.tensor([s.modality.index], dtype=torch.long)
            probs = generator.forward_single(img, mod)
            out.append(probs[0].numpy().copy())
    generator.train()
    return out


class InferenceModel:
    """Thin wrapper over a loaded checkpoint for prediction and probing."""

    def __init__(self, checkpoint: Checkpoint):
        self.checkpoint = checkpoint
        self.generator = checkpoint.generator
        self.config = checkpoint.config
        self.extra = checkpoint.extra

    @classmethod
    def load(cls, path: str | Path) -> "InferenceModel":
        return cls(load_checkpoint(path))

    @property
    def data_signature(self) -> dict | None:
        return self.extra.get("data_signature")

    def predict(self, samples: Sequence[Sample]) -> list[np.ndarray]:
        return predict_with(self.generator, samples)

    def encode(self, image: np.ndarray, modality_index: int) -> tuple[np.ndarray, ContentCode]:
        img = torch.from_numpy(image).float().view(1, 1, *image.shape)
        mod = torch.tensor([modality_index], dtype=torch.long)
        with torch.no_grad():
            style = self.generator.encode_style(img, mod)
            content = self.generator.encode_content(img, mod)
        return style[0].numpy().copy(), content

    def style_code(self, image: np.ndarray, modality_index: int) -> np.ndarray:
        return self.encode(image, modality_index)[0]

    def content_bottleneck(self, image: np.ndarray, modality_index: int) -> np.ndarray:
        return self.encode(image, modality_index)[1].bottleneck[0].numpy().copy()

    def decode_with_style(self, content: ContentCode, style: np.ndarray) -> np.ndarray:
        s = torch.from_numpy(np.asarray(style, dtype=np.float32)).view(1, -1)
        with torch.no_grad():
            img = self.generator.decode_translation(content, s)
        return img[0, 0].numpy().copy()

    def translate(
        self, image: np.ndarray, modality_index: int, target_style: np.ndarray
    ) -> np.ndarray:
        _, content = self.encode(image, modality_index)
        return self.decode_with_style(content, target_style)

    def segment_from_content(self, content: ContentCode) -> np.ndarray:
        with torch.no_grad():
            seg = self.generator.decode_segmentation(content)
        return seg[0].numpy().copy()


def train(dataset: SemiPairedDataset, config: TrainConfig, out_dir: str | Path) -> TrainResult:
    return Trainer(dataset, config, out_dir).train()
