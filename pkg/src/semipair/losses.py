"""Loss terms and composites for the curriculum disentanglement objective.

All functions are pure and reduce by arithmetic mean over every batch, patch
and pixel dimension. Probabilities are clamped to [1e-12, 1 - 1e-12] inside
logs; arguments outside the unit interval are rejected outright.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import torch
from torch import Tensor

PROB_EPS = 1e-12
DICE_EPS = 1e-7

PATTERN_INTRA = "intra"
PATTERN_PAIRED_INTER = "paired_inter"
PATTERN_UNPAIRED_INTER = "unpaired_inter"

# generator-side terms each pattern must supply (besides the common ones)
_PATTERN_TERMS = {
    PATTERN_INTRA: ("adv_g", "cls_fake", "rec", "seg", "style_l2", "sty"),
    PATTERN_PAIRED_INTER: ("adv_g", "cls_fake", "rec", "seg", "style_l2", "con", "tran"),
    PATTERN_UNPAIRED_INTER: ("adv_g", "cls_fake", "rec", "seg", "style_l2"),
}


class LossInputError(ValueError):
    """Raised when a loss argument violates its domain or shape contract."""


@dataclass
class LossWeights:
    lambda_rec: float = 50.0
    lambda_seg: float = 100.0
    lambda_sty: float = 10.0
    lambda_con: float = 10.0
    lambda_tran: float = 100.0
    lambda_style_l2: float = 0.01

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise LossInputError(f"{name} must be >= 0, got {value}")

    def for_term(self, term: str) -> float:
        return {
            "adv_g": 1.0,
            "cls_fake": 1.0,
            "rec": self.lambda_rec,
            "seg": self.lambda_seg,
            "sty": self.lambda_sty,
            "con": self.lambda_con,
            "tran": self.lambda_tran,
            "style_l2": self.lambda_style_l2,
        }[term]


@dataclass
class LossReport:
    """Per-iteration scalars: raw terms, their weights and the two composites."""

    pattern: str
    g_terms: dict[str, float]
    g_weights: dict[str, float]
    total_g: float
    d_terms: dict[str, float] = field(default_factory=dict)
    d_weights: dict[str, float] = field(default_factory=dict)
    total_d: float = 0.0
    extras: dict[str, float] = field(default_factory=dict)

    def recompose_g(self) -> float:
        return sum(self.g_weights[k] * v for k, v in self.g_terms.items())

    def recompose_d(self) -> float:
        return sum(self.d_weights[k] * v for k, v in self.d_terms.items())

    def nan_terms(self) -> list[str]:
        bad = [k for k, v in {**self.g_terms, **self.d_terms}.items() if v != v]
        if self.total_g != self.total_g:
            bad.append("total_g")
        if self.total_d != self.total_d:
            bad.append("total_d")
        return bad

    def to_json_line(self, **context) -> str:
        payload = dict(context)
        payload["pattern"] = self.pattern
        payload["g_terms"] = self.g_terms
        payload["d_terms"] = self.d_terms
        payload["total_g"] = self.total_g
        payload["total_d"] = self.total_d
        if self.extras:
            payload["extras"] = self.extras
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> tuple["LossReport", dict]:
        payload = json.loads(line)
        report = cls(
            pattern=payload["pattern"],
            g_terms=payload["g_terms"],
            g_weights={},
            total_g=payload["total_g"],
            d_terms=payload["d_terms"],
            total_d=payload["total_d"],
            extras=payload.get("extras", {}),
        )
        context = {
            k: v
            for k, v in payload.items()
            if k not in ("pattern", "g_terms", "d_terms", "total_g", "total_d", "extras")
        }
        return report, context


def _as_prob(t: Tensor, name: str) -> Tensor:
    if torch.any(t < 0) or torch.any(t > 1):
        raise LossInputError(f"{name} must lie in [0, 1]")
    return t.clamp(PROB_EPS, 1.0 - PROB_EPS)


def _check_same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise LossInputError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def adversarial_loss(
    d_real_src: Tensor, d_fake_recon_src: Tensor, d_fake_trans_src: Tensor | None = None
) -> Tensor:
    """E[log D(real)] + 1/2 E[log(1 - D(recon))] + 1/2 E[log(1 - D(trans))].

    The translation term is omitted in the intra-modality pattern where no
    second modality exists. Always <= 0 since each log is of a probability.
    """
    real = _as_prob(d_real_src, "d_real_src")
    recon = _as_prob(d_fake_recon_src, "d_fake_recon_src")
    loss = torch.log(real).mean() + 0.5 * torch.log1p(-recon).mean()
    if d_fake_trans_src is not None:
        trans = _as_prob(d_fake_trans_src, "d_fake_trans_src")
        loss = loss + 0.5 * torch.log1p(-trans).mean()
    return loss


def generator_adversarial_loss(
    d_fake_recon_src: Tensor, d_fake_trans_src: Tensor | None = None
) -> Tensor:
    """Non-saturating surrogate the generator minimizes: -1/2 E[log D(fake)] per stream.

    Same optimum as the saturating form but with usable gradients when the
    discriminator wins early.
    """
    recon = _as_prob(d_fake_recon_src, "d_fake_recon_src")
    loss = -0.5 * torch.log(recon).mean()
    if d_fake_trans_src is not None:
        trans = _as_prob(d_fake_trans_src, "d_fake_trans_src")
        loss = loss - 0.5 * torch.log(trans).mean()
    return loss


def _nll_at(d_cls: Tensor, target: Tensor | int, name: str) -> Tensor:
    if d_cls.ndim != 2:
        raise LossInputError(f"{name} must be (batch, M), got {tuple(d_cls.shape)}")
    probs = _as_prob(d_cls, name)
    if isinstance(target, int):
        target = torch.full((d_cls.shape[0],), target, dtype=torch.long, device=d_cls.device)
    picked = probs.gather(1, target.view(-1, 1).long())
    return -torch.log(picked).mean()


def cls_loss_real(d_cls: Tensor, true_modality: Tensor | int) -> Tensor:
    """-log D_cls(m | x) on real images; optimizes the discriminator."""
    return _nll_at(d_cls, true_modality, "d_cls")


def cls_loss_fake(
    d_cls_recon: Tensor,
    m_a: Tensor | int,
    d_cls_trans: Tensor | None = None,
    m_b: Tensor | int | None = None,
) -> Tensor:
    """1/2 (-log D_cls(m_a | recon)) + 1/2 (-log D_cls(m_b | trans)); optimizes G."""
    loss = 0.5 * _nll_at(d_cls_recon, m_a, "d_cls_recon")
    if d_cls_trans is not None:
        if m_b is None:
            raise LossInputError("m_b required when d_cls_trans is given")
        loss = loss + 0.5 * _nll_at(d_cls_trans, m_b, "d_cls_trans")
    return loss


def reconstruction_loss(x_recon: Tensor, x: Tensor) -> Tensor:
    """Mean absolute difference between a reconstruction and its source."""
    _check_same_shape(x_recon, x, "reconstruction_loss")
    return (x_recon - x).abs().mean()


def dice_loss(pred: Tensor, label: Tensor, eps: float = DICE_EPS) -> Tensor:
    """Soft dice: -(2 sum(l*p)) / (sum(l^2 + p^2) + eps), in [-1, 0]."""
    _check_same_shape(pred, label, "dice_loss")
    if torch.any(pred < 0) or torch.any(pred > 1):
        raise LossInputError("dice_loss pred must lie in [0, 1]")
    p = pred.reshape(-1)
    l = label.reshape(-1).to(p.dtype)
    return -(2.0 * (l * p).sum()) / ((l * l + p * p).sum() + eps)


def style_consistency_loss(s1: Tensor, s2: Tensor) -> Tensor:
    """Mean absolute difference between two style codes of the same image."""
    _check_same_shape(s1, s2, "style_consistency_loss")
    return (s1 - s2).abs().mean()


def _bottleneck(content) -> Tensor:
    if isinstance(content, Tensor):
        return content
    if hasattr(content, "bottleneck"):
        return content.bottleneck
    if isinstance(content, (list, tuple)):
        return content[-1]
    raise LossInputError(f"cannot take a bottleneck from {type(content).__name__}")


def content_consistency_loss(c_a, c_b) -> Tensor:
    """Mean absolute difference between the bottleneck content maps of a pair."""
    a, b = _bottleneck(c_a), _bottleneck(c_b)
    _check_same_shape(a, b, "content_consistency_loss")
    return (a - b).abs().mean()


def supervised_translation_loss(x_ab: Tensor, x_b: Tensor) -> Tensor:
    """Mean absolute difference between a translation and its paired target."""
    _check_same_shape(x_ab, x_b, "supervised_translation_loss")
    return (x_ab - x_b).abs().mean()


def style_l2_regularizer(styles) -> Tensor:
    """Mean of squared style entries; accepts one tensor or a sequence."""
    if isinstance(styles, Tensor):
        return (styles * styles).mean()
    flat = torch.cat([s.reshape(-1) for s in styles])
    return (flat * flat).mean()


def compose_L_D(adv: Tensor, cls_real: Tensor) -> Tensor:
    """Discriminator objective: -L_adv + L_cls_real."""
    return -adv + cls_real


def compose_L_G(
    pattern: str,
    weights: LossWeights,
    terms: Mapping[str, Tensor],
    allow_missing: frozenset[str] | set[str] = frozenset(),
) -> Tensor:
    """Weighted generator composite for one of the three batch patterns.

    ``terms`` must supply every term the pattern requires (unless listed in
    ``allow_missing``, used by ablations) and nothing a pattern forbids.
    """
    if pattern not in _PATTERN_TERMS:
        raise LossInputError(f"unknown pattern {pattern!r}")
    required = set(_PATTERN_TERMS[pattern]) - set(allow_missing)
    missing = required - set(terms)
    if missing:
        raise LossInputError(f"pattern {pattern!r} missing terms: {sorted(missing)}")
    unexpected = set(terms) - set(_PATTERN_TERMS[pattern])
    if unexpected:
        raise LossInputError(f"pattern {pattern!r} got unexpected terms: {sorted(unexpected)}")
    total = None
    for name, value in terms.items():
        piece = weights.for_term(name) * value
        total = piece if total is None else total + piece
    return total
