"""Shared generator networks (style/content encoders, translation/segmentation
decoders) and the two-headed discriminator.

One parameter set exists per network; modality identity enters only through
one-hot label planes concatenated to the input image. The translation decoder
sees the bottleneck content map only, modulated by the style code through
adaptive instance normalization; the segmentation decoder gets the full
pyramid through skip connections and never sees a style code.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import Tensor, nn


class ConfigError(ValueError):
    pass


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    height: int = 128
    width: int = 128
    n_modalities: int = 4
    n_regions: int = 2
    n_s: int = 8
    content_levels: int = 4   # K: pyramid depth, bottleneck at H/2^K
    disc_levels: int = 4      # P: discriminator downsamplings
    style_levels: int = 4     # <= max(K, P)
    base_width: int = 32

    def __post_init__(self) -> None:
        k = max(self.content_levels, self.disc_levels)
        if self.height % (1 << k) or self.width % (1 << k):
            raise ConfigError(
                f"image size {self.height}x{self.width} not divisible by 2^{k}"
            )
        if self.style_levels > k:
            raise ConfigError("style_levels must not exceed max(content_levels, disc_levels)")
        if min(self.content_levels, self.disc_levels, self.style_levels) < 1:
            raise ConfigError("all network depths must be >= 1")
        if self.n_s < 1 or self.base_width < 1 or self.n_modalities < 1:
            raise ConfigError("n_s, base_width and n_modalities must be >= 1")

    @property
    def in_channels(self) -> int:
        return 1 + self.n_modalities

    def width_at(self, level: int) -> int:
        """Channel count of pyramid level `level` (0-based): doubling, capped at 8x base."""
        return min(self.base_width << level, self.base_width * 8)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def config_hash(config: ModelConfig) -> str:
    return hashlib.sha256(
        json.dumps(config.to_dict(), sort_keys=True).encode()
    ).hexdigest()[:16]


@dataclass
class ContentCode:
    """Feature pyramid; levels[k] lives at H/2^(k+1), the last one is the bottleneck."""

    levels: list[Tensor]

    @property
    def bottleneck(self) -> Tensor:
        return self.levels[-1]


@dataclass
class GeneratorOutputs:
    recon_a: Tensor
    recon_b: Tensor
    trans_ab: Tensor
    trans_ba: Tensor
    seg_a: Tensor
    seg_b: Tensor


@dataclass
class DiscriminatorOutputs:
    src: Tensor  # (B, 1, H/2^P, W/2^P) real/fake probabilities
    cls: Tensor  # (B, M) modality distribution, rows sum to 1


def expand_labels(modality: Tensor, n_modalities: int, height: int, width: int) -> Tensor:
    """(B,) modality indices -> (B, M, H, W) one-hot planes."""
    onehot = F.one_hot(modality.long(), n_modalities).to(torch.get_default_dtype())
    return onehot.view(-1, n_modalities, 1, 1).expand(-1, n_modalities, height, width)


def _with_label(image: Tensor, modality: Tensor, n_modalities: int) -> Tensor:
    if image.ndim != 4 or image.shape[1] != 1:
        raise ConfigError(f"expected (B, 1, H, W) image, got {tuple(image.shape)}")
    planes = expand_labels(modality, n_modalities, image.shape[2], image.shape[3])
    return torch.cat([image, planes.to(image.dtype)], dim=1)


class StyleEncoder(nn.Module):
    """Strided convs, global average pooling, then a linear map to length n_s."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        layers = [nn.Conv2d(cfg.in_channels, cfg.base_width, 7, 1, 3), nn.ReLU(inplace=True)]
        ch = cfg.base_width
        for lvl in range(cfg.style_levels):
            nxt = cfg.width_at(lvl + 1)
            layers += [nn.Conv2d(ch, nxt, 4, 2, 1), nn.ReLU(inplace=True)]
            ch = nxt
        self.conv = nn.Sequential(*layers)
        self.fc = nn.Linear(ch, cfg.n_s)  # global pooling keeps n_s resolution-independent

    def forward(self, x: Tensor) -> Tensor:
        h = self.conv(x)
        pooled = h.mean(dim=(2, 3))
        return self.fc(pooled)


class ContentEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(cfg.in_channels, cfg.base_width, 7, 1, 3),
            nn.InstanceNorm2d(cfg.base_width),
            nn.ReLU(inplace=True),
        )
        blocks = []
        ch = cfg.base_width
        for lvl in range(cfg.content_levels):
            nxt = cfg.width_at(lvl)
            blocks.append(
                nn.Sequential(
                    nn.Conv2d(ch, nxt, 4, 2, 1),
                    nn.InstanceNorm2d(nxt),
                    nn.ReLU(inplace=True),
                    nn.Conv2d(nxt, nxt, 3, 1, 1),
                    nn.InstanceNorm2d(nxt),
                    nn.ReLU(inplace=True),
                )
            )
            ch = nxt
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x: Tensor) -> ContentCode:
        levels = []
        h = self.stem(x)
        for block in self.blocks:
            h = block(h)
            levels.append(h)
        return ContentCode(levels)


class AdaIN(nn.Module):
    """Instance-normalize, then scale/shift with style-derived parameters."""

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.channels = channels
        self.eps = eps

    def forward(self, x: Tensor, gamma: Tensor, beta: Tensor) -> Tensor:
        mean = x.mean(dim=(2, 3), keepdim=True)
        var = x.var(dim=(2, 3), unbiased=False, keepdim=True)
        normed = (x - mean) / torch.sqrt(var + self.eps)
        g = gamma.view(-1, self.channels, 1, 1)
        b = beta.view(-1, self.channels, 1, 1)
        return (1.0 + g) * normed + b


class _AdaINResBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.norm1 = AdaIN(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.norm2 = AdaIN(channels)

    def forward(self, x: Tensor, params: list[tuple[Tensor, Tensor]]) -> Tensor:
        h = F.relu(self.norm1(self.conv1(x), *params[0]))
        h = self.norm2(self.conv2(h), *params[1])
        return x + h


class TranslationDecoder(nn.Module):
    """Decodes the bottleneck content map under style-driven AdaIN modulation.

    No skip connections: everything modality-specific must flow through the
    style code, which is what keeps content modality-invariant.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        ch = cfg.width_at(cfg.content_levels - 1)
        self.res1 = _AdaINResBlock(ch)
        self.res2 = _AdaINResBlock(ch)
        self._adain_channels = [ch, ch, ch, ch]
        ups = []
        # K upsampling stages return the bottleneck to full resolution
        widths = [cfg.width_at(lvl) for lvl in range(cfg.content_levels - 2, -1, -1)]
        widths.append(cfg.base_width)
        for nxt in widths:
            ups.append(nn.Conv2d(ch, nxt, 3, 1, 1))
            self._adain_channels.append(nxt)
            ch = nxt
        self.up_convs = nn.ModuleList(ups)
        self.up_norms = nn.ModuleList([AdaIN(c) for c in self._adain_channels[4:]])
        self.out_conv = nn.Conv2d(ch, 1, 7, 1, 3)
        n_params = 2 * sum(self._adain_channels)
        hidden = max(4 * cfg.n_s, 64)
        self.style_mlp = nn.Sequential(
            nn.Linear(cfg.n_s, hidden),
            nn.ReLU(inplace=True),
            nn.Linear(hidden, n_params),
        )

    def _split_params(self, style: Tensor) -> list[tuple[Tensor, Tensor]]:
        raw = self.style_mlp(style)
        out, offset = [], 0
        for c in self._adain_channels:
            gamma = raw[:, offset : offset + c]
            beta = raw[:, offset + c : offset + 2 * c]
            out.append((gamma, beta))
            offset += 2 * c
        return out

    def forward(self, bottleneck: Tensor, style: Tensor) -> Tensor:
        if style.shape[-1] != self.cfg.n_s:
            raise ConfigError(f"style code must have length {self.cfg.n_s}")
        params = self._split_params(style)
        h = self.res1(bottleneck, params[0:2])
        h = self.res2(h, params[2:4])
        for i, conv in enumerate(self.up_convs):
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = F.relu(self.up_norms[i](conv(h), *params[4 + i]))
        return torch.tanh(self.out_conv(h))


class SegmentationDecoder(nn.Module):
    """U-Net style decoder over the full content pyramid, sigmoid per region."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        k = cfg.content_levels
        ch = cfg.width_at(k - 1)
        blocks = []
        for lvl in range(k - 2, -1, -1):
            skip_ch = cfg.width_at(lvl)
            blocks.append(
                nn.Sequential(
                    nn.Conv2d(ch + skip_ch, skip_ch, 3, 1, 1),
                    nn.InstanceNorm2d(skip_ch),
                    nn.ReLU(inplace=True),
                    nn.Conv2d(skip_ch, skip_ch, 3, 1, 1),
                    nn.InstanceNorm2d(skip_ch),
                    nn.ReLU(inplace=True),
                )
            )
            ch = skip_ch
        self.up_blocks = nn.ModuleList(blocks)
        self.head = nn.Sequential(
            nn.Conv2d(ch, cfg.base_width, 3, 1, 1),
            nn.InstanceNorm2d(cfg.base_width),
            nn.ReLU(inplace=True),
            nn.Conv2d(cfg.base_width, cfg.n_regions, 1),
        )

    def forward(self, content: ContentCode) -> Tensor:
        levels = content.levels
        if len(levels) != self.cfg.content_levels:
            raise ConfigError(
                f"expected {self.cfg.content_levels} pyramid levels, got {len(levels)}"
            )
        h = levels[-1]
        for i, block in enumerate(self.up_blocks):
            skip = levels[len(levels) - 2 - i]
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = block(torch.cat([h, skip], dim=1))
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        return torch.sigmoid(self.head(h))


class Discriminator(nn.Module):
    """Shared conv trunk with a patch real/fake head and a pooled modality head."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        layers = []
        ch = 1
        for lvl in range(cfg.disc_levels):
            nxt = cfg.width_at(lvl)
            layers += [nn.Conv2d(ch, nxt, 4, 2, 1), nn.LeakyReLU(0.01, inplace=True)]
            ch = nxt
        self.trunk = nn.Sequential(*layers)
        self.src_head = nn.Conv2d(ch, 1, 3, 1, 1)
        self.cls_head = nn.Linear(ch, cfg.n_modalities)

    def forward(self, image: Tensor) -> DiscriminatorOutputs:
        if image.ndim != 4 or image.shape[1] != 1:
            raise ConfigError(f"expected (B, 1, H, W) image, got {tuple(image.shape)}")
        h = self.trunk(image)
        src = torch.sigmoid(self.src_head(h))
        cls = torch.softmax(self.cls_head(h.mean(dim=(2, 3))), dim=1)
        return DiscriminatorOutputs(src=src, cls=cls)


class Generator(nn.Module):
    """The four shared networks wired for reconstruction, translation and segmentation."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.style_encoder = StyleEncoder(cfg)
        self.content_encoder = ContentEncoder(cfg)
        self.translation_decoder = TranslationDecoder(cfg)
        self.segmentation_decoder = SegmentationDecoder(cfg)

    def encode_style(self, image: Tensor, modality: Tensor) -> Tensor:
        return self.style_encoder(_with_label(image, modality, self.cfg.n_modalities))

    def encode_content(self, image: Tensor, modality: Tensor) -> ContentCode:
        return self.content_encoder(_with_label(image, modality, self.cfg.n_modalities))

    def decode_translation(self, content: ContentCode | Tensor, style: Tensor) -> Tensor:
        bottleneck = content.bottleneck if isinstance(content, ContentCode) else content
        return self.translation_decoder(bottleneck, style)

    def decode_segmentation(self, content: ContentCode) -> Tensor:
        return self.segmentation_decoder(content)

    def forward_pair(
        self, x_a: Tensor, m_a: Tensor, x_b: Tensor, m_b: Tensor
    ) -> tuple[GeneratorOutputs, dict]:
        """Full cross-wired forward; also returns the codes for loss plumbing."""
        if x_a.shape != x_b.shape:
            raise ConfigError(f"pair shape mismatch: {tuple(x_a.shape)} vs {tuple(x_b.shape)}")
        s_a = self.encode_style(x_a, m_a)
        s_b = self.encode_style(x_b, m_b)
        c_a = self.encode_content(x_a, m_a)
        c_b = self.encode_content(x_b, m_b)
        outputs = GeneratorOutputs(
            recon_a=self.decode_translation(c_a, s_a),
            recon_b=self.decode_translation(c_b, s_b),
            trans_ab=self.decode_translation(c_a, s_b),
            trans_ba=self.decode_translation(c_b, s_a),
            seg_a=self.decode_segmentation(c_a),
            seg_b=self.decode_segmentation(c_b),
        )
        codes = {"s_a": s_a, "s_b": s_b, "c_a": c_a, "c_b": c_b}
        return outputs, codes

    def forward_single(self, x: Tensor, m: Tensor) -> Tensor:
        """Test-time path: segmentation map only."""
        return self.decode_segmentation(self.encode_content(x, m))


def build_networks(cfg: ModelConfig, seed: int | None = None) -> tuple[Generator, Discriminator]:
    if seed is not None:
        torch.manual_seed(seed)
    return Generator(cfg), Discriminator(cfg)


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    generator: Generator
    discriminator: Discriminator
    config: ModelConfig
    epoch: int
    extra: dict = field(default_factory=dict)


def save_checkpoint(
    path: str | Path,
    generator: Generator,
    discriminator: Discriminator,
    epoch: int,
    extra: dict | None = None,
) -> None:
    cfg = generator.cfg
    payload = {
        "model_config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "epoch": epoch,
        "generator": generator.state_dict(),
        "discriminator": discriminator.state_dict(),
        "extra": extra or {},
    }
    torch.save(payload, str(path))


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    payload = torch.load(str(path), map_location="cpu", weights_only=False)
    cfg = ModelConfig.from_dict(payload["model_config"])
    if config_hash(cfg) != payload["config_hash"]:
        raise CheckpointError(f"checkpoint {path.name}: config hash mismatch")
    generator = Generator(cfg)
    generator.load_state_dict(payload["generator"])
    discriminator = Discriminator(cfg)
    discriminator.load_state_dict(payload["discriminator"])
    generator.eval()
    discriminator.eval()
    return Checkpoint(generator, discriminator, cfg, payload["epoch"], payload.get("extra", {}))
