# -*- coding: utf-8 -*-
"""
Synthetic Data Service

Gerador determinístico de imagens sintéticas de números de camisa,
substituindo o conjunto de dados privado. Reproduz as propriedades
estruturais relevantes: conjunto de classes, desbalanceamento, divisões por
"jogo" (style_seed) e a política de aumento de dados (somente matiz).

Funcionalidades principais:
- Renderização procedural (Pillow) com fonte bitmap 5x7 embutida
- Oclusão parcial, ruído e desfoque gaussiano (aplicado por último)
- Divisão treino/validação/teste com style_seeds disjuntos entre divisões
- Manifesto em texto (TSV com cabeçalho) com hash de conteúdo
- Hue jitter em HSV e carregamento de lotes com alvos codificados
"""

import functools
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv
from PIL import Image, ImageDraw, ImageFilter

from ..core.autodiff import FLOAT32, Tensor
from ..core.errors import ConfigurationError, InvalidArgumentError
from ..core.labels import ClassSet, JerseyLabel, LabelLike, TargetTriple, as_label, encode_targets


logger = logging.getLogger(__name__)

# Constantes
SPLITS = ("train", "val", "test")
MIN_IMAGE_SIZE = 16
DEFAULT_IMAGE_SIZE = (64, 64)
MIN_SEEDS_PER_SPLIT = 3
DEFAULT_NOISE_SIGMA = 0.02
DEFAULT_HUE_JITTER = 0.4
MANIFEST_FORMAT = "jersey-mtl-manifest/1"
MANIFEST_FILENAME = "manifest.tsv"
IMAGE_CACHE_SIZE = 4096
RATIO_TOLERANCE = 1e-9

# Tamanhos das divisões do conjunto de dados original (treino, validação, teste)
PUBLISHED_SPLIT_SIZES = (38456, 6770, 9025)

_GLYPHS = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


def glyph_bitmap(digit: int, bold: bool = False) -> np.ndarray:
    """Bitmap 7x5 (uint8, 0/1) do dígito; `bold` engrossa os traços verticais."""
    bitmap = np.array([[int(c) for c in row] for row in _GLYPHS[digit]], dtype=np.uint8)
    if bold:
        shifted = np.zeros_like(bitmap)
        shifted[:, 1:] = bitmap[:, :-1]
        bitmap = bitmap | shifted
    return bitmap


@dataclass(frozen=True)
class RenderSpec:
    """Parâmetros que determinam uma imagem de forma única."""

    label: JerseyLabel
    style_seed: int
    noise_seed: int
    occlusion_level: float = 0.0
    blur_sigma: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "label", as_label(self.label))
        if not 0.0 <= self.occlusion_level <= 1.0:
            raise InvalidArgumentError(f"occlusion_level fora de [0, 1]: {self.occlusion_level}")
        if self.blur_sigma < 0:
            raise InvalidArgumentError(f"blur_sigma deve ser >= 0: {self.blur_sigma}")


@dataclass(frozen=True)
class AugmentationPolicy:
    """Aumento de dados de treino: apenas variação de matiz."""

    hue_jitter_max: float = DEFAULT_HUE_JITTER
    affine_enabled: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.hue_jitter_max <= 0.5:
            raise ConfigurationError(f"hue_jitter_max deve estar em [0, 0.5], recebido {self.hue_jitter_max}")
        if self.affine_enabled:
            raise ConfigurationError("Transformações afins não são suportadas pela política de aumento")


@dataclass(frozen=True)
class _Style:
    background: Tuple[int, int, int]
    ink: Tuple[int, int, int]
    height_fraction: float
    aspect: float
    gap_fraction: float
    bold: bool


def _hsv_color(h: float, s: float, v: float) -> Tuple[int, int, int]:
    rgb = hsv_to_rgb(np.array([h, s, v], dtype=np.float64))
    return tuple(int(round(c * 255)) for c in rgb)  # type: ignore[return-value]


def _style_for(style_seed: int) -> _Style:
    """Cor da camisa, cor e proporções da fonte: fixas por "jogo"."""
    rng = np.random.default_rng([style_seed, 0x5EED])
    bg_h, bg_s, bg_v = rng.uniform(0, 1), rng.uniform(0.3, 0.9), rng.uniform(0.15, 0.85)
    ink_v = bg_v + 0.5 if bg_v < 0.5 else bg_v - 0.5
    ink_h = (bg_h + rng.uniform(0.25, 0.75)) % 1.0
    return _Style(
        background=_hsv_color(bg_h, bg_s, bg_v),
        ink=_hsv_color(ink_h, rng.uniform(0.0, 0.8), ink_v),
        height_fraction=float(rng.uniform(0.5, 0.72)),
        aspect=float(rng.uniform(0.5, 0.7)),
        gap_fraction=float(rng.uniform(0.1, 0.3)),
        bold=bool(rng.random() < 0.5),
    )


def _digits_of(label: JerseyLabel) -> List[int]:
    if label.value is None:
        return []
    return [int(c) for c in str(label.value)]


def _check_size(size: Tuple[int, int]) -> Tuple[int, int]:
    height, width = int(size[0]), int(size[1])
    if height < MIN_IMAGE_SIZE or width < MIN_IMAGE_SIZE:
        raise InvalidArgumentError(f"Tamanho mínimo de imagem é {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}, recebido {size}")
    return height, width


def render_pixels(spec: RenderSpec, size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
                  noise_sigma: float = DEFAULT_NOISE_SIGMA) -> np.ndarray:
    """
    Renderiza a imagem como array uint8 [h, w, 3] (o formato gravado em PNG).
    """
    height, width = _check_size(size)
    style = _style_for(spec.style_seed)
    rng = np.random.default_rng([spec.noise_seed, spec.style_seed])

    image = Image.new("RGB", (width, height), style.background)
    digits = _digits_of(spec.label)
    bbox: Optional[Tuple[int, int, int, int]] = None

    if digits:
        glyph_h = max(7, int(round(style.height_fraction * height)))
        glyph_w = max(5, int(round(glyph_h * style.aspect)))
        gap = int(round(style.gap_fraction * glyph_w))
        total_w = len(digits) * glyph_w + (len(digits) - 1) * gap
        if total_w > int(0.9 * width):
            factor = 0.9 * width / total_w
            glyph_w = max(5, int(glyph_w * factor))
            glyph_h = max(7, int(glyph_h * factor))
            gap = int(gap * factor)
            total_w = len(digits) * glyph_w + (len(digits) - 1) * gap

        jitter_x = rng.uniform(-0.05, 0.05) * width
        jitter_y = rng.uniform(-0.05, 0.05) * height
        left = int(np.clip(round((width - total_w) / 2 + jitter_x), 0, width - total_w))
        top = int(np.clip(round((height - glyph_h) / 2 + jitter_y), 0, height - glyph_h))

        mask = Image.new("L", (width, height), 0)
        for position, digit in enumerate(digits):
            bitmap = Image.fromarray(glyph_bitmap(digit, style.bold) * 255)
            glyph = bitmap.resize((glyph_w, glyph_h), Image.Resampling.NEAREST)
            mask.paste(glyph, (left + position * (glyph_w + gap), top))
        image = Image.composite(Image.new("RGB", (width, height), style.ink), image, mask)
        bbox = (left, top, left + total_w, top + glyph_h)

    occluder = tuple(int(c) for c in rng.integers(0, 256, size=3))
    band_start = rng.uniform(0.0, 1.0)
    if bbox is not None and spec.occlusion_level > 0:
        box_w = bbox[2] - bbox[0]
        band_w = int(math.ceil(spec.occlusion_level * box_w))
        x0 = bbox[0] + int(math.floor(band_start * (box_w - band_w)))
        ImageDraw.Draw(image).rectangle([x0, bbox[1], x0 + band_w - 1, bbox[3] - 1], fill=occluder)

    pixels = np.asarray(image, dtype=np.float64) / 255.0
    if noise_sigma > 0:
        pixels = pixels + rng.normal(0.0, noise_sigma, size=pixels.shape)
    pixels = np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)

    if spec.blur_sigma > 0:
        blurred = Image.fromarray(pixels).filter(ImageFilter.GaussianBlur(radius=spec.blur_sigma))
        pixels = np.asarray(blurred, dtype=np.uint8)
    return pixels


def pixels_to_chw(pixels: np.ndarray) -> np.ndarray:
    """uint8 [h, w, 3] -> float64 [3, h, w] em [0, 1]."""
    return np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=np.float64) / 255.0


def render_sample(spec: RenderSpec, size: Tuple[int, int] = DEFAULT_IMAGE_SIZE) -> Tensor:
    """
    Imagem RGB [3, h, w] em [0, 1]; o mesmo RenderSpec gera sempre a mesma
    imagem, bit a bit.
    """
    return Tensor(pixels_to_chw(render_pixels(spec, size)))


# ---------------------------------------------------------------------------
# Aumento de dados
# ---------------------------------------------------------------------------

def shift_hue(image: np.ndarray, delta: float) -> np.ndarray:
    """Desloca a matiz de uma imagem [3, h, w] por `delta` (módulo 1)."""
    hsv = rgb_to_hsv(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0).transpose(1, 2, 0))
    hsv[..., 0] = np.mod(hsv[..., 0] + delta, 1.0)
    return np.ascontiguousarray(hsv_to_rgb(hsv).transpose(2, 0, 1))


def hue_jitter(image: Union[np.ndarray, Tensor], magnitude: float, rng: np.random.Generator) -> np.ndarray:
    """
    Desloca a matiz por uniform(-magnitude, +magnitude); saturação e valor
    são preservados.

    Raises:
        InvalidArgumentError: magnitude fora de [0, 0.5]
    """
    if not 0.0 <= magnitude <= 0.5:
        raise InvalidArgumentError(f"Magnitude de hue jitter fora de [0, 0.5]: {magnitude}")
    data = image.data if isinstance(image, Tensor) else image
    delta = float(rng.uniform(-magnitude, magnitude)) if magnitude > 0 else 0.0
    return shift_hue(data, delta)


# ---------------------------------------------------------------------------
# Contagens por classe e divisões
# ---------------------------------------------------------------------------

def published_split_ratios() -> Tuple[float, float, float]:
    """Proporções treino/validação/teste do conjunto de dados original."""
    total = float(sum(PUBLISHED_SPLIT_SIZES))
    return tuple(size / total for size in PUBLISHED_SPLIT_SIZES)  # type: ignore[return-value]


def _validate_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    if len(ratios) != 3:
        raise ConfigurationError(f"Esperadas 3 proporções (treino, validação, teste), recebido {ratios}")
    values = tuple(float(r) for r in ratios)
    if any(r <= 0 for r in values) or abs(sum(values) - 1.0) > RATIO_TOLERANCE:
        raise ConfigurationError(f"Proporções devem ser positivas e somar 1, recebido {values}")
    return values  # type: ignore[return-value]


def split_sizes(total: int, ratios: Sequence[float]) -> Tuple[int, int, int]:
    """
    Validação e teste recebem round(total * proporção) (meio para cima);
    o restante vai para treino.

    Example:
        >>> split_sizes(810, (0.7, 0.12, 0.18))
        (567, 97, 146)
    """
    _, val_ratio, test_ratio = _validate_ratios(ratios)
    val = int(math.floor(total * val_ratio + 0.5))
    test = int(math.floor(total * test_ratio + 0.5))
    return total - val - test, val, test


def _null_count(null_fraction: float, others_total: int) -> int:
    if not 0.0 <= null_fraction < 1.0:
        raise ConfigurationError(f"null_fraction deve estar em [0, 1), recebido {null_fraction}")
    return int(math.floor(null_fraction * others_total / (1.0 - null_fraction) + 0.5))


def balanced_counts(classes: ClassSet, per_class: int,
                    null_fraction: Optional[float] = None) -> Dict[JerseyLabel, int]:
    """
    Mesma contagem para todas as classes. Com `null_fraction`, a classe nula
    recebe essa fração do total.
    """
    if per_class < 1:
        raise ConfigurationError(f"per_class deve ser >= 1, recebido {per_class}")
    counts = {label: int(per_class) for label in classes}
    if null_fraction is not None:
        counts[classes[0]] = _null_count(null_fraction, per_class * (len(classes) - 1))
    return counts


def imbalanced_counts(classes: ClassSet, min_count: int, ratio: float, seed: int,
                      null_fraction: Optional[float] = None) -> Dict[JerseyLabel, int]:
    """
    Contagens em progressão geométrica entre min_count e min_count * ratio,
    atribuídas às classes em ordem sorteada pela semente. A razão entre a
    maior e a menor contagem é exatamente `ratio` quando min_count * ratio é
    inteiro.

    Com `null_fraction`, a classe nula fica fora da progressão e recebe essa
    fração do total, limitada ao intervalo [min, max] das demais.
    """
    if min_count < 1 or ratio < 1:
        raise ConfigurationError(f"min_count >= 1 e ratio >= 1 exigidos, recebido {min_count}, {ratio}")
    labels = list(classes) if null_fraction is None else list(classes)[1:]
    k = len(labels)
    if k < 2:
        raise ConfigurationError("Desbalanceamento exige ao menos 2 classes na progressão")
    exponents = np.arange(k) / (k - 1)
    values = [int(math.floor(min_count * ratio ** (1.0 - e) + 0.5)) for e in exponents]
    values[0] = int(math.floor(min_count * ratio + 0.5))
    values[-1] = int(min_count)
    order = np.random.default_rng(seed).permutation(k)
    counts = {labels[int(position)]: values[rank] for rank, position in enumerate(order)}
    if null_fraction is not None:
        requested = _null_count(null_fraction, sum(counts.values()))
        counts[classes[0]] = int(np.clip(requested, min(values), max(values)))
        counts = {label: counts[label] for label in classes}
    return counts


def partition_style_seeds(style_seeds: Sequence[int], ratios: Sequence[float],
                          master_seed: int) -> Dict[str, List[int]]:
    """
    Divide os style_seeds ("jogos") entre as divisões, sem interseção.

    Raises:
        ConfigurationError: seeds repetidos ou menos de 3 seeds em alguma divisão
    """
    seeds = [int(s) for s in style_seeds]
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("style_seeds contém valores repetidos")
    sizes = split_sizes(len(seeds), ratios)
    if min(sizes) < MIN_SEEDS_PER_SPLIT:
        raise ConfigurationError(
            f"style_seeds insuficientes para divisões disjuntas: {len(seeds)} seeds geram {sizes}, "
            f"mínimo {MIN_SEEDS_PER_SPLIT} por divisão"
        )
    shuffled = [seeds[i] for i in np.random.default_rng(master_seed).permutation(len(seeds))]
    pools: Dict[str, List[int]] = {}
    start = 0
    for split, size in zip(SPLITS, sizes):
        pools[split] = sorted(shuffled[start:start + size])
        start += size
    return pools


def _apportion(total: int, targets: Sequence[int]) -> List[int]:
    """
    Sequência de divisões de tamanho `total` com exatamente `targets[s]`
    ocorrências de cada divisão, espalhadas proporcionalmente ao longo dela.
    """
    assigned = np.zeros(len(targets), dtype=np.int64)
    weights = np.asarray(targets, dtype=np.float64) / max(total, 1)
    sequence = []
    for i in range(total):
        deficit = weights * (i + 1) - assigned
        chosen = int(np.argmax(deficit))
        assigned[chosen] += 1
        sequence.append(chosen)
    return sequence


# ---------------------------------------------------------------------------
# Manifesto
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorParams:
    """Parâmetros do gerador registrados no cabeçalho do manifesto."""

    image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE
    split_ratios: Tuple[float, float, float] = (0.7, 0.12, 0.18)
    master_seed: int = 0
    occlusion_max: float = 0.0
    blur_max: float = 0.0
    noise_sigma: float = DEFAULT_NOISE_SIGMA

    def to_dict(self) -> dict:
        return {
            "image_size": list(self.image_size),
            "split_ratios": list(self.split_ratios),
            "master_seed": self.master_seed,
            "occlusion_max": self.occlusion_max,
            "blur_max": self.blur_max,
            "noise_sigma": self.noise_sigma,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorParams":
        return cls(
            image_size=tuple(data["image_size"]),  # type: ignore[arg-type]
            split_ratios=tuple(data["split_ratios"]),  # type: ignore[arg-type]
            master_seed=int(data["master_seed"]),
            occlusion_max=float(data["occlusion_max"]),
            blur_max=float(data["blur_max"]),
            noise_sigma=float(data["noise_sigma"]),
        )


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: JerseyLabel
    style_seed: int
    split: str
    noise_seed: int
    occlusion_level: float
    blur_sigma: float

    @property
    def render_spec(self) -> RenderSpec:
        return RenderSpec(self.label, self.style_seed, self.noise_seed, self.occlusion_level, self.blur_sigma)


_COLUMNS = ["path", "label", "style_seed", "split", "noise_seed", "occlusion", "blur"]


@dataclass
class DatasetManifest:
    """
    Registros do conjunto de dados e parâmetros do gerador.

    As imagens são lidas de `root` quando gravadas em disco; caso contrário
    são renderizadas a partir do registro (mesmo resultado, bit a bit).
    """

    classes: ClassSet
    records: List[ManifestRecord]
    params: GeneratorParams
    root: Optional[Path] = None
    cache_size: int = field(default=IMAGE_CACHE_SIZE, repr=False, compare=False)
    _pixels: Callable[[int], np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for record in self.records:
            if record.label not in self.classes:
                raise ConfigurationError(f"Registro {record.path} com rótulo fora do conjunto de classes: {record.label}")
            if record.split not in SPLITS:
                raise ConfigurationError(f"Divisão desconhecida no registro {record.path}: {record.split}")
        owners: Dict[int, str] = {}
        for record in self.records:
            if owners.setdefault(record.style_seed, record.split) != record.split:
                raise ConfigurationError(f"style_seed {record.style_seed} aparece em mais de uma divisão")
        if self.cache_size < 0:
            raise ConfigurationError(f"cache_size deve ser >= 0, recebido {self.cache_size}")
        self._pixels = functools.lru_cache(maxsize=self.cache_size)(self._read_pixels)

    def __len__(self) -> int:
        return len(self.records)

    def split_indices(self, split: str) -> List[int]:
        if split not in SPLITS:
            raise InvalidArgumentError(f"Divisão desconhecida: {split}")
        return [i for i, record in enumerate(self.records) if record.split == split]

    def split_records(self, split: str) -> List[ManifestRecord]:
        return [self.records[i] for i in self.split_indices(split)]

    def style_seeds(self, split: str) -> List[int]:
        return sorted({record.style_seed for record in self.split_records(split)})

    def pixels(self, index: int) -> np.ndarray:
        """Pixels uint8 [h, w, 3] do registro `index` (cache LRU de `cache_size` imagens)."""
        return self._pixels(int(index))

    def _read_pixels(self, index: int) -> np.ndarray:
        record = self.records[index]
        path = self.root / record.path if self.root is not None else None
        if path is not None and path.exists():
            with Image.open(path) as handle:
                return np.asarray(handle.convert("RGB"), dtype=np.uint8)
        return render_pixels(record.render_spec, self.params.image_size, self.params.noise_sigma)

    def image(self, index: int) -> np.ndarray:
        return pixels_to_chw(self.pixels(index))

    def to_frame(self) -> pd.DataFrame:
        rows = [
            [r.path, r.label.token, r.style_seed, r.split, r.noise_seed, r.occlusion_level, r.blur_sigma]
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=_COLUMNS)

    def to_text(self) -> str:
        """Forma canônica do manifesto (base do hash de conteúdo)."""
        header = [
            f"# {MANIFEST_FORMAT}",
            f"# params: {json.dumps(self.params.to_dict(), sort_keys=True)}",
            f"# classes: {','.join(self.classes.to_lines())}",
        ]
        body = self.to_frame().to_csv(sep="\t", index=False, lineterminator="\n", float_format="%.17g")
        return "\n".join(header) + "\n" + body

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_text(cls, text: str, root: Optional[Path] = None) -> "DatasetManifest":
        """
        Raises:
            ConfigurationError: cabeçalho ausente ou formato desconhecido
        """
        header = {}
        for line in text.splitlines():
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(":")
            header[key.strip()] = value.strip()
        if MANIFEST_FORMAT not in header:
            raise ConfigurationError("Manifesto sem marca de formato reconhecida")
        try:
            params = GeneratorParams.from_dict(json.loads(header["params"]))
            classes = ClassSet.from_lines(header["classes"].split(","))
        except (KeyError, ValueError) as e:
            raise ConfigurationError(f"Cabeçalho de manifesto inválido: {e}") from e

        frame = pd.read_csv(io.StringIO(text), sep="\t", comment="#", dtype=str, keep_default_na=False)
        records = [
            ManifestRecord(
                path=row.path,
                label=JerseyLabel.parse(row.label),
                style_seed=int(row.style_seed),
                split=row.split,
                noise_seed=int(row.noise_seed),
                occlusion_level=float(row.occlusion),
                blur_sigma=float(row.blur),
            )
            for row in frame.itertuples(index=False)
        ]
        return cls(classes, records, params, root)

    def save(self, directory: Union[str, Path], write_images: bool = True) -> Path:
        """Grava `manifest.tsv` (e, opcionalmente, os PNGs) em `directory`."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / MANIFEST_FILENAME
        path.write_text(self.to_text(), encoding="utf-8")
        if write_images:
            for index, record in enumerate(self.records):
                target = directory / record.path
                target.parent.mkdir(parents=True, exist_ok=True)
                Image.fromarray(self.pixels(index)).save(target, format="PNG")
        self.root = directory
        logger.info(f"[DADOS] Manifesto salvo em {path} ({len(self.records)} registros)")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_FILENAME
        return cls.from_text(path.read_text(encoding="utf-8"), root=path.parent)


def generate_dataset(classes: ClassSet, per_class_counts: Mapping[LabelLike, int],
                     style_seeds: Sequence[int], split_ratios: Sequence[float], master_seed: int,
                     image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE, occlusion_max: float = 0.0,
                     blur_max: float = 0.0, noise_sigma: float = DEFAULT_NOISE_SIGMA) -> DatasetManifest:
    """
    Gera o manifesto do conjunto de dados sintético.

    Função pura de (classes, contagens, seeds, proporções, master_seed): os
    registros vêm agrupados por classe, na ordem do ClassSet, e cada divisão
    recebe exatamente split_sizes(total, proporções) registros.

    Raises:
        ConfigurationError: proporções inválidas, seeds insuficientes, contagens inválidas
        UnknownClassError: rótulo das contagens fora do ClassSet
    """
    ratios = _validate_ratios(split_ratios)
    _check_size(image_size)
    if not 0.0 <= occlusion_max <= 1.0 or blur_max < 0:
        raise ConfigurationError(f"occlusion_max em [0, 1] e blur_max >= 0 exigidos, recebido {occlusion_max}, {blur_max}")

    counts = {classes.index(label): int(count) for label, count in per_class_counts.items()}
    if any(count < 0 for count in counts.values()):
        raise ConfigurationError("Contagens por classe não podem ser negativas")
    total = sum(counts.values())
    if total == 0:
        raise ConfigurationError("Conjunto de dados vazio: todas as contagens são zero")

    pools = partition_style_seeds(style_seeds, ratios, master_seed)
    targets = split_sizes(total, ratios)
    sequence = _apportion(total, targets)
    rng = np.random.default_rng(master_seed)

    records: List[ManifestRecord] = []
    per_split = {split: 0 for split in SPLITS}
    position = 0
    for class_index, label in enumerate(classes):
        for _ in range(counts.get(class_index, 0)):
            split = SPLITS[sequence[position]]
            position += 1
            style_seed = int(rng.choice(pools[split]))
            noise_seed = int(rng.integers(0, 2**31 - 1))
            occlusion = float(rng.uniform(0.0, occlusion_max)) if occlusion_max > 0 else 0.0
            blur = float(rng.uniform(0.0, blur_max)) if blur_max > 0 else 0.0
            path = f"{split}/{per_split[split]:06d}.png"
            per_split[split] += 1
            records.append(ManifestRecord(path, label, style_seed, split, noise_seed, occlusion, blur))

    params = GeneratorParams(
        image_size=(int(image_size[0]), int(image_size[1])),
        split_ratios=ratios,
        master_seed=int(master_seed),
        occlusion_max=float(occlusion_max),
        blur_max=float(blur_max),
        noise_sigma=float(noise_sigma),
    )
    manifest = DatasetManifest(classes, records, params)
    logger.info(
        f"[DADOS] Conjunto gerado: {total} registros "
        f"(treino {targets[0]}, validação {targets[1]}, teste {targets[2]})"
    )
    return manifest


# ---------------------------------------------------------------------------
# Lotes
# ---------------------------------------------------------------------------

def load_batch(manifest: DatasetManifest, split: str, indices: Sequence[int], policy: AugmentationPolicy,
               rng: np.random.Generator, dtype: type = FLOAT32) -> Tuple[Tensor, List[TargetTriple]]:
    """
    Carrega um lote da divisão; `indices` são posições dentro da divisão.
    Apenas a divisão de treino recebe aumento de dados.

    Raises:
        IndexError: índice fora da divisão
    """
    positions = manifest.split_indices(split)
    images = []
    targets = []
    for index in indices:
        if not 0 <= int(index) < len(positions):
            raise IndexError(f"Índice {index} fora da divisão '{split}' ({len(positions)} registros)")
        record_index = positions[int(index)]
        image = manifest.image(record_index)
        if split == "train" and policy.hue_jitter_max > 0:
            image = hue_jitter(image, policy.hue_jitter_max, rng)
        images.append(image)
        targets.append(encode_targets(manifest.records[record_index].label, manifest.classes))
    batch = np.stack(images).astype(dtype) if images else np.zeros((0, 3, *manifest.params.image_size), dtype=dtype)
    return Tensor(batch), targets


def split_arrays(manifest: DatasetManifest, split: str,
                 dtype: type = FLOAT32) -> Tuple[np.ndarray, List[JerseyLabel]]:
    """Todas as imagens (sem aumento) e rótulos de uma divisão."""
    positions = manifest.split_indices(split)
    if not positions:
        return np.zeros((0, 3, *manifest.params.image_size), dtype=dtype), []
    images = np.stack([manifest.image(i) for i in positions]).astype(dtype)
    return images, [manifest.records[i].label for i in positions]


# ---------------------------------------------------------------------------
# Estatísticas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetStats:
    split_counts: Dict[str, int]
    split_games: Dict[str, int]
    class_counts: Dict[str, int]
    imbalance_ratio: float
    null_fraction: float

    def rows(self) -> List[List[object]]:
        return [[split, self.split_counts[split], self.split_games[split]] for split in SPLITS]


def dataset_statistics(manifest: DatasetManifest) -> DatasetStats:
    """Contagens por divisão, jogos por divisão, contagens por classe e desbalanceamento."""
    class_counts = {label.token: 0 for label in manifest.classes}
    for record in manifest.records:
        class_counts[record.label.token] += 1
    present = [count for count in class_counts.values() if count > 0]
    total = len(manifest.records)
    return DatasetStats(
        split_counts={split: len(manifest.split_indices(split)) for split in SPLITS},
        split_games={split: len(manifest.style_seeds(split)) for split in SPLITS},
        class_counts=class_counts,
        imbalance_ratio=(max(present) / min(present)) if present else 0.0,
        null_fraction=class_counts[manifest.classes[0].token] / total if total else 0.0,
    )
