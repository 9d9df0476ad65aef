# -*- coding: utf-8 -*-
"""
Spec File Service

Leitura e escrita dos arquivos de especificação de experimento (formato INI).

Seções e chaves aceitas:

    [experiment]   name, output_dir
    [dataset]      classes, counts, per_class, min_count, imbalance_ratio,
                   null_fraction, style_seeds, split, master_seed, image_size,
                   occlusion_max, blur_max, write_images
    [train]        total_iterations, batch_size, base_lr, lr_decay_factor,
                   lr_milestones, weight_decay, validation_interval,
                   hue_jitter_max
    [runs.<nome>]  weights, seeds, backbone, channels, blocks, residual,
                   feature_dim, mode

Valores omitidos em [dataset] e [train] vêm de config/settings.json. Listas
são separadas por vírgula; pesos e proporções aceitam frações ("1/3").
`classes = 81` significa nulo + 1..80; `split = published` usa as proporções do
conjunto de dados original; `style_seeds = 30` significa 0..29, enquanto
`style_seeds = 30,` é a lista com a única semente 30.
"""

import configparser
import re
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, TypeVar, Union

from ..core.errors import ConfigurationError, JerseyMTLError, SpecParseError, WeightSimplexError
from ..core.labels import ClassSet
from ..core.losses import LossWeights
from ..core.model import BACKBONE_PRESETS, BackboneConfig
from ..utils.helpers import get_output_dir, get_setting, load_settings
from .evaluator import PredictionMode
from .experiments import DatasetSpec, ExperimentSpec, RunSpec
from .synth_data import AugmentationPolicy, published_split_ratios
from .trainer import TrainConfig


T = TypeVar("T")

RUN_PREFIX = "runs."
KNOWN_KEYS: Dict[str, Tuple[str, ...]] = {
    "experiment": ("name", "output_dir"),
    "dataset": (
        "classes", "counts", "per_class", "min_count", "imbalance_ratio", "null_fraction", "style_seeds",
        "split", "master_seed", "image_size", "occlusion_max", "blur_max", "write_images",
    ),
    "train": (
        "total_iterations", "batch_size", "base_lr", "lr_decay_factor", "lr_milestones", "weight_decay",
        "validation_interval", "hue_jitter_max",
    ),
    "runs": ("weights", "seeds", "backbone", "channels", "blocks", "residual", "feature_dim", "mode"),
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_KEY_RE = re.compile(r"^\s*([^=:\s#;][^=:]*?)\s*[=:]")


class _SpecReader:
    """configparser + localização de linhas para mensagens de erro."""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.parser = configparser.ConfigParser(interpolation=None, default_section="__sem_padrao__")
        try:
            self.parser.read_string(text)
        except configparser.Error as e:
            raise SpecParseError(f"Arquivo de especificação malformado: {e.message}",
                                 getattr(e, "lineno", None)) from e

    def line_of(self, section: str, key: Optional[str] = None) -> Optional[int]:
        current = None
        for number, line in enumerate(self.lines, start=1):
            header = _SECTION_RE.match(line)
            if header:
                current = header.group(1).strip()
                if key is None and current == section:
                    return number
                continue
            if key is not None and current == section:
                match = _KEY_RE.match(line)
                if match and match.group(1).strip().lower() == key:
                    return number
        return None

    def fail(self, section: str, key: Optional[str], message: str) -> SpecParseError:
        return SpecParseError(message, self.line_of(section, key))

    def raw(self, section: str, key: str) -> Optional[str]:
        if not self.parser.has_section(section) or not self.parser.has_option(section, key):
            return None
        return self.parser.get(section, key).strip()

    def value(self, section: str, key: str, convert: Callable[[str], T], default: T) -> T:
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            return convert(text)
        except WeightSimplexError as e:
            raise WeightSimplexError(f"linha {self.line_of(section, key)}: {e}", e.total) from e
        except (ValueError, ZeroDivisionError, JerseyMTLError) as e:
            raise self.fail(section, key, f"Valor inválido para [{section}] {key} = {text!r}: {e}") from e

    def check_keys(self) -> None:
        for section in self.parser.sections():
            kind = "runs" if section.startswith(RUN_PREFIX) else section
            if kind not in KNOWN_KEYS:
                raise self.fail(section, None, f"Seção desconhecida: [{section}]")
            if kind == "runs" and not section[len(RUN_PREFIX):].strip():
                raise self.fail(section, None, "Execução sem nome: use [runs.<nome>]")
            for key in self.parser.options(section):
                if key not in KNOWN_KEYS[kind]:
                    raise self.fail(section, key, f"Chave desconhecida em [{section}]: {key}")


def _number(text: str) -> float:
    return float(Fraction(text.strip()))


def _int_list(text: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _float_list(text: str) -> Tuple[float, ...]:
    return tuple(_number(part) for part in text.split(",") if part.strip())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "yes", "true", "on", "sim"):
        return True
    if lowered in ("0", "no", "false", "off", "nao", "não"):
        return False
    raise ValueError(f"booleano inválido: {text!r}")


def _optional_float(text: str) -> Optional[float]:
    return None if not text.strip() or text.strip().lower() == "none" else _number(text)


def _classes(text: str) -> ClassSet:
    parts = [part.strip() for part in text.split(",") if part.strip()]
    if len(parts) == 1 and parts[0].isdigit():
        return ClassSet.first(int(parts[0]))
    return ClassSet(parts)


def _style_seeds(text: str) -> Tuple[int, ...]:
    seeds = _int_list(text)
    if len(seeds) == 1 and "," not in text:
        return tuple(range(seeds[0]))
    return seeds


def _split(text: str) -> Tuple[float, float, float]:
    if text.strip().lower() == "published":
        return published_split_ratios()
    values = _float_list(text)
    if len(values) != 3:
        raise ValueError("esperadas 3 proporções")
    return values  # type: ignore[return-value]


def _pair(text: str) -> Tuple[int, int]:
    values = _int_list(text)
    if len(values) == 1:
        return values[0], values[0]
    if len(values) != 2:
        raise ValueError("esperado 'altura, largura'")
    return values[0], values[1]


def _dataset_defaults(settings: Dict[str, Any]) -> DatasetSpec:
    section = get_setting(settings, "dataset", {}) or {}
    base = DatasetSpec()
    kwargs: Dict[str, Any] = {}
    if "classes" in section:
        kwargs["classes"] = _classes(str(section["classes"]))
    for key in ("counts", "per_class", "min_count", "master_seed", "write_images"):
        if key in section:
            kwargs[key] = section[key]
    for key in ("imbalance_ratio", "occlusion_max", "blur_max"):
        if key in section:
            kwargs[key] = float(section[key])
    if section.get("null_fraction") is not None:
        kwargs["null_fraction"] = float(section["null_fraction"])
    if "style_seeds" in section:
        seeds = section["style_seeds"]
        kwargs["style_seeds"] = tuple(range(seeds)) if isinstance(seeds, int) else tuple(seeds)
    if "split" in section:
        split = section["split"]
        kwargs["split_ratios"] = published_split_ratios() if split == "published" else tuple(float(v) for v in split)
    if "image_size" in section:
        kwargs["image_size"] = tuple(int(v) for v in section["image_size"])
    return replace(base, **kwargs)


def _train_defaults(settings: Dict[str, Any]) -> Dict[str, Any]:
    section = dict(get_setting(settings, "training", {}) or {})
    hue = get_setting(settings, "augmentation.hue_jitter_max")
    if hue is not None:
        section["hue_jitter_max"] = float(hue)
    allowed = set(KNOWN_KEYS["train"])
    return {key: value for key, value in section.items() if key in allowed}


def _parse_dataset(reader: _SpecReader, defaults: DatasetSpec) -> DatasetSpec:
    section = "dataset"
    kwargs = {
        "classes": reader.value(section, "classes", _classes, defaults.classes),
        "counts": reader.value(section, "counts", str.lower, defaults.counts),
        "per_class": reader.value(section, "per_class", int, defaults.per_class),
        "min_count": reader.value(section, "min_count", int, defaults.min_count),
        "imbalance_ratio": reader.value(section, "imbalance_ratio", _number, defaults.imbalance_ratio),
        "null_fraction": reader.value(section, "null_fraction", _optional_float, defaults.null_fraction),
        "style_seeds": reader.value(section, "style_seeds", _style_seeds, defaults.style_seeds),
        "split_ratios": reader.value(section, "split", _split, defaults.split_ratios),
        "master_seed": reader.value(section, "master_seed", int, defaults.master_seed),
        "image_size": reader.value(section, "image_size", _pair, defaults.image_size),
        "occlusion_max": reader.value(section, "occlusion_max", _number, defaults.occlusion_max),
        "blur_max": reader.value(section, "blur_max", _number, defaults.blur_max),
        "write_images": reader.value(section, "write_images", _bool, defaults.write_images),
    }
    try:
        return DatasetSpec(**kwargs)
    except ConfigurationError as e:
        raise reader.fail(section, None, str(e)) from e


def _parse_train(reader: _SpecReader, defaults: Dict[str, Any]) -> TrainConfig:
    section = "train"
    base = TrainConfig()
    kwargs: Dict[str, Any] = {
        "total_iterations": reader.value(section, "total_iterations", int,
                                         int(defaults.get("total_iterations", base.total_iterations))),
        "batch_size": reader.value(section, "batch_size", int, int(defaults.get("batch_size", base.batch_size))),
        "base_lr": reader.value(section, "base_lr", _number, float(defaults.get("base_lr", base.base_lr))),
        "lr_decay_factor": reader.value(section, "lr_decay_factor", _number,
                                        float(defaults.get("lr_decay_factor", base.lr_decay_factor))),
        "lr_milestones": reader.value(section, "lr_milestones", _int_list, defaults.get("lr_milestones")),
        "weight_decay": reader.value(section, "weight_decay", _number,
                                     float(defaults.get("weight_decay", base.weight_decay))),
        "validation_interval": reader.value(section, "validation_interval", int,
                                            int(defaults.get("validation_interval", base.validation_interval))),
        "hue_jitter_max": reader.value(section, "hue_jitter_max", _number,
                                       float(defaults.get("hue_jitter_max", base.hue_jitter_max))),
    }
    try:
        AugmentationPolicy(hue_jitter_max=kwargs["hue_jitter_max"])
        return TrainConfig(**kwargs)
    except ConfigurationError as e:
        raise reader.fail(section, None, str(e)) from e


def _parse_run(reader: _SpecReader, section: str, image_size: Tuple[int, int], default_preset: str) -> RunSpec:
    name = section[len(RUN_PREFIX):].strip()
    weights = reader.value(section, "weights", LossWeights.parse, None)
    if weights is None:
        raise reader.fail(section, None, f"Execução '{name}' sem pesos (weights)")
    seeds = reader.value(section, "seeds", _int_list, None)
    if not seeds:
        raise reader.fail(section, None, f"Execução '{name}' sem lista de sementes (seeds)")

    preset_name = reader.value(section, "backbone", str.strip, default_preset)
    if preset_name not in BACKBONE_PRESETS:
        options = ", ".join(BACKBONE_PRESETS)
        raise reader.fail(section, "backbone", f"Backbone desconhecido: {preset_name!r} (opções: {options})")
    preset = BACKBONE_PRESETS[preset_name]
    try:
        backbone = BackboneConfig(
            input_size=image_size,
            channels_per_stage=reader.value(section, "channels", _int_list, preset.channels_per_stage),
            blocks_per_stage=reader.value(section, "blocks", _int_list, preset.blocks_per_stage),
            residual=reader.value(section, "residual", _bool, preset.residual),
            feature_dim=reader.value(section, "feature_dim", int, preset.feature_dim),
        )
    except ConfigurationError as e:
        raise reader.fail(section, None, f"Execução '{name}': {e}") from e

    mode = reader.value(section, "mode", PredictionMode.parse, None)
    return RunSpec(name=name, weights=weights, seeds=seeds, backbone=backbone,
                   backbone_name=preset_name, mode=mode)


def parse_spec_text(text: str, default_name: str = "experimento",
                    settings: Optional[Dict[str, Any]] = None) -> ExperimentSpec:
    """
    Raises:
        SpecParseError: sintaxe, chave/seção desconhecida ou valor inválido (com linha)
        WeightSimplexError: pesos fora do simplex (mensagem com a linha)
    """
    settings = load_settings() if settings is None else settings
    reader = _SpecReader(text)
    reader.check_keys()

    dataset = _parse_dataset(reader, _dataset_defaults(settings))
    train = _parse_train(reader, _train_defaults(settings))
    default_preset = str(get_setting(settings, "backbone.preset", "default"))
    runs = tuple(
        _parse_run(reader, section, dataset.image_size, default_preset)
        for section in reader.parser.sections()
        if section.startswith(RUN_PREFIX)
    )
    if not runs:
        raise SpecParseError("Nenhuma execução definida: adicione seções [runs.<nome>]")

    name = reader.value("experiment", "name", str.strip, default_name)
    output_dir = reader.value("experiment", "output_dir", Path,
                              get_output_dir(settings) / name)
    try:
        return ExperimentSpec(name=name, dataset=dataset, train=train, runs=runs, output_dir=output_dir)
    except ConfigurationError as e:
        raise SpecParseError(str(e)) from e


def parse_spec(path: Union[str, Path], settings: Optional[Dict[str, Any]] = None) -> ExperimentSpec:
    """Lê e valida um arquivo de especificação."""
    path = Path(path)
    if not path.exists():
        raise SpecParseError(f"Arquivo de especificação não encontrado: {path}")
    return parse_spec_text(path.read_text(encoding="utf-8"), default_name=path.stem, settings=settings)


def _floats(values: Tuple[float, ...]) -> str:
    return ", ".join(repr(float(v)) for v in values)


def _ints(values: Tuple[int, ...]) -> str:
    return ", ".join(str(int(v)) for v in values)


def serialize_spec(spec: ExperimentSpec) -> str:
    """Texto INI com todos os valores explícitos; parse_spec_text o lê de volta igual."""
    dataset = spec.dataset
    classes = dataset.classes
    classes_text = str(len(classes)) if classes == ClassSet.first(len(classes)) else ", ".join(classes.to_lines())
    lines: List[str] = [
        "[experiment]",
        f"name = {spec.name}",
        f"output_dir = {spec.output_dir.as_posix()}",
        "",
        "[dataset]",
        f"classes = {classes_text}",
        f"counts = {dataset.counts}",
        f"per_class = {dataset.per_class}",
        f"min_count = {dataset.min_count}",
        f"imbalance_ratio = {float(dataset.imbalance_ratio)!r}",
        f"null_fraction = {'' if dataset.null_fraction is None else repr(float(dataset.null_fraction))}",
        f"style_seeds = {_ints(dataset.style_seeds)},",
        f"split = {_floats(dataset.split_ratios)}",
        f"master_seed = {dataset.master_seed}",
        f"image_size = {_ints(dataset.image_size)}",
        f"occlusion_max = {float(dataset.occlusion_max)!r}",
        f"blur_max = {float(dataset.blur_max)!r}",
        f"write_images = {'true' if dataset.write_images else 'false'}",
        "",
        "[train]",
        f"total_iterations = {spec.train.total_iterations}",
        f"batch_size = {spec.train.batch_size}",
        f"base_lr = {float(spec.train.base_lr)!r}",
        f"lr_decay_factor = {float(spec.train.lr_decay_factor)!r}",
        f"lr_milestones = {_ints(spec.train.lr_milestones or ())}",
        f"weight_decay = {float(spec.train.weight_decay)!r}",
        f"validation_interval = {spec.train.validation_interval}",
        f"hue_jitter_max = {float(spec.train.hue_jitter_max)!r}",
    ]
    for run in spec.runs:
        lines += [
            "",
            f"[{RUN_PREFIX}{run.name}]",
            f"weights = {run.weights.format()}",
            f"seeds = {_ints(run.seeds)}",
            f"backbone = {run.backbone_name}",
            f"channels = {_ints(run.backbone.channels_per_stage)}",
            f"blocks = {_ints(run.backbone.blocks_per_stage)}",
            f"residual = {'true' if run.backbone.residual else 'false'}",
            f"feature_dim = {run.backbone.feature_dim}",
        ]
        if run.mode is not None:
            lines.append(f"mode = {run.mode.value}")
    return "\n".join(lines) + "\n"


def write_spec(spec: ExperimentSpec, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_spec(spec), encoding="utf-8")
    return path
