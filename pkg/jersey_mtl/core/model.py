# -*- coding: utf-8 -*-
"""
Model Module

Rede de três cabeças: backbone convolucional configurável (residual, com
pooling médio global) produzindo um vetor de características, seguido de
três camadas lineares + softmax (holística sobre o ClassSet e duas de
dígito com 11 classes).

Funcionalidades principais:
- BackboneConfig com valores de bancada e presets para a varredura de backbones
- Inicialização determinística por semente (escala fan-in, bias nulos)
- Contagem de parâmetros em forma fechada
- Checkpoint versionado (.npz) com configuração, classes e pesos
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .autodiff import (
    FLOAT32, Tensor, add, conv2d, global_avg_pool2d, linear, maxpool2d, relu, softmax,
)
from .errors import ConfigurationError, InvalidShapeError
from .labels import DIGIT_CLASSES, ClassSet
from .losses import LossWeights


logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "jersey-mtl-checkpoint/1"
INPUT_CHANNELS = 3
KERNEL_SIZE = 3

# Ganhos de inicialização: He (sqrt 2) antes de relu; cabeças reduzidas para
# que as distribuições iniciais fiquem próximas da uniforme.
RELU_GAIN = float(np.sqrt(2.0))
HEAD_GAIN = 0.5
RESIDUAL_BRANCH_GAIN = 0.1

HEAD_NAMES = ("holistic", "digit1", "digit2")


@dataclass(frozen=True)
class BackboneConfig:
    """Configuração do backbone (valores padrão: escala de bancada)."""

    input_size: Tuple[int, int] = (64, 64)
    channels_per_stage: Tuple[int, ...] = (16, 32, 64)
    blocks_per_stage: Tuple[int, ...] = (2, 2, 2)
    residual: bool = True
    feature_dim: int = 128

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_size", tuple(int(v) for v in self.input_size))
        object.__setattr__(self, "channels_per_stage", tuple(int(v) for v in self.channels_per_stage))
        object.__setattr__(self, "blocks_per_stage", tuple(int(v) for v in self.blocks_per_stage))
        validate_config(self)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["input_size"] = list(self.input_size)
        data["channels_per_stage"] = list(self.channels_per_stage)
        data["blocks_per_stage"] = list(self.blocks_per_stage)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "BackboneConfig":
        return cls(
            input_size=tuple(data["input_size"]),
            channels_per_stage=tuple(data["channels_per_stage"]),
            blocks_per_stage=tuple(data["blocks_per_stage"]),
            residual=bool(data["residual"]),
            feature_dim=int(data["feature_dim"]),
        )


def validate_config(cfg: BackboneConfig) -> None:
    """
    Raises:
        ConfigurationError: listas de tamanhos distintos, vazias, dimensões inválidas
    """
    if len(cfg.input_size) != 2 or min(cfg.input_size) < 8:
        raise ConfigurationError(f"input_size deve ser (altura, largura) >= 8, recebido {cfg.input_size}")
    if not cfg.channels_per_stage:
        raise ConfigurationError("channels_per_stage não pode ser vazio")
    if len(cfg.channels_per_stage) != len(cfg.blocks_per_stage):
        raise ConfigurationError(
            f"channels_per_stage ({len(cfg.channels_per_stage)}) e blocks_per_stage "
            f"({len(cfg.blocks_per_stage)}) devem ter o mesmo tamanho"
        )
    if min(cfg.channels_per_stage) < 1 or min(cfg.blocks_per_stage) < 0:
        raise ConfigurationError("Canais devem ser >= 1 e blocos >= 0")
    if cfg.feature_dim < 8:
        raise ConfigurationError(f"feature_dim deve ser >= 8, recebido {cfg.feature_dim}")
    height, width = cfg.input_size
    for _ in cfg.channels_per_stage[1:]:
        height, width = height // 2, width // 2
    if height < 1 or width < 1:
        raise ConfigurationError(f"Entrada {cfg.input_size} pequena demais para {len(cfg.channels_per_stage)} estágios")


# Presets para a varredura de backbones
BACKBONE_PRESETS: Dict[str, BackboneConfig] = {
    "small": BackboneConfig(channels_per_stage=(8, 16, 32), blocks_per_stage=(1, 1, 1), feature_dim=64),
    "default": BackboneConfig(),
    "large": BackboneConfig(channels_per_stage=(24, 48, 96), blocks_per_stage=(2, 2, 2), feature_dim=192),
    # Expressável, não treinável em bancada
    "resnet34_fullscale": BackboneConfig(
        input_size=(300, 300), channels_per_stage=(64, 128, 256, 512),
        blocks_per_stage=(3, 4, 6, 3), feature_dim=512,
    ),
}


def _conv_params(c_in: int, c_out: int, k: int) -> int:
    return c_out * c_in * k * k + c_out


def count_parameters(cfg: BackboneConfig, n_classes: int) -> int:
    """Número total de parâmetros em forma fechada (soma por camada)."""
    total = _conv_params(INPUT_CHANNELS, cfg.channels_per_stage[0], KERNEL_SIZE)
    previous = cfg.channels_per_stage[0]
    for stage, (channels, blocks) in enumerate(zip(cfg.channels_per_stage, cfg.blocks_per_stage)):
        if stage > 0:
            total += _conv_params(previous, channels, KERNEL_SIZE)
        total += blocks * 2 * _conv_params(channels, channels, KERNEL_SIZE)
        previous = channels
    total += previous * cfg.feature_dim + cfg.feature_dim
    for width in (n_classes, DIGIT_CLASSES, DIGIT_CLASSES):
        total += cfg.feature_dim * width + width
    return total


@dataclass(frozen=True)
class PredictionTriple:
    """Distribuições (p, p1, p2) das três cabeças para uma amostra."""

    p: np.ndarray
    p1: np.ndarray
    p2: np.ndarray


@dataclass
class HeadOutputs:
    """Logits das três cabeças para um lote (tensores do registro ativo)."""

    holistic: Tensor
    digit1: Tensor
    digit2: Tensor

    def as_tuple(self) -> Tuple[Tensor, Tensor, Tensor]:
        return self.holistic, self.digit1, self.digit2


class JerseyNet:
    """
    Rede multi-tarefa. Os parâmetros ficam em `params` (nome -> Tensor), em
    ordem determinística de construção.
    """

    def __init__(self, cfg: BackboneConfig, classes: ClassSet, params: Dict[str, Tensor]):
        self.cfg = cfg
        self.classes = classes
        self.params = params

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.params.values())).dtype

    def parameters(self) -> Dict[str, Tensor]:
        return self.params

    def parameter_count(self) -> int:
        return sum(t.size for t in self.params.values())

    def head_parameter_names(self, head: str) -> List[str]:
        if head not in HEAD_NAMES:
            raise ConfigurationError(f"Cabeça desconhecida: {head}")
        return [f"head_{head}.weight", f"head_{head}.bias"]

    def astype(self, dtype: type) -> "JerseyNet":
        """Cópia com parâmetros na precisão pedida (float32 treino, float64 verificação)."""
        params = {
            name: Tensor(t.data.astype(dtype, copy=True), requires_grad=t.requires_grad, name=name)
            for name, t in self.params.items()
        }
        return JerseyNet(self.cfg, self.classes, params)

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    def _check_batch(self, batch: Union[Tensor, np.ndarray]) -> Tensor:
        if not isinstance(batch, Tensor):
            batch = Tensor(batch)
        expected = (INPUT_CHANNELS, *self.cfg.input_size)
        if batch.ndim != 4 or tuple(batch.shape[1:]) != expected:
            raise InvalidShapeError(f"Lote deve ter formato [N, {expected[0]}, {expected[1]}, {expected[2]}], recebido {batch.shape}")
        if batch.dtype != self.dtype:
            batch = Tensor(batch.data.astype(self.dtype), name=batch.name)
        return batch

    def _conv(self, name: str, x: Tensor) -> Tensor:
        return conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"], stride=1, padding=1)

    def extract_features(self, batch: Union[Tensor, np.ndarray]) -> Tensor:
        """Representação compartilhada [N, feature_dim] consumida pelas três cabeças."""
        x = relu(self._conv("stem", self._check_batch(batch)))
        for stage, blocks in enumerate(self.cfg.blocks_per_stage):
            if stage > 0:
                x = maxpool2d(x, 2, 2)
                x = relu(self._conv(f"stage{stage}.transition", x))
            for block in range(blocks):
                prefix = f"stage{stage}.block{block}"
                branch = relu(self._conv(f"{prefix}.conv1", x))
                branch = self._conv(f"{prefix}.conv2", branch)
                x = relu(add(x, branch) if self.cfg.residual else branch)
        pooled = global_avg_pool2d(x)
        return relu(linear(pooled, self.params["feature.weight"], self.params["feature.bias"]))

    def heads(self, features: Tensor) -> HeadOutputs:
        """Logits das cabeças a partir das características."""
        outputs = [
            linear(features, self.params[f"head_{head}.weight"], self.params[f"head_{head}.bias"])
            for head in HEAD_NAMES
        ]
        return HeadOutputs(*outputs)

    def logits(self, batch: Union[Tensor, np.ndarray]) -> HeadOutputs:
        return self.heads(self.extract_features(batch))

    def forward(self, batch: Union[Tensor, np.ndarray]) -> List[PredictionTriple]:
        """Uma PredictionTriple por imagem do lote."""
        outputs = self.logits(batch)
        p, p1, p2 = (softmax(t).data for t in outputs.as_tuple())
        return [PredictionTriple(p[i], p1[i], p2[i]) for i in range(p.shape[0])]

    def predict_batches(self, images: np.ndarray, batch_size: int = 64) -> List[PredictionTriple]:
        """forward em blocos, para conjuntos maiores que um lote."""
        predictions: List[PredictionTriple] = []
        for start in range(0, len(images), batch_size):
            predictions.extend(self.forward(images[start:start + batch_size]))
        return predictions


def _init_weight(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, gain: float) -> np.ndarray:
    return rng.normal(0.0, gain / np.sqrt(fan_in), size=shape)


def build_network(cfg: BackboneConfig, classes: ClassSet, seed: int, dtype: type = FLOAT32) -> JerseyNet:
    """
    Constrói a rede com inicialização determinística pela semente.

    Pesos ~ N(0, (ganho / sqrt(fan_in))^2), bias nulos; cabeças de largura
    |ClassSet|, 11 e 11.
    """
    validate_config(cfg)
    rng = np.random.default_rng(seed)
    specs: List[Tuple[str, Tuple[int, ...], int, float]] = []

    def conv(name: str, c_in: int, c_out: int, gain: float = RELU_GAIN) -> None:
        specs.append((name, (c_out, c_in, KERNEL_SIZE, KERNEL_SIZE), c_in * KERNEL_SIZE * KERNEL_SIZE, gain))

    conv("stem", INPUT_CHANNELS, cfg.channels_per_stage[0])
    previous = cfg.channels_per_stage[0]
    for stage, (channels, blocks) in enumerate(zip(cfg.channels_per_stage, cfg.blocks_per_stage)):
        if stage > 0:
            conv(f"stage{stage}.transition", previous, channels)
        for block in range(blocks):
            conv(f"stage{stage}.block{block}.conv1", channels, channels)
            branch_gain = RELU_GAIN * RESIDUAL_BRANCH_GAIN if cfg.residual else RELU_GAIN
            conv(f"stage{stage}.block{block}.conv2", channels, channels, branch_gain)
        previous = channels

    specs.append(("feature", (previous, cfg.feature_dim), previous, RELU_GAIN))
    for head, width in zip(HEAD_NAMES, (len(classes), DIGIT_CLASSES, DIGIT_CLASSES)):
        specs.append((f"head_{head}", (cfg.feature_dim, width), cfg.feature_dim, HEAD_GAIN))

    params: Dict[str, Tensor] = {}
    for name, shape, fan_in, gain in specs:
        weight = _init_weight(rng, shape, fan_in, gain).astype(dtype)
        bias_size = shape[0] if len(shape) == 4 else shape[1]
        params[f"{name}.weight"] = Tensor(weight, requires_grad=True, name=f"{name}.weight")
        params[f"{name}.bias"] = Tensor(np.zeros(bias_size, dtype=dtype), requires_grad=True, name=f"{name}.bias")

    model = JerseyNet(cfg, classes, params)
    logger.debug(f"Rede construída: {model.parameter_count()} parâmetros, semente {seed}")
    return model


def forward(model: JerseyNet, batch: Union[Tensor, np.ndarray]) -> List[PredictionTriple]:
    return model.forward(batch)


def extract_features(model: JerseyNet, batch: Union[Tensor, np.ndarray]) -> Tensor:
    return model.extract_features(batch)


@dataclass
class ModelCheckpoint:
    """Configuração, classes, parâmetros, iteração e pesos de perda usados."""

    config: BackboneConfig
    classes: ClassSet
    params: Dict[str, np.ndarray]
    iteration: int
    loss_weights: LossWeights
    extra: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: JerseyNet, iteration: int, loss_weights: LossWeights,
                   extra: Optional[Dict[str, object]] = None) -> "ModelCheckpoint":
        params = {name: t.data.copy() for name, t in model.params.items()}
        return cls(model.cfg, model.classes, params, iteration, loss_weights, dict(extra or {}))

    def to_model(self) -> JerseyNet:
        params = {
            name: Tensor(array.copy(), requires_grad=True, name=name)
            for name, array in self.params.items()
        }
        return JerseyNet(self.config, self.classes, params)

    def save(self, path: Union[str, Path]) -> Path:
        """Salva em .npz; as classes também vão para `classes.txt` ao lado."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = {
            "format": CHECKPOINT_FORMAT,
            "config": self.config.to_dict(),
            "classes": self.classes.to_lines(),
            "iteration": self.iteration,
            "loss_weights": list(self.loss_weights.as_tuple()),
            "parameter_names": list(self.params),
            "extra": self.extra,
        }
        arrays = {f"param{i:04d}": array for i, array in enumerate(self.params.values())}
        with open(path, "wb") as handle:
            np.savez(handle, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)
        self.classes.save(path.parent / "classes.txt")
        logger.info(f"Checkpoint salvo em: {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ModelCheckpoint":
        """
        Raises:
            ConfigurationError: arquivo sem a marca de formato esperada
        """
        with np.load(Path(path), allow_pickle=False) as archive:
            if "__meta__" not in archive.files:
                raise ConfigurationError(f"Arquivo não é um checkpoint: {path}")
            meta = json.loads(str(archive["__meta__"]))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ConfigurationError(f"Formato de checkpoint não suportado: {meta.get('format')}")
            params = {
                name: archive[f"param{i:04d}"].copy()
                for i, name in enumerate(meta["parameter_names"])
            }
        return cls(
            config=BackboneConfig.from_dict(meta["config"]),
            classes=ClassSet.from_lines(meta["classes"]),
            params=params,
            iteration=int(meta["iteration"]),
            loss_weights=LossWeights(*meta["loss_weights"]),
            extra=dict(meta.get("extra", {})),
        )
