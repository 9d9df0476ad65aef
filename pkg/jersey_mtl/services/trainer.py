# -*- coding: utf-8 -*-
"""
Trainer Service

Protocolo de otimização: Adam com decaimento L2 acoplado, taxa de
aprendizado em degraus, mini-lotes amostrados com reposição da divisão de
treino e acompanhamento da acurácia de validação.

Funcionalidades principais:
- TrainConfig com os valores de referência (lr 0.001, fator 0.33, L2 0.001)
- lr_at: agenda em degraus (marcos em 20/40/60/70% das iterações)
- adam_step: atualização no lugar, abortando em gradiente não finito
- train: laço de treino determinístico pela semente, com melhor checkpoint
- validate: acurácia sem aumento de dados e sem efeitos colaterais
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..core.autodiff import ComputationRecord, Tensor
from ..core.errors import ConfigurationError, InvalidArgumentError, InvalidShapeError, NonFiniteGradientError
from ..core.labels import target_indices
from ..core.losses import MULTITASK_WEIGHTS, LossBreakdown, LossWeights, mean_breakdown, multitask_loss
from ..core.model import JerseyNet, ModelCheckpoint
from .evaluator import PredictionMode, mode_for_weights, scored_label
from .synth_data import AugmentationPolicy, DatasetManifest, DEFAULT_HUE_JITTER, load_batch, split_arrays


logger = logging.getLogger(__name__)

# Hiperparâmetros de referência
FULLSCALE_TOTAL_ITERATIONS = 10000
FULLSCALE_BATCH_SIZE = 100
FULLSCALE_BASE_LR = 0.001
FULLSCALE_DECAY_FACTOR = 0.33
FULLSCALE_WEIGHT_DECAY = 0.001
MILESTONE_FRACTIONS = (0.2, 0.4, 0.6, 0.7)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

HISTORY_COLUMNS = ["iteration", "lr", "loss_total", "loss_holistic", "loss_digit1", "loss_digit2", "val_accuracy"]


def default_milestones(total_iterations: int) -> Tuple[int, ...]:
    """
    Marcos proporcionais a 20/40/60/70% do total; com 10000 iterações
    resultam em 2000, 4000, 6000 e 7000.
    """
    milestones: List[int] = []
    for fraction in MILESTONE_FRACTIONS:
        value = int(math.floor(total_iterations * fraction + 0.5))
        if 0 < value < total_iterations and (not milestones or value > milestones[-1]):
            milestones.append(value)
    return tuple(milestones)


@dataclass(frozen=True)
class TrainConfig:
    """Configuração de treino; `lr_milestones=None` usa os marcos proporcionais."""

    total_iterations: int = FULLSCALE_TOTAL_ITERATIONS
    batch_size: int = FULLSCALE_BATCH_SIZE
    base_lr: float = FULLSCALE_BASE_LR
    lr_decay_factor: float = FULLSCALE_DECAY_FACTOR
    lr_milestones: Optional[Tuple[int, ...]] = None
    weight_decay: float = FULLSCALE_WEIGHT_DECAY
    loss_weights: LossWeights = MULTITASK_WEIGHTS
    seed: int = 0
    validation_interval: int = 500
    hue_jitter_max: float = DEFAULT_HUE_JITTER
    eval_mode: Optional[PredictionMode] = None

    def __post_init__(self) -> None:
        if self.total_iterations < 1 or self.batch_size < 1 or self.validation_interval < 1:
            raise ConfigurationError("total_iterations, batch_size e validation_interval devem ser >= 1")
        if not self.base_lr > 0 or not 0 < self.lr_decay_factor <= 1 or self.weight_decay < 0:
            raise ConfigurationError(
                f"Hiperparâmetros inválidos: base_lr={self.base_lr}, "
                f"lr_decay_factor={self.lr_decay_factor}, weight_decay={self.weight_decay}"
            )
        if self.lr_milestones is None:
            object.__setattr__(self, "lr_milestones", default_milestones(self.total_iterations))
        milestones = tuple(int(m) for m in self.lr_milestones)  # type: ignore[union-attr]
        if any(b <= a for a, b in zip(milestones, milestones[1:])):
            raise ConfigurationError(f"Marcos de lr devem ser estritamente crescentes: {milestones}")
        if milestones and (milestones[0] < 0 or milestones[-1] >= self.total_iterations):
            raise ConfigurationError(f"Marcos de lr devem estar em [0, {self.total_iterations}): {milestones}")
        object.__setattr__(self, "lr_milestones", milestones)

    @property
    def prediction_mode(self) -> PredictionMode:
        return self.eval_mode if self.eval_mode is not None else mode_for_weights(self.loss_weights)

    def with_run(self, loss_weights: LossWeights, seed: int,
                 eval_mode: Optional[PredictionMode] = None) -> "TrainConfig":
        return replace(self, loss_weights=loss_weights, seed=seed, eval_mode=eval_mode)


def lr_at(iteration: int, cfg: TrainConfig) -> float:
    """
    base_lr * fator^(número de marcos <= iteration).

    Raises:
        InvalidArgumentError: iteração fora de [0, total_iterations)
    """
    if not 0 <= iteration < cfg.total_iterations:
        raise InvalidArgumentError(f"Iteração {iteration} fora de [0, {cfg.total_iterations})")
    passed = sum(1 for milestone in cfg.lr_milestones if milestone <= iteration)  # type: ignore[union-attr]
    return cfg.base_lr * cfg.lr_decay_factor ** passed


@dataclass
class AdamState:
    """Momentos de primeira e segunda ordem por parâmetro."""

    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def zeros_like(cls, params: Dict[str, Tensor]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(t.data) for name, t in params.items()},
            v={name: np.zeros_like(t.data) for name, t in params.items()},
        )


def adam_step(params: Dict[str, Tensor], grads: Dict[str, Optional[np.ndarray]], state: AdamState,
              lr: float, weight_decay: float) -> None:
    """
    Passo de Adam no lugar, com L2 acoplado (g <- g + weight_decay * p).
    Gradiente ausente conta como zero.

    Raises:
        NonFiniteGradientError: nenhum parâmetro é alterado nesse caso
        InvalidShapeError: gradiente com formato diferente do parâmetro
    """
    if not lr > 0:
        raise InvalidArgumentError(f"lr deve ser > 0, recebido {lr}")
    for name, tensor in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        if grad.shape != tensor.shape:
            raise InvalidShapeError(f"Gradiente de '{name}' com formato {grad.shape}, esperado {tensor.shape}")
        if not np.all(np.isfinite(grad)):
            bad = int(np.size(grad) - np.count_nonzero(np.isfinite(grad)))
            raise NonFiniteGradientError(name, f"{bad} valores não finitos")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, tensor in params.items():
        grad = grads.get(name)
        g = np.zeros_like(tensor.data) if grad is None else grad.astype(tensor.dtype, copy=False)
        g = g + weight_decay * tensor.data
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        tensor.data -= (lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(tensor.dtype, copy=False)


@dataclass(frozen=True)
class TrainingRecord:
    iteration: int
    lr: float
    loss: LossBreakdown
    val_accuracy: float


@dataclass
class TrainingHistory:
    """Pontos de validação em ordem estritamente crescente de iteração."""

    records: List[TrainingRecord] = field(default_factory=list)

    def append(self, record: TrainingRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ConfigurationError(
                f"Iteração {record.iteration} não é posterior a {self.records[-1].iteration}"
            )
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def iterations(self) -> List[int]:
        return [r.iteration for r in self.records]

    @property
    def accuracies(self) -> List[float]:
        return [r.val_accuracy for r in self.records]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            [r.iteration, r.lr, r.loss.total, r.loss.holistic, r.loss.digit1, r.loss.digit2, r.val_accuracy]
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=HISTORY_COLUMNS)

    def save_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
        return path

    @classmethod
    def load_csv(cls, path: Union[str, Path]) -> "TrainingHistory":
        frame = pd.read_csv(path)
        missing = [c for c in HISTORY_COLUMNS if c not in frame.columns]
        if missing:
            raise ConfigurationError(f"Histórico {path} sem colunas: {', '.join(missing)}")
        history = cls()
        for row in frame.itertuples(index=False):
            loss = LossBreakdown(
                holistic=float(row.loss_holistic),
                digit1=float(row.loss_digit1),
                digit2=float(row.loss_digit2),
                total=float(row.loss_total),
                digitwise=float("nan"),
            )
            history.append(TrainingRecord(int(row.iteration), float(row.lr), loss, float(row.val_accuracy)))
        return history


def validate(model: JerseyNet, data: DatasetManifest, split: str = "val",
             mode: Optional[PredictionMode] = None, batch_size: int = 256) -> float:
    """
    Fração de amostras com rótulo previsto igual à verdade (modo padrão:
    multi-tarefa). Não aplica aumento de dados nem altera o modelo.

    Raises:
        ConfigurationError: divisão vazia
    """
    images, truths = split_arrays(data, split, dtype=model.dtype.type)
    if not truths:
        raise ConfigurationError(f"Divisão '{split}' vazia: não há o que validar")
    chosen = mode if mode is not None else PredictionMode.MULTITASK_DEFAULT
    preds = model.predict_batches(images, batch_size)
    hits = [scored_label(pred, truth, chosen, data.classes) == truth for pred, truth in zip(preds, truths)]
    return float(np.mean(hits))


ProgressCallback = Callable[[TrainingRecord], None]


def _train_step(model: JerseyNet, batch: Tensor, targets: Sequence[np.ndarray],
                weights: LossWeights) -> LossBreakdown:
    model.zero_grad()
    with ComputationRecord() as record:
        outputs = model.logits(batch)
        try:
            loss, breakdown = multitask_loss(outputs.as_tuple(), targets, weights)  # type: ignore[arg-type]
        except InvalidArgumentError as e:
            raise NonFiniteGradientError("perda", str(e)) from e
    record.backward(loss)
    return breakdown


def train(model: JerseyNet, data: DatasetManifest, cfg: TrainConfig,
          on_record: Optional[ProgressCallback] = None) -> Tuple[ModelCheckpoint, TrainingHistory]:
    """
    Executa cfg.total_iterations passos de mini-lote e devolve o checkpoint
    com melhor acurácia de validação (empates: o mais antigo) e o histórico.

    Raises:
        ConfigurationError: ClassSet do modelo difere do conjunto de dados, ou treino vazio
        NonFiniteGradientError: gradiente ou perda não finitos
    """
    if model.classes != data.classes:
        raise ConfigurationError("ClassSet do modelo difere do ClassSet do conjunto de dados")
    n_train = len(data.split_indices("train"))
    if n_train == 0:
        raise ConfigurationError("Divisão de treino vazia")

    rng = np.random.default_rng(cfg.seed)
    augmentation_rng = np.random.default_rng([cfg.seed, 1])
    policy = AugmentationPolicy(hue_jitter_max=cfg.hue_jitter_max)
    state = AdamState.zeros_like(model.params)
    mode = cfg.prediction_mode
    dtype = model.dtype.type

    history = TrainingHistory()
    best: Optional[ModelCheckpoint] = None
    best_accuracy = -1.0
    pending: List[LossBreakdown] = []

    logger.info(
        f"[TREINO] Início: {cfg.total_iterations} iterações, lote {cfg.batch_size}, "
        f"pesos ({cfg.loss_weights.format()}), semente {cfg.seed}"
    )
    for iteration in range(cfg.total_iterations):
        lr = lr_at(iteration, cfg)
        indices = rng.integers(0, n_train, size=cfg.batch_size)
        batch, triples = load_batch(data, "train", indices, policy, augmentation_rng, dtype=dtype)
        breakdown = _train_step(model, batch, target_indices(triples), cfg.loss_weights)
        grads = {name: tensor.grad for name, tensor in model.params.items()}
        try:
            adam_step(model.params, grads, state, lr, cfg.weight_decay)
        except NonFiniteGradientError as e:
            logger.error(f"[TREINO] Gradiente não finito na iteração {iteration + 1}: {e}")
            raise
        pending.append(breakdown)

        completed = iteration + 1
        if completed % cfg.validation_interval == 0 or completed == cfg.total_iterations:
            accuracy = validate(model, data, "val", mode)
            record = TrainingRecord(completed, lr, mean_breakdown(pending, cfg.loss_weights), accuracy)
            history.append(record)
            pending = []
            logger.info(
                f"[TREINO] Iteração {completed}/{cfg.total_iterations} | perda {record.loss.total:.4f} "
                f"| lr {lr:.3g} | validação {accuracy:.4f}"
            )
            if accuracy > best_accuracy:
                best_accuracy = accuracy
                best = ModelCheckpoint.from_model(
                    model, completed, cfg.loss_weights, {"val_accuracy": accuracy, "seed": cfg.seed}
                )
            if on_record is not None:
                on_record(record)

    assert best is not None
    logger.info(f"[TREINO] Concluído: melhor validação {best_accuracy:.4f} na iteração {best.iteration}")
    return best, history
