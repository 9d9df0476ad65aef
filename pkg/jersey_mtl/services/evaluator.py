# -*- coding: utf-8 -*-
"""
Evaluator Service

Converte as saídas das três cabeças em rótulos finais (modos holístico,
por dígitos, multi-tarefa padrão e fundido) e calcula acurácia e
precisão/revocação/F1 com média macro (sklearn.metrics).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from sklearn import metrics

from ..core.errors import ConfigurationError, MetricsInputError, UnknownClassError
from ..core.labels import ABSENT, ClassSet, JerseyLabel, LabelLike, as_label, compose_digits, decompose_digits
from ..core.losses import LossWeights
from ..core.model import JerseyNet, ModelCheckpoint, PredictionTriple
from .synth_data import DatasetManifest, split_arrays


logger = logging.getLogger(__name__)

LOG_CLAMP = 1e-12


class PredictionMode(str, Enum):
    """Qual cabeça (ou combinação) decide o rótulo final."""

    HOLISTIC = "holistic"
    DIGITWISE = "digitwise"
    MULTITASK_DEFAULT = "multitask"
    FUSED = "fused"

    @classmethod
    def parse(cls, text: str) -> "PredictionMode":
        try:
            return cls(text.strip().lower())
        except ValueError as e:
            options = ", ".join(mode.value for mode in cls)
            raise ConfigurationError(f"Modo de predição desconhecido: {text!r} (opções: {options})") from e


def mode_for_weights(weights: LossWeights) -> PredictionMode:
    """Modo de avaliação correspondente a cada configuração de pesos."""
    if weights.alpha == 0:
        return PredictionMode.DIGITWISE
    if weights.beta == 0 and weights.gamma == 0:
        return PredictionMode.HOLISTIC
    return PredictionMode.MULTITASK_DEFAULT


def _fused_index(pred: PredictionTriple, classes: ClassSet) -> int:
    log_p = np.log(np.maximum(pred.p, LOG_CLAMP))
    log_p1 = np.log(np.maximum(pred.p1, LOG_CLAMP))
    log_p2 = np.log(np.maximum(pred.p2, LOG_CLAMP))
    digits = np.array([decompose_digits(label) for label in classes], dtype=np.int64)
    scores = log_p + log_p1[digits[:, 0]] + log_p2[digits[:, 1]]
    return int(np.argmax(scores))


def predict_label(pred: PredictionTriple, mode: PredictionMode, classes: ClassSet) -> JerseyLabel:
    """
    Rótulo final da predição; empates no argmax ficam com o menor índice.

    No modo por dígitos o rótulo composto pode ficar fora do ClassSet (por
    exemplo 95 num conjunto de 81 classes); ele é devolvido assim mesmo e
    conta como erro.
    """
    if mode in (PredictionMode.HOLISTIC, PredictionMode.MULTITASK_DEFAULT):
        return classes[int(np.argmax(pred.p))]
    if mode is PredictionMode.DIGITWISE:
        return compose_digits(int(np.argmax(pred.p1)), int(np.argmax(pred.p2)))
    return classes[_fused_index(pred, classes)]


def digitwise_correct(pred: PredictionTriple, truth: LabelLike) -> bool:
    """Correto somente se as duas cabeças de dígito acertarem."""
    d1, d2 = decompose_digits(truth)
    return int(np.argmax(pred.p1)) == d1 and int(np.argmax(pred.p2)) == d2


def collapsed_digits(pred: PredictionTriple) -> bool:
    """Par (dígito, ausente): nenhum rótulo o produz; compose_digits o leva ao nulo."""
    return int(np.argmax(pred.p1)) != ABSENT and int(np.argmax(pred.p2)) == ABSENT


def scored_label(pred: PredictionTriple, truth: LabelLike, mode: PredictionMode, classes: ClassSet) -> JerseyLabel:
    """
    Rótulo usado na pontuação: sempre um membro do ClassSet.

    No modo por dígitos, rótulos fora do conjunto e pares colapsados contam
    como erro: vão para a coluna nula quando a verdade não é nula e para a
    coluna 1 quando é. Assim, `scored_label(...) == truth` equivale a
    digitwise_correct nesse modo.
    """
    truth = as_label(truth)
    null = classes[0]
    label = predict_label(pred, mode, classes)
    miss = label not in classes or (mode is PredictionMode.DIGITWISE and collapsed_digits(pred))
    if miss:
        return null if truth != null else classes[1]
    return label


@dataclass(frozen=True)
class ConfusionMatrix:
    """Contagens [verdade, predição] indexadas pelo ClassSet."""

    matrix: np.ndarray
    classes: ClassSet

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.matrix)) / self.total if self.total else 0.0


def confusion(preds: Sequence[LabelLike], truths: Sequence[LabelLike], classes: ClassSet) -> ConfusionMatrix:
    """
    Raises:
        MetricsInputError: listas vazias, de tamanhos distintos ou com rótulo desconhecido
    """
    if len(preds) != len(truths):
        raise MetricsInputError(f"Predições ({len(preds)}) e verdades ({len(truths)}) com tamanhos distintos")
    if not preds:
        raise MetricsInputError("Nenhuma amostra para a matriz de confusão")
    try:
        rows = [classes.index(label) for label in truths]
        cols = [classes.index(label) for label in preds]
    except UnknownClassError as e:
        raise MetricsInputError(str(e)) from e
    matrix = metrics.confusion_matrix(rows, cols, labels=np.arange(len(classes)))
    return ConfusionMatrix(matrix.astype(np.int64), classes)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray

    def as_row(self, method: str) -> dict:
        return {
            "method": method,
            "accuracy": self.accuracy,
            "precision": self.macro_precision,
            "recall": self.macro_recall,
            "f1": self.macro_f1,
        }


def _expand(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pares (verdade, predição) repetidos conforme as contagens da matriz."""
    truth_idx, pred_idx = np.nonzero(matrix)
    counts = matrix[truth_idx, pred_idx]
    return np.repeat(truth_idx, counts), np.repeat(pred_idx, counts)


def macro_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """
    Precisão, revocação e F1 por classe; as médias macro usam apenas as
    classes com ao menos uma instância verdadeira. Divisões por zero valem 0.

    Raises:
        MetricsInputError: matriz vazia
    """
    matrix = np.asarray(cm.matrix, dtype=np.int64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.sum() <= 0:
        raise MetricsInputError("Matriz de confusão vazia ou não quadrada")
    y_true, y_pred = _expand(matrix)
    labels = np.arange(matrix.shape[0])
    present = labels[matrix.sum(axis=1) > 0]
    precision, recall, f1, support = metrics.precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average=None, zero_division=0
    )
    macro_p, macro_r, macro_f1, _ = metrics.precision_recall_fscore_support(
        y_true, y_pred, labels=present, average="macro", zero_division=0
    )
    return MetricsReport(
        accuracy=float(metrics.accuracy_score(y_true, y_pred)),
        macro_precision=float(macro_p),
        macro_recall=float(macro_r),
        macro_f1=float(macro_f1),
        precision=np.asarray(precision, dtype=np.float64),
        recall=np.asarray(recall, dtype=np.float64),
        f1=np.asarray(f1, dtype=np.float64),
        support=np.asarray(support, dtype=np.int64),
    )


def evaluate_predictions(preds: Sequence[PredictionTriple], truths: Sequence[LabelLike], mode: PredictionMode,
                         classes: ClassSet) -> Tuple[MetricsReport, ConfusionMatrix]:
    """
    Métricas de um conjunto de predições (pontuação por scored_label).

    Raises:
        MetricsInputError: listas vazias ou de tamanhos distintos
    """
    if len(preds) != len(truths):
        raise MetricsInputError(f"Predições ({len(preds)}) e verdades ({len(truths)}) com tamanhos distintos")
    truths = [as_label(t) for t in truths]
    mapped = [scored_label(pred, truth, mode, classes) for pred, truth in zip(preds, truths)]
    cm = confusion(mapped, truths, classes)
    return macro_metrics(cm), cm


def evaluate_model(model: JerseyNet, manifest: DatasetManifest, split: str, mode: PredictionMode,
                   batch_size: int = 64) -> MetricsReport:
    """Avalia o modelo numa divisão do manifesto, sem aumento de dados."""
    if model.classes != manifest.classes:
        raise ConfigurationError("ClassSet do modelo difere do ClassSet do conjunto de dados")
    images, truths = split_arrays(manifest, split, dtype=model.dtype.type)
    if not truths:
        raise ConfigurationError(f"Divisão '{split}' vazia")
    preds = model.predict_batches(images, batch_size)
    report, _ = evaluate_predictions(preds, truths, mode, manifest.classes)
    logger.info(
        f"[AVALIACAO] {split}/{mode.value}: acurácia {report.accuracy:.4f}, F1 macro {report.macro_f1:.4f}"
    )
    return report


def evaluate_checkpoint(path: Union[str, Path], manifest: DatasetManifest, split: str = "test",
                        mode: Optional[PredictionMode] = None) -> MetricsReport:
    """Carrega um checkpoint e o avalia; sem modo explícito usa o dos pesos gravados."""
    checkpoint = ModelCheckpoint.load(path)
    chosen = mode if mode is not None else mode_for_weights(checkpoint.loss_weights)
    return evaluate_model(checkpoint.to_model(), manifest, split, chosen)

