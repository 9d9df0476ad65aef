# -*- coding: utf-8 -*-
"""
Losses Module

Perda multi-tarefa: entropia cruzada holística, duas entropias cruzadas de
dígito e a combinação convexa

    total = alpha * holistica + beta * digito1 + gamma * digito2

com alpha + beta + gamma = 1. A parcela beta * digito1 + gamma * digito2 é
a perda por dígitos.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple

import numpy as np

from .autodiff import Tensor, cross_entropy, weighted_sum
from .errors import InvalidArgumentError, InvalidShapeError, WeightSimplexError
from .labels import DIGIT_CLASSES


SIMPLEX_TOLERANCE = 1e-9
LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Ponto (alpha, beta, gamma) do simplex."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        values = (self.alpha, self.beta, self.gamma)
        total = float(sum(values))
        if any(not math.isfinite(v) for v in values):
            raise WeightSimplexError(f"Pesos não finitos: {values}", total)
        if any(v < 0 for v in values):
            raise WeightSimplexError(f"Pesos negativos não são permitidos: {values} (soma {total!r})", total)
        if any(v > 1 for v in values):
            raise WeightSimplexError(f"Pesos acima de 1 não são permitidos: {values} (soma {total!r})", total)
        if abs(total - 1.0) > SIMPLEX_TOLERANCE:
            raise WeightSimplexError(f"Pesos devem somar 1, soma = {total!r}", total)

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.alpha, self.beta, self.gamma

    @property
    def digitwise_weight(self) -> float:
        return self.beta + self.gamma

    @classmethod
    def parse(cls, text: str) -> "LossWeights":
        """Lê "a, b, c"; aceita frações como "1/3"."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if len(parts) != 3:
            raise InvalidArgumentError(f"Esperados 3 pesos, recebido {text!r}")
        try:
            values = [float(Fraction(p)) for p in parts]
        except (ValueError, ZeroDivisionError) as e:
            raise InvalidArgumentError(f"Peso inválido em {text!r}") from e
        return validate_weights(*values)

    def format(self) -> str:
        return ", ".join(repr(float(v)) for v in self.as_tuple())

    def close_to(self, other: "LossWeights", tolerance: float = SIMPLEX_TOLERANCE) -> bool:
        return all(abs(a - b) <= tolerance for a, b in zip(self.as_tuple(), other.as_tuple()))


def validate_weights(alpha: float, beta: float, gamma: float) -> LossWeights:
    """
    Aceita apenas pontos com todas as componentes >= 0 e soma a 1e-9 de 1.

    Raises:
        WeightSimplexError: informando a soma recebida
    """
    return LossWeights(float(alpha), float(beta), float(gamma))


# Configurações de referência
HOLISTIC_WEIGHTS = LossWeights(1.0, 0.0, 0.0)
DIGITWISE_WEIGHTS = LossWeights(0.0, 0.5, 0.5)
MULTITASK_WEIGHTS = LossWeights(0.3, 0.35, 0.35)

ABLATION_GRID: Tuple[LossWeights, ...] = (
    LossWeights(1.0, 0.0, 0.0),
    LossWeights(0.8, 0.1, 0.1),
    LossWeights(0.5, 0.25, 0.25),
    LossWeights(1 / 3, 1 / 3, 1 / 3),
    LossWeights(0.3, 0.35, 0.35),
    LossWeights(0.2, 0.4, 0.4),
    LossWeights(0.1, 0.45, 0.45),
    LossWeights(0.0, 0.5, 0.5),
)


@dataclass(frozen=True)
class LossBreakdown:
    """Componentes da perda de um lote."""

    holistic: float
    digit1: float
    digit2: float
    total: float
    digitwise: float


def _cross_entropy_value(p: np.ndarray, y: np.ndarray, expected_size: int = 0) -> float:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise InvalidShapeError(f"Distribuição {p.shape} e alvo {y.shape} incompatíveis")
    if expected_size and p.size != expected_size:
        raise InvalidShapeError(f"Esperadas {expected_size} classes, recebido {p.size}")
    target = int(y.argmax())
    if y[target] != 1.0 or np.count_nonzero(y) != 1:
        raise InvalidArgumentError("Alvo deve ser one-hot")
    return -math.log(max(float(p[target]), LOG_CLAMP))


def holistic_loss(p: np.ndarray, y: np.ndarray) -> float:
    """-sum_i y_i log p_i sobre o ClassSet (log protegido em 1e-12)."""
    return _cross_entropy_value(p, y)


def digit_loss(p: np.ndarray, y: np.ndarray) -> float:
    """Mesma entropia cruzada para uma cabeça de dígito (11 classes)."""
    return _cross_entropy_value(p, y, DIGIT_CLASSES)


def total_loss(holistic: float, digit1: float, digit2: float, weights: LossWeights) -> LossBreakdown:
    """
    Combinação convexa exata das três perdas.

    Raises:
        InvalidArgumentError: perda negativa ou não finita
    """
    for name, value in (("holística", holistic), ("dígito 1", digit1), ("dígito 2", digit2)):
        if not math.isfinite(value) or value < 0:
            raise InvalidArgumentError(f"Perda {name} inválida: {value}")
    digitwise = weights.beta * digit1 + weights.gamma * digit2
    total = weights.alpha * holistic + digitwise
    return LossBreakdown(float(holistic), float(digit1), float(digit2), float(total), float(digitwise))


def active_heads(weights: LossWeights) -> Tuple[str, ...]:
    """Cabeças que recebem gradiente sob os pesos dados."""
    names = []
    if weights.alpha > 0:
        names.append("holistic")
    if weights.beta > 0:
        names.append("digit1")
    if weights.gamma > 0:
        names.append("digit2")
    return tuple(names)


def multitask_loss(logits: Sequence[Tensor], targets: Tuple[np.ndarray, np.ndarray, np.ndarray],
                   weights: LossWeights) -> Tuple[Tensor, LossBreakdown]:
    """
    Perda diferenciável a partir dos logits das três cabeças.

    Args:
        logits: (holístico [N,K], dígito1 [N,11], dígito2 [N,11])
        targets: índices (holístico, dígito1, dígito2) de cada amostra
        weights: pesos (alpha, beta, gamma)

    Returns:
        (perda total escalar no registro ativo, decomposição em floats)
    """
    holistic_logits, digit1_logits, digit2_logits = logits
    holistic, digit1, digit2 = (
        cross_entropy(holistic_logits, targets[0]),
        cross_entropy(digit1_logits, targets[1]),
        cross_entropy(digit2_logits, targets[2]),
    )
    total = weighted_sum([holistic, digit1, digit2], list(weights.as_tuple()))
    breakdown = total_loss(holistic.item(), digit1.item(), digit2.item(), weights)
    return total, breakdown


def mean_breakdown(items: Sequence[LossBreakdown], weights: LossWeights) -> LossBreakdown:
    """Média de componentes ao longo de vários lotes."""
    if not items:
        raise InvalidArgumentError("Nenhuma perda para agregar")
    n = float(len(items))
    return total_loss(
        sum(b.holistic for b in items) / n,
        sum(b.digit1 for b in items) / n,
        sum(b.digit2 for b in items) / n,
        weights,
    )
