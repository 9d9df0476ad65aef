# -*- coding: utf-8 -*-
"""
Gradient Check Module

Verificação de gradientes analíticos contra diferenças finitas centrais,
sempre em precisão de 64 bits.

Erro relativo por coordenada: |analítico - numérico| / max(1, |numérico|).

Redes com relu e max-pooling são lineares por partes: quando a perturbação
de +-epsilon atravessa uma dobra, a diferença central não estima a derivada.
Com `kink_threshold`, coordenadas cujas diferenças laterais (progressiva e
regressiva) discordam acima do limiar são puladas e contadas em `skipped`.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..core.autodiff import FLOAT64, ComputationRecord, Tensor
from ..core.errors import InvalidArgumentError


logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-5


@dataclass
class GradientCheckResult:
    """
    Resultado da verificação.

    Attributes:
        max_error: maior erro relativo encontrado (inf em caso de falha)
        worst: (parâmetro, índice plano) do maior erro
        failed_at: (parâmetro, índice plano) onde a avaliação não foi finita
        checked: número de coordenadas comparadas
        skipped: coordenadas puladas por estarem numa dobra
    """

    max_error: float
    worst: Optional[Tuple[str, int]]
    failed_at: Optional[Tuple[str, int]]
    checked: int
    skipped: int = 0

    @property
    def ok(self) -> bool:
        return self.failed_at is None and bool(np.isfinite(self.max_error))

    def passes(self, tolerance: float) -> bool:
        return self.ok and self.max_error < tolerance


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(numeric))


def check_parameter_gradients(loss_fn: Callable[[], Tensor],
                              params: Mapping[str, Tensor],
                              epsilon: float = DEFAULT_EPSILON,
                              coordinates: Optional[Sequence[Tuple[str, int]]] = None,
                              kink_threshold: Optional[float] = None) -> GradientCheckResult:
    """
    Compara gradientes do autodiff com diferenças finitas centrais.

    `loss_fn` deve reconstruir a perda a partir dos tensores em `params`
    (que são perturbados no lugar e restaurados mesmo se `loss_fn` falhar).

    Args:
        loss_fn: função sem argumentos que devolve a perda escalar
        params: tensores a verificar, em float64
        epsilon: passo da diferença central
        coordinates: lista de (nome, índice plano); todas as coordenadas se None
        kink_threshold: limiar de discordância entre as diferenças laterais
            acima do qual a coordenada é pulada (None: nunca pula)
    """
    for name, tensor in params.items():
        if tensor.dtype != FLOAT64:
            raise TypeError(f"Verificação de gradiente exige float64 ('{name}' é {tensor.dtype})")
        tensor.data = np.ascontiguousarray(tensor.data)
        tensor.zero_grad()
        tensor.requires_grad = True

    with ComputationRecord() as record:
        loss = loss_fn()
    f_center = loss.item()
    if not np.isfinite(f_center):
        raise InvalidArgumentError(f"Perda não finita no ponto central: {f_center}")
    record.backward(loss)

    analytic: Dict[str, np.ndarray] = {}
    for name, tensor in params.items():
        grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        analytic[name] = grad.reshape(-1).copy()

    if coordinates is None:
        coordinates = [(name, i) for name, tensor in params.items() for i in range(tensor.size)]

    max_error = 0.0
    worst: Optional[Tuple[str, int]] = None
    checked = 0
    skipped = 0
    try:
        for name, index in coordinates:
            flat = params[name].data.reshape(-1)
            original = flat[index]
            try:
                flat[index] = original + epsilon
                f_plus = loss_fn().item()
                flat[index] = original - epsilon
                f_minus = loss_fn().item()
            finally:
                flat[index] = original

            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                logger.warning(f"Avaliação não finita em {name}[{index}]")
                return GradientCheckResult(float("inf"), worst, (name, index), checked, skipped)

            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            if kink_threshold is not None:
                forward = (f_plus - f_center) / epsilon
                backward = (f_center - f_minus) / epsilon
                if abs(forward - backward) > kink_threshold * max(1.0, abs(numeric)):
                    logger.debug(f"Coordenada {name}[{index}] numa dobra; pulada")
                    skipped += 1
                    continue

            checked += 1
            error = relative_error(float(analytic[name][index]), numeric)
            if error > max_error or worst is None:
                max_error = max(max_error, error)
                worst = (name, index)
    finally:
        for tensor in params.values():
            tensor.zero_grad()

    return GradientCheckResult(max_error, worst, None, checked, skipped)


def finite_difference_check(f: Callable[[Tensor], Tensor], point: Tensor,
                            epsilon: float = DEFAULT_EPSILON) -> GradientCheckResult:
    """
    Verifica o gradiente de uma função escalar f em `point`.

    Example:
        >>> finite_difference_check(lambda x: tensor_sum(mul(x, x)), Tensor([1.0, 2.0])).max_error < 1e-9
        True
    """
    x = Tensor(np.array(point.data, dtype=FLOAT64), requires_grad=True, name="x")
    return check_parameter_gradients(lambda: f(x), {"x": x}, epsilon)


def sample_coordinates(params: Mapping[str, Tensor], count: int,
                       rng: np.random.Generator) -> List[Tuple[str, int]]:
    """Sorteia `count` coordenadas uniformemente entre todos os parâmetros."""
    names = list(params)
    sizes = np.array([params[name].size for name in names])
    flat = rng.choice(int(sizes.sum()), size=min(count, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    picked = []
    for position in np.sort(flat):
        owner = int(np.searchsorted(offsets, position, side="right") - 1)
        picked.append((names[owner], int(position - offsets[owner])))
    return picked
