# -*- coding: utf-8 -*-
"""
Jersey MTL - Reconhecimento de números de camisa com perda multi-tarefa.

Este pacote contém:
- Diferenciação automática em modo reverso sobre numpy (core.autodiff)
- Codificação holística e por dígitos dos rótulos (core.labels)
- Perda multi-tarefa ponderada e o modelo de três cabeças (core.losses, core.model)
- Gerador sintético, treino, avaliação e experimentos (services)
"""

__version__ = "1.0.0"

from .core.labels import NULL, ClassSet, JerseyLabel
from .core.losses import ABLATION_GRID, DIGITWISE_WEIGHTS, HOLISTIC_WEIGHTS, MULTITASK_WEIGHTS, LossWeights
from .core.main import main

__all__ = [
    "main",
    "NULL",
    "ClassSet",
    "JerseyLabel",
    "LossWeights",
    "ABLATION_GRID",
    "HOLISTIC_WEIGHTS",
    "DIGITWISE_WEIGHTS",
    "MULTITASK_WEIGHTS",
]
