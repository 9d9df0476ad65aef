# -*- coding: utf-8 -*-
"""
Fixtures compartilhadas dos testes.
"""

import os
import sys

import numpy as np
import pytest

# Adicionar o diretório raiz ao path para importações
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from jersey_mtl.core.autodiff import FLOAT64
from jersey_mtl.core.labels import ClassSet
from jersey_mtl.core.model import BackboneConfig, build_network
from jersey_mtl.services.synth_data import balanced_counts, generate_dataset
from jersey_mtl.services.trainer import TrainConfig


TINY_NUMBERS = (7, 12, 23, 45, 72)
TINY_IMAGE_SIZE = (16, 16)
TINY_RATIOS = (0.4, 0.3, 0.3)


@pytest.fixture
def rng():
    """Gerador determinístico para dados de teste."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_classes():
    """Nulo + 5 números (7, 12, 23, 45, 72)."""
    return ClassSet.from_numbers(TINY_NUMBERS)


@pytest.fixture
def tiny_manifest(tiny_classes):
    """36 registros: treino 14, validação 11, teste 11; imagens 16x16."""
    return generate_dataset(
        tiny_classes, balanced_counts(tiny_classes, 6), range(10), TINY_RATIOS, master_seed=3,
        image_size=TINY_IMAGE_SIZE,
    )


@pytest.fixture
def tiny_backbone():
    return BackboneConfig(input_size=TINY_IMAGE_SIZE, channels_per_stage=(4, 8), blocks_per_stage=(1, 1),
                          feature_dim=8)


@pytest.fixture
def tiny_model(tiny_backbone, tiny_classes):
    return build_network(tiny_backbone, tiny_classes, seed=0)


@pytest.fixture
def gradcheck_backbone():
    return BackboneConfig(input_size=(8, 8), channels_per_stage=(2, 3), blocks_per_stage=(1, 1), feature_dim=8)


@pytest.fixture
def gradcheck_model(gradcheck_backbone, tiny_classes):
    return build_network(gradcheck_backbone, tiny_classes, seed=0, dtype=FLOAT64)


@pytest.fixture
def tiny_train_config():
    return TrainConfig(total_iterations=6, batch_size=4, validation_interval=3, lr_milestones=(2, 4),
                       hue_jitter_max=0.2)
