# -*- coding: utf-8 -*-
"""
Testes unitários para o modelo de três cabeças.
"""

import json

import pytest
import numpy as np
import sys
import os

# Adicionar o diretório raiz ao path para importações
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))

from jersey_mtl.core.autodiff import FLOAT64, Tensor, softmax
from jersey_mtl.core.errors import ConfigurationError, InvalidShapeError
from jersey_mtl.core.labels import DIGIT_CLASSES, ClassSet, encode_targets, target_indices
from jersey_mtl.core.losses import (
    DIGITWISE_WEIGHTS, HOLISTIC_WEIGHTS, MULTITASK_WEIGHTS, holistic_loss, multitask_loss,
)
from jersey_mtl.core.model import (
    BACKBONE_PRESETS, CHECKPOINT_FORMAT, BackboneConfig, ModelCheckpoint, build_network, count_parameters,
    extract_features, forward,
)
from jersey_mtl.utils.gradcheck import check_parameter_gradients, sample_coordinates


class TestBackboneConfig:
    """Validação da configuração do backbone."""

    def test_padrao_de_bancada(self):
        cfg = BackboneConfig()
        assert cfg.input_size == (64, 64)
        assert cfg.channels_per_stage == (16, 32, 64)
        assert cfg.residual

    @pytest.mark.parametrize("kwargs", [
        {"channels_per_stage": (8, 16), "blocks_per_stage": (1,)},
        {"channels_per_stage": ()},
        {"feature_dim": 4},
        {"input_size": (4, 4)},
        {"input_size": (8, 8), "channels_per_stage": (4,) * 5, "blocks_per_stage": (1,) * 5},
    ])
    def test_configuracoes_invalidas(self, kwargs):
        with pytest.raises(ConfigurationError):
            BackboneConfig(**kwargs)

    def test_dicionario_ida_e_volta(self):
        cfg = BACKBONE_PRESETS["large"]
        assert BackboneConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_presets_com_capacidades_distintas(self):
        """A varredura de backbones exige capacidades diferentes."""
        counts = [count_parameters(BACKBONE_PRESETS[name], 81) for name in ("small", "default", "large")]
        assert counts[0] < counts[1] < counts[2]
        assert count_parameters(BACKBONE_PRESETS["resnet34_fullscale"], 81) > counts[2]


class TestJerseyNet:
    """Construção e forward da rede."""

    @pytest.mark.parametrize("name", ["small", "default", "large"])
    def test_contagem_de_parametros_em_forma_fechada(self, name, tiny_classes):
        """A contagem fechada coincide com a soma dos tensores construídos."""
        # Arrange
        cfg = BACKBONE_PRESETS[name]

        # Act
        model = build_network(cfg, tiny_classes, seed=0)

        # Assert
        assert model.parameter_count() == count_parameters(cfg, len(tiny_classes))

    def test_forward_produz_distribuicoes(self, tiny_model, rng):
        """Uma tripla por imagem; cada distribuição soma 1."""
        # Arrange
        batch = rng.uniform(size=(3, 3, 16, 16)).astype(np.float32)

        # Act
        predictions = forward(tiny_model, batch)

        # Assert
        assert len(predictions) == 3
        for pred in predictions:
            assert pred.p.shape == (6,)
            assert pred.p1.shape == (DIGIT_CLASSES,)
            assert pred.p2.shape == (DIGIT_CLASSES,)
            for dist in (pred.p, pred.p1, pred.p2):
                assert float(dist.sum()) == pytest.approx(1.0, abs=1e-5)
                assert np.all(dist >= 0)

    def test_caracteristicas_compartilhadas(self, tiny_model, rng):
        """Vetor de características [N, feature_dim]."""
        features = extract_features(tiny_model, rng.uniform(size=(2, 3, 16, 16)))
        assert features.shape == (2, 8)

    def test_formato_de_entrada_invalido(self, tiny_model):
        with pytest.raises(InvalidShapeError):
            tiny_model.forward(np.zeros((1, 3, 32, 32), dtype=np.float32))
        with pytest.raises(InvalidShapeError):
            tiny_model.forward(np.zeros((3, 16, 16), dtype=np.float32))

    def test_inicializacao_deterministica(self, tiny_backbone, tiny_classes):
        """Mesma semente, mesmos pesos; sementes distintas, pesos distintos."""
        # Act
        a = build_network(tiny_backbone, tiny_classes, seed=5)
        b = build_network(tiny_backbone, tiny_classes, seed=5)
        c = build_network(tiny_backbone, tiny_classes, seed=6)

        # Assert
        assert list(a.params) == list(b.params)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name].data, b.params[name].data)
        assert not np.array_equal(a.params["stem.weight"].data, c.params["stem.weight"].data)
        assert np.all(a.params["head_holistic.bias"].data == 0)

    def test_cabecas_nomeadas(self, tiny_model):
        assert tiny_model.head_parameter_names("digit1") == ["head_digit1.weight", "head_digit1.bias"]
        with pytest.raises(ConfigurationError):
            tiny_model.head_parameter_names("digit3")

    def test_astype(self, tiny_model):
        """Cópia em float64 sem alterar o original."""
        # Act
        double = tiny_model.astype(FLOAT64)

        # Assert
        assert double.dtype == np.float64
        assert tiny_model.dtype == np.float32
        assert double.params["stem.weight"] is not tiny_model.params["stem.weight"]

    @pytest.mark.parametrize("seed", range(5))
    def test_perda_inicial_proxima_de_ln_k(self, tiny_backbone, seed):
        """Rede recém-criada: perda holística média a 15% de ln|K|."""
        # Arrange
        classes = ClassSet.first(81)
        model = build_network(tiny_backbone, classes, seed=seed)
        data_rng = np.random.default_rng(100 + seed)
        batch = data_rng.uniform(size=(100, 3, 16, 16)).astype(np.float32)
        labels = [classes[int(i)] for i in data_rng.integers(0, len(classes), size=100)]

        # Act
        predictions = model.predict_batches(batch, batch_size=50)
        losses = [holistic_loss(pred.p, encode_targets(label, classes).y) for pred, label in zip(predictions, labels)]

        # Assert
        assert np.mean(losses) == pytest.approx(np.log(len(classes)), rel=0.15)

    def test_caracteristicas_nulas_devolvem_softmax_do_bias(self, tiny_model, rng):
        """Com características zeradas, cada cabeça devolve softmax(bias)."""
        # Arrange
        for head in ("holistic", "digit1", "digit2"):
            bias = tiny_model.params[f"head_{head}.bias"]
            bias.data[...] = rng.normal(size=bias.shape)
        features = Tensor(np.zeros((2, 8), dtype=np.float32))

        # Act
        outputs = tiny_model.heads(features)

        # Assert
        for head, logits in zip(("holistic", "digit1", "digit2"), outputs.as_tuple()):
            bias = tiny_model.params[f"head_{head}.bias"].data.astype(np.float64)
            expected = np.exp(bias) / np.exp(bias).sum()
            for row in softmax(logits).data:
                np.testing.assert_allclose(row, expected, atol=1e-6)


class TestModelGradients:
    """Gradientes do modelo completo contra diferenças finitas, para os três cenários de pesos."""

    @pytest.mark.parametrize("weights", [HOLISTIC_WEIGHTS, DIGITWISE_WEIGHTS, MULTITASK_WEIGHTS],
                             ids=["holistic", "digitwise", "multitask"])
    @pytest.mark.parametrize("seed", range(20))
    def test_gradiente_do_modelo(self, gradcheck_model, tiny_classes, weights, seed):
        # Arrange
        rng = np.random.default_rng(seed)
        size = int(rng.integers(1, 3))
        batch = Tensor(rng.uniform(size=(size, 3, 8, 8)))
        labels = [tiny_classes[int(i)] for i in rng.integers(0, len(tiny_classes), size=size)]
        targets = target_indices([encode_targets(label, tiny_classes) for label in labels])
        coordinates = sample_coordinates(gradcheck_model.params, 10, rng)

        def loss():
            return multitask_loss(gradcheck_model.logits(batch).as_tuple(), targets, weights)[0]

        # Act
        result = check_parameter_gradients(loss, gradcheck_model.params, coordinates=coordinates,
                                           kink_threshold=1e-4)

        # Assert
        assert result.passes(1e-4), result
        assert result.skipped < len(coordinates) / 2


class TestModelCheckpoint:
    """Persistência do checkpoint."""

    def test_salvar_e_carregar(self, tiny_model, tmp_path, rng):
        """Parâmetros, classes, configuração e pesos sobrevivem ao disco."""
        # Arrange
        checkpoint = ModelCheckpoint.from_model(tiny_model, 40, MULTITASK_WEIGHTS, {"val_accuracy": 0.5})
        batch = rng.uniform(size=(2, 3, 16, 16)).astype(np.float32)

        # Act
        path = checkpoint.save(tmp_path / "run" / "checkpoint_seed0.npz")
        loaded = ModelCheckpoint.load(path)

        # Assert
        assert (tmp_path / "run" / "classes.txt").exists()
        assert loaded.iteration == 40
        assert loaded.loss_weights == MULTITASK_WEIGHTS
        assert loaded.classes == tiny_model.classes
        assert loaded.config == tiny_model.cfg
        assert loaded.extra["val_accuracy"] == 0.5
        original = tiny_model.forward(batch)
        restored = loaded.to_model().forward(batch)
        for a, b in zip(original, restored):
            np.testing.assert_array_equal(a.p, b.p)

    def test_checkpoint_e_copia(self, tiny_model):
        """O checkpoint não acompanha alterações posteriores do modelo."""
        # Arrange
        checkpoint = ModelCheckpoint.from_model(tiny_model, 1, MULTITASK_WEIGHTS)

        # Act
        tiny_model.params["stem.bias"].data += 1.0

        # Assert
        assert np.all(checkpoint.params["stem.bias"] == 0)

    def test_arquivo_sem_metadados(self, tmp_path):
        # Arrange
        path = tmp_path / "x.npz"
        np.savez(path, a=np.zeros(3))

        # Act & Assert
        with pytest.raises(ConfigurationError):
            ModelCheckpoint.load(path)

    def test_formato_desconhecido(self, tmp_path):
        # Arrange
        path = tmp_path / "x.npz"
        meta = {"format": CHECKPOINT_FORMAT.replace("/1", "/99")}
        np.savez(path, __meta__=np.array(json.dumps(meta)))

        # Act & Assert
        with pytest.raises(ConfigurationError):
            ModelCheckpoint.load(path)


if __name__ == '__main__':
    pytest.main([__file__])
