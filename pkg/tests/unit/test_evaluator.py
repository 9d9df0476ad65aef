# -*- coding: utf-8 -*-
"""
Testes unitários para o serviço de avaliação.
"""

import pytest
import numpy as np
from sklearn import metrics
import sys
import os

# Adicionar o diretório raiz ao path para importações
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))

from jersey_mtl.core.errors import ConfigurationError, MetricsInputError
from jersey_mtl.core.labels import ABSENT, DIGIT_CLASSES, NULL, ClassSet, JerseyLabel, decompose_digits
from jersey_mtl.core.losses import DIGITWISE_WEIGHTS, HOLISTIC_WEIGHTS, MULTITASK_WEIGHTS, LossWeights
from jersey_mtl.core.model import ModelCheckpoint, PredictionTriple, build_network
from jersey_mtl.services.evaluator import (
    ConfusionMatrix, PredictionMode, collapsed_digits, confusion, digitwise_correct, evaluate_checkpoint,
    evaluate_model, evaluate_predictions, macro_metrics, mode_for_weights, predict_label, scored_label,
)


def _triple(classes, holistic=None, d1=None, d2=None, peak=0.9):
    """Predição com massa `peak` nas posições pedidas e o resto espalhado."""
    def dist(size, index):
        p = np.full(size, (1.0 - peak) / (size - 1))
        if index is None:
            return np.full(size, 1.0 / size)
        p[index] = peak
        return p
    return PredictionTriple(dist(len(classes), holistic), dist(DIGIT_CLASSES, d1), dist(DIGIT_CLASSES, d2))


def _brute_force_macro(matrix):
    """Precisão/revocação/F1 por laços explícitos, média sobre classes presentes."""
    n = matrix.shape[0]
    precisions, recalls, f1s = [], [], []
    for k in range(n):
        support = sum(matrix[k, j] for j in range(n))
        if support == 0:
            continue
        tp = matrix[k, k]
        predicted = sum(matrix[i, k] for i in range(n))
        precision = tp / predicted if predicted else 0.0
        recall = tp / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    return np.mean(precisions), np.mean(recalls), np.mean(f1s)


class TestPredictionModes:
    """Conversão das saídas em rótulos."""

    def test_parse(self):
        assert PredictionMode.parse(" Fused ") is PredictionMode.FUSED
        with pytest.raises(ConfigurationError):
            PredictionMode.parse("ensemble")

    def test_modo_pelos_pesos(self):
        assert mode_for_weights(HOLISTIC_WEIGHTS) is PredictionMode.HOLISTIC
        assert mode_for_weights(DIGITWISE_WEIGHTS) is PredictionMode.DIGITWISE
        assert mode_for_weights(MULTITASK_WEIGHTS) is PredictionMode.MULTITASK_DEFAULT
        assert mode_for_weights(LossWeights(0.8, 0.2, 0.0)) is PredictionMode.MULTITASK_DEFAULT

    def test_holistico_e_multitarefa_usam_a_cabeca_holistica(self, tiny_classes):
        # Arrange
        pred = _triple(tiny_classes, holistic=3, d1=7, d2=2)

        # Act & Assert
        assert predict_label(pred, PredictionMode.HOLISTIC, tiny_classes) == JerseyLabel(23)
        assert predict_label(pred, PredictionMode.MULTITASK_DEFAULT, tiny_classes) == JerseyLabel(23)

    def test_empate_fica_com_o_menor_indice(self, tiny_classes):
        """Distribuição uniforme: índice 0 (nulo)."""
        pred = _triple(tiny_classes)
        assert predict_label(pred, PredictionMode.HOLISTIC, tiny_classes) == NULL

    def test_por_digitos_compoe_os_dois_digitos(self, tiny_classes):
        # Arrange
        pred = _triple(tiny_classes, holistic=0, d1=7, d2=2)

        # Act & Assert
        assert predict_label(pred, PredictionMode.DIGITWISE, tiny_classes) == JerseyLabel(72)
        assert digitwise_correct(pred, 72)
        assert not digitwise_correct(pred, 2)

    def test_por_digitos_fora_do_conjunto(self, tiny_classes):
        """95 não pertence ao conjunto: devolvido assim mesmo."""
        pred = _triple(tiny_classes, d1=9, d2=5)
        assert predict_label(pred, PredictionMode.DIGITWISE, tiny_classes) == JerseyLabel(95)

    def test_unidade_ausente_vira_nulo(self, tiny_classes):
        pred = _triple(tiny_classes, d1=ABSENT, d2=ABSENT)
        assert predict_label(pred, PredictionMode.DIGITWISE, tiny_classes) == NULL
        assert not collapsed_digits(pred)

    def test_par_colapsado_compoe_nulo_mas_conta_como_erro(self, tiny_classes):
        """(3, ausente) compõe o nulo, mas não acerta uma verdade nula."""
        # Arrange
        pred = _triple(tiny_classes, d1=3, d2=ABSENT)

        # Act
        label = predict_label(pred, PredictionMode.DIGITWISE, tiny_classes)
        scored = scored_label(pred, NULL, PredictionMode.DIGITWISE, tiny_classes)

        # Assert
        assert label == NULL
        assert collapsed_digits(pred)
        assert not digitwise_correct(pred, NULL)
        assert scored == tiny_classes[1]

    def test_rotulo_pontuado_equivale_a_acerto_dos_dois_digitos(self, tiny_classes):
        """Para triplas aleatórias: scored_label == verdade se e somente se os dois dígitos acertam."""
        rng = np.random.default_rng(21)
        digit_choices = [*range(10), ABSENT]
        for _ in range(2000):
            # Arrange
            d1 = int(rng.choice(digit_choices))
            d2 = int(rng.choice(digit_choices))
            truth = tiny_classes[int(rng.integers(0, len(tiny_classes)))]
            pred = _triple(tiny_classes, holistic=int(rng.integers(0, len(tiny_classes))), d1=d1, d2=d2)

            # Act
            scored = scored_label(pred, truth, PredictionMode.DIGITWISE, tiny_classes)

            # Assert
            assert scored in tiny_classes
            assert (scored == truth) == digitwise_correct(pred, truth), (d1, d2, truth)

    def test_verdades_com_digitos_sorteados(self, tiny_classes):
        """Metade das predições copia os dígitos da verdade: a equivalência vale nos dois sentidos."""
        rng = np.random.default_rng(5)
        for _ in range(500):
            truth = tiny_classes[int(rng.integers(0, len(tiny_classes)))]
            if rng.random() < 0.5:
                d1, d2 = decompose_digits(truth)
            else:
                d1, d2 = int(rng.integers(0, 11)), int(rng.integers(0, 11))
            pred = _triple(tiny_classes, d1=d1, d2=d2)
            scored = scored_label(pred, truth, PredictionMode.DIGITWISE, tiny_classes)
            assert (scored == truth) == digitwise_correct(pred, truth)

    def test_fundido_combina_as_tres_cabecas(self, tiny_classes):
        """Holístico levemente a favor de 12, dígitos fortemente a favor de 72."""
        # Arrange
        p = np.full(len(tiny_classes), 0.1)
        p[2] = 0.35  # 12
        p[5] = 0.25  # 72
        p = p / p.sum()
        pred = PredictionTriple(p, _triple(tiny_classes, d1=7, d2=2, peak=0.95).p1,
                                _triple(tiny_classes, d1=7, d2=2, peak=0.95).p2)

        # Act & Assert
        assert predict_label(pred, PredictionMode.HOLISTIC, tiny_classes) == JerseyLabel(12)
        assert predict_label(pred, PredictionMode.FUSED, tiny_classes) == JerseyLabel(72)


class TestConfusion:
    """Matriz de confusão."""

    def test_contagens(self, tiny_classes):
        # Act
        cm = confusion([7, 7, None, 12], [7, 12, None, 12], tiny_classes)

        # Assert
        assert cm.total == 4
        assert cm.accuracy == 0.75
        assert cm.matrix[2, 1] == 1
        assert cm.matrix[0, 0] == 1

    @pytest.mark.parametrize("preds, truths", [([7], [7, 12]), ([], []), ([8], [7])])
    def test_entradas_invalidas(self, tiny_classes, preds, truths):
        with pytest.raises(MetricsInputError):
            confusion(preds, truths, tiny_classes)


class TestMacroMetrics:
    """Precisão, revocação e F1 macro."""

    def test_oraculo_de_forca_bruta(self):
        """100 matrizes aleatórias de 2 a 81 classes, diferença <= 1e-12."""
        rng = np.random.default_rng(11)
        for _ in range(100):
            # Arrange
            n = int(rng.integers(2, 82))
            matrix = rng.integers(0, 6, size=(n, n))
            empty_rows = rng.random(n) < 0.2
            matrix[empty_rows] = 0
            if matrix.sum() == 0:
                matrix[0, 0] = 1
            cm = ConfusionMatrix(matrix, ClassSet.first(n))

            # Act
            report = macro_metrics(cm)

            # Assert
            precision, recall, f1 = _brute_force_macro(matrix)
            assert abs(report.macro_precision - precision) <= 1e-12
            assert abs(report.macro_recall - recall) <= 1e-12
            assert abs(report.macro_f1 - f1) <= 1e-12
            assert report.accuracy == pytest.approx(np.trace(matrix) / matrix.sum(), abs=1e-12)

    def test_classes_ausentes_nao_entram_na_media(self):
        """Classe sem instâncias verdadeiras é ignorada, mesmo se prevista."""
        # Arrange
        matrix = np.array([[2, 0, 0], [0, 1, 1], [0, 0, 0]])
        cm = ConfusionMatrix(matrix, ClassSet.first(3))

        # Act
        report = macro_metrics(cm)

        # Assert
        assert report.macro_recall == pytest.approx((1.0 + 0.5) / 2)
        assert report.macro_precision == pytest.approx((1.0 + 1.0) / 2)
        assert report.support.tolist() == [2, 2, 0]

    def test_matriz_vazia(self):
        with pytest.raises(MetricsInputError):
            macro_metrics(ConfusionMatrix(np.zeros((3, 3), dtype=np.int64), ClassSet.first(3)))

    def test_linha_de_relatorio(self):
        cm = ConfusionMatrix(np.eye(2, dtype=np.int64), ClassSet.first(2))
        row = macro_metrics(cm).as_row("holistic")
        assert row == {"method": "holistic", "accuracy": 1.0, "precision": 1.0, "recall": 1.0, "f1": 1.0}


class TestEvaluatePredictions:
    """Métricas de um conjunto de predições."""

    def test_rotulo_fora_do_conjunto_conta_como_erro(self, tiny_classes):
        # Arrange
        preds = [_triple(tiny_classes, d1=9, d2=5), _triple(tiny_classes, d1=ABSENT, d2=7)]
        truths = [JerseyLabel(72), JerseyLabel(7)]

        # Act
        report, cm = evaluate_predictions(preds, truths, PredictionMode.DIGITWISE, tiny_classes)

        # Assert
        assert report.accuracy == 0.5
        assert cm.matrix[tiny_classes.index(72), 0] == 1

    def test_verdade_nula_com_predicao_fora_do_conjunto(self, tiny_classes):
        report, cm = evaluate_predictions([_triple(tiny_classes, d1=9, d2=5)], [NULL], PredictionMode.DIGITWISE,
                                          tiny_classes)
        assert report.accuracy == 0.0
        assert cm.matrix[0, 1] == 1

    def test_par_colapsado_nao_acerta_verdade_nula(self, tiny_classes):
        """(3, ausente) contra verdade nula: erro no modo por dígitos; no multi-tarefa decide a cabeça holística."""
        # Arrange
        preds = [_triple(tiny_classes, holistic=0, d1=3, d2=ABSENT), _triple(tiny_classes, d1=ABSENT, d2=ABSENT)]
        truths = [NULL, NULL]

        # Act
        digitwise, cm = evaluate_predictions(preds, truths, PredictionMode.DIGITWISE, tiny_classes)
        multitask, _ = evaluate_predictions(preds, truths, PredictionMode.MULTITASK_DEFAULT, tiny_classes)

        # Assert
        assert digitwise.accuracy == 0.5
        assert cm.matrix[0, 0] == 1
        assert cm.matrix[0, 1] == 1
        assert multitask.accuracy == 1.0

    def test_confere_com_sklearn_sobre_rotulos(self, tiny_classes):
        """Métricas de predições aleatórias contra sklearn.metrics aplicado aos rótulos pontuados."""
        # Arrange
        rng = np.random.default_rng(8)
        n = len(tiny_classes)
        truths = [tiny_classes[int(i)] for i in rng.integers(0, n, size=300)]
        preds = [_triple(tiny_classes, holistic=int(rng.integers(0, n))) for _ in truths]

        # Act
        report, _ = evaluate_predictions(preds, truths, PredictionMode.HOLISTIC, tiny_classes)

        # Assert
        y_true = [tiny_classes.index(t) for t in truths]
        y_pred = [tiny_classes.index(predict_label(p, PredictionMode.HOLISTIC, tiny_classes)) for p in preds]
        present = sorted(set(y_true))
        assert report.accuracy == pytest.approx(metrics.accuracy_score(y_true, y_pred), abs=1e-12)
        assert report.macro_precision == pytest.approx(
            metrics.precision_score(y_true, y_pred, labels=present, average="macro", zero_division=0), abs=1e-12)
        assert report.macro_recall == pytest.approx(
            metrics.recall_score(y_true, y_pred, labels=present, average="macro", zero_division=0), abs=1e-12)
        assert report.macro_f1 == pytest.approx(
            metrics.f1_score(y_true, y_pred, labels=present, average="macro", zero_division=0), abs=1e-12)


class TestEvaluateModel:
    """Avaliação de modelos e checkpoints."""

    def test_avaliacao_na_divisao_de_teste(self, tiny_model, tiny_manifest):
        report = evaluate_model(tiny_model, tiny_manifest, "test", PredictionMode.FUSED)
        assert 0.0 <= report.accuracy <= 1.0
        assert report.support.sum() == 11

    def test_classes_diferentes(self, tiny_backbone, tiny_manifest):
        model = build_network(tiny_backbone, ClassSet.first(6), seed=0)
        with pytest.raises(ConfigurationError):
            evaluate_model(model, tiny_manifest, "test", PredictionMode.HOLISTIC)

    def test_checkpoint_usa_o_modo_dos_pesos(self, tiny_model, tiny_manifest, tmp_path):
        # Arrange
        path = ModelCheckpoint.from_model(tiny_model, 1, DIGITWISE_WEIGHTS).save(tmp_path / "ck.npz")

        # Act
        from_checkpoint = evaluate_checkpoint(path, tiny_manifest, "val")
        direct = evaluate_model(tiny_model, tiny_manifest, "val", PredictionMode.DIGITWISE)

        # Assert
        assert from_checkpoint.accuracy == direct.accuracy
        assert from_checkpoint.macro_f1 == direct.macro_f1


if __name__ == '__main__':
    pytest.main([__file__])
