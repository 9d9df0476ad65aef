# -*- coding: utf-8 -*-
"""
Testes unitários para o módulo de diferenciação automática.
"""

import pytest
import numpy as np
import sys
import os

# Adicionar o diretório raiz ao path para importações
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))

from jersey_mtl.core.autodiff import (
    FLOAT64, ComputationRecord, Tensor, add, conv2d, conv_output_size, cross_entropy, global_avg_pool2d, linear,
    maxpool2d, mul, relu, scale, softmax, tensor_sum, weighted_sum,
)
from jersey_mtl.core.errors import GraphStateError, InvalidArgumentError, InvalidShapeError
from jersey_mtl.utils.gradcheck import check_parameter_gradients


TOLERANCE = 1e-4
SEEDS = range(20)


def _param(rng, shape, name):
    return Tensor(rng.normal(size=shape), requires_grad=True, name=name)


def _random_projection(output, rng):
    """Escalar sum(output * R) com R aleatório fixo, para testar gradientes não triviais."""
    return Tensor(rng.normal(size=output.shape))


class TestTensor:
    """Testes do tipo Tensor."""

    def test_inteiros_viram_float64(self):
        """Dados inteiros são convertidos para float64."""
        # Act
        tensor = Tensor([1, 2, 3])

        # Assert
        assert tensor.dtype == np.float64
        assert tensor.shape == (3,)

    def test_item_exige_escalar(self):
        """item() em tensor não escalar falha."""
        with pytest.raises(InvalidArgumentError):
            Tensor([1.0, 2.0]).item()

    def test_operacoes_fora_do_registro_nao_sao_gravadas(self):
        """Fora de um registro ativo não há rastreamento."""
        # Arrange
        x = Tensor([1.0, -2.0], requires_grad=True)

        # Act
        y = relu(x)

        # Assert
        assert not y.requires_grad
        np.testing.assert_array_equal(y.data, [1.0, 0.0])


class TestComputationRecord:
    """Testes do registro de computação."""

    def test_grava_operacoes_em_ordem(self):
        """As operações ficam na ordem de execução."""
        # Arrange
        x = Tensor(np.ones((2, 3)), requires_grad=True)
        w = Tensor(np.ones((3, 2)), requires_grad=True)
        b = Tensor(np.zeros(2), requires_grad=True)

        # Act
        with ComputationRecord() as record:
            loss = tensor_sum(relu(linear(x, w, b)))

        # Assert
        assert record.ops() == ["linear", "relu", "sum"]
        assert loss.item() == pytest.approx(12.0)

    def test_backward_duplo_falha(self):
        """Um registro aceita um único backward."""
        # Arrange
        x = Tensor([1.0, 2.0], requires_grad=True)
        with ComputationRecord() as record:
            loss = tensor_sum(x)
        record.backward(loss)

        # Act & Assert
        with pytest.raises(GraphStateError):
            record.backward(loss)
        with pytest.raises(GraphStateError):
            with record:
                pass

    def test_backward_exige_perda_escalar(self):
        """Perda não escalar é rejeitada."""
        # Arrange
        x = Tensor([1.0, 2.0], requires_grad=True)
        with ComputationRecord() as record:
            out = scale(x, 2.0)

        # Act & Assert
        with pytest.raises(InvalidArgumentError):
            record.backward(out)

    def test_perda_de_outro_registro_falha(self):
        """A perda precisa ter sido produzida pelo registro."""
        # Arrange
        x = Tensor([1.0, 2.0], requires_grad=True)
        with ComputationRecord():
            loss = tensor_sum(x)
        other = ComputationRecord()
        with other:
            tensor_sum(scale(x, 3.0))

        # Act & Assert
        with pytest.raises(InvalidArgumentError):
            other.backward(loss)

    def test_gradientes_acumulam_no_mesmo_registro(self):
        """Tensor usado duas vezes recebe a soma das contribuições."""
        # Arrange
        x = Tensor([1.0, -3.0], requires_grad=True)

        # Act
        with ComputationRecord() as record:
            loss = tensor_sum(add(x, x))
        record.backward(loss)

        # Assert
        np.testing.assert_array_equal(x.grad, [2.0, 2.0])

    def test_gradientes_acumulam_entre_registros(self):
        """Dois backward em registros distintos somam em grad."""
        # Arrange
        x = Tensor([1.0, 2.0], requires_grad=True)

        # Act
        for factor in (2.0, 5.0):
            with ComputationRecord() as record:
                loss = tensor_sum(scale(x, factor))
            record.backward(loss)

        # Assert
        np.testing.assert_array_equal(x.grad, [7.0, 7.0])

    def test_tensores_sem_gradiente_nao_recebem_grad(self):
        """Entradas sem requires_grad ficam sem gradiente."""
        # Arrange
        x = Tensor([1.0, 2.0])
        w = Tensor([3.0, 4.0], requires_grad=True)

        # Act
        with ComputationRecord() as record:
            loss = tensor_sum(mul(x, w))
        record.backward(loss)

        # Assert
        assert x.grad is None
        np.testing.assert_array_equal(w.grad, [1.0, 2.0])


class TestOperations:
    """Valores e erros das operações de camada."""

    def test_conv2d_formato_de_saida(self):
        """H' = floor((H + 2p - k)/s) + 1."""
        # Arrange
        x = Tensor(np.zeros((2, 3, 9, 7)))
        k = Tensor(np.zeros((4, 3, 3, 3)))
        b = Tensor(np.zeros(4))

        # Act
        out = conv2d(x, k, b, stride=2, padding=1)

        # Assert
        assert out.shape == (2, 4, conv_output_size(9, 3, 2, 1), conv_output_size(7, 3, 2, 1))
        assert out.shape == (2, 4, 5, 4)

    def test_conv2d_valor_conhecido(self):
        """Kernel de uns soma a janela 3x3."""
        # Arrange
        x = Tensor(np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4))
        k = Tensor(np.ones((1, 1, 3, 3)))
        b = Tensor([1.0])

        # Act
        out = conv2d(x, k, b)

        # Assert
        expected = np.array([[45.0, 54.0], [81.0, 90.0]]) + 1.0
        np.testing.assert_allclose(out.data[0, 0], expected)

    def test_conv2d_canais_incompativeis(self):
        """Kernel com canais diferentes da entrada falha."""
        with pytest.raises(InvalidShapeError):
            conv2d(Tensor(np.zeros((1, 3, 5, 5))), Tensor(np.zeros((2, 4, 3, 3))), Tensor(np.zeros(2)))

    def test_maxpool_janela_invalida(self):
        """k <= 0 é rejeitado."""
        with pytest.raises(InvalidArgumentError):
            maxpool2d(Tensor(np.zeros((1, 1, 4, 4))), 0)

    def test_maxpool_empate_vai_para_menor_indice(self):
        """Com todos os valores iguais, o gradiente vai para o canto superior esquerdo."""
        # Arrange
        x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)

        # Act
        with ComputationRecord() as record:
            loss = tensor_sum(maxpool2d(x, 2))
        record.backward(loss)

        # Assert
        np.testing.assert_array_equal(x.grad[0, 0], [[1.0, 0.0], [0.0, 0.0]])

    def test_softmax_soma_um(self, rng):
        """Cada linha do softmax soma 1, mesmo com logits grandes."""
        # Arrange
        logits = Tensor(rng.normal(scale=50.0, size=(4, 81)))

        # Act
        probs = softmax(logits)

        # Assert
        np.testing.assert_allclose(probs.data.sum(axis=1), np.ones(4), atol=1e-12)
        assert np.all(probs.data >= 0)

    def test_softmax_logit_extremo(self):
        """[1000, 0] não transborda: sai [1, 0]."""
        # Act
        probs = softmax(Tensor([[1000.0, 0.0]]))

        # Assert
        assert np.all(np.isfinite(probs.data))
        np.testing.assert_allclose(probs.data[0], [1.0, 0.0], atol=1e-12)

    def test_softmax_soma_um_em_magnitude_alta(self, rng):
        """Logits de magnitude 1e4 ainda somam 1 por linha."""
        # Arrange
        logits = Tensor(rng.uniform(-1e4, 1e4, size=(16, 81)))

        # Act
        probs = softmax(logits)

        # Assert
        assert np.all(np.isfinite(probs.data))
        np.testing.assert_allclose(probs.data.sum(axis=1), np.ones(16), atol=1e-6)

    def test_cross_entropy_uniforme(self):
        """Logits iguais dão ln(K)."""
        # Act
        loss = cross_entropy(Tensor(np.zeros((3, 11))), [0, 5, 10])

        # Assert
        assert loss.item() == pytest.approx(np.log(11), abs=1e-12)

    def test_cross_entropy_alvo_fora_do_intervalo(self):
        """Índice de alvo >= K falha."""
        with pytest.raises(InvalidArgumentError):
            cross_entropy(Tensor(np.zeros((2, 11))), [0, 11])

    def test_weighted_sum_peso_zero_e_exato(self):
        """Peso nulo elimina o termo exatamente."""
        # Arrange
        terms = [Tensor(0.7), Tensor(1.3), Tensor(2.9)]

        # Act
        total = weighted_sum(terms, [0.0, 0.5, 0.5])

        # Assert
        assert total.item() == 0.5 * 1.3 + 0.5 * 2.9

    def test_formatos_incompativeis(self):
        """add, mul e linear validam formatos."""
        with pytest.raises(InvalidShapeError):
            add(Tensor(np.zeros(2)), Tensor(np.zeros(3)))
        with pytest.raises(InvalidShapeError):
            mul(Tensor(np.zeros(2)), Tensor(np.zeros(3)))
        with pytest.raises(InvalidShapeError):
            linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))), Tensor(np.zeros(2)))

    def test_chamadas_repetidas_sao_identicas(self, rng):
        """conv2d, linear e maxpool devolvem bits iguais para as mesmas entradas."""
        # Arrange
        x = Tensor(rng.normal(size=(3, 2, 9, 9)))
        kernel = Tensor(rng.normal(size=(4, 2, 3, 3)))
        bias = Tensor(rng.normal(size=4))
        flat = Tensor(rng.normal(size=(5, 7)))
        weight = Tensor(rng.normal(size=(7, 3)))
        w_bias = Tensor(rng.normal(size=3))

        def run():
            conv = conv2d(x, kernel, bias, stride=2, padding=1)
            return conv.data, maxpool2d(conv, 2).data, linear(flat, weight, w_bias).data

        # Act
        first = run()
        second = run()

        # Assert
        for a, b in zip(first, second):
            assert a.tobytes() == b.tobytes()


class TestGradients:
    """Gradientes analíticos contra diferenças finitas em float64, 20 sementes por operação."""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_conv2d(self, seed):
        """conv2d com stride e padding."""
        # Arrange
        rng = np.random.default_rng(seed)
        x = _param(rng, (2, 2, 5, 5), "x")
        k = _param(rng, (3, 2, 3, 3), "k")
        b = _param(rng, (3,), "b")
        stride, padding = (1, 1) if seed % 2 == 0 else (2, 0)
        projection = _random_projection(conv2d(x, k, b, stride, padding), rng)

        # Act
        result = check_parameter_gradients(
            lambda: tensor_sum(mul(conv2d(x, k, b, stride, padding), projection)), {"x": x, "k": k, "b": b}
        )

        # Assert
        assert result.passes(TOLERANCE), result

    @pytest.mark.parametrize("seed", SEEDS)
    def test_maxpool2d(self, seed):
        """maxpool2d com entradas contínuas (sem empates)."""
        # Arrange
        rng = np.random.default_rng(seed)
        x = _param(rng, (2, 2, 6, 6), "x")
        projection = _random_projection(maxpool2d(x, 2), rng)

        # Act
        result = check_parameter_gradients(lambda: tensor_sum(mul(maxpool2d(x, 2), projection)), {"x": x},
                                           kink_threshold=TOLERANCE)

        # Assert
        assert result.passes(TOLERANCE), result
        assert result.checked > result.skipped

    @pytest.mark.parametrize("seed", SEEDS)
    def test_relu(self, seed):
        """relu longe de zero."""
        # Arrange
        rng = np.random.default_rng(seed)
        x = _param(rng, (3, 7), "x")
        projection = _random_projection(x, rng)

        # Act
        result = check_parameter_gradients(lambda: tensor_sum(mul(relu(x), projection)), {"x": x},
                                           kink_threshold=TOLERANCE)

        # Assert
        assert result.passes(TOLERANCE), result

    @pytest.mark.parametrize("seed", SEEDS)
    def test_linear(self, seed):
        # Arrange
        rng = np.random.default_rng(seed)
        x = _param(rng, (4, 5), "x")
        w = _param(rng, (5, 3), "w")
        b = _param(rng, (3,), "b")
        projection = _random_projection(linear(x, w, b), rng)

        # Act
        result = check_parameter_gradients(lambda: tensor_sum(mul(linear(x, w, b), projection)),
                                           {"x": x, "w": w, "b": b})

        # Assert
        assert result.passes(TOLERANCE), result

    @pytest.mark.parametrize("seed", SEEDS)
    def test_softmax(self, seed):
        # Arrange
        rng = np.random.default_rng(seed)
        x = _param(rng, (3, 11), "x")
        projection = _random_projection(x, rng)

        # Act
        result = check_parameter_gradients(lambda: tensor_sum(mul(softmax(x), projection)), {"x": x})

        # Assert
        assert result.passes(TOLERANCE), result

    @pytest.mark.parametrize("seed", SEEDS)
    def test_cross_entropy(self, seed):
        # Arrange
        rng = np.random.default_rng(seed)
        x = _param(rng, (5, 11), "x")
        targets = rng.integers(0, 11, size=5)

        # Act
        result = check_parameter_gradients(lambda: cross_entropy(x, targets), {"x": x})

        # Assert
        assert result.passes(TOLERANCE), result

    @pytest.mark.parametrize("seed", SEEDS)
    def test_global_avg_pool_e_weighted_sum(self, seed):
        """Pooling médio global seguido da combinação ponderada de três perdas."""
        # Arrange
        rng = np.random.default_rng(seed)
        x = _param(rng, (2, 3, 4, 4), "x")
        w = _param(rng, (3, 11), "w")
        b = _param(rng, (11,), "b")
        weights = rng.dirichlet(np.ones(3))

        def loss():
            logits = linear(global_avg_pool2d(x), w, b)
            terms = [cross_entropy(logits, [1, 2]), cross_entropy(logits, [0, 10]), cross_entropy(logits, [5, 5])]
            return weighted_sum(terms, list(weights))

        # Act
        result = check_parameter_gradients(loss, {"x": x, "w": w, "b": b})

        # Assert
        assert result.passes(TOLERANCE), result


if __name__ == '__main__':
    pytest.main([__file__])
