# -*- coding: utf-8 -*-
"""
Hierarquia de exceções do jersey_mtl.

Todas as falhas previstas do sistema derivam de JerseyMTLError, de modo que
a linha de comando consiga distinguir erros de validação (código de saída 1)
de falhas em tempo de execução (código de saída 2).
"""

from typing import Optional


class JerseyMTLError(Exception):
    """Exceção base do sistema."""
    pass


class InvalidShapeError(JerseyMTLError, ValueError):
    """Formato de tensor incompatível com a operação."""
    pass


class InvalidArgumentError(JerseyMTLError, ValueError):
    """Argumento escalar inválido (ex.: k <= 0, perda não escalar)."""
    pass


class GraphStateError(JerseyMTLError, RuntimeError):
    """Registro de computação em estado inválido (ex.: backward duplo)."""
    pass


class UnknownClassError(JerseyMTLError, ValueError):
    """Rótulo fora do conjunto de classes."""

    def __init__(self, label: object):
        self.label = label
        super().__init__(f"Rótulo desconhecido no conjunto de classes: {label}")


class WeightSimplexError(JerseyMTLError, ValueError):
    """Pesos (alpha, beta, gamma) fora do simplex."""

    def __init__(self, message: str, total: float):
        self.total = total
        super().__init__(message)


class ConfigurationError(JerseyMTLError):
    """Configuração inválida de backbone, treino, dataset ou experimento."""
    pass


class NonFiniteGradientError(JerseyMTLError, RuntimeError):
    """Gradiente com NaN/Inf encontrado durante o passo do otimizador."""

    def __init__(self, parameter: str, detail: str = ""):
        self.parameter = parameter
        message = f"Gradiente não finito no parâmetro '{parameter}'"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class MetricsInputError(JerseyMTLError, ValueError):
    """Entrada inválida para matriz de confusão, métricas ou curvas."""
    pass


class SpecParseError(JerseyMTLError):
    """Erro de leitura ou validação do arquivo de especificação de experimento."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"linha {line}: {message}"
        super().__init__(message)


class ExperimentRunError(RuntimeError):
    """Falha de treino/avaliação dentro de uma execução nomeada."""

    def __init__(self, run_name: str, cause: BaseException):
        self.run_name = run_name
        self.cause = cause
        super().__init__(f"Execução '{run_name}' falhou: {cause}")
