# -*- coding: utf-8 -*-
"""
Labels Module

Rótulos de número de camisa e o mapeamento entre a representação holística
(uma classe por número) e a representação por dígitos (duas classes de 11
valores: dígitos 0-9 mais "ausente").

Convenção posicional: primeiro dígito = dezena (ausente para números < 10),
segundo dígito = unidade. O rótulo nulo ("número não visível") decompõe em
(ausente, ausente).
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError, UnknownClassError


NULL_TOKEN = "null"
DIGIT_CLASSES = 11
ABSENT = 10  # índice da classe "ausente" nas cabeças de dígito
MAX_NUMBER = 99
MAX_CLASSES = MAX_NUMBER + 2  # nulo + 0..99

LabelLike = Union["JerseyLabel", int, str, None]


@dataclass(frozen=True)
class JerseyLabel:
    """Número de camisa em [0, 99] ou nulo (value=None)."""

    value: Optional[int] = None

    def __post_init__(self) -> None:
        if self.value is None:
            return
        if isinstance(self.value, bool) or not isinstance(self.value, (int, np.integer)):
            raise InvalidArgumentError(f"Número de camisa deve ser inteiro, recebido {self.value!r}")
        if not 0 <= int(self.value) <= MAX_NUMBER:
            raise InvalidArgumentError(f"Número de camisa fora de [0, {MAX_NUMBER}]: {self.value}")
        object.__setattr__(self, "value", int(self.value))

    @property
    def is_null(self) -> bool:
        return self.value is None

    @property
    def token(self) -> str:
        return NULL_TOKEN if self.value is None else str(self.value)

    @classmethod
    def parse(cls, token: str) -> "JerseyLabel":
        text = token.strip().lower()
        if text == NULL_TOKEN:
            return NULL
        try:
            return cls(int(text))
        except ValueError as e:
            raise InvalidArgumentError(f"Token de rótulo inválido: {token!r}") from e

    def __str__(self) -> str:
        return self.token


NULL = JerseyLabel(None)


def as_label(value: LabelLike) -> JerseyLabel:
    """Converte int/str/None/JerseyLabel em JerseyLabel."""
    if isinstance(value, JerseyLabel):
        return value
    if value is None:
        return NULL
    if isinstance(value, str):
        return JerseyLabel.parse(value)
    return JerseyLabel(value)


def decompose_digits(label: LabelLike) -> Tuple[int, int]:
    """
    Decompõe o rótulo em (primeiro dígito, segundo dígito).

    Examples:
        72 -> (7, 2); 2 -> (ABSENT, 2); nulo -> (ABSENT, ABSENT)
    """
    label = as_label(label)
    if label.value is None:
        return ABSENT, ABSENT
    if label.value < 10:
        return ABSENT, label.value
    return label.value // 10, label.value % 10


def compose_digits(d1: int, d2: int) -> JerseyLabel:
    """
    Inverso de decompose_digits na sua imagem; total sobre pares de dígitos.

    O par (dígito, ausente) não vem de nenhum rótulo e colapsa para nulo.
    """
    for digit in (d1, d2):
        if not 0 <= int(digit) <= ABSENT:
            raise InvalidArgumentError(f"Classe de dígito fora de [0, {ABSENT}]: {digit}")
    d1, d2 = int(d1), int(d2)
    if d2 == ABSENT:
        return NULL
    if d1 == ABSENT:
        return JerseyLabel(d2)
    return JerseyLabel(10 * d1 + d2)


class ClassSet:
    """
    Conjunto ordenado de rótulos; o índice 0 é sempre o nulo.

    A ordem é estável e é persistida junto com os checkpoints
    (um rótulo por linha, linha 0 = "null").
    """

    def __init__(self, labels: Iterable[LabelLike]):
        parsed = tuple(as_label(label) for label in labels)
        if len(parsed) < 2:
            raise ConfigurationError(f"Conjunto de classes exige ao menos 2 rótulos, recebido {len(parsed)}")
        if len(parsed) > MAX_CLASSES:
            raise ConfigurationError(f"Conjunto de classes excede {MAX_CLASSES} rótulos")
        if parsed[0] != NULL:
            raise ConfigurationError("O rótulo nulo deve ocupar o índice 0 do conjunto de classes")
        index: Dict[JerseyLabel, int] = {}
        for position, label in enumerate(parsed):
            if label in index:
                raise ConfigurationError(f"Rótulo duplicado no conjunto de classes: {label}")
            index[label] = position
        self._labels = parsed
        self._index = index

    @classmethod
    def from_numbers(cls, numbers: Iterable[int]) -> "ClassSet":
        return cls([NULL, *numbers])

    @classmethod
    def full(cls) -> "ClassSet":
        """Nulo mais todos os números de 0 a 99."""
        return cls.from_numbers(range(MAX_NUMBER + 1))

    @classmethod
    def first(cls, size: int) -> "ClassSet":
        """Nulo mais os números 1, 2, ..., size-1 (size=81 reproduz as 81 classes)."""
        if not 2 <= size <= MAX_CLASSES:
            raise ConfigurationError(f"Tamanho de conjunto de classes inválido: {size}")
        numbers = list(range(1, size))
        if size == MAX_CLASSES:
            numbers = list(range(0, MAX_NUMBER + 1))
        return cls.from_numbers(numbers)

    @property
    def labels(self) -> Tuple[JerseyLabel, ...]:
        return self._labels

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[JerseyLabel]:
        return iter(self._labels)

    def __getitem__(self, index: int) -> JerseyLabel:
        return self._labels[index]

    def __contains__(self, label: object) -> bool:
        try:
            return as_label(label) in self._index  # type: ignore[arg-type]
        except InvalidArgumentError:
            return False

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ClassSet) and self._labels == other._labels

    def __hash__(self) -> int:
        return hash(self._labels)

    def __repr__(self) -> str:
        return f"ClassSet(size={len(self)})"

    def index(self, label: LabelLike) -> int:
        try:
            key = as_label(label)
        except InvalidArgumentError as e:
            raise UnknownClassError(label) from e
        if key not in self._index:
            raise UnknownClassError(key)
        return self._index[key]

    def to_lines(self) -> List[str]:
        return [label.token for label in self._labels]

    @classmethod
    def from_lines(cls, lines: Sequence[str]) -> "ClassSet":
        tokens = [line.strip() for line in lines if line.strip()]
        if not tokens or tokens[0].lower() != NULL_TOKEN:
            raise ConfigurationError("Arquivo de classes deve começar com 'null'")
        return cls(JerseyLabel.parse(token) for token in tokens)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ClassSet":
        return cls.from_lines(Path(path).read_text(encoding="utf-8").splitlines())


def holistic_index(label: LabelLike, classes: ClassSet) -> int:
    """Índice estável do rótulo na ordem do ClassSet."""
    return classes.index(label)


@dataclass(frozen=True)
class TargetTriple:
    """
    Vetores one-hot (y, y1, y2) da verdade: holístico sobre o ClassSet e
    os dois dígitos sobre 11 classes.
    """

    y: np.ndarray
    y1: np.ndarray
    y2: np.ndarray

    @property
    def indices(self) -> Tuple[int, int, int]:
        return int(self.y.argmax()), int(self.y1.argmax()), int(self.y2.argmax())


def _one_hot(index: int, size: int) -> np.ndarray:
    vector = np.zeros(size, dtype=np.float64)
    vector[index] = 1.0
    return vector


def encode_targets(label: LabelLike, classes: ClassSet) -> TargetTriple:
    """
    Codifica o rótulo como (y, y1, y2).

    Raises:
        UnknownClassError: se o rótulo não pertencer ao ClassSet
    """
    label = as_label(label)
    index = classes.index(label)
    d1, d2 = decompose_digits(label)
    return TargetTriple(_one_hot(index, len(classes)), _one_hot(d1, DIGIT_CLASSES), _one_hot(d2, DIGIT_CLASSES))


def decode_targets(targets: TargetTriple, classes: ClassSet) -> JerseyLabel:
    """Rótulo representado pelo vetor holístico, conferido contra os dígitos."""
    label = classes[int(targets.y.argmax())]
    from_digits = compose_digits(int(targets.y1.argmax()), int(targets.y2.argmax()))
    if from_digits != label:
        raise InvalidArgumentError(f"Alvos inconsistentes: holístico {label}, dígitos {from_digits}")
    return label


def target_indices(targets: Sequence[TargetTriple]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Índices (holístico, dígito 1, dígito 2) de um lote de alvos."""
    triples = np.array([t.indices for t in targets], dtype=np.int64).reshape(-1, 3)
    return triples[:, 0], triples[:, 1], triples[:, 2]
