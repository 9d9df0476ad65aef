# -*- coding: utf-8 -*-
"""
Autodiff Module

Diferenciação automática em modo reverso sobre tensores densos (numpy),
com exatamente as operações de camada que a rede de três cabeças utiliza.

Funcionalidades principais:
- Tensor com rastreamento de gradiente
- Registro de computação (ComputationRecord) como gerenciador de contexto
- conv2d, maxpool2d, relu, linear, softmax, entropia cruzada fundida
- backward com acumulação aditiva de gradientes

Uso típico:

    with ComputationRecord() as record:
        loss = cross_entropy(linear(x, w, b), targets)
    record.backward(loss)

Operações executadas fora de um registro ativo não são gravadas (modo
inferência). Cada thread/contexto tem seu próprio registro ativo.
"""

import contextvars
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import GraphStateError, InvalidArgumentError, InvalidShapeError


# Precisões suportadas
FLOAT64 = np.float64  # verificação de gradientes e oráculos
FLOAT32 = np.float32  # treino

ArrayLike = Union[np.ndarray, Sequence[float], float]


class Tensor:
    """
    Array n-dimensional com gradiente opcional.

    O formato é o do array numpy subjacente; `grad`, quando presente, tem o
    mesmo formato de `data`.
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data: ArrayLike, requires_grad: bool = False,
                 dtype: Optional[type] = None, name: Optional[str] = None):
        array = np.asarray(data, dtype=dtype)
        if array.dtype.kind != "f":
            array = array.astype(FLOAT64)
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise InvalidArgumentError(f"item() exige tensor escalar, formato {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False, name=self.name)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"


BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


@dataclass
class _Node:
    """Operação gravada: entradas, saída e a função que propaga o gradiente."""

    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: Optional[BackwardFn]


_ACTIVE_RECORD: contextvars.ContextVar[Optional["ComputationRecord"]] = contextvars.ContextVar(
    "jersey_mtl_active_record", default=None
)


class ComputationRecord:
    """
    Lista ordenada das operações executadas enquanto o registro está ativo.

    A ordem de inserção é topológica por construção: as entradas de cada
    operação foram produzidas antes dela. Um registro aceita um único
    backward.
    """

    def __init__(self) -> None:
        self.nodes: List[_Node] = []
        self.consumed = False
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "ComputationRecord":
        if self.consumed:
            raise GraphStateError("Registro já consumido por backward; crie um novo registro")
        self._token = _ACTIVE_RECORD.set(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        if self._token is not None:
            _ACTIVE_RECORD.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def ops(self) -> List[str]:
        return [node.op for node in self.nodes]

    def backward(self, loss: Tensor) -> None:
        backward(self, loss)


def _record(op: str, inputs: Tuple[Tensor, ...], output: Tensor, fn: BackwardFn) -> Tensor:
    """Grava a operação no registro ativo quando alguma entrada exige gradiente."""
    record = _ACTIVE_RECORD.get()
    if record is None or not any(t.requires_grad for t in inputs):
        return output
    output.requires_grad = True
    record.nodes.append(_Node(op, inputs, output, fn))
    return output


def backward(record: ComputationRecord, loss: Tensor) -> None:
    """
    Propaga d(loss)/d(param) para todos os tensores folha com requires_grad.

    Gradientes são somados em `tensor.grad` (acumulação aditiva entre usos
    do mesmo tensor e entre chamadas em registros distintos).

    Raises:
        InvalidArgumentError: se a perda não for escalar ou não pertencer ao registro
        GraphStateError: se o registro já tiver sido consumido
    """
    if record.consumed:
        raise GraphStateError("backward já executado neste registro")
    if loss.size != 1:
        raise InvalidArgumentError(f"backward exige perda escalar, recebido formato {loss.shape}")
    if not record.nodes or not any(node.output is loss for node in record.nodes):
        raise InvalidArgumentError("A perda não foi produzida por este registro")

    grads = {id(loss): np.ones_like(loss.data)}
    produced = {id(node.output) for node in record.nodes}
    leaves = {}

    for node in reversed(record.nodes):
        upstream = grads.pop(id(node.output), None)
        if upstream is None or node.backward is None:
            continue
        input_grads = node.backward(upstream)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad
            if key not in produced:
                leaves[key] = tensor

    for key, tensor in leaves.items():
        grad = grads.get(key)
        if grad is None:
            continue
        grad = np.asarray(grad, dtype=tensor.dtype).reshape(tensor.shape)
        tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad

    record.consumed = True
    # Libera os valores salvos para o backward
    for node in record.nodes:
        node.backward = None


def _result_dtype(*tensors: Tensor) -> np.dtype:
    return np.result_type(*[t.data for t in tensors])


# =============================================================================
# Operações de camada
# =============================================================================

def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(x_pad: np.ndarray, kh: int, kw: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    """Janelas deslizantes como vista (N, C, kh, kw, H', W') sem cópia."""
    s_n, s_c, s_h, s_w = x_pad.strides
    n, c = x_pad.shape[:2]
    return np.lib.stride_tricks.as_strided(
        x_pad,
        shape=(n, c, kh, kw, out_h, out_w),
        strides=(s_n, s_c, s_h, s_w, stride * s_h, stride * s_w),
        writeable=False,
    )


def conv2d(input: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    Correlação 2D com zero-padding: [N,C,H,W] * [F,C,kh,kw] + bias[F] -> [N,F,H',W'].

    H' = floor((H + 2*padding - kh)/stride) + 1, idem para W'.
    """
    if input.ndim != 4 or kernel.ndim != 4:
        raise InvalidShapeError(f"conv2d exige entrada e kernel 4D, recebido {input.shape} e {kernel.shape}")
    n, c, h, w = input.shape
    f, kc, kh, kw = kernel.shape
    if kc != c:
        raise InvalidShapeError(f"Canais incompatíveis: entrada {c}, kernel {kc}")
    if bias.shape != (f,):
        raise InvalidShapeError(f"Bias deve ter formato ({f},), recebido {bias.shape}")
    if stride < 1 or padding < 0:
        raise InvalidArgumentError(f"stride >= 1 e padding >= 0 exigidos (stride={stride}, padding={padding})")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise InvalidShapeError(f"Kernel {kh}x{kw} maior que a entrada {h}x{w} com padding {padding}")

    out_h = conv_output_size(h, kh, stride, padding)
    out_w = conv_output_size(w, kw, stride, padding)
    dtype = _result_dtype(input, kernel, bias)

    x = input.data.astype(dtype, copy=False)
    if padding > 0:
        x_pad = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        x_pad = np.ascontiguousarray(x)
    cols = _im2col(x_pad, kh, kw, stride, out_h, out_w)

    # (N, H', W', F) -> (N, F, H', W')
    out = np.tensordot(cols, kernel.data.astype(dtype, copy=False), axes=([1, 2, 3], [1, 2, 3]))
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    out += bias.data.astype(dtype, copy=False).reshape(1, f, 1, 1)

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        grad_kernel = np.tensordot(grad, cols, axes=([0, 2, 3], [0, 4, 5]))
        grad_bias = grad.sum(axis=(0, 2, 3))
        grad_input = None
        if input.requires_grad:
            # (C, kh, kw, N, H', W')
            dcols = np.tensordot(kernel.data.astype(dtype, copy=False), grad, axes=([0], [1]))
            grad_pad = np.zeros_like(x_pad)
            for i in range(kh):
                for j in range(kw):
                    grad_pad[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                        dcols[:, i, j].transpose(1, 0, 2, 3)
            grad_input = grad_pad[:, :, padding:padding + h, padding:padding + w]
        return grad_input, grad_kernel, grad_bias

    return _record("conv2d", (input, kernel, bias), Tensor(out), _backward)


def maxpool2d(input: Tensor, k: int, stride: Optional[int] = None) -> Tensor:
    """
    Max pooling sem padding. O backward envia o gradiente apenas para a
    posição do máximo; empates vão para o menor índice plano da janela.
    """
    if k <= 0:
        raise InvalidArgumentError(f"Tamanho de janela inválido: k={k}")
    stride = k if stride is None else stride
    if stride <= 0:
        raise InvalidArgumentError(f"Stride inválido: {stride}")
    if input.ndim != 4:
        raise InvalidShapeError(f"maxpool2d exige entrada 4D, recebido {input.shape}")
    n, c, h, w = input.shape
    if k > h or k > w:
        raise InvalidShapeError(f"Janela {k} maior que a entrada {h}x{w}")

    out_h = (h - k) // stride + 1
    out_w = (w - k) // stride + 1
    x = np.ascontiguousarray(input.data)
    s_n, s_c, s_h, s_w = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, out_h, out_w, k, k),
        strides=(s_n, s_c, stride * s_h, stride * s_w, s_h, s_w),
        writeable=False,
    ).reshape(n, c, out_h, out_w, k * k)
    # argmax devolve a primeira ocorrência: desempate pelo menor índice plano
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        grad_input = np.zeros_like(x)
        ni, ci, hi, wi = np.indices((n, c, out_h, out_w))
        rows = hi * stride + argmax // k
        cols = wi * stride + argmax % k
        np.add.at(grad_input, (ni, ci, rows, cols), grad)
        return (grad_input,)

    return _record("maxpool2d", (input,), Tensor(np.ascontiguousarray(out)), _backward)


def relu(input: Tensor) -> Tensor:
    """max(x, 0) elemento a elemento; gradiente nulo onde x <= 0."""
    x = input.data
    mask = x > 0
    out = np.where(mask, x, np.zeros((), dtype=x.dtype))

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (grad * mask,)

    return _record("relu", (input,), Tensor(out), _backward)


def linear(input: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """input[N,D] @ weight[D,K] + bias[K]."""
    if input.ndim != 2 or weight.ndim != 2:
        raise InvalidShapeError(f"linear exige entrada e peso 2D, recebido {input.shape} e {weight.shape}")
    if input.shape[1] != weight.shape[0]:
        raise InvalidShapeError(f"Dimensões internas incompatíveis: {input.shape} x {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise InvalidShapeError(f"Bias deve ter formato ({weight.shape[1]},), recebido {bias.shape}")
    dtype = _result_dtype(input, weight, bias)
    x = input.data.astype(dtype, copy=False)
    wt = weight.data.astype(dtype, copy=False)
    out = x @ wt + bias.data.astype(dtype, copy=False)

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        grad_input = grad @ wt.T if input.requires_grad else None
        return grad_input, x.T @ grad, grad.sum(axis=0)

    return _record("linear", (input, weight, bias), Tensor(out), _backward)


def _log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: Tensor) -> Tensor:
    """Softmax por linha com subtração do máximo."""
    if logits.ndim != 2 or logits.shape[1] < 1:
        raise InvalidShapeError(f"softmax exige logits [N,K] com K >= 1, recebido {logits.shape}")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        inner = (grad * probs).sum(axis=1, keepdims=True)
        return (probs * (grad - inner),)

    return _record("softmax", (logits,), Tensor(probs), _backward)


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """
    Média no lote de -log softmax(logits)[n, target_n], calculada por
    log-softmax fundido (sem log de zero).
    """
    if logits.ndim != 2:
        raise InvalidShapeError(f"cross_entropy exige logits [N,K], recebido {logits.shape}")
    idx = np.asarray(targets, dtype=np.int64)
    n, k = logits.shape
    if idx.shape != (n,):
        raise InvalidShapeError(f"Esperados {n} alvos, recebido formato {idx.shape}")
    if n == 0 or idx.min() < 0 or idx.max() >= k:
        raise InvalidArgumentError(f"Índices de alvo fora de [0, {k})")
    log_probs = _log_softmax(logits.data)
    rows = np.arange(n)
    loss = -log_probs[rows, idx].mean()

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        delta = np.exp(log_probs)
        delta[rows, idx] -= 1.0
        return (delta * (grad / n),)

    return _record("cross_entropy", (logits,), Tensor(np.asarray(loss, dtype=logits.dtype)), _backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Soma elemento a elemento de tensores de mesmo formato (atalho residual)."""
    if a.shape != b.shape:
        raise InvalidShapeError(f"add exige formatos iguais: {a.shape} e {b.shape}")

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return grad, grad

    return _record("add", (a, b), Tensor(a.data + b.data), _backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Produto elemento a elemento de tensores de mesmo formato."""
    if a.shape != b.shape:
        raise InvalidShapeError(f"mul exige formatos iguais: {a.shape} e {b.shape}")
    x, y = a.data, b.data

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return grad * y, grad * x

    return _record("mul", (a, b), Tensor(x * y), _backward)


def scale(input: Tensor, factor: float) -> Tensor:
    """Multiplicação por escalar constante."""
    out = input.data * np.asarray(factor, dtype=input.dtype)

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (grad * np.asarray(factor, dtype=grad.dtype),)

    return _record("scale", (input,), Tensor(out), _backward)


def tensor_sum(input: Tensor) -> Tensor:
    """Soma de todos os elementos (escalar)."""
    shape = input.shape

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (np.broadcast_to(grad, shape).copy(),)

    return _record("sum", (input,), Tensor(np.asarray(input.data.sum(), dtype=input.dtype)), _backward)


def global_avg_pool2d(input: Tensor) -> Tensor:
    """Média espacial: [N,C,H,W] -> [N,C]."""
    if input.ndim != 4:
        raise InvalidShapeError(f"global_avg_pool2d exige entrada 4D, recebido {input.shape}")
    n, c, h, w = input.shape
    area = h * w

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (np.broadcast_to((grad / area)[:, :, None, None], (n, c, h, w)).copy(),)

    return _record("global_avg_pool2d", (input,), Tensor(input.data.mean(axis=(2, 3))), _backward)


def weighted_sum(terms: Sequence[Tensor], weights: Sequence[float]) -> Tensor:
    """
    Combinação w0*t0 + (w1*t1 + w2*t2 + ...) de escalares.

    O agrupamento segue o da perda total: o primeiro termo mais a soma dos
    demais, de modo que pesos nulos reduzem o total exatamente.
    """
    if len(terms) != len(weights) or not terms:
        raise InvalidArgumentError("weighted_sum exige termos e pesos de mesmo tamanho")
    for term in terms:
        if term.size != 1:
            raise InvalidArgumentError(f"weighted_sum exige termos escalares, recebido {term.shape}")
    values = [float(t.item()) for t in terms]
    rest = 0.0
    for w, v in zip(weights[1:], values[1:]):
        rest += w * v
    total = weights[0] * values[0] + rest
    dtype = _result_dtype(*terms)

    def _backward(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return tuple(np.asarray(grad * w, dtype=dtype) for w in weights)

    return _record("weighted_sum", tuple(terms), Tensor(np.asarray(total, dtype=dtype)), _backward)
