# -*- coding: utf-8 -*-
"""
Experiments Service

Protocolo experimental em escala de bancada: comparação dos três cenários
(holístico, por dígitos, multi-tarefa), grade de ablação dos pesos
(alpha, beta, gamma), varredura de backbones e curvas de validação.

Todas as execuções de um experimento usam o mesmo manifesto de dados
(o hash de conteúdo é registrado nas saídas). Cada execução é treinada em
todas as sementes da sua lista e resumida por média e desvio padrão.

Layout de saída:

    <output_dir>/
        dados/manifest.tsv
        <run>/checkpoint_seed<k>.npz, historico_seed<k>.csv, historico.csv, metricas.csv
        resultados.csv, curvas_validacao.csv, curvas_validacao.svg
        referencia_publicada.csv, relatorio_execucao.json
"""

import logging
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.autodiff import FLOAT32
from ..core.errors import ConfigurationError, ExperimentRunError
from ..core.labels import ClassSet, JerseyLabel
from ..core.losses import (
    ABLATION_GRID, DIGITWISE_WEIGHTS, HOLISTIC_WEIGHTS, MULTITASK_WEIGHTS, LossBreakdown, LossWeights,
    active_heads,
)
from ..core.model import BackboneConfig, ModelCheckpoint, build_network, count_parameters
from ..utils.helpers import format_duration
from ..utils.reports import (
    REFERENCE_RESULTS, emit_curves, render_table, save_execution_report, save_frame_csv, write_reference_results,
)
from .evaluator import MetricsReport, PredictionMode, evaluate_model, mode_for_weights
from .synth_data import (
    DatasetManifest, balanced_counts, dataset_statistics, generate_dataset, imbalanced_counts,
)
from .trainer import TrainConfig, TrainingHistory, TrainingRecord, train


logger = logging.getLogger(__name__)

DATA_DIRNAME = "dados"
RESULTS_FILENAME = "resultados.csv"
HISTORY_FILENAME = "historico.csv"
METRICS_FILENAME = "metricas.csv"
METRIC_NAMES = ("accuracy", "precision", "recall", "f1")
RESULT_COLUMNS = [
    "run", "alpha", "beta", "gamma", "mode", "parameters", "seeds",
    "accuracy_mean", "accuracy_std", "precision_mean", "precision_std",
    "recall_mean", "recall_std", "f1_mean", "f1_std",
]


@dataclass(frozen=True)
class DatasetSpec:
    """Parâmetros repassados ao gerador sintético."""

    classes: ClassSet = field(default_factory=lambda: ClassSet.first(81))
    counts: str = "balanced"
    per_class: int = 10
    min_count: int = 1
    imbalance_ratio: float = 92.0
    null_fraction: Optional[float] = None
    style_seeds: Tuple[int, ...] = tuple(range(30))
    split_ratios: Tuple[float, float, float] = (0.7, 0.12, 0.18)
    master_seed: int = 0
    image_size: Tuple[int, int] = (64, 64)
    occlusion_max: float = 0.0
    blur_max: float = 0.0
    write_images: bool = False

    def __post_init__(self) -> None:
        if self.counts not in ("balanced", "imbalanced"):
            raise ConfigurationError(f"counts deve ser 'balanced' ou 'imbalanced', recebido {self.counts!r}")

    def per_class_counts(self) -> Dict[JerseyLabel, int]:
        if self.counts == "balanced":
            return balanced_counts(self.classes, self.per_class, self.null_fraction)
        return imbalanced_counts(self.classes, self.min_count, self.imbalance_ratio,
                                 self.master_seed, self.null_fraction)

    def build(self) -> DatasetManifest:
        return generate_dataset(
            self.classes, self.per_class_counts(), self.style_seeds, self.split_ratios, self.master_seed,
            image_size=self.image_size, occlusion_max=self.occlusion_max, blur_max=self.blur_max,
        )


@dataclass(frozen=True)
class RunSpec:
    """Uma execução: pesos, backbone, sementes e (opcional) modo de avaliação."""

    name: str
    weights: LossWeights
    seeds: Tuple[int, ...]
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    backbone_name: str = "default"
    mode: Optional[PredictionMode] = None

    @property
    def prediction_mode(self) -> PredictionMode:
        return self.mode if self.mode is not None else mode_for_weights(self.weights)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    dataset: DatasetSpec
    train: TrainConfig
    runs: Tuple[RunSpec, ...]
    output_dir: Path = Path("resultados")

    def __post_init__(self) -> None:
        names = [run.name for run in self.runs]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"Nomes de execução repetidos: {names}")
        for run in self.runs:
            if not run.seeds:
                raise ConfigurationError(f"Execução '{run.name}' sem sementes")
            if run.backbone.input_size != tuple(self.dataset.image_size):
                raise ConfigurationError(
                    f"Execução '{run.name}': entrada do backbone {run.backbone.input_size} "
                    f"difere do tamanho das imagens {tuple(self.dataset.image_size)}"
                )

    def run(self, name: str) -> RunSpec:
        for run in self.runs:
            if run.name == name:
                return run
        raise ConfigurationError(f"Execução desconhecida: {name}")

    def with_seeds(self, seeds: Sequence[int]) -> "ExperimentSpec":
        return replace(self, runs=tuple(replace(run, seeds=tuple(seeds)) for run in self.runs))

    def with_output_dir(self, output_dir: Path) -> "ExperimentSpec":
        return replace(self, output_dir=Path(output_dir))


@dataclass
class SeedResult:
    seed: int
    metrics: MetricsReport
    history: TrainingHistory
    checkpoint: ModelCheckpoint


@dataclass
class RunResult:
    run: RunSpec
    parameters: int
    seeds: List[SeedResult]

    def mean_history(self) -> TrainingHistory:
        """Média das sementes ponto a ponto (todas compartilham as iterações)."""
        frames = [s.history.to_frame() for s in self.seeds]
        mean = pd.concat(frames).groupby("iteration", sort=True).mean().reset_index()
        history = TrainingHistory()
        for row in mean.itertuples(index=False):
            loss = LossBreakdown(
                holistic=float(row.loss_holistic), digit1=float(row.loss_digit1), digit2=float(row.loss_digit2),
                total=float(row.loss_total),
                digitwise=self.run.weights.beta * float(row.loss_digit1) + self.run.weights.gamma * float(row.loss_digit2),
            )
            history.append(TrainingRecord(int(row.iteration), float(row.lr), loss, float(row.val_accuracy)))
        return history


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    std = float(array.std(ddof=1)) if array.size > 1 else 0.0
    return float(array.mean()), std


@dataclass
class ResultsTable:
    """Uma linha por execução: pesos e média±desvio das métricas de teste."""

    rows: List[Dict[str, object]]
    manifest_hash: str = ""

    @classmethod
    def from_results(cls, results: Sequence[RunResult], manifest_hash: str = "") -> "ResultsTable":
        rows = []
        for result in results:
            alpha, beta, gamma = result.run.weights.as_tuple()
            row: Dict[str, object] = {
                "run": result.run.name,
                "alpha": alpha,
                "beta": beta,
                "gamma": gamma,
                "mode": result.run.prediction_mode.value,
                "parameters": result.parameters,
                "seeds": len(result.seeds),
            }
            for metric in METRIC_NAMES:
                values = [s.metrics.as_row(result.run.name)[metric] for s in result.seeds]
                row[f"{metric}_mean"], row[f"{metric}_std"] = _mean_std(values)  # type: ignore[arg-type]
            rows.append(row)
        return cls(rows, manifest_hash)

    def __len__(self) -> int:
        return len(self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=RESULT_COLUMNS)

    def best_row(self, metric: str = "accuracy_mean") -> Dict[str, object]:
        """Linha de maior valor; empates ficam com a primeira."""
        if not self.rows:
            raise ConfigurationError("Tabela de resultados vazia")
        best = self.rows[0]
        for row in self.rows[1:]:
            if float(row[metric]) > float(best[metric]):  # type: ignore[arg-type]
                best = row
        return best

    def save_csv(self, path: Path) -> Path:
        return save_frame_csv(self.to_frame(), path)


def best_row_from_csv(path: Path, metric: str = "accuracy_mean") -> Dict[str, object]:
    """Seleção da melhor linha lida de um CSV já emitido."""
    frame = pd.read_csv(path)
    return frame.iloc[int(frame[metric].to_numpy().argmax())].to_dict()


# ---------------------------------------------------------------------------
# Execução
# ---------------------------------------------------------------------------

def prepare_dataset(spec: ExperimentSpec) -> DatasetManifest:
    """Gera (uma vez) e grava o manifesto compartilhado do experimento."""
    manifest = spec.dataset.build()
    manifest.save(Path(spec.output_dir) / DATA_DIRNAME, write_images=spec.dataset.write_images)
    return manifest


def train_run(spec: ExperimentSpec, run: RunSpec, manifest: DatasetManifest,
              dtype: type = FLOAT32) -> RunResult:
    """
    Treina e avalia (divisão de teste) uma execução em todas as sementes.

    Raises:
        ExperimentRunError: qualquer falha, com o nome da execução
    """
    run_dir = Path(spec.output_dir) / run.name
    mode = run.prediction_mode
    logger.info(
        f"[EXPERIMENTO] Execução '{run.name}': pesos ({run.weights.format()}), "
        f"cabeças ativas {', '.join(active_heads(run.weights))}, modo {mode.value}"
    )
    try:
        seeds: List[SeedResult] = []
        for seed in run.seeds:
            model = build_network(run.backbone, manifest.classes, seed, dtype=dtype)
            cfg = spec.train.with_run(run.weights, seed, mode)
            checkpoint, history = train(model, manifest, cfg)
            metrics = evaluate_model(checkpoint.to_model(), manifest, "test", mode)
            checkpoint.save(run_dir / f"checkpoint_seed{seed}.npz")
            history.save_csv(run_dir / f"historico_seed{seed}.csv")
            seeds.append(SeedResult(seed, metrics, history, checkpoint))
        result = RunResult(run, count_parameters(run.backbone, len(manifest.classes)), seeds)
        result.mean_history().save_csv(run_dir / HISTORY_FILENAME)
        frame = pd.DataFrame([s.metrics.as_row(f"{run.name}/seed{s.seed}") for s in seeds])
        save_frame_csv(frame, run_dir / METRICS_FILENAME)
        return result
    except Exception as e:
        logger.error(f"[EXPERIMENTO] Execução '{run.name}' falhou: {e}")
        raise ExperimentRunError(run.name, e) from e


def run_experiment(spec: ExperimentSpec, kind: str = "experiment", manifest: Optional[DatasetManifest] = None,
                   dtype: type = FLOAT32) -> Tuple[ResultsTable, List[RunResult]]:
    """Executa todas as execuções sobre o mesmo manifesto e grava os artefatos."""
    start = datetime.now()
    output_dir = Path(spec.output_dir)
    if manifest is None:
        manifest = prepare_dataset(spec)
    manifest_hash = manifest.content_hash()
    logger.info(f"[EXPERIMENTO] '{spec.name}' ({kind}): {len(spec.runs)} execuções, manifesto {manifest_hash[:12]}")

    results = [train_run(spec, run, manifest, dtype) for run in spec.runs]
    table = ResultsTable.from_results(results, manifest_hash)
    table.save_csv(output_dir / RESULTS_FILENAME)
    emit_curves([r.mean_history() for r in results], [r.run.name for r in results], output_dir)
    write_reference_results(output_dir, kind if kind in REFERENCE_RESULTS else None)

    end = datetime.now()
    stats = dataset_statistics(manifest)
    save_execution_report({
        "experimento": spec.name,
        "tipo": kind,
        "manifesto_sha256": manifest_hash,
        "dados": {
            "registros_por_divisao": stats.split_counts,
            "jogos_por_divisao": stats.split_games,
            "razao_desbalanceamento": stats.imbalance_ratio,
            "fracao_nula": stats.null_fraction,
        },
        "execucoes": [
            {
                "nome": r.run.name,
                "pesos": list(r.run.weights.as_tuple()),
                "modo": r.run.prediction_mode.value,
                "parametros": r.parameters,
                "sementes": [s.seed for s in r.seeds],
                "melhor_iteracao": [s.checkpoint.iteration for s in r.seeds],
            }
            for r in results
        ],
        "melhor_execucao": table.best_row()["run"],
        "duracao": format_duration(start, end),
    }, output_dir)
    logger.info(f"[EXPERIMENTO] Resultados:\n{render_table(table.to_frame())}")
    return table, results


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigurationError(message)


def validate_comparison(spec: ExperimentSpec) -> None:
    """Exatamente as execuções holística, por dígitos e multi-tarefa, cada uma no seu modo."""
    expected = (HOLISTIC_WEIGHTS, DIGITWISE_WEIGHTS, MULTITASK_WEIGHTS)
    _require(len(spec.runs) == 3, f"A comparação exige exatamente 3 execuções, recebido {len(spec.runs)}")
    for run, weights in zip(spec.runs, expected):
        _require(run.weights.close_to(weights),
                 f"Execução '{run.name}' deveria usar pesos ({weights.format()}), recebido ({run.weights.format()})")
        _require(run.mode is None or run.mode is mode_for_weights(weights),
                 f"Execução '{run.name}' deve ser avaliada no modo {mode_for_weights(weights).value}")


def validate_ablation(spec: ExperimentSpec) -> None:
    _require(len(spec.runs) == len(ABLATION_GRID),
             f"A ablação exige {len(ABLATION_GRID)} execuções, recebido {len(spec.runs)}")
    for position, (run, weights) in enumerate(zip(spec.runs, ABLATION_GRID), start=1):
        _require(run.weights.close_to(weights),
                 f"Linha {position} da ablação deveria ser ({weights.format()}), recebido ({run.weights.format()})")


def validate_backbone_sweep(spec: ExperimentSpec, n_classes: int) -> None:
    _require(len(spec.runs) >= 2, "A varredura de backbones exige ao menos 2 execuções")
    for run in spec.runs:
        _require(run.weights.close_to(MULTITASK_WEIGHTS),
                 f"Execução '{run.name}' deve usar os pesos fixos ({MULTITASK_WEIGHTS.format()})")
    counts = [count_parameters(run.backbone, n_classes) for run in spec.runs]
    _require(len(set(counts)) == len(counts), f"Backbones com capacidades iguais: {counts}")


def run_comparison(spec: ExperimentSpec, dtype: type = FLOAT32) -> ResultsTable:
    """Tabela de 3 linhas: holístico, por dígitos e multi-tarefa."""
    validate_comparison(spec)
    table, _ = run_experiment(spec, "comparison", dtype=dtype)
    return table


def run_ablation(spec: ExperimentSpec, dtype: type = FLOAT32) -> ResultsTable:
    """Tabela de 8 linhas na ordem da grade; a melhor linha é registrada no log."""
    validate_ablation(spec)
    table, _ = run_experiment(spec, "ablation", dtype=dtype)
    best = table.best_row()
    logger.info(
        f"[EXPERIMENTO] Melhor linha da ablação: {best['run']} "
        f"({best['alpha']}, {best['beta']}, {best['gamma']}) acurácia {float(best['accuracy_mean']):.4f}"  # type: ignore[arg-type]
    )
    return table


def run_backbone_sweep(spec: ExperimentSpec, dtype: type = FLOAT32) -> ResultsTable:
    """Uma linha por backbone, com contagem de parâmetros."""
    validate_backbone_sweep(spec, len(spec.dataset.classes))
    table, _ = run_experiment(spec, "backbones", dtype=dtype)
    return table


def run_single(spec: ExperimentSpec, run_name: str, dtype: type = FLOAT32,
               manifest: Optional[DatasetManifest] = None) -> RunResult:
    """Treina apenas uma execução do experimento (subcomando `train`)."""
    run = spec.run(run_name)
    if manifest is None:
        manifest = prepare_dataset(spec)
    return train_run(spec, run, manifest, dtype)


def load_histories(directories: Sequence[Path]) -> Tuple[List[TrainingHistory], List[str]]:
    """Lê `historico.csv` de cada diretório de execução."""
    histories = []
    names = []
    for directory in directories:
        path = Path(directory) / HISTORY_FILENAME
        if not path.exists():
            raise ConfigurationError(f"Histórico não encontrado: {path}")
        histories.append(TrainingHistory.load_csv(path))
        names.append(Path(directory).name)
    return histories, names
