# -*- coding: utf-8 -*-
"""
Reports Module

Artefatos tabulares e gráficos dos experimentos: CSVs determinísticos
(pandas), tabelas de console (tabulate), curvas de validação em SVG
(matplotlib) e o relatório de execução em JSON.
"""

import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from tabulate import tabulate  # noqa: E402

from ..core.errors import MetricsInputError  # noqa: E402


logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.6f"
CURVES_STEM = "curvas_validacao"
REFERENCE_FILENAME = "referencia_publicada.csv"
REPORT_FILENAME = "relatorio_execucao.json"

# Resultados publicados em escala completa (porcentagens); apenas referência,
# nunca comparados automaticamente com os resultados de bancada.
REFERENCE_RESULTS: Dict[str, List[Dict[str, Any]]] = {
    "comparison": [
        {"method": "Holistic", "weights": (1.0, 0.0, 0.0), "accuracy": 87.6, "precision": 90.9, "recall": 87.7, "f1": 88.7},
        {"method": "DigitWise", "weights": (0.0, 0.5, 0.5), "accuracy": 88.1, "precision": 92.5, "recall": 88.1, "f1": 89.9},
        {"method": "MultiTask", "weights": (0.3, 0.35, 0.35), "accuracy": 89.6, "precision": 93.6, "recall": 89.6, "f1": 91.2},
    ],
    "ablation": [
        {"method": "1/0/0", "weights": (1.0, 0.0, 0.0), "accuracy": 87.6, "precision": 90.9, "recall": 87.7, "f1": 88.7},
        {"method": "0.8/0.1/0.1", "weights": (0.8, 0.1, 0.1), "accuracy": 87.8, "precision": 92.0, "recall": 87.3, "f1": 89.0},
        {"method": "0.5/0.25/0.25", "weights": (0.5, 0.25, 0.25), "accuracy": 89.1, "precision": 92.3, "recall": 89.1, "f1": 90.2},
        {"method": "1/3 cada", "weights": (1 / 3, 1 / 3, 1 / 3), "accuracy": 88.4, "precision": 92.7, "recall": 88.4, "f1": 90.0},
        {"method": "0.3/0.35/0.35", "weights": (0.3, 0.35, 0.35), "accuracy": 89.6, "precision": 93.6, "recall": 89.6, "f1": 91.2},
        {"method": "0.2/0.4/0.4", "weights": (0.2, 0.4, 0.4), "accuracy": 89.6, "precision": 92.8, "recall": 89.6, "f1": 90.9},
        {"method": "0.1/0.45/0.45", "weights": (0.1, 0.45, 0.45), "accuracy": 89.0, "precision": 92.9, "recall": 89.07, "f1": 90.6},
        {"method": "0/0.5/0.5", "weights": (0.0, 0.5, 0.5), "accuracy": 88.1, "precision": 92.5, "recall": 88.1, "f1": 89.9},
    ],
    "backbones": [
        {"method": "Mobilenetv2", "weights": (0.3, 0.35, 0.35), "accuracy": 87.9, "precision": 91.8, "recall": 87.9, "f1": 89.3},
        {"method": "Resnet18", "weights": (0.3, 0.35, 0.35), "accuracy": 89.1, "precision": 92.5, "recall": 89.1, "f1": 90.3},
        {"method": "Resnet34", "weights": (0.3, 0.35, 0.35), "accuracy": 89.6, "precision": 93.6, "recall": 89.6, "f1": 91.2},
    ],
}


def save_frame_csv(frame: pd.DataFrame, path: Union[str, Path], float_format: str = CSV_FLOAT_FORMAT) -> Path:
    """CSV byte-determinístico: formato fixo de float e quebra de linha '\\n'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format=float_format)
    return path


def render_table(frame: pd.DataFrame, floatfmt: str = ".4f") -> str:
    """Tabela de console."""
    return tabulate(frame, headers="keys", tablefmt="github", showindex=False, floatfmt=floatfmt)


def reference_frame(kind: Optional[str] = None) -> pd.DataFrame:
    """Resultados de referência como DataFrame (uma tabela ou todas)."""
    kinds = [kind] if kind is not None else list(REFERENCE_RESULTS)
    rows = []
    for name in kinds:
        if name not in REFERENCE_RESULTS:
            raise MetricsInputError(f"Tabela de referência desconhecida: {name}")
        for entry in REFERENCE_RESULTS[name]:
            alpha, beta, gamma = entry["weights"]
            rows.append({
                "table": name,
                "method": entry["method"],
                "alpha": alpha,
                "beta": beta,
                "gamma": gamma,
                "accuracy": entry["accuracy"],
                "precision": entry["precision"],
                "recall": entry["recall"],
                "f1": entry["f1"],
            })
    return pd.DataFrame(rows)


def write_reference_results(directory: Union[str, Path], kind: Optional[str] = None) -> Path:
    return save_frame_csv(reference_frame(kind), Path(directory) / REFERENCE_FILENAME, float_format="%.4g")


@dataclass(frozen=True)
class CurveFiles:
    csv_path: Path
    svg_path: Path


def curves_frame(histories: Sequence[Any], names: Sequence[str]) -> pd.DataFrame:
    """
    Uma coluna de acurácia de validação por execução, alinhadas por iteração
    (junção externa; iterações ausentes ficam vazias).

    Raises:
        MetricsInputError: listas vazias, de tamanhos distintos ou nomes repetidos
    """
    if len(histories) != len(names):
        raise MetricsInputError(f"{len(histories)} históricos para {len(names)} nomes")
    if not histories:
        raise MetricsInputError("Nenhum histórico informado para as curvas")
    if len(set(names)) != len(names):
        raise MetricsInputError("Nomes de execução repetidos nas curvas")
    frame: Optional[pd.DataFrame] = None
    for history, name in zip(histories, names):
        column = pd.DataFrame({"iteration": history.iterations, name: history.accuracies})
        frame = column if frame is None else frame.merge(column, on="iteration", how="outer")
    assert frame is not None
    return frame.sort_values("iteration").reset_index(drop=True)


def emit_curves(histories: Sequence[Any], names: Sequence[str], directory: Union[str, Path],
                stem: str = CURVES_STEM) -> CurveFiles:
    """
    Grava `<stem>.csv` e `<stem>.svg` (acurácia de validação x iterações).

    Cada curva fica num grupo SVG com id "curve-<nome>", com um vértice por
    ponto do histórico.
    """
    frame = curves_frame(histories, names)
    directory = Path(directory)
    csv_path = save_frame_csv(frame, directory / f"{stem}.csv")
    svg_path = directory / f"{stem}.svg"

    style = {
        "svg.hashsalt": "jersey-mtl",
        "svg.fonttype": "none",
        "path.simplify": False,
        "font.size": 9,
        "axes.labelsize": 10,
        "legend.fontsize": 8,
        "figure.figsize": [6.0, 3.8],
        "lines.linewidth": 1.2,
    }
    with plt.rc_context(style):
        fig, ax = plt.subplots()
        try:
            for history, name in zip(histories, names):
                (line,) = ax.plot(history.iterations, history.accuracies, label=name)
                line.set_gid(f"curve-{name}")
            ax.set_xlabel("Iterações")
            ax.set_ylabel("Acurácia de validação")
            ax.set_ylim(0.0, 1.0)
            ax.grid(True, alpha=0.3)
            ax.legend(loc="lower right")
            fig.tight_layout()
            fig.savefig(svg_path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    logger.info(f"[RELATORIO] Curvas salvas em {csv_path} e {svg_path}")
    return CurveFiles(csv_path, svg_path)


def save_execution_report(report: Dict[str, Any], directory: Union[str, Path],
                          filename: str = REPORT_FILENAME) -> str:
    """
    Salva relatório de execução em arquivo JSON (escrita atômica via arquivo
    temporário).

    Returns:
        str: Caminho do arquivo salvo, ou "" em caso de falha
    """
    try:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        filepath = directory / filename
        data = {"gerado_em": datetime.now().isoformat(timespec="seconds"), **report}
        temp_file = filepath.with_name(filepath.name + ".tmp")
        with open(temp_file, "w", encoding="utf-8", newline="\n") as f:
            json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True, default=str)
        os.replace(temp_file, filepath)
        logger.info(f"Relatório salvo em: {filepath}")
        return str(filepath)
    except OSError as e:
        logger.error(f"Erro ao salvar relatório: {e}")
        return ""
