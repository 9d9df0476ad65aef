# -*- coding: utf-8 -*-
"""
Módulo principal: linha de comando do laboratório multi-tarefa.

Subcomandos:
- gen        gera e grava o conjunto de dados sintético de uma especificação
- train      treina uma única execução (todas as suas sementes)
- eval       avalia um checkpoint numa divisão do manifesto
- compare    comparação holístico / por dígitos / multi-tarefa
- ablate     grade de ablação dos pesos (alpha, beta, gamma)
- backbones  varredura de backbones
- curves     curvas de validação a partir de diretórios de execução
- stats      estatísticas de um conjunto de dados

Códigos de saída: 0 sucesso, 1 erro de validação, 2 falha de execução.
"""

import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import pandas as pd
from dotenv import load_dotenv

from ..core.autodiff import FLOAT32, FLOAT64
from ..core.errors import ConfigurationError, ExperimentRunError, JerseyMTLError, NonFiniteGradientError
from ..services.evaluator import PredictionMode, evaluate_checkpoint
from ..services.experiments import (
    ExperimentSpec, load_histories, prepare_dataset, run_ablation, run_backbone_sweep, run_comparison, run_single,
)
from ..services.spec_file import parse_spec
from ..services.synth_data import SPLITS, DatasetManifest, dataset_statistics
from ..utils.helpers import format_duration, load_settings, log_and_print, setup_logger
from ..utils.reports import CURVES_STEM, emit_curves, render_table, save_frame_csv


EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

EXPERIMENTS_DIR = Path(__file__).resolve().parent.parent / "config" / "experiments"
DEFAULT_SPECS = {
    "gen": "comparacao.ini",
    "train": "comparacao.ini",
    "compare": "comparacao.ini",
    "ablate": "ablacao.ini",
    "backbones": "backbones.ini",
}
PRECISIONS = {"float32": FLOAT32, "float64": FLOAT64}


class _ArgumentParser(argparse.ArgumentParser):
    """Erros de uso viram ConfigurationError (código de saída 1)."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigurationError(f"Uso inválido: {message}")


def _add_common(parser: argparse.ArgumentParser, with_spec: bool = True) -> None:
    if with_spec:
        parser.add_argument("--spec", type=Path, help="arquivo de especificação (.ini)")
        parser.add_argument("--seed", type=int, action="append",
                            help="substitui as sementes de todas as execuções (repetível)")
    parser.add_argument("--output", type=Path, help="diretório de saída")
    parser.add_argument("--precision", choices=sorted(PRECISIONS), default="float32",
                        help="precisão numérica do treino e da avaliação")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="jersey-mtl", description="Reconhecimento de números de camisa multi-tarefa")
    parser.add_argument("--settings", type=Path, help="settings.json alternativo")
    parser.add_argument("--quiet", action="store_true", help="não replica o log no console")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    gen = sub.add_parser("gen", help="gera o conjunto de dados")
    _add_common(gen)

    train = sub.add_parser("train", help="treina uma execução")
    _add_common(train)
    train.add_argument("--run", required=True, help="nome da execução ([runs.<nome>])")
    train.add_argument("--data", type=Path, help="manifesto existente (arquivo ou diretório)")

    evaluate = sub.add_parser("eval", help="avalia um checkpoint")
    _add_common(evaluate, with_spec=False)
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--data", type=Path, required=True, help="manifesto (arquivo ou diretório)")
    evaluate.add_argument("--split", choices=SPLITS, default="test")
    evaluate.add_argument("--mode", help="holistic, digitwise, multitask ou fused")

    for name, help_text in (("compare", "comparação dos três cenários"),
                            ("ablate", "ablação dos pesos da perda"),
                            ("backbones", "varredura de backbones")):
        _add_common(sub.add_parser(name, help=help_text))

    curves = sub.add_parser("curves", help="curvas de validação")
    _add_common(curves, with_spec=False)
    curves.add_argument("runs", nargs="+", type=Path, help="diretórios de execução com historico.csv")
    curves.add_argument("--stem", default=CURVES_STEM)

    stats = sub.add_parser("stats", help="estatísticas do conjunto de dados")
    _add_common(stats)
    stats.add_argument("--data", type=Path, help="manifesto existente (arquivo ou diretório)")
    return parser


def load_experiment(args: argparse.Namespace, settings: Dict[str, Any]) -> ExperimentSpec:
    """Especificação do subcomando com as substituições de sementes e saída."""
    path = args.spec or EXPERIMENTS_DIR / DEFAULT_SPECS.get(args.command, DEFAULT_SPECS["compare"])
    spec = parse_spec(path, settings)
    if args.seed:
        spec = spec.with_seeds(args.seed)
    if args.output:
        spec = spec.with_output_dir(args.output)
    return spec


def _print_stats(manifest: DatasetManifest, logger: logging.Logger) -> None:
    stats = dataset_statistics(manifest)
    frame = pd.DataFrame(stats.rows(), columns=["divisao", "registros", "jogos"])
    log_and_print(render_table(frame), logger)
    log_and_print(
        f"[DADOS] Classes: {len(manifest.classes)} | desbalanceamento {stats.imbalance_ratio:.2f} | "
        f"fração nula {stats.null_fraction:.4f} | sha256 {manifest.content_hash()[:12]}",
        logger,
    )


def _cmd_gen(args: argparse.Namespace, settings: Dict[str, Any], logger: logging.Logger) -> None:
    spec = load_experiment(args, settings)
    manifest = prepare_dataset(spec)
    _print_stats(manifest, logger)


def _cmd_train(args: argparse.Namespace, settings: Dict[str, Any], logger: logging.Logger) -> None:
    spec = load_experiment(args, settings)
    manifest = DatasetManifest.load(args.data) if args.data else None
    result = run_single(spec, args.run, PRECISIONS[args.precision], manifest)
    frame = pd.DataFrame([s.metrics.as_row(f"{args.run}/seed{s.seed}") for s in result.seeds])
    log_and_print(render_table(frame), logger)


def _cmd_eval(args: argparse.Namespace, settings: Dict[str, Any], logger: logging.Logger) -> None:
    manifest = DatasetManifest.load(args.data)
    mode = PredictionMode.parse(args.mode) if args.mode else None
    report = evaluate_checkpoint(args.checkpoint, manifest, args.split, mode)
    frame = pd.DataFrame([report.as_row(args.checkpoint.stem)])
    log_and_print(render_table(frame), logger)
    if args.output:
        path = save_frame_csv(frame, Path(args.output) / f"avaliacao_{args.split}.csv")
        log_and_print(f"[AVALIACAO] Métricas salvas em {path}", logger)


def _experiment_command(runner: Callable[..., Any]) -> Callable[[argparse.Namespace, Dict[str, Any], logging.Logger], None]:
    def command(args: argparse.Namespace, settings: Dict[str, Any], logger: logging.Logger) -> None:
        spec = load_experiment(args, settings)
        log_and_print(f"[EXPERIMENTO] {spec.name}: {len(spec.runs)} execuções em {spec.output_dir}", logger)
        table = runner(spec, PRECISIONS[args.precision])
        log_and_print(render_table(table.to_frame()), logger)
    return command


def _cmd_curves(args: argparse.Namespace, settings: Dict[str, Any], logger: logging.Logger) -> None:
    histories, names = load_histories(args.runs)
    directory = args.output or Path(args.runs[0]).parent
    files = emit_curves(histories, names, directory, args.stem)
    log_and_print(f"[RELATORIO] Curvas: {files.csv_path} | {files.svg_path}", logger)


def _cmd_stats(args: argparse.Namespace, settings: Dict[str, Any], logger: logging.Logger) -> None:
    if args.data:
        manifest = DatasetManifest.load(args.data)
    else:
        manifest = load_experiment(args, settings).dataset.build()
    _print_stats(manifest, logger)


COMMANDS: Dict[str, Callable[[argparse.Namespace, Dict[str, Any], logging.Logger], None]] = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "compare": _experiment_command(run_comparison),
    "ablate": _experiment_command(run_ablation),
    "backbones": _experiment_command(run_backbone_sweep),
    "curves": _cmd_curves,
    "stats": _cmd_stats,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Ponto de entrada da linha de comando.

    Returns:
        int: 0 sucesso, 1 erro de validação, 2 falha de execução
    """
    load_dotenv()
    execution_start_time = datetime.now()
    logger = logging.getLogger("jersey_mtl")
    try:
        args = build_parser().parse_args(list(argv) if argv is not None else None)
        settings = load_settings(args.settings)
        logger = setup_logger(settings, console=not args.quiet)

        print("=" * 80)
        print(" " * 16 + "[*] LABORATÓRIO DE NÚMEROS DE CAMISA MULTI-TAREFA [*]")
        print("=" * 80)
        log_and_print(f"[SISTEMA] Comando: {args.command} | início {execution_start_time:%d/%m/%Y %H:%M:%S}",
                      logger)

        COMMANDS[args.command](args, settings, logger)

        duration = format_duration(execution_start_time, datetime.now())
        log_and_print(f"[SISTEMA] [OK] Concluído em {duration}", logger)
        return EXIT_OK
    except (ExperimentRunError, NonFiniteGradientError) as e:
        log_and_print(f"[SISTEMA] [ERRO] Falha de execução: {e}", logger, "error")
        return EXIT_RUNTIME
    except JerseyMTLError as e:
        log_and_print(f"[SISTEMA] [ERRO] Erro de validação: {e}", logger, "error")
        return EXIT_VALIDATION
    except Exception as e:
        logger.exception("Falha inesperada")
        print(f"[SISTEMA] [ERRO] Falha inesperada: {e}")
        return EXIT_RUNTIME


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
