# -*- coding: utf-8 -*-
"""
Helper Utilities Module

Funções utilitárias de suporte: configuração de logging, timestamps,
formatação de duração e leitura das configurações do projeto.

Funcionalidades principais:
- Configuração de logging (arquivo com timestamp + console)
- Leitura de config/settings.json com sobrescrita por variáveis de ambiente
- Timestamps e duração formatada para relatórios
"""

import json
import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Union


# Constantes
LOGGER_NAME = "jersey_mtl"
DEFAULT_LOGS_DIR = "logs"
DEFAULT_LOG_PREFIX = "jersey_mtl"
DEFAULT_OUTPUT_DIR = "resultados"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
SETTINGS_PATH = Path(__file__).resolve().parent.parent / "config" / "settings.json"


def load_settings(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Carrega as configurações do projeto.

    Ordem de busca: argumento `path`, variável JERSEY_MTL_SETTINGS e, por
    fim, o settings.json empacotado.

    Returns:
        Dict[str, Any]: Configurações (vazio se o arquivo não existir)
    """
    candidate = Path(path or os.getenv("JERSEY_MTL_SETTINGS") or SETTINGS_PATH)
    if not candidate.exists():
        logging.getLogger(LOGGER_NAME).warning(f"Arquivo de configurações não encontrado: {candidate}")
        return {}
    with open(candidate, "r", encoding="utf-8") as f:
        return json.load(f)


def get_setting(settings: Dict[str, Any], key: str, default: Any = None) -> Any:
    """
    Busca uma chave pontuada, ex.: get_setting(s, "training.batch_size", 100).
    """
    node: Any = settings
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def get_output_dir(settings: Optional[Dict[str, Any]] = None) -> Path:
    """Diretório de saída: JERSEY_MTL_OUTPUT_DIR, depois paths.output_dir."""
    env_dir = os.getenv("JERSEY_MTL_OUTPUT_DIR")
    if env_dir:
        return Path(env_dir)
    return Path(get_setting(settings or {}, "paths.output_dir", DEFAULT_OUTPUT_DIR))


def log_and_print(message: str, logger: logging.Logger, level: str = "info") -> None:
    """
    Registra mensagem no log e imprime no console.

    Args:
        message (str): Mensagem a ser registrada
        logger (logging.Logger): Instância do logger
        level (str): Nível do log ("info", "error", "warning", "debug")
    """
    log_methods = {
        "info": logger.info,
        "error": logger.error,
        "warning": logger.warning,
        "debug": logger.debug
    }
    log_methods.get(level.lower(), logger.info)(message)
    print(message)


def setup_logger(settings: Optional[Dict[str, Any]] = None, console: bool = False) -> logging.Logger:
    """
    Configura e retorna o logger do sistema.

    O arquivo de log fica em LOGS_DIR (ou paths.logs_dir) com nome
    <LOG_FILENAME_PREFIX>_<YYYYMMDD_HHMMSS>.log. O nível vem de LOG_LEVEL ou
    logging.level.

    Returns:
        logging.Logger: Logger configurado
    """
    settings = settings or {}
    logger = logging.getLogger(LOGGER_NAME)
    level_name = os.getenv("LOG_LEVEL") or get_setting(settings, "logging.level", "INFO")
    logger.setLevel(getattr(logging, str(level_name).upper(), logging.INFO))

    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    formatter = logging.Formatter(LOG_FORMAT)

    try:
        log_dir = _get_logs_directory(settings)
        os.makedirs(log_dir, exist_ok=True)
        log_prefix = os.getenv("LOG_FILENAME_PREFIX") or get_setting(
            settings, "logging.log_filename_prefix", DEFAULT_LOG_PREFIX
        )
        log_filename = os.path.join(log_dir, f"{log_prefix}_{create_timestamp()}.log")
        file_handler = logging.FileHandler(log_filename, encoding="utf-8")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
    except OSError as e:
        # Sem arquivo de log: segue apenas com o console
        print(f"Erro ao configurar arquivo de log: {e}")
        console = True

    if console:
        stream_handler = logging.StreamHandler()
        stream_handler.setFormatter(formatter)
        logger.addHandler(stream_handler)

    logger.propagate = False
    logger.info("Logger configurado com sucesso")
    return logger


def _get_logs_directory(settings: Dict[str, Any]) -> str:
    """
    Retorna o diretório para arquivos de log.

    Returns:
        str: Caminho do diretório de logs
    """
    env_dir = os.getenv("LOGS_DIR")
    if env_dir:
        return env_dir
    return str(get_setting(settings, "paths.logs_dir", DEFAULT_LOGS_DIR))


def create_timestamp() -> str:
    """
    Cria um timestamp no formato YYYYMMDD_HHMMSS.

    Returns:
        str: Timestamp formatado
    """
    return datetime.now().strftime("%Y%m%d_%H%M%S")


def format_duration(start_time: datetime, end_time: datetime) -> str:
    """
    Formata a duração entre dois momentos.

    Args:
        start_time (datetime): Horário de início
        end_time (datetime): Horário de fim

    Returns:
        str: Duração formatada (ex: "2m 30s")
    """
    duration = end_time - start_time
    total_seconds = int(duration.total_seconds())

    hours = total_seconds // 3600
    minutes = (total_seconds % 3600) // 60
    seconds = total_seconds % 60

    if hours > 0:
        return f"{hours}h {minutes}m {seconds}s"
    elif minutes > 0:
        return f"{minutes}m {seconds}s"
    else:
        return f"{seconds}s"
