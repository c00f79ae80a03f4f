# -*- coding: utf-8 -*-
"""
ReportPersistence - Salvamento e carregamento de relatórios de experimentos
e exportação de campos em CSV.
"""

import csv
import json
import gzip
import logging
from typing import Any, Dict, Iterable, Optional, Sequence
from pathlib import Path

logger = logging.getLogger(__name__)

GZIP_MAGIC = b'\x1f\x8b'


class ReportPersistence:
    """
    Classe para gerenciar persistência de relatórios.

    Formato:
    - Documento JSON (chaves ordenadas, reprodutível byte a byte)
    - Opcionalmente comprimido com gzip
    - Metadata de versão para compatibilidade
    """

    VERSION = "1.0"
    FORMAT = "experiment-report"

    @staticmethod
    def dumps(report_data: Dict[str, Any]) -> str:
        """Serializa o relatório com o cabeçalho de versão."""
        data_to_save = {
            "version": ReportPersistence.VERSION,
            "format": ReportPersistence.FORMAT,
            "data": report_data,
        }
        return json.dumps(data_to_save, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @staticmethod
    def save(report_data: Dict[str, Any], file_path: str, compress: bool = False) -> bool:
        """
        Salva o relatório em arquivo JSON

        Args:
            report_data: Dicionário com dados do relatório
            file_path: Caminho do arquivo
            compress: Comprime com gzip

        Returns:
            bool: True se salvou com sucesso
        """
        try:
            json_str = ReportPersistence.dumps(report_data)
            Path(file_path).parent.mkdir(parents=True, exist_ok=True)
            if compress:
                with open(file_path, 'wb') as f:
                    f.write(gzip.compress(json_str.encode('utf-8'), mtime=0))
            else:
                with open(file_path, 'w', encoding='utf-8') as f:
                    f.write(json_str)
            return True

        except OSError as e:
            logger.error("❌ Erro ao salvar relatório: %s", e)
            return False

    @staticmethod
    def load(file_path: str) -> Optional[Dict[str, Any]]:
        """
        Carrega o relatório (comprimido ou não)

        Returns:
            Dict com dados do relatório ou None se erro
        """
        try:
            if not Path(file_path).exists():
                return None

            with open(file_path, 'rb') as f:
                raw = f.read()
            if raw[:2] == GZIP_MAGIC:
                raw = gzip.decompress(raw)
            loaded_data = json.loads(raw.decode('utf-8'))

            if loaded_data.get("format") != ReportPersistence.FORMAT:
                logger.warning("⚠️ Arquivo não é um relatório válido: %s", file_path)
                return None

            version = loaded_data.get("version", "1.0")
            if version != ReportPersistence.VERSION:
                logger.warning("⚠️ Versão do arquivo (%s) diferente da atual (%s)",
                               version, ReportPersistence.VERSION)

            return loaded_data.get("data")

        except (OSError, ValueError) as e:
            logger.error("❌ Erro ao carregar relatório: %s", e)
            return None

    @staticmethod
    def is_report_file(file_path: str) -> bool:
        """Verifica se o arquivo é um relatório válido."""
        return ReportPersistence.load(file_path) is not None

    @staticmethod
    def get_report_info(file_path: str) -> Optional[Dict[str, str]]:
        """
        Obtém informações básicas do relatório

        Returns:
            Dict com informações básicas ou None se erro
        """
        data = ReportPersistence.load(file_path)
        if not data:
            return None
        suites = data.get("suites", [])
        return {
            "problem": data.get("problem", {}).get("name", "desconhecido"),
            "suite_count": str(len(suites)),
            "passed": str(all(s.get("passed", False) for s in suites)),
            "file_size": str(Path(file_path).stat().st_size),
        }


# ========== CSV ==========

def write_csv(file_path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> bool:
    """
    Escreve uma tabela CSV com cabeçalho.

    Returns:
        bool: True se escreveu com sucesso
    """
    try:
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                writer.writerow(row)
        return True
    except OSError as e:
        logger.error("❌ Erro ao exportar CSV %s: %s", file_path, e)
        return False


def read_csv(file_path: str) -> list:
    """Lê uma tabela CSV como lista de dicionários (coluna → texto)."""
    with open(file_path, newline='', encoding='utf-8') as f:
        return list(csv.DictReader(f))
