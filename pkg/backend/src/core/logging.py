"""
構造化ログ

標準出力は CLI の要約と DOT 出力に使うため、ログはすべて標準エラーへ流す。
"""

import json
import logging
import sys
import traceback
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from ..config.settings import get_settings


class LogCategory(str, Enum):
    """ログカテゴリ（サービス単位）"""
    CURVEKIT = "curvekit"
    REGIONS = "regions"
    SWEEP = "reebsweep"
    ZSTRUCT = "zstruct"
    LIFTCHECK = "liftcheck"
    SCENARIO = "scenario"
    CLI = "cli"
    CONFIG = "config"
    SYSTEM = "system"


def _json_default(value: Any) -> Any:
    """numpy のスカラー・配列を JSON に載せる"""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Enum):
        return value.value
    return str(value)


class StructuredFormatter(logging.Formatter):
    """1 レコード 1 行の JSON"""

    def format(self, record: logging.LogRecord) -> str:
        entry: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "category": getattr(record, "category", LogCategory.SYSTEM.value),
            "message": record.getMessage(),
        }
        entry.update(getattr(record, "fields", {}))
        if record.exc_info and record.exc_info[0] is not None:
            entry["exception"] = {
                "type": record.exc_info[0].__name__,
                "message": str(record.exc_info[1]),
                "traceback": self.formatException(record.exc_info),
            }
        return json.dumps(entry, ensure_ascii=False, default=_json_default)


class PlainFormatter(logging.Formatter):
    """人間向け: 設定の書式の後ろに key=value を並べる"""

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        fields = getattr(record, "fields", {})
        if fields:
            line += " " + " ".join(f"{k}={v}" for k, v in fields.items())
        return line


def _make_handler() -> logging.Handler:
    settings = get_settings()
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(settings.logging.level.upper())
    if settings.logging.enable_structured_logging:
        handler.setFormatter(StructuredFormatter())
    else:
        handler.setFormatter(PlainFormatter(settings.logging.format))
    return handler


class StructuredLogger:
    """キーワード引数をフィールドとして記録するロガー"""

    def __init__(self, name: str, category: LogCategory = LogCategory.SYSTEM):
        self.name = name
        self.category = category
        self.logger = logging.getLogger(name)
        self.logger.setLevel(get_settings().logging.level.upper())
        if not self.logger.handlers:
            self.logger.addHandler(_make_handler())
            self.logger.propagate = False

    def _emit(self, level: int, message: str, fields: Dict[str, Any]):
        if self.logger.isEnabledFor(level):
            self.logger.log(level, message, extra={"category": self.category.value, "fields": fields})

    @staticmethod
    def _with_exception(fields: Dict[str, Any], exception: Optional[BaseException]) -> Dict[str, Any]:
        if exception is not None:
            fields.update({
                "exception_type": type(exception).__name__,
                "exception_message": str(exception),
                "traceback": "".join(traceback.format_exception(type(exception), exception, exception.__traceback__)),
            })
            code = getattr(exception, "code", None)
            if code:
                fields["error_code"] = code
        return fields

    def debug(self, message: str, **fields):
        self._emit(logging.DEBUG, message, fields)

    def info(self, message: str, **fields):
        self._emit(logging.INFO, message, fields)

    def warning(self, message: str, **fields):
        self._emit(logging.WARNING, message, fields)

    def error(self, message: str, exception: Optional[BaseException] = None, **fields):
        self._emit(logging.ERROR, message, self._with_exception(fields, exception))

    def critical(self, message: str, exception: Optional[BaseException] = None, **fields):
        self._emit(logging.CRITICAL, message, self._with_exception(fields, exception))

    # --- 数値処理 ---

    def numeric_operation(self, operation: str, duration_ms: Optional[float] = None, **fields):
        """公開演算 1 回につき 1 行"""
        if duration_ms is not None:
            fields["duration_ms"] = round(duration_ms, 3)
        self.info(f"{operation} done", operation=operation, **fields)

    def check_result(self, check: str, passed: bool, **measured):
        """検査の合否（不合格は WARNING）"""
        log = self.info if passed else self.warning
        log(f"check {check} {'passed' if passed else 'failed'}", check=check, passed=passed, **measured)


def get_logger(name: str, category: LogCategory = LogCategory.SYSTEM) -> StructuredLogger:
    return StructuredLogger(name, category)


def setup_logging():
    """ルートロガーを設定（外部ライブラリのログもまとめて出す）"""
    settings = get_settings()
    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
    root.setLevel(settings.logging.level.upper())
    root.addHandler(_make_handler())
    get_logger(__name__).debug(
        "logging configured",
        structured=settings.logging.enable_structured_logging,
        level=settings.logging.level,
    )
