"""
統一設定管理
"""

import os
from typing import Optional, Dict, Any
from enum import Enum
from dataclasses import dataclass

from dotenv import load_dotenv


class Environment(str, Enum):
    """環境種別"""
    DEVELOPMENT = "development"
    PRODUCTION = "production"
    TEST = "test"


@dataclass
class NumericsConfig:
    """数値計算設定"""
    root_xtol: float = 1e-12
    residual_tol: float = 1e-9
    event_dedup_tol: float = 1e-9
    corner_tol: float = 1e-10
    grid_density: int = 2048
    max_density: int = 32768
    oscillation_points_per_pi: int = 24
    oscillation_max_count: int = 200
    underflow_exponent: float = 745.0  # exp(-745) 以下は 0 扱い

    @classmethod
    def from_env(cls) -> 'NumericsConfig':
        """環境変数から数値計算設定を作成"""
        return cls(
            root_xtol=float(os.getenv('REEBSCAPE_ROOT_XTOL', '1e-12')),
            residual_tol=float(os.getenv('REEBSCAPE_RESIDUAL_TOL', '1e-9')),
            event_dedup_tol=float(os.getenv('REEBSCAPE_EVENT_DEDUP_TOL', '1e-9')),
            corner_tol=float(os.getenv('REEBSCAPE_CORNER_TOL', '1e-10')),
            grid_density=int(os.getenv('REEBSCAPE_GRID_DENSITY', '2048')),
            max_density=int(os.getenv('REEBSCAPE_MAX_DENSITY', '32768')),
            oscillation_points_per_pi=int(os.getenv('REEBSCAPE_OSC_POINTS_PER_PI', '24')),
            oscillation_max_count=int(os.getenv('REEBSCAPE_OSC_MAX_COUNT', '200')),
            underflow_exponent=float(os.getenv('REEBSCAPE_UNDERFLOW_EXPONENT', '745')),
        )


@dataclass
class SweepConfig:
    """スイープ設定"""
    track_samples: int = 8
    max_refine: int = 12
    event_delta_cap: float = 1e-3
    accumulation_levels: int = 5
    accumulation_min_count: int = 2
    arc_threshold: float = 1e-7

    @classmethod
    def from_env(cls) -> 'SweepConfig':
        """環境変数からスイープ設定を作成"""
        return cls(
            track_samples=int(os.getenv('REEBSCAPE_TRACK_SAMPLES', '8')),
            max_refine=int(os.getenv('REEBSCAPE_MAX_REFINE', '12')),
            event_delta_cap=float(os.getenv('REEBSCAPE_EVENT_DELTA_CAP', '1e-3')),
            accumulation_levels=int(os.getenv('REEBSCAPE_ACCUMULATION_LEVELS', '5')),
            accumulation_min_count=int(os.getenv('REEBSCAPE_ACCUMULATION_MIN_COUNT', '2')),
            arc_threshold=float(os.getenv('REEBSCAPE_ARC_THRESHOLD', '1e-7')),
        )


@dataclass
class LiftConfig:
    """零点集合・ランク検証設定"""
    jacobian_step: float = 1e-5
    rank_rel_threshold: float = 1e-6
    gap_clearance: float = 1e-4
    max_rejection_rounds: int = 200

    @classmethod
    def from_env(cls) -> 'LiftConfig':
        """環境変数から検証設定を作成"""
        return cls(
            jacobian_step=float(os.getenv('REEBSCAPE_JACOBIAN_STEP', '1e-5')),
            rank_rel_threshold=float(os.getenv('REEBSCAPE_RANK_REL_THRESHOLD', '1e-6')),
            gap_clearance=float(os.getenv('REEBSCAPE_GAP_CLEARANCE', '1e-4')),
            max_rejection_rounds=int(os.getenv('REEBSCAPE_MAX_REJECTION_ROUNDS', '200')),
        )


@dataclass
class OutputConfig:
    """出力設定"""
    output_dir: str = "reebscape_out"
    jobs: int = 1

    @classmethod
    def from_env(cls) -> 'OutputConfig':
        """環境変数から出力設定を作成"""
        return cls(
            output_dir=os.getenv('REEBSCAPE_OUTPUT_DIR', 'reebscape_out'),
            jobs=int(os.getenv('REEBSCAPE_JOBS', '1')),
        )


@dataclass
class LoggingConfig:
    """ログ設定"""
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    enable_structured_logging: bool = False

    @classmethod
    def from_env(cls) -> 'LoggingConfig':
        """環境変数からログ設定を作成"""
        return cls(
            level=os.getenv('LOG_LEVEL', 'INFO').upper(),
            format=os.getenv('LOG_FORMAT', '%(asctime)s - %(name)s - %(levelname)s - %(message)s'),
            enable_structured_logging=os.getenv('STRUCTURED_LOGGING', 'false').lower() == 'true'
        )


class Settings:
    """統一設定管理クラス"""

    def __init__(self):
        load_dotenv(override=False)
        self._environment = Environment(os.getenv('ENV', 'development'))
        self._numerics = NumericsConfig.from_env()
        self._sweep = SweepConfig.from_env()
        self._lift = LiftConfig.from_env()
        self._output = OutputConfig.from_env()
        self._logging = LoggingConfig.from_env()

        # 設定検証
        self._validate_configuration()

    @property
    def environment(self) -> Environment:
        """環境種別"""
        return self._environment

    @property
    def numerics(self) -> NumericsConfig:
        """数値計算設定"""
        return self._numerics

    @property
    def sweep(self) -> SweepConfig:
        """スイープ設定"""
        return self._sweep

    @property
    def lift(self) -> LiftConfig:
        """零点集合・ランク検証設定"""
        return self._lift

    @property
    def output(self) -> OutputConfig:
        """出力設定"""
        return self._output

    @property
    def logging(self) -> LoggingConfig:
        """ログ設定"""
        return self._logging

    @property
    def is_test(self) -> bool:
        """テスト環境かどうか"""
        return self._environment == Environment.TEST

    def _validate_configuration(self):
        """設定の検証"""
        errors = []

        n = self._numerics
        if n.root_xtol <= 0 or n.residual_tol <= 0 or n.event_dedup_tol <= 0:
            errors.append("numeric tolerances must be positive")
        if n.grid_density < 16:
            errors.append("grid_density must be at least 16")
        if n.max_density < n.grid_density:
            errors.append("max_density must not be smaller than grid_density")
        if n.oscillation_points_per_pi < 4:
            errors.append("oscillation_points_per_pi must be at least 4")
        if n.oscillation_max_count < 10:
            errors.append("oscillation_max_count must be at least 10")

        s = self._sweep
        if s.track_samples < 2:
            errors.append("track_samples must be at least 2")
        if s.accumulation_levels < 1 or s.accumulation_min_count < 1:
            errors.append("accumulation schedule must be positive")
        if not 0 < s.event_delta_cap < 1:
            errors.append("event_delta_cap must lie in (0, 1)")

        if self._lift.jacobian_step <= 0:
            errors.append("jacobian_step must be positive")
        if self._output.jobs < 1:
            errors.append("jobs must be at least 1")

        if self._logging.level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"unknown log level: {self._logging.level}")

        if errors:
            error_msg = "Configuration validation failed: " + "; ".join(errors)
            raise ValueError(error_msg)

    def to_dict(self) -> Dict[str, Any]:
        """設定を辞書形式で取得（レポート用）"""
        return {
            "environment": self._environment.value,
            "numerics": dict(self._numerics.__dict__),
            "sweep": dict(self._sweep.__dict__),
            "lift": dict(self._lift.__dict__),
            "output": dict(self._output.__dict__),
            "logging": {
                "level": self._logging.level,
                "structured": self._logging.enable_structured_logging,
            }
        }


# グローバル設定インスタンス
_settings_instance: Optional[Settings] = None


def get_settings() -> Settings:
    """設定インスタンスを取得"""
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = Settings()
    return _settings_instance


def reset_settings():
    """設定をリセット（テスト用）"""
    global _settings_instance
    _settings_instance = None


# よく使用される設定のショートカット
def get_numerics_config() -> NumericsConfig:
    """数値計算設定取得"""
    return get_settings().numerics


def get_sweep_config() -> SweepConfig:
    """スイープ設定取得"""
    return get_settings().sweep


def get_lift_config() -> LiftConfig:
    """検証設定取得"""
    return get_settings().lift
