"""
シナリオ既定値設定
"""

from typing import Tuple
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings


class ScenarioDefaults(BaseSettings):
    """名前付きシナリオの既定パラメータ"""

    app_name: str = "reebscape"

    # 構成パラメータ
    r0: float = Field(default=1.0, description="円 x1²+x2²=R0 のレベル")
    r: float = Field(default=0.01, description="S-D-CRAn 関数のスケール R")
    m1: int = Field(default=1, description="第1ファイバー次元")
    m2: int = Field(default=1, description="第2ファイバー次元")
    t2: float = Field(default=0.9, description="ケース2の x2 圧縮率")

    # 解析窓
    thm1_window: Tuple[float, float] = Field(default=(-6.0, 6.0), description="thm1 の x2 窓")
    thm1_period: float = Field(default=4.0, description="thm1 の x2 周期")
    disk_margin: float = Field(default=0.2, description="有界領域の窓余白")

    # 乱数・検証
    seed: int = Field(default=20240501, description="サンプリング乱数シード")
    sample_count: int = Field(default=1000, description="零点集合サンプル数")
    oracle_grid: Tuple[int, int] = Field(default=(512, 1024), description="ラスタ照合の格子 (nx1, nx2)")

    @field_validator('r0', 'r')
    @classmethod
    def check_positive(cls, v):
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator('t2')
    @classmethod
    def check_squeeze(cls, v):
        if not 0 < v < 1:
            raise ValueError("t2 must lie in (0, 1)")
        return v

    @field_validator('m1', 'm2')
    @classmethod
    def check_fiber_dimension(cls, v):
        if v < 1:
            raise ValueError("fiber dimension must be at least 1")
        return v

    @field_validator('oracle_grid')
    @classmethod
    def check_grid(cls, v):
        if min(v) < 64:
            raise ValueError("oracle grid must be at least 64x64")
        return v

    model_config = {
        "env_file": ".env",
        "env_prefix": "REEBSCAPE_",
        "case_sensitive": False,
        "extra": "ignore"
    }


# グローバル設定インスタンス
scenario_defaults = ScenarioDefaults()


def get_scenario_defaults() -> ScenarioDefaults:
    """シナリオ既定値を取得"""
    return scenario_defaults
