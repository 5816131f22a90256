"""
共通エラーハンドリングユーティリティ

数値処理の失敗はすべて ReebscapeError の派生として送出し、
CLI で {"error": {"code", "message", "details"}} 形式に変換する。
"""

from typing import Optional, Dict, Any, List, Tuple


class ReebscapeError(Exception):
    """reebscape 共通エラークラス"""

    code: str = "REEBSCAPE_ERROR"

    def __init__(
        self,
        message: str,
        code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message)
        self.message = message
        if code:
            self.code = code
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """エラーペイロードを生成"""
        payload: Dict[str, Any] = {
            "error": {
                "code": self.code,
                "message": self.message
            }
        }
        if self.details:
            payload["error"]["details"] = self.details
        return payload


class TooOscillatory(ReebscapeError):
    """最大密度でも根の分離ができない"""
    code = "TOO_OSCILLATORY"


class AccumulationSuspected(ReebscapeError):
    """臨界値の集積が疑われる"""
    code = "ACCUMULATION_SUSPECTED"

    def __init__(
        self,
        message: str,
        focus: Tuple[float, float],
        heights: Optional[List[float]] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.focus = (float(focus[0]), float(focus[1]))
        self.heights = list(heights or [])
        merged = {"focus": list(self.focus), "observed_count": len(self.heights)}
        merged.update(details or {})
        super().__init__(message, details=merged)


class RefinementExceeded(ReebscapeError):
    """区間対応付けが max_refine 内で確定しない"""
    code = "REFINEMENT_EXCEEDED"


class Inconclusive(ReebscapeError):
    """窓による切断のため判定不能"""
    code = "INCONCLUSIVE"


class LocateFailed(ReebscapeError):
    """サンプル点がどのトラックにも一致しない"""
    code = "LOCATE_FAILED"


class SizeMismatch(ReebscapeError):
    """グラフのサイズ不一致"""
    code = "SIZE_MISMATCH"


class GapPoint(ReebscapeError):
    """差分プローブが解析性の欠損点をまたぐ"""
    code = "GAP_POINT"


class EmptyRegion(ReebscapeError):
    """窓内に領域の点が見つからない"""
    code = "EMPTY_REGION"


class FlatnessViolation(ReebscapeError):
    """平坦性証明の失敗"""
    code = "FLATNESS_VIOLATION"


class ScenarioConfigError(ReebscapeError):
    """シナリオ設定の検証エラー"""
    code = "SCENARIO_CONFIG_INVALID"

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        self.errors = list(errors or [])
        super().__init__(message, details={"errors": self.errors} if self.errors else None)


class ReebscapeErrors:
    """ドメインエラー生成ヘルパー"""

    @staticmethod
    def too_oscillatory(density: int, bracket: Tuple[float, float]) -> TooOscillatory:
        """根の分離失敗エラーを生成"""
        return TooOscillatory(
            "root isolation did not stabilise at maximum sampling density",
            details={"density": density, "bracket": list(bracket)}
        )

    @staticmethod
    def accumulation(focus: Tuple[float, float], heights: List[float], source: str) -> AccumulationSuspected:
        """集積疑いエラーを生成"""
        return AccumulationSuspected(
            f"critical heights accumulate near focus {focus}",
            focus=focus,
            heights=heights,
            details={"source": source}
        )

    @staticmethod
    def refinement_exceeded(height_range: Tuple[float, float], max_refine: int) -> RefinementExceeded:
        """細分化上限エラーを生成"""
        return RefinementExceeded(
            "interval matching stayed ambiguous after maximum refinement",
            details={"height_range": list(height_range), "max_refine": max_refine}
        )

    @staticmethod
    def locate_failed(point: Tuple[float, float]) -> LocateFailed:
        """位置特定失敗エラーを生成"""
        return LocateFailed(
            "sample lies in the region but matches no edge track",
            details={"point": list(point)}
        )

    @staticmethod
    def size_mismatch(sizes_a: Tuple[int, int], sizes_b: Tuple[int, int]) -> SizeMismatch:
        """サイズ不一致エラーを生成"""
        return SizeMismatch(
            "graphs differ in node or edge count",
            details={"first": list(sizes_a), "second": list(sizes_b)}
        )

    @staticmethod
    def scenario_invalid(errors: List[str]) -> ScenarioConfigError:
        """シナリオ設定エラーを生成"""
        return ScenarioConfigError("scenario configuration is invalid", errors=errors)
