"""
数値処理サービス
"""
