"""
reebscape バックエンド
"""
