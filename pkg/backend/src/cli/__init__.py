"""
コマンドライン
"""
