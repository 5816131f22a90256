# reebscape テストパッケージ
