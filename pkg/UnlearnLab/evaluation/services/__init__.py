"""
Файл: __init__.py
Описание: Инициализация пакета services

- metrics.py: MetricsRecord, accuracy, core_metrics, avg_gap, evaluate_run
- mia.py: пороговая атака по максимальной softmax-вероятности
- predictions.py: PredictionDistribution и prediction_distribution
"""
