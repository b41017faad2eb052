"""
Файл: __init__.py
Описание: Инициализация пакета services

- experiment_config.py: ExperimentConfig, load_config(), config_hash()
- cells.py: ячейки сетки и их выполнение
- runner.py: run_experiment(), RunManifest, агрегаты
- sweep.py: абляции по одной оси
- report.py: таблицы, theory.json, representations.csv
"""
