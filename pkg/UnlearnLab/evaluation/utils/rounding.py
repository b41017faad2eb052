"""
Файл: rounding.py
Описание: Округление значений для таблиц

Сначала значение очищается от хвоста двоичной арифметики (10 знаков),
затем округляется до 2 знаков половиной вверх: 0.2525 -> 0.25, 0.325 -> 0.33.
"""

from decimal import ROUND_HALF_UP, Decimal

REPORT_PLACES = Decimal('0.01')
DENOISE_DIGITS = 10


def report_round(value: float) -> float:
    denoised = round(float(value), DENOISE_DIGITS)
    return float(Decimal(repr(denoised)).quantize(REPORT_PLACES, rounding=ROUND_HALF_UP))


def format_metric(value: float) -> str:
    """Строка с двумя знаками для CSV"""
    return f"{report_round(value):.2f}"
