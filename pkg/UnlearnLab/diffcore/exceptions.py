"""
Исключения ядра вычислений.
"""


class ShapeError(ValueError):
    """Несогласованные формы операндов"""

    def __init__(self, op, left, right):
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"{op}: shape mismatch {self.left} vs {self.right}")


class DomainError(ValueError):
    """Аргумент вне области определения (log от неположительного и т.п.)"""


class GraphError(RuntimeError):
    """Некорректное использование графа вычислений"""
