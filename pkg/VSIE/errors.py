"""
Exception hierarchy shared by every VSIE component
"""
from typing import Optional


class VSIEError(Exception):
    """Base class for solver errors"""


class ArgumentError(VSIEError, ValueError):
    """Invalid argument (shape, range, layout)"""


class GeometryError(VSIEError):
    """Invalid or inconsistent geometry"""


class SingularityError(VSIEError):
    """Kernel evaluated at coincident points"""


class AssemblyError(VSIEError):
    """Assembled operator violates a structural property"""


class CompressionError(VSIEError):
    """Cross approximation stopped before reaching its tolerance"""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class ConvergenceError(VSIEError):
    """Iterative solve did not converge"""

    def __init__(self, message: str, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


class SceneError(VSIEError):
    """Scene document rejected, with key and line context"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        context = []
        if key is not None:
            context.append(f"key '{key}'")
        if line is not None:
            context.append(f"line {line}")
        suffix = f" ({', '.join(context)})" if context else ""
        super().__init__(f"{message}{suffix}")
