#!/usr/bin/env python3
"""
errors.py

Exception hierarchy shared by the kernels, tools and pipelines.

Validation problems derive from ValueError and numeric problems from
ArithmeticError so callers can catch either the specific class or the
built-in family. The CLI maps the families onto exit codes.

License: GPL-3.0
"""

from typing import Optional, Sequence, Tuple


class DwdtError(Exception):
    """Base class for every error raised by this package."""


class DegeneratePairError(DwdtError, ValueError):
    """Two weighted points coincide, so no bisector exists."""


class DegenerateTriangleError(DwdtError, ValueError):
    """Three points are collinear within tolerance."""

    def __init__(self, message: str, determinant: float) -> None:
        super().__init__(message)
        self.determinant = determinant


class AmbiguousConfigurationError(DwdtError, ValueError):
    """A vertex lies on the power circle of a triple (within tolerance)."""

    def __init__(self, message: str, tuple_: Tuple[int, ...], margin: float) -> None:
        super().__init__(message)
        self.tuple = tuple_
        self.margin = margin


class NumericFailure(DwdtError, ArithmeticError):
    """A differentiable primitive produced a non-finite value."""

    def __init__(self, message: str, primitive: str, snapshot=None) -> None:
        super().__init__(message)
        self.primitive = primitive
        # last good WeightedPointSet, filled in by the optimizer
        self.snapshot = snapshot


class OutsideDomainError(DwdtError, ValueError):
    """A 2D query lies outside the parameter domain."""

    def __init__(self, message: str, point=None, nearest=None) -> None:
        super().__init__(message)
        self.point = point
        self.nearest = nearest


class InvalidPatchError(DwdtError, ValueError):
    """A UV patch is non-manifold, inverted or otherwise unusable."""


class EmptyTriangulationError(DwdtError, ValueError):
    """All inclusion scores vanished."""


class MeshFormatError(DwdtError, ValueError):
    """Malformed mesh file."""

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None) -> None:
        location = ""
        if path is not None:
            location = f"{path}:{line_number}: " if line_number is not None else f"{path}: "
        super().__init__(location + message)
        self.path = path
        self.line_number = line_number


class FieldFormatError(MeshFormatError):
    """Malformed per-vertex field table."""


class UndefinedNormalizationError(DwdtError, ValueError):
    """A size distribution is constant, so standardization is undefined."""


class ConfigurationError(DwdtError, ValueError):
    """Invalid or incomplete run configuration."""


class BoundaryViolationError(DwdtError, ValueError):
    """Optimized vertices ended outside the patch boundary."""

    def __init__(self, message: str, vertices: Sequence[int]) -> None:
        super().__init__(message)
        self.vertices = list(vertices)
