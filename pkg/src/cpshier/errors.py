"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class CpsHierError(Exception):
    """Base class for all domain errors raised by cpshier."""


# measure
class MeasureError(CpsHierError, ValueError):
    pass


class NegativeMass(MeasureError):
    pass


class NotNormalized(MeasureError):
    pass


class UnknownAtom(MeasureError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class SpaceMismatch(MeasureError):
    pass


class PartialMap(MeasureError):
    pass


class RationalFormatError(MeasureError):
    pass


# cps
class CPSError(CpsHierError, ValueError):
    pass


class EmptyConditioningEvent(CPSError):
    pass


class EmptyFamily(CPSError):
    pass


class DuplicateEvent(CPSError):
    pass


class ZeroMassCondition(CPSError):
    def __init__(self, event, message: str | None = None):
        self.event = event
        super().__init__(message or f"conditioning event {event} has zero prior mass")


class FamilyMismatch(CPSError):
    pass


class NotCylinderFamily(CPSError):
    pass


class InvalidCPS(CPSError):
    def __init__(self, report, message: str | None = None):
        self.report = report
        super().__init__(message or f"not a conditional probability system: {report}")


# structure
class StructureError(CpsHierError, ValueError):
    pass


class StructureSyntaxError(StructureError):
    """Malformed structure text. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        loc = f"line {line}: " if line is not None else ""
        super().__init__(f"{loc}{message}")


class DuplicateLabel(StructureSyntaxError):
    pass


class ValidationError(StructureError):
    """A structure failed validation; ``problems`` lists every finding."""

    def __init__(self, problems: list, line: int | None = None):
        self.problems = list(problems)
        self.line = line
        loc = f"line {line}: " if line is not None else ""
        body = "; ".join(str(p) for p in self.problems)
        super().__init__(f"{loc}{body}")


class BaseMismatch(StructureError):
    def __init__(self, component: str, left, right):
        self.component = component
        self.left = left
        self.right = right
        super().__init__(f"structures differ in {component}: {left} vs {right}")


class InvalidMorphism(StructureError):
    pass


# hierarchy
class HierarchyError(CpsHierError, ValueError):
    pass


class UnknownType(HierarchyError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class NonPositiveOrder(HierarchyError):
    pass
