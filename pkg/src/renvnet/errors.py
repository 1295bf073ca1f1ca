"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the CLI can emit
structured error objects.
"""


class RenvnetError(Exception):
    code = "error"

    def to_dict(self):
        return {"type": type(self).__name__, "code": self.code, "message": str(self)}


class ValidationError(RenvnetError, ValueError):
    code = "invalid_input"


class SchemaError(ValidationError):
    code = "schema_violation"

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path

    def to_dict(self):
        d = super().to_dict()
        d["path"] = self.path
        return d


class DimensionError(ValidationError):
    code = "dimension_mismatch"


class RowSumError(ValidationError):
    code = "row_sum"

    def __init__(self, row, total, what="matrix"):
        super().__init__(f"row {row} of {what} sums to {total!r}, expected 1")
        self.row = row
        self.total = total

    def to_dict(self):
        d = super().to_dict()
        d["row"] = self.row
        return d


class NotIrreducible(RenvnetError):
    code = "not_irreducible"

    def __init__(self, message, classes=()):
        super().__init__(message)
        self.classes = [list(c) for c in classes]

    def to_dict(self):
        d = super().to_dict()
        d["closed_classes"] = self.classes
        return d


class SingularSystem(RenvnetError):
    code = "singular_system"


class AllRejecting(ValidationError):
    code = "all_rejecting"


class ZeroNormalizer(RenvnetError):
    code = "zero_normalizer"


class ZeroAcceptance(ValidationError):
    code = "zero_acceptance"


class SingularTraffic(SingularSystem):
    code = "singular_traffic"


class NotErgodic(RenvnetError):
    code = "not_ergodic"


class NotReversible(RenvnetError):
    code = "not_reversible"


class InvalidFrozenLaw(ValidationError):
    code = "invalid_frozen_law"


class NotAGenerator(RenvnetError):
    code = "not_a_generator"


class HypothesisViolated(RenvnetError):
    code = "hypothesis_violated"


class AllBlockedWarning(UserWarning):
    """Every node has capacity factor zero; only the exterior accepts."""
