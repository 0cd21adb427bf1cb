"""Exception hierarchy for the engine.

Every error raised by engine code derives from EngineError so callers can
catch one type at API boundaries (CLI, service) and map it to diagnostics.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class SingularTransformError(EngineError):
    """A transform that must be invertible is singular."""


class EmptyGeometryError(EngineError):
    """A mesh with no triangles was handed to the BVH builder."""


class UnknownReferenceError(EngineError):
    """A reference (blas id, instance id, geometry url) does not resolve."""


class DuplicateIdError(EngineError):
    """Two instances or widgets share an id that must be unique."""


class PayloadOverflowError(EngineError):
    """A ray payload exceeds the configured byte budget."""


class PipelineValidationError(EngineError):
    """Dispatch aborted because validation produced diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class AssetParseError(EngineError):
    """An asset file could not be parsed; carries a line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class UnsupportedFeatureError(AssetParseError):
    """The asset uses a feature outside the supported subset."""


class DuplicateDefinitionError(EngineError):
    """The same name is defined twice in one document set."""


class FieldRangeError(EngineError):
    """A field value is outside its allowed range; names the field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownParentError(EngineError):
    """A material extends a parent that does not exist."""


class InheritanceCycleError(EngineError):
    """Material inheritance forms a cycle; carries the cycle members."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("inheritance cycle: " + " -> ".join(self.cycle))


class MaterialConstraintError(EngineError):
    """A resolved material violates a cross-field constraint."""


class ResourceNotFoundError(EngineError):
    """A requested resource file does not exist."""


class UnknownEntityError(EngineError):
    """An entity id is stale or was never part of the scene."""


class DuplicateNameError(EngineError):
    """Two siblings in the scene tree share a name."""


class UnknownMaterialError(EngineError):
    """An entity references a material name that did not resolve."""


class UnknownWidgetError(EngineError):
    """A widget id does not exist in the built UI."""


class NonFinitePixelError(EngineError):
    """A framebuffer pixel is NaN or infinite; names the coordinates."""

    def __init__(self, x, y):
        self.x = x
        self.y = y
        super().__init__(f"non-finite pixel at ({x}, {y})")
