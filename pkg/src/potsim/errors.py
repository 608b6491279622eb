"""Exception types shared across the toolkit."""


class PotsimError(Exception):
    """Base class for all toolkit errors."""


# profile extraction
class AmbiguousTopology(PotsimError):
    def __init__(self, message, coords=None):
        super().__init__(message)
        self.coords = coords


class InvalidWindow(PotsimError):
    pass


class AxisCrossing(PotsimError):
    pass


# meshing
class DegenerateCurve(PotsimError):
    pass


class EmptyMesh(PotsimError):
    pass


# fracture
class InvalidRanges(PotsimError):
    pass


# rendering
class UnknownClass(PotsimError):
    pass


class DegenerateScene(PotsimError):
    pass


# detector
class ImageTooSmall(PotsimError):
    pass


class NoPotFound(PotsimError):
    pass


# dataset
class UnknownForm(PotsimError):
    pass


class InsufficientVessels(PotsimError):
    pass


# metrics
class EmptyClassInTest(PotsimError):
    pass


class TooFewSplits(PotsimError):
    pass


class NoSolution(PotsimError):
    pass
