"""Exception types raised across the package."""


class LindbladLearnError(Exception):
    """Base class for all package errors."""


class NonRealStructureConstant(LindbladLearnError):
    pass


class BadNormalization(LindbladLearnError):
    pass


class NonHermitianKossakowski(LindbladLearnError):
    pass


class DenseTooLarge(LindbladLearnError):
    pass


class TruncationOverflow(LindbladLearnError):
    pass


class NonPhysicalState(LindbladLearnError):
    pass


class DivergedLoss(LindbladLearnError):
    pass


class ConfigError(LindbladLearnError):
    """Invalid or inconsistent run configuration."""
