"""Exception types shared across the pipeline."""


class ConfigError(ValueError):
    """A configuration value violates one of the documented bounds."""


class DatasetError(Exception):
    """Base for everything that can go wrong while loading a dataset."""


class OutOfRangeError(DatasetError, IndexError):
    """Frame index past the end of the manifest."""


class MissingFileError(DatasetError):
    """A file named by the manifest does not exist."""


class DimensionMismatchError(DatasetError):
    """A raster's dimensions disagree with the manifest intrinsics."""


class DecodeError(DatasetError):
    """A raster file exists but cannot be decoded."""


class SceneError(ValueError):
    """A synthetic scene spec is invalid or unrenderable."""


class InvalidDepthError(ValueError):
    """A depth value of zero or less was used where a valid depth is required."""


class InvalidSeedError(ValueError):
    """Mask extraction was seeded on an invalid or unlabeled pixel."""
