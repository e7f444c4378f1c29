"""Control-affine discrete elastic rod dynamics for a planar soft arm."""

__version__ = "0.1.0"
