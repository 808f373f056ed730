"""Text-to-SVG pipeline core."""

from ._svgsmith import (
    Error,
    curvature_loss,
    emd,
    generate,
    lambda3_at,
    normalize,
    optimize,
    paths,
    render,
    validate,
)

__all__ = [
    "Error",
    "curvature_loss",
    "emd",
    "generate",
    "lambda3_at",
    "normalize",
    "optimize",
    "paths",
    "render",
    "validate",
]
