"""Two-axis evaluation of AI tutor feedback: pedagogy rubric and student uptake."""

__version__ = "0.1.0"
