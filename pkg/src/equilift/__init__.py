"""equilift: shift-equivariant construction of entire, meromorphic and
subharmonic functions with prescribed data, with numerical certificates."""

__version__ = "0.1.0"
