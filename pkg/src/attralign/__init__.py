"""Entity alignment across knowledge graphs via attribute-typed subgraph channels."""

__version__ = "0.1.0"
