"""spinstack: voxel rendering, rotation commands, and mental-rotation evaluation."""

__version__ = "0.1.0"
