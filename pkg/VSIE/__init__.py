"""
Hybrid volume-surface integral equation solver
Tensor compression, electromagnetic kernels, matrix-free operators and GMRES solves
"""
__version__ = "1.0.0"
