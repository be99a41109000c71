"""
Electromagnetic kernels: geometry, Green's function and matrix entry oracles
"""
