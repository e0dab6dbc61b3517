"""
Numerical kernels: dense linear algebra and proximal operators.
"""
