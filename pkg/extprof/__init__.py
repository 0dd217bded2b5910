"""
extprof: classification, threshold search and tail asymptotics for the
extinction profiles of the singular p-Laplacian equation
(|f'|^{p-2} f')' + f - |f'|^{p-1} = 0, f(0) = a, f'(0) = 0, 1 < p < 2.
"""

__version__ = '1.0.0'
