"""Binary Cantor sets built from dynamical proportions.

Modules: ``words`` (codings and the gap order), ``proportions`` (the
cocycle Psi), ``cantor`` (gap tables and the embedding), ``ifs``
(pseudo-affine branch synthesis), ``families`` (the case (a) and case (b)
examples), ``analysis`` (Livsic, chi and linearization diagnostics),
``transfer`` (the tripling map and its Ruelle operator) and ``cli``.
"""

__version__ = "0.1.0"
