"""Exact verification of local Hecke-algebra identities.

The package implements, with exact arithmetic throughout:

* a sparse Laurent-polynomial scalar ring over Q modulo binomial relations
  (`localhecke.ring`),
* p-local matrices over Q and Q(i) with canonical coset forms for the unitary
  similitude group of degree 2, its Klingen parabolic, GL4 and a middle
  parabolic of GL4 (`localhecke.gaussian`, `localhecke.pmatrix`),
* double-coset decompositions, Hecke products, parabolic embeddings, Satake
  maps and the split-prime transport (`localhecke.hecke`, `localhecke.satake`,
  `localhecke.transport`, `localhecke.fastscan`),
* a formal graded Fourier-Jacobi module used to verify rationality statements
  (`localhecke.fj`),
* the identity suites and a command-line runner (`localhecke.identities`,
  `localhecke.cli`).
"""

__version__ = "0.1.0"
