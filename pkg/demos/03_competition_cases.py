"""Admissibility of the two-species competition system for every boundary pairing.

Dirichlet (or Robin) fields contribute a Poincare margin mu; Neumann fields
need a shift, which requires the linear coefficient to be negative. The
mixed case also needs the oscillation of the Neumann coefficient to stay
below 2 mu.
"""
import numpy as np

from delaystab import certificates as cert

x = np.linspace(0.0, np.pi, 101)
a1 = -0.3 + 0.2 * np.cos(x)
a2 = -0.6 - 0.3 * np.sin(x)
for case in (1, 2, 3, 4):
    rep = cert.admissibility_competition(case, a1, a2, mu1=1.0, mu2=1.0)
    failed = [c.name for c in rep.conditions if not c.satisfied]
    shifts = {k: round(v, 4) for k, v in rep.constants.items() if k.startswith("eps")}
    print(f"case {case} {cert.CASES[case]}: admissible = {rep.admissible} "
          f"shifts = {shifts} failed = {failed}")

# a Neumann coefficient meeting the three sign/spread conditions but oscillating too much
wide = np.linspace(-10.0, -5.0, 11)
rep = cert.admissibility_competition(2, np.zeros(11), wide, mu1=1.0)
print("\na2 in [-10, -5], mu1 = 1:",
      {c.name: c.satisfied for c in rep.conditions})
