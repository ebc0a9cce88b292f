"""steadytree: the steady state cluster, its growth process, and the
associated forest-fire models.

Subpackages follow the functional split: exact rational enumeration
(:mod:`steadytree.exact_enum`), closed-form laws
(:mod:`steadytree.closed_forms`), exact samplers
(:mod:`steadytree.samplers`), trajectory simulators
(:mod:`steadytree.growth`), the mean field forest fire
(:mod:`steadytree.meanfield`), the truncated infinite forest fire
(:mod:`steadytree.infinite_ff`), and the statistical harness
(:mod:`steadytree.stattest`).
"""

__version__ = "0.1.0"
