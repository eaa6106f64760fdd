"""wavelab: SBP-SAT discretizations of the second-order wave equation with
convergence experiments and a numerical normal-mode accuracy analyzer."""

__version__ = "0.1.0"
