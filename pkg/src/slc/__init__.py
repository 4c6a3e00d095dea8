"""slc: specification-driven concolic test generation for heap programs.

Pipeline: parse a separation-logic precondition and a goto-style
intermediate-language program, generate valid test inputs by bounded
predicate unfolding plus heap satisfiability solving, then run the inputs
concretely while growing a constraint tree whose unexplored branches are
solved for further inputs until the reachable branches are covered.
"""

__version__ = "0.1.0"
