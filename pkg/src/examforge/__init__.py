"""examforge: batch management of programming-exam assignments.

Provision per-student repositories, seed the starter project, distribute
the acceptance-test bundle, collect deadline-filtered submissions, run the
suite in an isolated parallel worker pool, grade from pass fraction and
code churn, and report process-compliance statistics.
"""

__version__ = "0.1.0"
