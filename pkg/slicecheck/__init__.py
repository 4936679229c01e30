"""
slicecheck: intent-sliced, incremental data plane verification.

Each intent is checked on a slice of the network model that holds only the rules its
packets can reach. Slices are kept across updates and spread over a cluster of checkers.
"""

__version__ = "0.1.0"
