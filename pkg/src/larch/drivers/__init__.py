"""
Implementations of L{larch.boundaries.ReplicationDriver}.
"""
