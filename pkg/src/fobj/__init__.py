"""Label-free 3D object discovery on point clouds.

A superpoint-merging agent trained with policy-gradient RL against two
annotation-free reward signals: geometric center consistency and a semantic
consistency cut. Discovered masks are evaluated with the class-agnostic AP
protocol.
"""

__version__ = "0.1.0"
