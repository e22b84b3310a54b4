"""Back-projection of 2D image features onto 3D point clouds.

Runs a (pluggable) 2D backbone over posed RGB-D frames, projects each 3D
point into every frame, keeps hits that pass the depth-agreement gate,
averages the gathered feature vectors, and writes the result in the
discovery engine's binary scene format.
"""

__version__ = "0.1.0"
