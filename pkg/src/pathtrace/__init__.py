"""pathtrace: robot trajectories to 2D image-plane paths and back.

Core pieces: camera geometry (projection, PnP), the normalized path
representation and its transforms, deterministic overlay rendering, the
prompt/answer wire format, the dataset conversion pipeline, a toy
hierarchical-execution harness, and a ranking-study service.
"""

__version__ = "0.1.0"
