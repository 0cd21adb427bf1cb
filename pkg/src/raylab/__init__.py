"""raylab: a deterministic CPU ray tracing engine.

Two-level BVH acceleration, a programmable ray pipeline with payloads,
Whitted-style shading with reflection/refraction/shadows, image-space
post-processing, COLLADA/JSON asset loading, a scene graph, ray-traced 3D
UI widgets, a headless CLI, and a local render service.
"""

__version__ = "0.1.0"
