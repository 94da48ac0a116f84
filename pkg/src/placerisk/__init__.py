"""placerisk: damaging-collision risk prediction for robot object placing.

Subpackages:

- ``gradcore``  reverse-mode autodiff tensors, ops, Adam, checkpoints
- ``model``     the dual-attention RGBD classifier and its ablation variants
- ``placesim``  synthetic scene generation, quasi-static physics, rendering
- ``depthproc`` surface normals, depth colorization, ROI crop/resize
- ``planedet``  plane-detection free-area baseline
- ``harness``   dataset IO, training/evaluation, ablations, CLI
"""

__version__ = "0.1.0"
