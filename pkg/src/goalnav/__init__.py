"""goalnav: image-goal navigation in a deterministic gridworld.

A dual-branch convolutional encoder fuses goal and observation features
through spatial-channel attention with decoupled affine weights, trains its
shallow stages against its deep ones with a parameter-free self-distillation
loss, aggregates recent observations into an image scene graph, and drives a
recurrent actor-critic trained with PPO.
"""

__version__ = "0.1.0"
