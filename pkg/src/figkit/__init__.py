"""figkit: measure the figuration of map corpora.

The library quantifies how strongly a set of maps converges on shared
visual codes.  Maps are cut into small texels, each texel is described
by color moments, rotation-invariant binary patterns, and oriented
gradients; the per-feature distributions are scored with a multimodal
convergence coefficient, compared across classes with Pearson
correlation, laid out with t-SNE on a grid montage, and the package
also evaluates semantic segmentations and extrapolates score against
training-set size.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
