"""rp-FEM solvers and diagnostics for fourth-order singularly perturbed
problems on spectral boundary layer meshes."""

__version__ = "0.1.0"
