"""Spectral fractional Laplacian kernels and solvers on model domains."""

from ._backend import NAME as BACKEND
from .conformance import ConformanceReport, run_conformance
from .dirichlet import (BoundaryMeasure, GreenOperator, InteriorMeasure, boundary_trace,
                        constant_boundary, lp_threshold_scan, parse_measure_file, solve_linear,
                        weak_residual)
from .domain import SpectralDomain, build_domain
from .heat import HeatKernelEvaluator
from .kernels import KernelEvaluator, build_evaluator
from .large import LargeRunConfig, build_supersolution, solve_datum_j, solve_large
from .numerics import (Grid, GridFunction, RateFit, TimeQuadrature, boundary_graded_grid,
                       fit_boundary_rate)
from .semilinear import kato_check, nonlinearity, power, solve_semilinear
from .spectral import (Bump, SpectralField, TestFunction, apply_pointwise, apply_semigroup,
                       apply_spectral, bump_family, inverse_apply, project)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Bump", "BoundaryMeasure", "ConformanceReport", "Grid", "GridFunction",
    "GreenOperator", "HeatKernelEvaluator", "InteriorMeasure", "KernelEvaluator",
    "LargeRunConfig", "RateFit", "SpectralDomain", "SpectralField", "TestFunction",
    "TimeQuadrature", "apply_pointwise", "apply_semigroup", "apply_spectral",
    "boundary_graded_grid", "boundary_trace", "build_domain", "build_evaluator",
    "build_supersolution", "bump_family", "constant_boundary", "fit_boundary_rate",
    "inverse_apply", "kato_check", "lp_threshold_scan", "nonlinearity", "parse_measure_file",
    "power", "project", "run_conformance", "solve_datum_j", "solve_large", "solve_linear",
    "solve_semilinear", "weak_residual",
]
