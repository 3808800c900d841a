"""Moving-front reaction-diffusion-advection problems: asymptotics, forward solver, coefficient recovery."""
from .asymptotics import AsymptoticSolution, composite_u0, inner_correction, layer_bounds, transition_curve_zero
from .config import load_spec, spec_from_text
from .forward import GridSolution, detect_transition, solve_forward, transition_track
from .inverse import MeasurementKind, MeasurementSet, ip1_recover, ip2_recover, synthesize_noise
from .model import BoundaryData, CoefficientField, ProblemSpec, SpaceTimeGrid
from .regularize import PenalizedFitProblem, choose_epsilon_discrepancy, fit_penalized

__version__ = "0.1.0"
