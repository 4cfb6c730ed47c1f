"""Differentiable Gaussianization layers and reparameterized inverse problems.

A numpy toolkit that Gaussianizes latent tensors through data-dependent
differentiable layers (whitening, ICA, Yeo-Johnson, Lambert tail correction,
standardization) and uses them to reparameterize regularized inversion for
deblurring, masked-FFT compressive sensing, and eikonal traveltime tomography.
"""

from .errors import (
    BracketError,
    ConfigError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    EvaluationError,
    FormatError,
    GlayersError,
    NumericError,
    PartitionError,
    RankError,
    ShapeError,
    SolverError,
    TapeError,
    VarianceError,
)
from .autodiff import Tape, Var, fd_convergence_test
from .gtns import read_gtns, write_gtns
from .partition import PatchPartition
from .pipeline import (
    GaussianityDiagnostics,
    GaussianizeConfig,
    PipelineStage,
    Stage,
    diagnostics,
    gaussianity_gates,
    gaussianize_pipeline,
)
from .whiten import iterative_whiten, zca_whiten
from .ica import ica_fit, ica_layer
from .marginal import (
    fit_lambda,
    kurtosis,
    lambert_layer,
    skewness,
    solve_delta,
    standardize,
    yeo_johnson_forward,
    yeo_johnson_layer,
)
from .solvers import Bracket, brent_minimize, brent_root, lambert_w0, w_delta
from .reparam import SkewParam, cayley, glayer_reparam, make_reparam, spherical
from .models import (
    CsmriModel,
    DeblurModel,
    ToyGenerator,
    add_noise_gaussian,
    add_noise_snr,
    make_mask,
    traveltime_noise,
    velocity_map,
)
from .eikonal import EikonalGeometry, EikonalModel, eikonal_adjoint, eikonal_solve, make_acquisition
from .optimize import OptimizerConfig, adam, lbfgs
from .metrics import psnr, ssim
from .invert import InversionConfig, parse_config, run_inversion

__version__ = "0.1.0"
