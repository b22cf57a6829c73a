"""Average-value sampling on the Sierpinski gasket and its side-3 variant.

Builds the vertex and cell graph approximations, runs spectral decimation
between levels, constructs complete eigenbases, reconstructs bandlimited
functions from cell averages, and measures the sampling-function statistics
and blowup sequences that the boundedness conjectures are about.
"""

from .geometry import SG, SG3, enumerate_cells, cell_corners, ifs_apply
from .graphs import (
    build_beta,
    build_gamma,
    build_xi,
    build_zeta,
    dense_spectrum,
    laplacian,
)
from .decimation import (
    EigenFunction,
    Lineage,
    average_down,
    continue_to_level,
    eigenvalue_down,
    eigenvalue_up,
    extend_beta,
    extend_gamma,
)
from .eigenbasis import bandlimited_basis, beta_neumann_basis, gamma_basis, verify_basis
from .sampling import (
    BandlimitedFunction,
    SamplingStats,
    continuous_average,
    discrete_average,
    reconstruct,
    sampling_function,
    table1,
)
from .blowups import BlowupSampler, blowup_sampler, conjecture_metrics
from .sg3 import (
    fit_laplacian_identity,
    negative_result_check,
    verify_xi_decimation,
    xi_relation,
    zeta_relation,
)

__version__ = "0.1.0"
