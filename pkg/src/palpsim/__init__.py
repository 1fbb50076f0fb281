"""Quasi-static 2D palpation simulator and dataset toolkit."""

from .bodygen import (
    BodyModel,
    LumpSpec,
    Mesh,
    apply_change,
    delaunay_triangulate,
    generate_body,
    perturb_materials,
)
from .changedetect import (
    auc_score,
    change_score,
    classify_change,
    confidence_map,
    score_map,
    size_change_score,
    stack_stats,
)
from .config import (
    BodyConfig,
    DatasetConfig,
    PressConfig,
    ProbeConfig,
    SolverConfig,
    load_config,
)
from .contact import ContactResult, evaluate_contact, probe_points
from .dataset import generate_dataset
from .elasticity import ElasticModel, lame_parameters
from .errors import (
    ConfigError,
    FormatError,
    LumpAbsentError,
    MeshError,
    PalpsimError,
    SimulationError,
)
from .forcemap import kde_map, terminal_stats, threshold_mask, tune_threshold
from .io import (
    read_image,
    read_manifest,
    read_trajectory,
    tree_hash,
    write_image,
    write_manifest,
    write_trajectory,
)
from .palpation import (
    Trajectory,
    Trial,
    collect_trial,
    press_trajectory,
    quasi_static_sweep,
    trajectory_angles,
)
from .raster import (
    GroundTruthImage,
    com_error,
    f1_class,
    f1_macro,
    lump_com,
    lump_size,
    rasterize_body,
    size_error,
)
from .solver import SolveResult, SolverState, adam_step, init_state, solve_equilibrium

__version__ = "0.1.0"
