"""Simulator for UV proximity-printed dual-taper waveguides: aerial image and
resist development, finite-difference mode solving, semi-vectorial beam
propagation, and fiber-coupling loss analysis."""

from .geometry import (
    ExposureSetup,
    FiberSpec,
    FrustumGeometry,
    Grid2D,
    IndexMap,
    MaskPattern,
    fiber_index_map,
    frustum_index_map,
    local_gap,
    trapezoid_mask,
)
from .lithosim import (
    IntensityMap,
    ProfileClass,
    ResistProfile,
    aerial_image,
    angular_spectrum_propagate,
    classify_profile,
    develop,
    simulate_print,
    vertical_taper_angle,
)
from .modes import (
    FieldSlice,
    ModeProfile,
    elliptical_gaussian_source,
    fiber_lp01_analytic,
    solve_mode_fd,
    solve_modes_fd,
    solve_slab_mode_fd,
)
from .bpm import BpmSettings, PropagationResult, apply_pml, bpm_step, propagate
from .analysis import (
    LossBreakdown,
    SweepResult,
    end_to_end_loss,
    loss_db,
    overlap_efficiency,
    run_chain,
    tilt_gap_sweep,
    wavelength_sweep,
)

__version__ = "0.1.0"
