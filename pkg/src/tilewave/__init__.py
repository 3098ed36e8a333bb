"""tilewave: simulator of software-programmable indoor wireless environments.

Subsystems: scene geometry and tile grids (`scene`), EM-function catalog and
switch-matrix lookup synthesis (`emfunc`), shooting-and-bouncing-rays
propagation (`raytrace`), channel metrics (`channel`), configuration search
and resource allocation (`optimize`, `ga`), tile control network
(`controlnet`), experiment runner (`cli`).
"""

from .channel import (
    EmptyProfileError,
    PowerDelayProfile,
    ReceivedSignal,
    delay_spread,
    max_excess_delay,
    received_signal,
    total_power_dbm,
)
from .controlnet import (
    AddressingError,
    DeliveryError,
    ParameterError,
    TileNetwork,
    build_grid_network,
    build_tile_network,
)
from .emfunc import (
    EMFunction,
    FunctionKind,
    LookupTable,
    ReflectionPattern,
    SearchMethod,
    SwitchMatrix,
    TileFunction,
    array_pattern,
    populate_lookup,
    quantize_function,
)
from .ga import GAParams, ga_run
from .optimize import (
    Allocation,
    EmptyProblemError,
    FitnessReport,
    MultiUserProblem,
    allocate_multiuser,
    fitness_case_a,
    fitness_case_b,
    optimize_case_a,
    optimize_case_b,
)
from .raytrace import (
    EnvConfiguration,
    GrazingIncidenceError,
    PropagationPath,
    RadioParams,
    dipole_gain,
    friis_loss_db,
    launch_rays,
    reflect_dir,
)
from .scene import (
    Hit,
    InvalidAngleError,
    Material,
    Scene,
    Surface,
    Tile,
    build_corridor_floorplan,
    virtual_normal,
)

__version__ = "0.1.0"
