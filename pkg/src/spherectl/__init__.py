"""Second-order stabilization on the n-sphere around star-shaped obstacles.

The closed loop tracks a projected desired field with a damping gain that
grows like 1/d near the unsafe set.  Modules:

``geometry``   sphere primitives (projection, angles, tangent bases)
``obstacle``   star obstacles, distances, closest points, separations
``planner``    desired field and its Jacobian
``controller`` dynamic-damping control law and Lyapunov function
``sim``        RK4 closed-loop simulation with runtime monitors
``attitude``   unit-quaternion rigid-body specialization
``analysis``   equilibrium search and closed-loop eigenstructure
``scenario``   JSON scenario loading and validation
``cli``        the ``spherectl`` command
"""

from .controller import ControllerParams, beta, control, lyapunov_v
from .errors import (
    BoundaryContactError,
    ConfigurationError,
    GeodesicUndefinedError,
    InfeasibleStateError,
    InputError,
    NearBoundaryJacobianError,
    NumericalBlowupError,
    ScenarioValidationError,
    SphereCtlError,
)
from .obstacle import ObstacleField, RadialProfile, StarObstacle
from .planner import PlannerParams, desired_field, jacobian_jd, nu_d
from .scenario import Scenario, load_scenario, load_shipped
from .sim import SimConfig, SimState, Trajectory, batch_simulate, simulate

__version__ = "0.1.0"
