"""Relativistic beam dynamics with moment-averaged Lorentz connections.

Tracking of charged particles in external electromagnetic fields, ensemble
(kinetic) transport, the velocity-averaged affine connection that approximates
the Lorentz force for narrow bunches, validity diagnostics for the
kinetic-to-fluid reduction, and linear beam optics via the Jacobi equation.
"""

from . import geometry
from . import fields
from . import distribution
from . import connections
from . import dynamics
from . import analysis
from . import fluid
from . import beamline

__version__ = "0.1.0"
