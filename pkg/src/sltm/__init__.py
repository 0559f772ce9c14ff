"""Sidelobe time-modulated (SLTM) antenna array simulation toolkit."""

__version__ = "0.1.0"

from .array_model import (AngularResponse, ArrayGeometry, IsotropicPattern, Mode, ModeSet,  # noqa: F401
                          TabulatedPattern, angular_response, array_factor, canonical_mode_set,
                          conventional_mode_set, load_pattern_table, steering_phases)
from .errors import (ConfigurationError, ConvergenceError, DimensionError,  # noqa: F401
                     InvalidGeometryError, SltmError, ValidationError)
from .sequence import (ChipDistribution, ChipMoments, SltmSequence, chip_moments,  # noqa: F401
                       chips_to_waveform, empirical_proportions, extend_and_shuffle,
                       optimize_sequence)
from .spectral import Spectrum, analytic_chip_psd, periodogram_psd, to_db  # noqa: F401
