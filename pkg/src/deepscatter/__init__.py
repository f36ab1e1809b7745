"""Deep scattering transform for audio signals."""
from .signal import RealSignal, ComplexSignal, Spectrum
from .filterbank import FilterBank, build_morlet_bank, littlewood_paley, dual_filters
from .scattering import (ScatteringConfig, ScatteringPath, ScatteringTransform,
                         default_banks, scatter, scattering, energy_decomposition)

__version__ = "0.1.0"
