"""fmpairs: frequency-multiplexed photon-pair source and demultiplexer toolkit.

Subpackages
-----------
optics       forward model of the etalon demultiplexer and filter chain
calibration  wavelength <-> position <-> channel mapping
spectrum     comb model, demultiplexed spectra and linewidth fitting
source       stochastic time-tag generation for the pair source
tagio        time-tag stream containers and file formats
correlator   coincidence histograms, g2 estimators, correlation grids
cli          command-line front end (``fmpairs --help``)
"""

__version__ = "0.1.0"

from . import calibration, correlator, optics, source, spectrum, tagio  # noqa: F401
