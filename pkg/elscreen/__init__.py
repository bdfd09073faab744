"""Feature screening for multivariate responses by empirical likelihood."""
try:
    import elscreen._version as _version
    __version__ = _version.version
except ImportError:
    __version__ = None
from elscreen._abc import Settings, ThresholdRule
from elscreen.conditional import (
    conditional_screen,
    fit_conditioning,
    two_step_screen)
from elscreen.screening import (
    Dataset,
    ScreeningResult,
    make_dataset,
    screen)
