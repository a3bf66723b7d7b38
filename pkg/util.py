import os
import math
import numbers
import logging
import commentjson as cjson

logger = logging.getLogger(__name__)

# Clamps that move a value by more than this are counted and logged.
CLAMP_DUST = 1e-9

# Process-local count of clamps beyond CLAMP_DUST. Estimations snapshot it
# before and after to report their own events.
clamp_events = {'count': 0}


class InputError(ValueError):
    """Out-of-range or malformed input."""


class DegenerateInputError(InputError):
    """Reference set that produces a zero-trace virtual state."""


class EstimationError(Exception):
    """Estimation refused, e.g. because S is singular or ill-conditioned."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class NoSignalError(EstimationError):
    """An error rate was requested with a zero denominator."""


def script_relative(file_path):
    """Get absolute path, relative to this script's location."""
    script_path = os.path.dirname(os.path.realpath(__file__))
    return os.path.join(script_path, file_path)


def load_config(filename):
    """Load a commented JSON file."""
    try:
        with open(filename, 'rb') as f:
            return cjson.load(f)
    except OSError as e:
        raise InputError(f"Can't read config {filename}: {e}") from e
    except (cjson.JSONLibraryException, ValueError) as e:
        raise InputError(f'Malformed config {filename}: {e}') from e


def check_real(name, value):
    """Raise InputError unless value is a finite real number (bools excluded)."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise InputError(f'{name} must be a number, got {value!r}')
    if not math.isfinite(value):
        raise InputError(f'{name} must be finite, got {value!r}')
    return float(value)


def check_mapping(name, value):
    if not isinstance(value, dict):
        raise InputError(f'{name} must be an object, got {value!r}')
    return value


def check_probability(name, value):
    """Raise InputError unless value is a real number in [0, 1]."""
    if isinstance(value, (str, bytes)):
        raise InputError(f'{name} must be a number, got {value!r}')
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InputError(f'{name} must be a number, got {value!r}') from None
    # NaN fails the comparison as well
    if not 0.0 <= value <= 1.0:
        raise InputError(f'{name} must lie in [0, 1], got {value!r}')
    return value


def clamp_probability(value, what='value'):
    """Clamp into [0, 1]. Moves larger than CLAMP_DUST are counted and logged."""
    value = float(value)
    clamped = min(max(value, 0.0), 1.0)
    if abs(clamped - value) > CLAMP_DUST:
        clamp_events['count'] += 1
        logger.warning(f'Clamped {what} from {value!r} to {clamped!r}')
    return clamped


def clamp_event_count():
    return clamp_events['count']


def listify(func):
    def inner(*args, **kwargs):
        return list(func(*args, **kwargs))
    return inner
