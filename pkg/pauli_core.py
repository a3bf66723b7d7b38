"""Reference-state construction and Bloch decomposition over {I, X, Z}.

Conventions used by every module in this repository:

* |0_X> = (|0_Z> + |1_Z>)/sqrt(2), |1_X> = (|0_Z> - |1_Z>)/sqrt(2).
* Nine-component Bloch vectors are indexed by PAULI_PAIRS:
  (I,I),(I,X),(I,Z),(X,I),(X,X),(X,Z),(Z,I),(Z,X),(Z,Z).
* Rows of S, and entries of yield tables, follow SETTING_PAIRS:
  (0_Z,0_Z),(0_Z,1_Z),(0_Z,0_X),(1_Z,0_Z),...,(0_X,0_X).
* Reference states have real amplitudes, so they carry no sigma_Y
  component and the {I, X, Z} restriction is exact.
* Eve's setting-independent factor |tau> is left out of every inner
  product.
"""
import math
import itertools
from dataclasses import dataclass
from functools import lru_cache
import numpy as np
import util

NORM_TOLERANCE = 1e-12
# p below this is treated as an empty virtual outcome
DEGENERATE_TRACE = 1e-14

PAULI_LABELS = ('I', 'X', 'Z')
PAULI = {
    'I': np.eye(2),
    'X': np.array([[0.0, 1.0], [1.0, 0.0]]),
    'Z': np.array([[1.0, 0.0], [0.0, -1.0]]),
}
PAULI_PAIRS = tuple(itertools.product(PAULI_LABELS, repeat=2))

SETTINGS = ('0_Z', '1_Z', '0_X')
Z_SETTINGS = ('0_Z', '1_Z')
SETTING_PAIRS = tuple(itertools.product(SETTINGS, repeat=2))
# Positions of (0_Z,0_Z), (0_Z,1_Z), (1_Z,0_Z), (1_Z,1_Z) in SETTING_PAIRS
ZZ_PAIR_INDICES = tuple(
    SETTING_PAIRS.index(pair) for pair in itertools.product(Z_SETTINGS, repeat=2)
)

# Rows are <j_X| written in the Z basis
X_BASIS_BRAS = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)

# Virtual X outcomes kept for Omega_ref; the other two are complementary
KEPT_OUTCOMES = ((0, 0), (1, 1))


def pauli_pair_operator(pair):
    """sigma_l (x) sigma_l' as a 4x4 matrix."""
    left, right = pair
    return np.kron(PAULI[left], PAULI[right])


PAULI_PAIR_OPERATORS = tuple(pauli_pair_operator(pair) for pair in PAULI_PAIRS)


def _freeze(array):
    array = np.array(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class QubitState:
    """Pure qubit state in the X-Z plane: amp0|0_Z> + amp1|1_Z>."""
    amp0: float
    amp1: float

    def __post_init__(self):
        for name in ('amp0', 'amp1'):
            value = getattr(self, name)
            if isinstance(value, complex) or not math.isfinite(value):
                raise util.InputError(f'{name} must be a finite real amplitude, got {value!r}')
        norm = self.amp0 ** 2 + self.amp1 ** 2
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise util.InputError(f'State ({self.amp0}, {self.amp1}) is not normalized, norm {norm!r}')

    def vector(self):
        return np.array([self.amp0, self.amp1])

    def density(self):
        v = self.vector()
        return np.outer(v, v)


@dataclass(frozen=True)
class ModulationErrors:
    """Phase-modulation deviations delta_1..3 in radians."""
    delta1: float = 0.0
    delta2: float = 0.0
    delta3: float = 0.0

    def __post_init__(self):
        for name in ('delta1', 'delta2', 'delta3'):
            value = getattr(self, name)
            if not abs(value) < math.pi / 2:
                raise util.InputError(f'|{name}| must be below pi/2, got {value!r}')

    @classmethod
    def uniform(cls, delta):
        return cls(delta, delta, delta)


@dataclass(frozen=True)
class SingleQubitBloch:
    s_i: float
    s_x: float
    s_z: float

    def as_array(self):
        return np.array([self.s_i, self.s_x, self.s_z])


@dataclass(frozen=True)
class TwoQubitBloch:
    """Coefficients s_{l,l'} in PAULI_PAIRS order."""
    s: tuple

    def __post_init__(self):
        assert len(self.s) == 9, f'expected 9 coefficients, have {len(self.s)}'

    def __getitem__(self, pair):
        return self.s[PAULI_PAIRS.index(tuple(pair))]

    def as_array(self):
        return np.array(self.s)


@dataclass(frozen=True, eq=False)
class VirtualEnsemble:
    """Kept virtual X outcomes (0,0) and (1,1) of the reference protocol.

    p_vir[k] is the trace of the unnormalized state, s_vir[k] the Bloch row
    of the normalized one and thetas[k] the normalized 4x4 operator.
    p_complement holds the discarded (0,1) and (1,0) weights.
    """
    p_vir: np.ndarray
    s_vir: np.ndarray
    thetas: np.ndarray
    p_complement: np.ndarray

    def __post_init__(self):
        assert self.p_vir.shape == (2,)
        assert self.s_vir.shape == (2, 9)
        assert self.thetas.shape == (2, 4, 4)
        total = self.p_vir.sum() + self.p_complement.sum()
        assert abs(total - 1.0) < 1e-12, f'virtual outcome weights sum to {total!r}'


def make_reference_state(setting, deltas):
    """Reference state for one of the settings 0_Z, 1_Z, 0_X."""
    if setting == '0_Z':
        half = deltas.delta1 / 2
        return QubitState(math.cos(half), math.sin(half))
    elif setting == '1_Z':
        half = deltas.delta2 / 2
        return QubitState(math.sin(half), math.cos(half))
    elif setting == '0_X':
        angle = math.pi / 4 + deltas.delta3 / 2
        return QubitState(math.sin(angle), math.cos(angle))
    else:
        raise util.InputError(f'Unknown setting {setting!r}, expected one of {SETTINGS}')


@lru_cache(maxsize=256)
def make_reference_states(deltas):
    """The three reference states of one side, in SETTINGS order."""
    return tuple(make_reference_state(setting, deltas) for setting in SETTINGS)


def _check_normalized(state):
    norm = state.amp0 ** 2 + state.amp1 ** 2
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise util.InputError(f'State {state} is not normalized, norm {norm!r}')


def bloch_vector(state):
    _check_normalized(state)
    a, b = state.amp0, state.amp1
    return SingleQubitBloch(1.0, 2 * a * b, a * a - b * b)


def two_qubit_bloch(state_a, state_b):
    """Product-state Bloch coefficients s_{l,l'} = s_l * s_l'."""
    outer = np.outer(bloch_vector(state_a).as_array(), bloch_vector(state_b).as_array())
    return TwoQubitBloch(tuple(float(x) for x in outer.ravel()))


def bloch_from_operator(operator):
    """Tr[operator sigma_l (x) sigma_l'] for every pair, PAULI_PAIRS order."""
    return np.array([
        np.trace(operator @ pauli_op).real
        for pauli_op in PAULI_PAIR_OPERATORS
    ])


def build_s_matrix(ref_a, ref_b):
    """9x9 matrix whose rows are the Bloch vectors of each setting pair.

    ref_a and ref_b hold the three reference states of each side in
    SETTINGS order; rows follow SETTING_PAIRS.
    """
    if len(ref_a) != 3 or len(ref_b) != 3:
        raise util.InputError(f'Need three reference states per side, have {len(ref_a)} and {len(ref_b)}')
    rows = [
        two_qubit_bloch(ref_a[SETTINGS.index(a)], ref_b[SETTINGS.index(b)]).as_array()
        for a, b in SETTING_PAIRS
    ]
    return _freeze(rows)


def build_virtual(ref_a_z, ref_b_z):
    """Virtual X-basis ensemble of the reference protocol.

    Builds |Psi_vir> = 1/2 sum_{j,s} |j_Z, s_Z>_AB |phi_j>_a |phi_s>_b, projects
    the ancillas AB onto |j_X, s_X> and keeps the resulting unnormalized
    states of ab.
    """
    if len(ref_a_z) != 2 or len(ref_b_z) != 2:
        raise util.InputError('Need the 0_Z and 1_Z reference states of each side')
    # Axes: ancilla A, ancilla B, photon a, photon b
    psi_vir = np.zeros((2, 2, 2, 2))
    for j, s in itertools.product(range(2), repeat=2):
        psi_vir[j, s] = 0.5 * np.outer(ref_a_z[j].vector(), ref_b_z[s].vector())

    # Axes: X outcome of A, X outcome of B, photon a, photon b
    projected = np.einsum('xj,ys,jsab->xyab', X_BASIS_BRAS, X_BASIS_BRAS, psi_vir)

    p_all = {}
    thetas = {}
    for x, y in itertools.product(range(2), repeat=2):
        v = projected[x, y].reshape(4)
        theta_hat = np.outer(v, v.conj())
        p_all[x, y] = float(np.trace(theta_hat).real)
        thetas[x, y] = theta_hat

    for outcome in KEPT_OUTCOMES:
        if p_all[outcome] < DEGENERATE_TRACE:
            raise util.DegenerateInputError(
                f'Virtual outcome {outcome} has zero trace ({p_all[outcome]!r}); '
                f'reference set is degenerate')

    total = sum(p_all.values())
    assert abs(total - 1.0) < 1e-12, f'virtual outcome weights sum to {total!r}'

    kept_thetas = [thetas[outcome] / p_all[outcome] for outcome in KEPT_OUTCOMES]
    return VirtualEnsemble(
        p_vir=_freeze([p_all[outcome] for outcome in KEPT_OUTCOMES]),
        s_vir=_freeze([bloch_from_operator(theta) for theta in kept_thetas]),
        thetas=_freeze(kept_thetas),
        p_complement=_freeze([p_all[0, 1], p_all[1, 0]]),
    )
