"""Model of the untrusted relay performing the Bell-state measurement.

Time-bin qubits (|0> = early, |1> = late) from Alice and Bob meet at a
50:50 beam splitter whose outputs go to threshold detectors D1 and D2.
Each detector watches both time slots, giving four detector-slot channels.
The |psi-> announcement is the click pattern (D1 early, D2 late) with no
other clicks; with mirror_pattern the mirrored pattern (D1 late, D2 early)
is accepted too. Events with any other click set are discarded.

* Each arm transmits a photon with probability
  eta_arm = eta_d * 10**(-loss_db / 20): half of the total loss in dB per
  arm, detector efficiency folded in.
* Each detector-slot channel dark-fires independently with probability p_d.
* Misalignment rotates Bob's qubit by theta, sin(theta)**2 = e_d, before the
  beam splitter.

The POVM element is assembled as an operator: every photon survival case
is propagated through the beam splitter in Fock space and each output
configuration contributes its acceptance probability times the projector
it induces on the input qubits.
"""
import math
import itertools
import logging
import dataclasses
from dataclasses import dataclass
from functools import lru_cache
import numpy as np
import util
import pauli_core

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-12

# Detector-slot channels. Index 0 = early, 1 = late.
MODES = (('D1', 0), ('D1', 1), ('D2', 0), ('D2', 1))
ORDERED_PATTERN = frozenset({MODES.index(('D1', 0)), MODES.index(('D2', 1))})
MIRROR_PATTERN = frozenset({MODES.index(('D1', 1)), MODES.index(('D2', 0))})


@dataclass(frozen=True)
class ChannelParams:
    eta_d: float = 0.145
    p_d: float = 6.02e-6
    e_d: float = 0.015
    loss_db: float = 0.0
    p_za: float = 2 / 3
    p_zb: float = 2 / 3
    mirror_pattern: bool = False

    def __post_init__(self):
        for name in ('eta_d', 'p_d', 'e_d'):
            util.check_probability(name, getattr(self, name))
        if util.check_real('loss_db', self.loss_db) < 0:
            raise util.InputError(f'loss_db must be a finite value >= 0, got {self.loss_db!r}')
        for name in ('p_za', 'p_zb'):
            value = util.check_real(name, getattr(self, name))
            if not 0 < value < 1:
                raise util.InputError(f'{name} must lie in (0, 1), got {value!r}')
        if not isinstance(self.mirror_pattern, bool):
            raise util.InputError(f'mirror_pattern must be true or false, got {self.mirror_pattern!r}')

    @property
    def eta_arm(self):
        return self.eta_d * 10 ** (-self.loss_db / 20)

    def with_loss(self, loss_db):
        return dataclasses.replace(self, loss_db=loss_db)


@dataclass(frozen=True, eq=False)
class BsmPovm:
    """4x4 POVM element in the basis |00>, |01>, |10>, |11> (Alice first)."""
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m)
        if m.shape != (4, 4):
            raise util.InputError(f'POVM must be 4x4, got shape {m.shape}')
        if not np.allclose(m, m.conj().T, rtol=0, atol=HERMITIAN_TOLERANCE):
            raise util.InputError('POVM element is not Hermitian')
        eigenvalues = np.linalg.eigvalsh(m)
        if eigenvalues.min() < -HERMITIAN_TOLERANCE or eigenvalues.max() > 1 + HERMITIAN_TOLERANCE:
            raise util.InputError(f'POVM element eigenvalues {eigenvalues} outside [0, 1]')
        m.setflags(write=False)
        object.__setattr__(self, 'm', m)

    def probability(self, rho):
        """Tr[M rho] for a 4x4 input density operator."""
        return float(np.trace(self.m @ rho).real)


@dataclass(frozen=True)
class TransmissionRates:
    """q_{l,l'} = Tr[M sigma_l (x) sigma_l'] / 4, PAULI_PAIRS order."""
    q: tuple

    def __getitem__(self, pair):
        return self.q[pauli_core.PAULI_PAIRS.index(tuple(pair))]

    def as_array(self):
        return np.array(self.q)


@dataclass(frozen=True)
class YieldTable:
    """Yields Y_{j_alpha, s_beta} in SETTING_PAIRS order."""
    y: tuple

    def __post_init__(self):
        if len(self.y) != 9:
            raise util.InputError(f'Need 9 yields, got {len(self.y)}')
        object.__setattr__(self, 'y', tuple(
            util.check_probability(f'yield {pair}', value)
            for pair, value in zip(pauli_core.SETTING_PAIRS, self.y)
        ))

    @classmethod
    def from_mapping(cls, mapping):
        """Build from {'0_Z,1_Z': value, ...} with all nine pairs present."""
        util.check_mapping('yields', mapping)
        try:
            values = [mapping[f'{a},{b}'] for a, b in pauli_core.SETTING_PAIRS]
        except KeyError as e:
            raise util.InputError(f'Missing yield for setting pair {e.args[0]}') from e
        return cls(tuple(values))

    def __getitem__(self, pair):
        return self.y[pauli_core.SETTING_PAIRS.index(tuple(pair))]

    def as_array(self):
        return np.array(self.y)

    def zz(self):
        """Z-basis yields in the order (0,0), (0,1), (1,0), (1,1)."""
        return tuple(self.y[i] for i in pauli_core.ZZ_PAIR_INDICES)


def misalignment_rotation(e_d):
    theta = math.asin(math.sqrt(e_d))
    return np.array([
        [math.cos(theta), -math.sin(theta)],
        [math.sin(theta), math.cos(theta)],
    ])


def mode_amplitudes(e_d):
    """Amplitudes from an input time bin to each detector-slot channel.

    Returns (alice, bob), each 4x2: row = output mode, column = input bin.
    The beam splitter sends a -> (D1 + D2)/sqrt(2), b -> (D1 - D2)/sqrt(2).
    """
    rotation = misalignment_rotation(e_d)
    alice = np.zeros((4, 2))
    bob = np.zeros((4, 2))
    for index, (detector, slot) in enumerate(MODES):
        sign = 1.0 if detector == 'D1' else -1.0
        alice[index, slot] = 1 / math.sqrt(2)
        # Bob's bin s is rotated into slot t with weight rotation[t, s]
        bob[index] = sign * rotation[slot] / math.sqrt(2)
    return alice, bob


def acceptance(occupied, pattern, p_d):
    """Probability that photon-occupied channels plus dark counts give exactly pattern."""
    if not occupied <= pattern:
        return 0.0
    missing = len(pattern - occupied)
    silent = len(MODES) - len(pattern)
    return p_d ** missing * (1 - p_d) ** silent


def _projector(amplitudes):
    return np.outer(amplitudes.conj(), amplitudes)


def two_photon_amplitudes(alice, bob):
    """Row vector over inputs |j s> for every two-photon output configuration."""
    configurations = {}
    for m1, m2 in itertools.combinations_with_replacement(range(len(MODES)), 2):
        if m1 == m2:
            row = math.sqrt(2) * np.kron(alice[m1], bob[m1])
        else:
            row = np.kron(alice[m1], bob[m2]) + np.kron(alice[m2], bob[m1])
        configurations[frozenset({m1, m2})] = row
    return configurations


def _pattern_povm(pattern, params, alice, bob):
    eta = params.eta_arm
    p_d = params.p_d
    identity = np.eye(2)
    m = np.zeros((4, 4))

    # Both photons reach the beam splitter
    for occupied, row in two_photon_amplitudes(alice, bob).items():
        weight = acceptance(occupied, pattern, p_d)
        if weight:
            m += eta * eta * weight * _projector(row)

    # Exactly one photon survives; the lost photon's qubit is traced out
    for mode in range(len(MODES)):
        weight = acceptance(frozenset({mode}), pattern, p_d)
        if weight:
            m += eta * (1 - eta) * weight * np.kron(_projector(alice[mode]), identity)
            m += (1 - eta) * eta * weight * np.kron(identity, _projector(bob[mode]))

    # Both lost: dark counts alone
    m += (1 - eta) ** 2 * acceptance(frozenset(), pattern, p_d) * np.eye(4)
    return m


@lru_cache(maxsize=1024)
def build_bsm_povm(params):
    """Effective POVM element of a successful |psi-> announcement."""
    alice, bob = mode_amplitudes(params.e_d)
    patterns = [ORDERED_PATTERN]
    if params.mirror_pattern:
        patterns.append(MIRROR_PATTERN)
    m = sum(_pattern_povm(pattern, params, alice, bob) for pattern in patterns)
    # Symmetrize away rounding asymmetry
    m = (m + m.T) / 2
    logger.debug(f'Built POVM for {params}')
    return BsmPovm(m)


def transmission_rates(povm):
    return TransmissionRates(tuple(
        float(np.trace(povm.m @ pauli_op).real) / 4
        for pauli_op in pauli_core.PAULI_PAIR_OPERATORS
    ))


def reference_yields(s_matrix, q):
    """Y_ref = S q, clamped into [0, 1]."""
    s_matrix = np.asarray(s_matrix)
    q_vector = q.as_array()
    if s_matrix.shape != (9, 9):
        raise util.InputError(f'S must be 9x9, got shape {s_matrix.shape}')
    raw = s_matrix @ q_vector
    return YieldTable(tuple(
        util.clamp_probability(value, f'yield {pair}')
        for pair, value in zip(pauli_core.SETTING_PAIRS, raw)
    ))
