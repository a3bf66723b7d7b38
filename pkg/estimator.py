"""Phase-error estimation and asymptotic key rate.

Pipeline for one parameter point:

    S, S^-1, P_vir, S_vir  ->  f_obj = P_vir S_vir S^-1
    Omega_ref     = f_obj . Y                      (matrix route)
    Omega_ref^U   = sum_f>0 f g_upper(Y, d) + sum_f<0 f g_lower(Y, d),  d = sqrt(1 - eps)
    Omega^U       = g_upper(Omega_ref^U, delta_vir^L)
    e_XX          = Omega^U / zeta_obs
    R             = Y_ZZ [1 - h(e_XX) - f_EC h(e_ZZ)]

zeta_obs is the sum of the four Z-basis joint yields of the virtual
protocol, (1/4) sum_{j,s} Y_{jZ,sZ}, the same weighting P_vir gives
Omega_ref. It is also the Z-basis yield Y_ZZ of the key rate.
"""
import math
import logging
from dataclasses import dataclass
import numpy as np
import scipy.special
from cachetools import cached, LRUCache
import util
import gbound
import pauli_core

logger = logging.getLogger(__name__)

DEFAULT_CONDITION_CEILING = 1e8
F_OBJ_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SideChannelParams:
    """Side-channel weights eps_{j_alpha, s_beta} in SETTING_PAIRS order."""
    eps: tuple

    def __post_init__(self):
        if len(self.eps) != 9:
            raise util.InputError(f'Need 9 side-channel weights, got {len(self.eps)}')
        object.__setattr__(self, 'eps', tuple(
            util.check_probability(f'eps {pair}', value)
            for pair, value in zip(pauli_core.SETTING_PAIRS, self.eps)
        ))

    @classmethod
    def uniform(cls, eps):
        return cls((eps,) * 9)

    @classmethod
    def from_mapping(cls, mapping, default=0.0):
        """Build from {'0_Z,1_Z': eps, ...}; missing pairs take default."""
        util.check_mapping('eps_pairs', mapping)
        known = {f'{a},{b}' for a, b in pauli_core.SETTING_PAIRS}
        unknown = set(mapping) - known
        if unknown:
            raise util.InputError(f'Unknown setting pairs {sorted(unknown)}')
        return cls(tuple(mapping.get(f'{a},{b}', default) for a, b in pauli_core.SETTING_PAIRS))

    def __getitem__(self, pair):
        return self.eps[pauli_core.SETTING_PAIRS.index(tuple(pair))]

    def fidelity_anchors(self):
        """delta^L_{j_alpha, s_beta} = sqrt(1 - eps)."""
        return np.sqrt(1 - np.array(self.eps))

    def largest(self):
        return max(self.eps)


@dataclass(frozen=True)
class EstimationSettings:
    f_ec: float = 1.16
    condition_ceiling: float = DEFAULT_CONDITION_CEILING
    # Multiply R by p_ZA * p_ZB
    sifting: bool = False

    def __post_init__(self):
        if util.check_real('f_ec', self.f_ec) < 1:
            raise util.InputError(f'f_ec must be >= 1, got {self.f_ec!r}')
        if util.check_real('condition_ceiling', self.condition_ceiling) <= 1:
            raise util.InputError(f'condition_ceiling must exceed 1, got {self.condition_ceiling!r}')
        if not isinstance(self.sifting, bool):
            raise util.InputError(f'sifting must be true or false, got {self.sifting!r}')


@dataclass(frozen=True, eq=False)
class EstimationFrame:
    """Everything fixed once the reference states are chosen."""
    s_matrix: np.ndarray
    s_matrix_inverse: np.ndarray
    condition_number: float
    ensemble: pauli_core.VirtualEnsemble
    f_obj: np.ndarray


@dataclass(frozen=True, eq=False)
class EstimationInputs:
    yields: object
    eps: SideChannelParams
    f_obj: np.ndarray
    ensemble: pauli_core.VirtualEnsemble
    s_matrix: np.ndarray
    s_matrix_inverse: np.ndarray
    condition_number: float

    def __post_init__(self):
        recomputed = self.recompute_f_obj()
        if not np.allclose(recomputed, self.f_obj, rtol=0, atol=F_OBJ_TOLERANCE):
            raise util.InputError('f_obj does not match P_vir S_vir S^-1')

    def recompute_f_obj(self):
        return self.ensemble.p_vir @ self.ensemble.s_vir @ self.s_matrix_inverse


@dataclass(frozen=True)
class EstimationResult:
    omega_ref: float
    omega_ref_upper: float
    delta_vir_lower: float
    omega_upper: float
    zeta_obs: float
    y_zz: float
    e_zz: float
    e_xx: float
    key_rate: float
    condition_number: float
    clamp_events: int = 0

    def check_invariants(self):
        """Raise AssertionError if the result is internally inconsistent."""
        for name, value in vars(self).items():
            assert math.isfinite(value), f'{name} is not finite: {value!r}'
        assert self.key_rate >= 0, f'negative key rate {self.key_rate!r}'
        assert self.omega_ref <= self.omega_ref_upper + 1e-12, \
            f'Omega_ref {self.omega_ref!r} above its bound {self.omega_ref_upper!r}'
        assert self.omega_upper >= min(self.omega_ref_upper, 1.0) - 1e-12, \
            f'Omega^U {self.omega_upper!r} below Omega_ref^U {self.omega_ref_upper!r}'
        assert 0 <= self.e_zz <= 1 and 0 <= self.e_xx <= 1


def _frozen(array):
    array = np.array(array)
    array.setflags(write=False)
    return array


@cached(cache=LRUCache(maxsize=256))
def estimation_frame(deltas_a, deltas_b, condition_ceiling=DEFAULT_CONDITION_CEILING):
    """S, S^-1, the virtual ensemble and f_obj for two sets of modulation errors."""
    ref_a = pauli_core.make_reference_states(deltas_a)
    ref_b = pauli_core.make_reference_states(deltas_b)
    return frame_from_states(ref_a, ref_b, condition_ceiling)


def frame_from_states(ref_a, ref_b, condition_ceiling=DEFAULT_CONDITION_CEILING):
    s_matrix = pauli_core.build_s_matrix(ref_a, ref_b)
    condition_number = float(np.linalg.cond(s_matrix))
    if not math.isfinite(condition_number) or condition_number > condition_ceiling:
        raise util.EstimationError(
            f'S is ill-conditioned (cond {condition_number:.3e} > {condition_ceiling:.3e})',
            condition_number=condition_number)
    s_inverse = np.linalg.inv(s_matrix)
    ensemble = pauli_core.build_virtual(ref_a[:2], ref_b[:2])
    f_obj = ensemble.p_vir @ ensemble.s_vir @ s_inverse
    return EstimationFrame(
        s_matrix=s_matrix,
        s_matrix_inverse=_frozen(s_inverse),
        condition_number=condition_number,
        ensemble=ensemble,
        f_obj=_frozen(f_obj),
    )


def prepare_estimation(frame, yields, eps):
    return EstimationInputs(
        yields=yields,
        eps=eps,
        f_obj=frame.f_obj,
        ensemble=frame.ensemble,
        s_matrix=frame.s_matrix,
        s_matrix_inverse=frame.s_matrix_inverse,
        condition_number=frame.condition_number,
    )


def omega_ref_direct(ensemble, povm):
    """Omega_ref by tracing the POVM against each kept virtual state."""
    return float(sum(
        p * np.trace(povm.m @ theta).real
        for p, theta in zip(ensemble.p_vir, ensemble.thetas)
    ))


def omega_ref_matrix(inputs, yields):
    return float(inputs.f_obj @ yields.as_array())


def omega_ref_upper(f_obj, yields, eps):
    anchors = eps.fidelity_anchors()
    total = 0.0
    for f, y, anchor in zip(f_obj, yields.as_array(), anchors):
        if f > 0:
            total += f * gbound.g_upper(y, anchor)
        elif f < 0:
            total += f * gbound.g_lower(y, anchor)
    if total < 0:
        logger.debug(f'Omega_ref^U {total!r} floored at 0')
    return max(total, 0.0)


def delta_vir_lower(eps):
    return sum(math.sqrt(1 - eps.eps[i]) for i in pauli_core.ZZ_PAIR_INDICES) / 4


def omega_upper(omega_ref_upper_value, delta_vir_lower_value):
    x = util.clamp_probability(omega_ref_upper_value, 'Omega_ref^U')
    return gbound.g_upper(x, delta_vir_lower_value)


def zeta_obs(yields):
    """Sum of the Z-basis joint yields, (1/4) sum_{j,s} Y_{jZ,sZ}."""
    return sum(yields.zz()) / 4


def bit_error_rate(zz_yields):
    """(Y_00 + Y_11) / sum; yields ordered (0,0), (0,1), (1,0), (1,1).

    Bob flips his bits, so equal raw bits are errors under |psi->.
    """
    if len(zz_yields) != 4:
        raise util.InputError(f'Need 4 Z-basis yields, got {len(zz_yields)}')
    if any(not y >= 0 for y in zz_yields):
        raise util.InputError(f'Yields must be nonnegative, got {zz_yields}')
    y00, y01, y10, y11 = zz_yields
    total = y00 + y01 + y10 + y11
    if total <= 0:
        raise util.NoSignalError('No Z-basis detections, bit error rate undefined')
    return (y00 + y11) / total


def phase_error_rate(omega_upper_value, zeta_obs_value):
    if not zeta_obs_value > 0:
        raise util.NoSignalError('zeta_obs is zero, phase error rate undefined')
    return util.clamp_probability(omega_upper_value / zeta_obs_value, 'e_XX')


def binary_entropy(p):
    p = util.check_probability('p', p)
    return float((scipy.special.entr(p) + scipy.special.entr(1 - p)) / math.log(2))


def capped_entropy(p):
    """h(min(p, 1/2)). An error rate bound at or above 1/2 costs a full bit."""
    p = util.check_probability('p', p)
    return binary_entropy(min(p, 0.5))


def key_rate(y_zz, e_zz, e_xx, f_ec, sifting_prefactor=1.0):
    """Asymptotic rate Y_ZZ [1 - h(e_XX) - f_EC h(e_ZZ)], floored at 0."""
    y_zz = util.check_probability('y_zz', y_zz)
    if not f_ec >= 1:
        raise util.InputError(f'f_ec must be >= 1, got {f_ec!r}')
    bracket = 1 - capped_entropy(e_xx) - f_ec * capped_entropy(e_zz)
    return max(sifting_prefactor * y_zz * bracket, 0.0)


def estimate(inputs, settings=EstimationSettings(), sifting_prefactor=1.0):
    """Run the full bound chain on inputs.yields."""
    clamps_before = util.clamp_event_count()
    yields = inputs.yields
    omega_ref = omega_ref_matrix(inputs, yields)
    omega_ref_u = omega_ref_upper(inputs.f_obj, yields, inputs.eps)
    delta_vir_l = delta_vir_lower(inputs.eps)
    omega_u = omega_upper(omega_ref_u, delta_vir_l)
    zeta = zeta_obs(yields)
    e_zz = bit_error_rate(yields.zz())
    e_xx = phase_error_rate(omega_u, zeta)
    if not settings.sifting:
        sifting_prefactor = 1.0
    rate = key_rate(zeta, e_zz, e_xx, settings.f_ec, sifting_prefactor)
    return EstimationResult(
        omega_ref=omega_ref,
        omega_ref_upper=omega_ref_u,
        delta_vir_lower=delta_vir_l,
        omega_upper=omega_u,
        zeta_obs=zeta,
        y_zz=zeta,
        e_zz=e_zz,
        e_xx=e_xx,
        key_rate=rate,
        condition_number=inputs.condition_number,
        clamp_events=util.clamp_event_count() - clamps_before,
    )
