#!/usr/bin/env python3
"""Key-rate sweeps over transmission loss and system frequency.

Examples:
    ./sweep.py --sweep loss --out keyrate_vs_loss.csv
    ./sweep.py --sweep loss --eps 1e-6 --delta 0 0.126 --loss-step 0.25
    ./sweep.py --sweep frequency --freq-loss 8 --format jsonl --out keyrate_vs_f.jsonl
    ./sweep.py --yields measured_yields.json
"""
import sys
import json
import math
import argparse
import logging
import dataclasses
import multiprocessing
from dataclasses import dataclass, field
import pandas as pd
from tqdm import tqdm
import util
import channel
import estimator
import export_table
from interval import Interval
from channel import ChannelParams
from pauli_core import ModulationErrors

logger = logging.getLogger(__name__)

CONFIG_KEYS = {
    'channel',
    'delta',
    'eps',
    'eps_pairs',
    'loss_range',
    'frequency_range',
    'estimation',
    'output',
    'workers',
}

@dataclass(frozen=True)
class FrequencyMap:
    """lg(eps) linear in f, pinned by two (frequency, eps) anchors."""
    f_low: float = 0.1
    f_high: float = 4.0
    eps_low: float = 1e-9
    eps_high: float = 1e-6

    def __post_init__(self):
        for f in dataclasses.fields(self):
            util.check_real(f.name, getattr(self, f.name))
        if not 0 < self.f_low < self.f_high:
            raise util.InputError(f'Need 0 < f_low < f_high, got {self.f_low!r}, {self.f_high!r}')
        for name in ('eps_low', 'eps_high'):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise util.InputError(f'{name} must lie in (0, 1], got {value!r}')

    def eps_at(self, frequency_ghz):
        if self.eps_low == self.eps_high:
            return self.eps_low
        lg_low = math.log10(self.eps_low)
        lg_high = math.log10(self.eps_high)
        slope = (lg_high - lg_low) / (self.f_high - self.f_low)
        eps = 10 ** (lg_low + slope * (frequency_ghz - self.f_low))
        return min(eps, 1.0)


@dataclass(frozen=True)
class SweepConfig:
    channel: ChannelParams = ChannelParams()
    deltas: tuple = (0.0,)
    eps: tuple = (1e-6,)
    # Replaces the uniform eps list with one non-uniform curve
    eps_pairs: estimator.SideChannelParams = None
    loss_range: Interval = field(default_factory=lambda: Interval(0, 12, 0.5))
    frequency_range: Interval = field(default_factory=lambda: Interval(0.1, 4.0, 0.1))
    frequency_map: FrequencyMap = FrequencyMap()
    # Fixed loss of the frequency sweep, required there
    frequency_loss_db: float = None
    estimation: estimator.EstimationSettings = estimator.EstimationSettings()
    output_path: str = 'keyrate.csv'
    output_format: str = 'csv'
    workers: int = 1

    def __post_init__(self):
        if len(self.deltas) == 0:
            raise util.InputError('Need at least one delta value')
        if len(self.eps) == 0 and self.eps_pairs is None:
            raise util.InputError('Need at least one eps value')
        for delta in self.deltas:
            # Validates |delta| < pi/2
            ModulationErrors.uniform(delta)
        for eps in self.eps:
            util.check_probability('eps', eps)
        if not isinstance(self.output_format, str) or self.output_format not in export_table.FORMATS:
            raise util.InputError(f'Unknown format {self.output_format!r}')
        if isinstance(self.workers, bool) or not isinstance(self.workers, int):
            raise util.InputError(f'workers must be an integer, got {self.workers!r}')
        if self.workers < 1:
            raise util.InputError(f'workers must be >= 1, got {self.workers!r}')

    def side_channel_curves(self):
        """(eps label, SideChannelParams) for each curve."""
        if self.eps_pairs is not None:
            return [(self.eps_pairs.largest(), self.eps_pairs)]
        return [(eps, estimator.SideChannelParams.uniform(eps)) for eps in self.eps]


@dataclass(frozen=True)
class SweepTask:
    scan: str
    coordinate: float
    eps: float
    side_channels: estimator.SideChannelParams
    delta: float
    channel: ChannelParams
    estimation: estimator.EstimationSettings


@dataclass(frozen=True)
class KeyRatePoint:
    scan: str
    coordinate: float
    eps: float
    delta: float
    loss_db: float
    key_rate: float
    e_zz: float
    e_xx: float
    omega_ref: float
    omega_ref_upper: float
    delta_vir_lower: float
    omega_upper: float
    zeta_obs: float
    y_zz: float
    cond_s: float
    clamp_events: int
    status: str = 'ok'

    @classmethod
    def from_result(cls, task, result):
        return cls(
            scan=task.scan,
            coordinate=float(task.coordinate),
            eps=float(task.eps),
            delta=float(task.delta),
            loss_db=float(task.channel.loss_db),
            key_rate=float(result.key_rate),
            e_zz=float(result.e_zz),
            e_xx=float(result.e_xx),
            omega_ref=float(result.omega_ref),
            omega_ref_upper=float(result.omega_ref_upper),
            delta_vir_lower=float(result.delta_vir_lower),
            omega_upper=float(result.omega_upper),
            zeta_obs=float(result.zeta_obs),
            y_zz=float(result.y_zz),
            cond_s=float(result.condition_number),
            clamp_events=int(result.clamp_events),
        )

    @classmethod
    def failed(cls, task, reason):
        nan = float('nan')
        return cls(
            scan=task.scan,
            coordinate=float(task.coordinate),
            eps=float(task.eps),
            delta=float(task.delta),
            loss_db=float(task.channel.loss_db),
            key_rate=0.0,
            e_zz=nan,
            e_xx=nan,
            omega_ref=nan,
            omega_ref_upper=nan,
            delta_vir_lower=nan,
            omega_upper=nan,
            zeta_obs=nan,
            y_zz=nan,
            cond_s=nan,
            clamp_events=0,
            status=f'error: {reason}',
        )

    @property
    def ok(self):
        return self.status == 'ok'

    @property
    def frequency_ghz(self):
        assert self.scan == 'frequency'
        return self.coordinate

    @property
    def key_rate_per_second(self):
        """R * f, with f in GHz converted to pulses per second."""
        return self.key_rate * self.frequency_ghz * 1e9

    def check(self):
        """Re-validate the estimator invariants; failed rows only need R = 0."""
        if not self.ok:
            assert self.key_rate == 0.0
            return
        estimator.EstimationResult(
            omega_ref=self.omega_ref,
            omega_ref_upper=self.omega_ref_upper,
            delta_vir_lower=self.delta_vir_lower,
            omega_upper=self.omega_upper,
            zeta_obs=self.zeta_obs,
            y_zz=self.y_zz,
            e_zz=self.e_zz,
            e_xx=self.e_xx,
            key_rate=self.key_rate,
            condition_number=self.cond_s,
            clamp_events=self.clamp_events,
        ).check_invariants()

    def as_row(self):
        if self.scan == 'loss':
            row = {
                'loss_db': self.loss_db,
                'eps': self.eps,
                'delta': self.delta,
                'key_rate': self.key_rate,
            }
        else:
            row = {
                'frequency_ghz': self.frequency_ghz,
                'eps': self.eps,
                'delta': self.delta,
                'loss_db': self.loss_db,
                'key_rate': self.key_rate,
                'key_rate_per_second': self.key_rate_per_second,
            }
        row.update({
            'e_zz': self.e_zz,
            'e_xx': self.e_xx,
            'omega_ref': self.omega_ref,
            'omega_ref_upper': self.omega_ref_upper,
            'delta_vir_lower': self.delta_vir_lower,
            'omega_upper': self.omega_upper,
            'zeta_obs': self.zeta_obs,
            'y_zz': self.y_zz,
            'cond_s': self.cond_s,
            'clamp_events': self.clamp_events,
            'status': self.status,
        })
        return row


def evaluate_point(task):
    """Channel -> yields -> estimation for one sweep point."""
    try:
        deltas = ModulationErrors.uniform(task.delta)
        frame = estimator.estimation_frame(deltas, deltas, task.estimation.condition_ceiling)
        povm = channel.build_bsm_povm(task.channel)
        q = channel.transmission_rates(povm)
        yields = channel.reference_yields(frame.s_matrix, q)
        inputs = estimator.prepare_estimation(frame, yields, task.side_channels)
        sifting_prefactor = task.channel.p_za * task.channel.p_zb
        result = estimator.estimate(inputs, task.estimation, sifting_prefactor)
    except (util.EstimationError, util.InputError) as e:
        logger.warning(f'{task.scan}={task.coordinate} eps={task.eps} delta={task.delta} failed: {e}')
        return KeyRatePoint.failed(task, str(e))
    return KeyRatePoint.from_result(task, result)


def run_tasks(tasks, workers=1, progress=False):
    """Evaluate tasks, returning points in task order."""
    points = []
    with tqdm(total=len(tasks), disable=not progress) as prog:
        if workers == 1:
            for point in map(evaluate_point, tasks):
                points.append(point)
                prog.update(1)
        else:
            chunksize = max(1, len(tasks) // (4 * workers))
            with multiprocessing.Pool(workers) as p:
                for point in p.imap(evaluate_point, tasks, chunksize=chunksize):
                    points.append(point)
                    prog.update(1)
    return points


def loss_sweep_tasks(config):
    return [
        SweepTask(
            scan='loss',
            coordinate=loss_db,
            eps=eps,
            side_channels=side_channels,
            delta=delta,
            channel=config.channel.with_loss(loss_db),
            estimation=config.estimation,
        )
        for eps, side_channels in config.side_channel_curves()
        for delta in config.deltas
        for loss_db in config.loss_range.points()
    ]


@util.listify
def frequency_sweep_tasks(config):
    if config.frequency_loss_db is None:
        raise util.InputError('Frequency sweep needs frequency_range.loss_db (or --freq-loss)')
    fixed_channel = config.channel.with_loss(config.frequency_loss_db)
    for delta in config.deltas:
        for frequency in config.frequency_range.points():
            eps = config.frequency_map.eps_at(frequency)
            yield SweepTask(
                scan='frequency',
                coordinate=frequency,
                eps=eps,
                side_channels=estimator.SideChannelParams.uniform(eps),
                delta=delta,
                channel=fixed_channel,
                estimation=config.estimation,
            )


def run_loss_sweep(config, progress=False):
    return run_tasks(loss_sweep_tasks(config), config.workers, progress)


def run_frequency_sweep(config, progress=False):
    return run_tasks(frequency_sweep_tasks(config), config.workers, progress)


def _points_frame(points):
    return pd.DataFrame([
        {
            'eps': point.eps,
            'delta': point.delta,
            'coordinate': point.coordinate,
            'key_rate': point.key_rate,
            'ok': point.ok,
        }
        for point in points
    ])


def summarize_loss_sweep(points):
    """Cutoff loss (largest loss with R > 0) for every (eps, delta) curve.

    A zero rate followed by a positive one further along the loss axis is
    flagged as a revival; then the cutoff is not a single sign change.
    """
    df = _points_frame(points)
    df = df[df['ok']]
    summary = []
    for (eps, delta), curve in df.groupby(['eps', 'delta'], sort=False):
        curve = curve.sort_values('coordinate')
        positive = curve['key_rate'] > 0
        if positive.any():
            cutoff = float(curve.loc[positive, 'coordinate'].max())
            revival = bool((~positive & (curve['coordinate'] < cutoff)).any())
            reaches_end = bool(positive.iloc[-1])
        else:
            cutoff = None
            revival = False
            reaches_end = False
        if revival:
            logger.error(f'Key rate for eps={eps} delta={delta} is zero before the cutoff '
                         f'{cutoff} dB and positive again after it')
        summary.append({
            'eps': float(eps),
            'delta': float(delta),
            'cutoff_loss_db': cutoff,
            # Positive at the last grid point: the true cutoff lies beyond the scan
            'positive_at_end': reaches_end,
            'revival': revival,
        })
    return summary


def summarize_frequency_sweep(points):
    """Frequency of the largest per-second rate for every delta curve."""
    ok_points = [point for point in points if point.ok]
    summary = []
    for delta in sorted(set(point.delta for point in ok_points)):
        curve = sorted(
            (point for point in ok_points if point.delta == delta),
            key=lambda point: point.coordinate,
        )
        rates = [point.key_rate_per_second for point in curve]
        best = max(range(len(curve)), key=lambda i: rates[i])
        summary.append({
            'delta': float(delta),
            'best_frequency_ghz': curve[best].coordinate,
            'best_key_rate_per_second': rates[best],
            'interior_maximum': 0 < best < len(curve) - 1 and rates[best] > 0,
        })
    return summary


def _section(cls, raw, name):
    util.check_mapping(name, raw)
    try:
        return cls(**raw)
    except TypeError as e:
        raise util.InputError(f'Bad {name} section: {e}') from e


def _as_list(value, name):
    values = value if isinstance(value, (list, tuple)) else [value]
    return tuple(util.check_real(name, v) for v in values)


def build_config(raw, args=None):
    """Layer dataclass defaults < config file < command-line flags."""
    util.check_mapping('config', raw)
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise util.InputError(f'Unknown config keys {sorted(unknown)}')
    kwargs = {}
    if 'channel' in raw:
        kwargs['channel'] = _section(ChannelParams, raw['channel'], 'channel')
    if 'delta' in raw:
        kwargs['deltas'] = _as_list(raw['delta'], 'delta')
    if 'eps' in raw:
        kwargs['eps'] = _as_list(raw['eps'], 'eps')
    if 'eps_pairs' in raw:
        kwargs['eps_pairs'] = estimator.SideChannelParams.from_mapping(raw['eps_pairs'])
    if 'loss_range' in raw:
        kwargs['loss_range'] = Interval.from_dict(raw['loss_range'])
    if 'frequency_range' in raw:
        frequency = dict(util.check_mapping('frequency_range', raw['frequency_range']))
        loss_db = frequency.pop('loss_db', None)
        if loss_db is not None:
            kwargs['frequency_loss_db'] = util.check_real('frequency_range.loss_db', loss_db)
        map_keys = {f.name for f in dataclasses.fields(FrequencyMap)}
        map_raw = {key: frequency.pop(key) for key in list(frequency) if key in map_keys}
        kwargs['frequency_map'] = _section(FrequencyMap, map_raw, 'frequency_range')
        kwargs['frequency_range'] = Interval.from_dict(frequency)
        extra = set(frequency) - {'start', 'stop', 'step'}
        if extra:
            raise util.InputError(f'Unknown frequency_range keys {sorted(extra)}')
    if 'estimation' in raw:
        kwargs['estimation'] = _section(estimator.EstimationSettings, raw['estimation'], 'estimation')
    if 'output' in raw:
        output = util.check_mapping('output', raw['output'])
        kwargs['output_path'] = output.get('path', SweepConfig.output_path)
        kwargs['output_format'] = output.get('format', SweepConfig.output_format)
        if not isinstance(kwargs['output_path'], str):
            raise util.InputError(f'output.path must be a string, got {kwargs["output_path"]!r}')
    if 'workers' in raw:
        kwargs['workers'] = raw['workers']

    if args is not None:
        if args.eps is not None:
            kwargs['eps'] = tuple(args.eps)
            # Explicit uniform eps on the command line wins over a pair map
            kwargs['eps_pairs'] = None
        if args.delta is not None:
            kwargs['deltas'] = tuple(args.delta)
        if any(v is not None for v in (args.loss_start, args.loss_stop, args.loss_step)):
            base = kwargs.get('loss_range', SweepConfig().loss_range)
            kwargs['loss_range'] = Interval(
                args.loss_start if args.loss_start is not None else base.start,
                args.loss_stop if args.loss_stop is not None else base.stop,
                args.loss_step if args.loss_step is not None else base.step,
            )
        if args.freq_loss is not None:
            kwargs['frequency_loss_db'] = args.freq_loss
        if args.out is not None:
            kwargs['output_path'] = args.out
        if args.format is not None:
            kwargs['output_format'] = args.format
        if args.workers is not None:
            kwargs['workers'] = args.workers
    return SweepConfig(**kwargs)


def estimate_from_yields(config, yields):
    """One estimation from measured yields, using the first delta and eps curve."""
    deltas = ModulationErrors.uniform(config.deltas[0])
    frame = estimator.estimation_frame(deltas, deltas, config.estimation.condition_ceiling)
    _, side_channels = config.side_channel_curves()[0]
    inputs = estimator.prepare_estimation(frame, yields, side_channels)
    sifting_prefactor = config.channel.p_za * config.channel.p_zb
    return estimator.estimate(inputs, config.estimation, sifting_prefactor)


def summary_filename(filename):
    return filename + '.summary.json'


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        prog='MDI key-rate sweep',
        description='Asymptotic key rate of MDI-QKD with leaky single-photon sources',
    )
    parser.add_argument('--config', default=util.script_relative('config.json'))
    parser.add_argument('--sweep', choices=['loss', 'frequency'], default='loss')
    parser.add_argument('--eps', type=float, nargs='+')
    parser.add_argument('--delta', type=float, nargs='+')
    parser.add_argument('--loss-start', type=float)
    parser.add_argument('--loss-stop', type=float)
    parser.add_argument('--loss-step', type=float)
    parser.add_argument('--freq-loss', type=float, help='fixed loss (dB) of the frequency sweep')
    parser.add_argument('--out')
    parser.add_argument('--format', choices=list(export_table.FORMATS))
    parser.add_argument('--workers', type=int)
    parser.add_argument('--yields', help='estimate once from a JSON file of measured yields')
    parser.add_argument('--verbosity', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], default='WARNING')
    parser.add_argument('--no-progress', action='store_true')
    return parser.parse_args(argv)


def run(args):
    config = build_config(util.load_config(args.config), args)

    if args.yields is not None:
        yields = channel.YieldTable.from_mapping(util.load_config(args.yields))
        result = estimate_from_yields(config, yields)
        print(json.dumps(dataclasses.asdict(result)))
        return

    print(f'Running {args.sweep} sweep')
    if args.sweep == 'loss':
        points = run_loss_sweep(config, progress=not args.no_progress)
        summary = summarize_loss_sweep(points)
    else:
        points = run_frequency_sweep(config, progress=not args.no_progress)
        summary = summarize_frequency_sweep(points)

    export_table.emit_table(points, config.output_path, config.output_format)
    print(f'{len(points)} rows written to {config.output_path}')
    failed = sum(not point.ok for point in points)
    if failed:
        print(f'{failed} rows failed, see the status column')
    with open(summary_filename(config.output_path), 'wt') as fh:
        json.dump(summary, fh, indent=2)
    for curve in summary:
        print(curve)


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=args.verbosity, format='%(asctime)s [%(levelname)s] %(name)s: %(message)s')
    try:
        run(args)
    except (util.InputError, util.EstimationError, OSError) as e:
        error = {'status': 'error', 'error': type(e).__name__, 'message': str(e)}
        print(json.dumps(error), file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
