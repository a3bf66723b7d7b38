import math
import util

# Grid points are rounded to this many decimals so repeated runs match exactly
GRID_DECIMALS = 12


class Interval:
    """Closed scan interval [start, stop] walked in fixed steps."""

    def __init__(self, start, stop, step):
        for name, value in (('start', start), ('stop', stop), ('step', step)):
            util.check_real(name, value)
        if step <= 0:
            raise util.InputError(f'step must be positive, got {step!r}')
        if stop < start:
            raise util.InputError(f'Empty interval: stop {stop!r} is below start {start!r}')
        self.start = float(start)
        self.stop = float(stop)
        self.step = float(step)

    @classmethod
    def from_dict(cls, d):
        util.check_mapping('interval', d)
        try:
            return cls(d['start'], d['stop'], d['step'])
        except KeyError as e:
            raise util.InputError(f'Interval is missing {e.args[0]!r}') from e

    def points(self):
        """Grid points including both ends when stop lies on the grid."""
        count = math.floor((self.stop - self.start) / self.step + 1e-9) + 1
        return [round(self.start + i * self.step, GRID_DECIMALS) for i in range(count)]

    def __len__(self):
        return len(self.points())

    def __str__(self):
        return f'Interval({self.start}, {self.stop}, step {self.step})'
