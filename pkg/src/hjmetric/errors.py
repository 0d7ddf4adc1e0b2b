"""Exception types shared across the library."""


class HjMetricError(Exception):
    """Base class for all library errors."""


class ConfigError(HjMetricError):
    """Malformed or inconsistent run configuration."""


class EmptySublevel(HjMetricError):
    """The momentum sublevel {p : H(x,p,omega) <= a} is empty at some point.

    Raised when a level `a` below the pointwise minimum of H is requested;
    callers should clamp levels at (an estimate of) the free critical value.
    """

    def __init__(self, level, where=None):
        self.level = level
        self.where = where
        loc = "" if where is None else f" at x={where}"
        super().__init__(f"empty sublevel for level a={level}{loc}")


class NegativeCycle(HjMetricError):
    """The weighted graph at level `a` carries a negative cycle.

    Evidence that `a` lies below the free critical value at the current
    discretization.
    """

    def __init__(self, level):
        self.level = level
        super().__init__(f"negative cycle detected at level a={level}")


class EmptySource(HjMetricError):
    """Lax formula invoked with an empty source set."""


class EmptyAubry(HjMetricError):
    """No Aubry node detected on the box; the corrector construction is void."""


class TraceViolation(HjMetricError):
    """The boundary trace is not 1-Lipschitz for the intrinsic distance."""

    def __init__(self, pair, gap):
        self.pair = pair
        self.gap = gap
        super().__init__(
            f"trace violates the metric Lipschitz bound between nodes {pair} (gap {gap:.3e})"
        )


class BoundaryMax(HjMetricError):
    """Discrete Legendre transform maximizer fell on the velocity-grid edge."""

    def __init__(self, momentum):
        self.momentum = momentum
        super().__init__(f"conjugate maximizer hit the velocity grid boundary at P={momentum}")


class EmptyEffectiveSublevel(HjMetricError):
    """Requested sublevel of the effective Hamiltonian is empty on the grid."""


class CflViolation(HjMetricError):
    """Value-iteration stencil cannot represent the minimizing velocities."""

    def __init__(self, fraction):
        self.fraction = fraction
        super().__init__(
            f"argmin velocity on stencil boundary for {100 * fraction:.1f}% of nodes"
        )


class EmptySample(HjMetricError):
    """Stationary-set sample contains no points on the box."""
