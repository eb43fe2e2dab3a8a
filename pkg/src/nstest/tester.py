"""The surface-area property tester.

Given a budget ``S`` and slacks ``eta``, ``epsilon`` the tester sets
``t = (epsilon * eta / S)^2`` and ``m = ceil(7 eta^-3 epsilon^-1 S^2)``,
draws ``m`` noisy pairs and accepts iff the fraction of pairs straddling the
set is at most ``2 sqrt(t/pi) (S + m^{-1/2} t^{-1/4} S^{1/2})``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

from .noise_model import WRAP_SCALE, NoiseModel, ns_estimate
from .rng import Stream
from .set_model import Region

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class TesterParams:
    S: float
    eta: float
    epsilon: float

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not (self.S > 0 and self.eta > 0 and 0 < self.epsilon < 1):
            raise ValueError(
                f"need S > 0, eta > 0 and 0 < epsilon < 1, got {self.S}, {self.eta}, {self.epsilon}"
            )


@dataclass(frozen=True)
class DerivedParams:
    t: float
    m: int
    threshold: float
    wrap_regime: bool = False


@dataclass(frozen=True)
class TestVerdict:
    accepted: bool
    ns_fraction: float
    threshold: float
    params: DerivedParams
    disagreements: int

    __test__ = False  # not a pytest class

    def to_dict(self):
        return {
            "accepted": self.accepted,
            "ns_fraction": self.ns_fraction,
            "threshold": self.threshold,
            "disagreements": self.disagreements,
            "derived": asdict(self.params),
        }


@dataclass(frozen=True)
class AcceptRate:
    rate: float
    std_error: float
    trials: int
    accepted: int

    def to_dict(self):
        return asdict(self)


def _decimal(x: float) -> Fraction:
    # Read the float as the decimal literal the user typed (0.1 -> 1/10).
    return Fraction(repr(float(x)))


def sample_count(S: float, eta: float, epsilon: float) -> int:
    """``ceil(7 eta^-3 epsilon^-1 S^2)`` in exact rational arithmetic."""
    S_, eta_, eps_ = _decimal(S), _decimal(eta), _decimal(epsilon)
    return math.ceil(7 * S_**2 / (eta_**3 * eps_))


def crofton_bound(S: float, t: float) -> float:
    """Upper bound ``2 sqrt(t) / sqrt(pi) * S`` on the noise sensitivity."""
    if S < 0 or not t > 0:
        raise ValueError("crofton_bound requires S >= 0 and t > 0")
    return _TWO_OVER_SQRT_PI * math.sqrt(t) * S


def decision_threshold(S: float, t: float, m: int) -> float:
    return _TWO_OVER_SQRT_PI * math.sqrt(t) * (S + m**-0.5 * t**-0.25 * math.sqrt(S))


def derive_params(p: TesterParams) -> DerivedParams:
    t = (p.epsilon * p.eta / p.S) ** 2
    m = sample_count(p.S, p.eta, p.epsilon)
    return DerivedParams(
        t=t,
        m=m,
        threshold=decision_threshold(p.S, t, m),
        wrap_regime=math.sqrt(2 * t) > WRAP_SCALE,
    )


def run_test(
    p: TesterParams,
    model: NoiseModel,
    region: Region,
    stream: Stream,
    workers: int | None = 1,
) -> TestVerdict:
    """One run of the tester: exactly ``m`` pairs, ``2m`` membership queries."""
    d = derive_params(p)
    est = ns_estimate(model, region, d.t, d.m, stream, workers=workers)
    return TestVerdict(
        accepted=est.mean <= d.threshold,
        ns_fraction=est.mean,
        threshold=d.threshold,
        params=d,
        disagreements=est.exits + est.entries,
    )


def accept_probability(
    p: TesterParams,
    model: NoiseModel,
    region: Region,
    trials: int,
    stream: Stream,
    workers: int | None = 1,
) -> AcceptRate:
    """Empirical acceptance rate over ``trials`` independent runs.

    Trial ``i`` uses ``stream.child(i)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")

    def one(i):
        return run_test(p, model, region, stream.child(i)).accepted

    if workers == 1:
        verdicts = [one(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(one, range(trials)))
    accepted = sum(verdicts)
    rate = accepted / trials
    return AcceptRate(rate, math.sqrt(rate * (1 - rate) / trials), trials, accepted)
