"""Per-node local clocks and the offset/rate servo used by clock sync.

A local clock advances at ``1 + (drift_ppm + rate_adj_ppm) * 1e-6`` times
true time.  ``drift_ppm`` models the oscillator's rate error and is never
touched by software; the servo compensates by stepping the offset and by
adjusting ``rate_adj_ppm``.  Timestamp reads are quantized to ``quantum_ns``
to model the hardware timestamping resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import SimTime


@dataclass(slots=True)
class LocalClock:
    drift_ppm: float = 0.0        # oscillator rate error, fixed for the run
    quantum_ns: int = 8           # hardware timestamp granularity
    rate_adj_ppm: float = 0.0     # servo rate correction
    offset_ns: int = 0            # cumulative step corrections applied so far
    last_true_ns: SimTime = 0
    last_local_ns: float = 0.0    # exact local time at last_true_ns

    @property
    def rate(self) -> float:
        return 1.0 + (self.drift_ppm + self.rate_adj_ppm) * 1e-6

    def local_exact(self, true_now: SimTime) -> float:
        """Unquantized local time at true instant ``true_now``."""
        if true_now < self.last_true_ns:
            raise ValueError(f"clock read at t={true_now} before checkpoint {self.last_true_ns}")
        return self.last_local_ns + (true_now - self.last_true_ns) * self.rate

    def read_ns(self, true_now: SimTime) -> int:
        """Local timestamp, floored to the timestamp quantum."""
        exact = self.local_exact(true_now)
        q = self.quantum_ns
        if q <= 1:
            return int(exact)
        return (int(exact) // q) * q

    def _checkpoint(self, true_now: SimTime) -> None:
        self.last_local_ns = self.local_exact(true_now)
        self.last_true_ns = true_now

    def step(self, delta_ns: int, true_now: SimTime) -> None:
        """Apply a one-shot offset correction of ``delta_ns`` local ns."""
        self._checkpoint(true_now)
        self.last_local_ns += delta_ns
        self.offset_ns += delta_ns

    def set_rate_adj(self, rate_adj_ppm: float, true_now: SimTime) -> None:
        self._checkpoint(true_now)
        self.rate_adj_ppm = rate_adj_ppm

    def true_at_local(self, target_local: int, true_now: SimTime) -> SimTime:
        """Earliest integer true time >= true_now whose reading reaches ``target_local``.

        Assumes no further servo adjustments before the target; callers
        re-evaluate on wake, so a small error only costs an extra wake.
        """
        exact_now = self.local_exact(true_now)
        if exact_now >= target_local:
            return true_now
        t = true_now + int((target_local - exact_now) / self.rate)
        t = max(t, true_now)
        while self.read_ns(t) < target_local:
            t += 1
        return t


def ptp_offset_estimate(t1: int, t2: int, t3: int, t4: int) -> int:
    """Slave-minus-master offset from a completed two-way exchange.

    t1: sync departure (master clock), t2: sync arrival (slave clock),
    t3: delay-req departure (slave), t4: delay-req arrival (master).
    Integer division truncates toward zero.
    """
    num = (t2 - t1) - (t4 - t3)
    return num // 2 if num >= 0 else -((-num) // 2)


@dataclass(slots=True)
class ServoState:
    """History needed by the two-sample drift estimator."""

    last_apply_local_ns: int | None = None
    rounds: int = 0
    max_rate_adj_ppm: float = 200.0


def apply_servo(clock: LocalClock, offset_est_ns: int, true_now: SimTime, state: ServoState) -> None:
    """Step the clock by -offset_est and update the rate correction.

    The first round only steps.  From the second round on, the residual
    offset accrued since the previous correction estimates the remaining
    rate error (offset delta / interval), which is subtracted from
    ``rate_adj_ppm``.
    """
    now_local = clock.read_ns(true_now)
    if state.last_apply_local_ns is not None:
        interval = now_local - state.last_apply_local_ns
        if interval > 0:
            drift_ppm = offset_est_ns * 1e6 / interval
            adj = clock.rate_adj_ppm - drift_ppm
            bound = state.max_rate_adj_ppm
            clock.set_rate_adj(min(max(adj, -bound), bound), true_now)
    clock.step(-offset_est_ns, true_now)
    state.last_apply_local_ns = clock.read_ns(true_now)
    state.rounds += 1
