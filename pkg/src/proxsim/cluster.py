"""Deterministic cluster simulator with exact resource metering.

The simulator executes distributed algorithms on one process while charging
resources the way a synchronous m-machine cluster would:

* communication rounds: every collective (all_average, broadcast) is 1 round
  and sends 1 predictor-sized vector per machine;
* vector operations: callers charge one unit per O(d) pass (one per-sample
  gradient, one full pass over q samples is q units); METERING.md tabulates
  the convention for every solver step;
* elapsed parallel time: machines run concurrently between collectives, so
  each inter-collective phase contributes max-over-machines of the ops
  charged inside it (a phase where only one machine works is therefore fully
  serialized, which is exactly the cost model of designated-machine passes);
* memory high-water marks: resident samples via store/release, resident
  predictor vectors via touch_vectors.

Verification work (oracle solves, population suboptimality) happens off the
simulated cluster and must never be charged here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEDGER_CSV_HEADER = (
    "algo,b,m,T,K,R,rounds,vectors_sent,ops_parallel,ops_total,peak_samples,peak_vectors"
)


@dataclass
class ResourceLedger:
    """Meter readings for one simulated run."""

    m: int
    rounds: int = 0
    vectors_sent_per_machine: int = 0
    vector_ops: np.ndarray = field(default=None)
    ops_parallel: int = 0
    peak_samples: np.ndarray = field(default=None)
    peak_vectors: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("m must be positive")
        if self.vector_ops is None:
            self.vector_ops = np.zeros(self.m, dtype=np.int64)
        if self.peak_samples is None:
            self.peak_samples = np.zeros(self.m, dtype=np.int64)
        if self.peak_vectors is None:
            self.peak_vectors = np.zeros(self.m, dtype=np.int64)

    @property
    def ops_total(self) -> int:
        return int(self.vector_ops.sum())

    def csv_row(self, algo: str, b: int, T: int, K: int = 0, R: int = 0) -> str:
        """One ledger row; peaks are reported as the max over machines."""
        fields = [
            algo,
            str(int(b)),
            str(self.m),
            str(int(T)),
            str(int(K)),
            str(int(R)),
            str(self.rounds),
            str(self.vectors_sent_per_machine),
            str(self.ops_parallel),
            str(self.ops_total),
            str(int(self.peak_samples.max())),
            str(int(self.peak_vectors.max())),
        ]
        return ",".join(fields)

    def snapshot(self) -> dict:
        return {
            "m": self.m,
            "rounds": self.rounds,
            "vectors_sent_per_machine": self.vectors_sent_per_machine,
            "vector_ops": self.vector_ops.tolist(),
            "ops_parallel": int(self.ops_parallel),
            "ops_total": self.ops_total,
            "peak_samples": int(self.peak_samples.max()),
            "peak_vectors": int(self.peak_vectors.max()),
        }


class ClusterSim:
    """Synchronous m-machine simulator.

    Machines are indexed 0..m-1.  The object holds no sample data itself;
    algorithms keep their arrays and report counts, so the simulator stays a
    pure metering device plus the collective primitives.
    """

    def __init__(self, m: int):
        if m <= 0:
            raise ValueError("cluster needs at least one machine")
        self.m = m
        self.ledger = ResourceLedger(m)
        self._resident_samples = np.zeros(m, dtype=np.int64)
        self._resident_vectors = np.zeros(m, dtype=np.int64)
        self._phase_ops = np.zeros(m, dtype=np.int64)
        self._held = [None] * m  # last broadcast payload per machine

    def _require_machine(self, i: int):
        if not (0 <= i < self.m):
            raise ValueError("machine index %d out of range for m=%d" % (i, self.m))

    def _close_phase(self):
        if self._phase_ops.any():
            self.ledger.ops_parallel += int(self._phase_ops.max())
            self._phase_ops[:] = 0

    # -- computation ---------------------------------------------------------

    def charge(self, machine: int, n_ops: int) -> None:
        """Charge n_ops vector operations to one machine inside the current phase."""
        self._require_machine(machine)
        if n_ops < 0:
            raise ValueError("cannot charge negative ops")
        self._phase_ops[machine] += n_ops
        self.ledger.vector_ops[machine] += n_ops

    def charge_all(self, n_ops: int) -> None:
        """Every machine does the same n_ops concurrently."""
        for i in range(self.m):
            self.charge(i, n_ops)

    # -- communication -------------------------------------------------------

    def all_average(self, vectors) -> np.ndarray:
        """Exact coordinate-wise mean of one vector per machine; 1 round."""
        if len(vectors) != self.m:
            raise ValueError("all_average needs exactly one vector per machine")
        stack = np.stack([np.asarray(v, dtype=float) for v in vectors])
        if stack.ndim != 2:
            raise ValueError("all_average vectors must be 1-d and equally sized")
        self._close_phase()
        self.ledger.rounds += 1
        self.ledger.vectors_sent_per_machine += 1
        return stack.sum(axis=0) / self.m

    def broadcast(self, source: int, v: np.ndarray) -> None:
        """Machine `source` sends v to everyone; 1 round; all copies identical."""
        self._require_machine(source)
        v = np.asarray(v, dtype=float)
        self._close_phase()
        self.ledger.rounds += 1
        self.ledger.vectors_sent_per_machine += 1
        for i in range(self.m):
            self._held[i] = v.copy()

    def held(self, machine: int) -> np.ndarray:
        self._require_machine(machine)
        return self._held[machine]

    # -- memory --------------------------------------------------------------

    def store_batch(self, machine: int, n_samples: int) -> None:
        self._require_machine(machine)
        if n_samples <= 0:
            raise ValueError("store_batch needs a positive sample count")
        self._resident_samples[machine] += n_samples
        self.ledger.peak_samples[machine] = max(
            self.ledger.peak_samples[machine], self._resident_samples[machine]
        )

    def release_batch(self, machine: int, n_samples: int) -> None:
        self._require_machine(machine)
        if n_samples > self._resident_samples[machine]:
            raise ValueError(
                "releasing %d samples but machine %d only holds %d"
                % (n_samples, machine, self._resident_samples[machine])
            )
        self._resident_samples[machine] -= n_samples

    def resident_samples(self, machine: int) -> int:
        self._require_machine(machine)
        return int(self._resident_samples[machine])

    def touch_vectors(self, machine: int, n_vectors: int) -> None:
        """Record that a machine currently holds n_vectors predictor-sized arrays."""
        self._require_machine(machine)
        if n_vectors < 0:
            raise ValueError("vector count cannot be negative")
        self._resident_vectors[machine] = n_vectors
        self.ledger.peak_vectors[machine] = max(
            self.ledger.peak_vectors[machine], n_vectors
        )

    def finish(self) -> ResourceLedger:
        """Close the trailing compute phase and return the ledger."""
        self._close_phase()
        return self.ledger
