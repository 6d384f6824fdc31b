"""Check results, atomwise witnesses and the JSON/CSV verification report."""

import json
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

MAX_WITNESSES = 5
WITNESS_COLUMNS = ['atom', 'block', 'lhs', 'rhs', 'gap']


def jsonable(value: Any) -> Any:
    """Convert numpy values and infinities into JSON-safe values."""
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return value


@dataclass
class Witness:
    """A concrete, reproducible counterexample: inputs plus atomwise lhs/rhs."""

    description: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    inputs: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def atomwise(cls, description: str, lhs, rhs, algebra=None, inputs: Optional[dict] = None,
                 tol: float = 0.0) -> 'Witness':
        """Build a witness with one row per atom; ``algebra`` supplies block indices."""
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        rows = []
        for atom in range(lhs.size):
            a, b = float(lhs[atom]), float(rhs[atom])
            if math.isinf(a) and math.isinf(b) and a == b:
                gap = 0.0
            else:
                gap = a - b
            rows.append({
                'atom': atom,
                'block': int(algebra.labels[atom]) if algebra is not None else 0,
                'lhs': a,
                'rhs': b,
                'gap': gap,
            })
        return cls(description=description, rows=rows, inputs=dict(inputs or {}))

    def to_dict(self) -> dict:
        """Convert witness to dictionary for JSON serialization."""
        return {
            'description': self.description,
            'inputs': jsonable(self.inputs),
            'rows': jsonable(self.rows),
        }


@dataclass
class CheckResult:
    """Outcome of one verification check."""

    check_id: str
    anchor: str
    passed: bool = True
    trials: int = 0
    violations: int = 0
    witnesses: List[Witness] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None

    def add_violation(self, witness: Witness):
        """Record a violated instance; only the first few witnesses are kept."""
        self.passed = False
        self.violations += 1
        if len(self.witnesses) < MAX_WITNESSES:
            self.witnesses.append(witness)

    def finish(self) -> 'CheckResult':
        if self.passed:
            logger.info(f"{self.check_id}: pass ({self.trials} trials)")
        else:
            logger.warning(f"{self.check_id}: FAIL ({self.violations} violations in {self.trials} trials)")
        return self

    def to_dict(self) -> dict:
        return {
            'check_id': self.check_id,
            'anchor': self.anchor,
            'status': 'pass' if self.passed else 'fail',
            'trials': self.trials,
            'violations': self.violations,
            'seed': self.seed,
            'details': jsonable(self.details),
            'witnesses': [w.to_dict() for w in self.witnesses],
        }


@dataclass
class CheckRecord:
    """A check result as it appears in a report, with its timing."""

    result: CheckResult
    elapsed: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        data = self.result.to_dict()
        if include_timing:
            data['elapsed_s'] = round(self.elapsed, 6)
        return data


class ReportState:
    """Thread-safe collection of check records; output order is sorted by check id."""

    def __init__(self):
        self._lock = threading.RLock()
        self._records: List[CheckRecord] = []

    def add(self, result: CheckResult, elapsed: float = 0.0):
        with self._lock:
            self._records.append(CheckRecord(result, elapsed))

    @property
    def records(self) -> List[CheckRecord]:
        with self._lock:
            return sorted(self._records, key=lambda r: r.result.check_id)

    def clear(self):
        with self._lock:
            self._records.clear()


@dataclass
class Report:
    """Machine-readable verification report for one command run."""

    command: str
    scenario: str
    seed: int
    records: List[CheckRecord] = field(default_factory=list)
    outputs: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    error_code: Optional[int] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(r.result.passed for r in self.records)

    @property
    def exit_code(self) -> int:
        if self.error_code is not None:
            return self.error_code
        return 0 if self.passed else 1

    def to_dict(self, include_timing: bool = False) -> dict:
        data = {
            'command': self.command,
            'scenario': self.scenario,
            'seed': self.seed,
            'status': 'pass' if self.passed else 'fail',
            'exit_code': self.exit_code,
            'records': [r.to_dict(include_timing) for r in sorted(
                self.records, key=lambda r: r.result.check_id)],
            'outputs': jsonable(self.outputs),
        }
        if self.error is not None:
            data['error'] = self.error
        return data

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)

    def witness_frame(self) -> pd.DataFrame:
        """All witness rows, ordered by check id, in the fixed witness columns.

        The check each row belongs to is carried by the JSON report.
        """
        rows = []
        for record in sorted(self.records, key=lambda r: r.result.check_id):
            for witness in record.result.witnesses:
                rows.extend(witness.rows)
        return pd.DataFrame(rows, columns=WITNESS_COLUMNS)

    def to_csv(self) -> str:
        return self.witness_frame().to_csv(index=False)
