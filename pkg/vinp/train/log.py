import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from vinp.errors import ContractError


@dataclass
class StepRecord:
    stage: str
    epoch: int
    step: int
    losses: dict[str, float] = field(default_factory=dict)
    accuracy: float | None = None
    gate_update: bool | None = None
    d_delta: float | None = None
    wall: float = 0.0


class TrainLog:
    """Per-step training records, written as one JSON object per line.

    Steps are numbered globally across stages and must increase.
    """

    def __init__(self):
        self.records: list[StepRecord] = []
        self._start = time.monotonic()

    @property
    def next_step(self) -> int:
        return self.records[-1].step + 1 if self.records else 0

    def add(self, stage: str, epoch: int, losses: dict[str, float], accuracy: float = None,
            gate_update: bool = None, d_delta: float = None, step: int = None) -> StepRecord:
        step = self.next_step if step is None else step
        if self.records and step <= self.records[-1].step:
            raise ContractError("TrainLog.add", f"step {step} does not follow {self.records[-1].step}")
        if gate_update is not None and accuracy is None:
            raise ContractError("TrainLog.add", f"gate decision at step {step} has no accuracy")
        rec = StepRecord(stage, epoch, step, {k: float(v) for k, v in losses.items()}, accuracy, gate_update,
                         d_delta, round(time.monotonic() - self._start, 6))
        self.records.append(rec)
        return rec

    def extend(self, other: "TrainLog") -> None:
        for rec in other.records:
            self.add(rec.stage, rec.epoch, rec.losses, rec.accuracy, rec.gate_update, rec.d_delta)

    def for_stage(self, stage: str) -> list[StepRecord]:
        return [r for r in self.records if r.stage == stage]

    def series(self, name: str, stage: str = None) -> list[float]:
        return [r.losses[name] for r in self.records if name in r.losses and (stage is None or r.stage == stage)]

    def __len__(self) -> int:
        return len(self.records)

    def dumps(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def read(cls, path: str | Path) -> "TrainLog":
        log = cls()
        for line in Path(path).read_text().splitlines():
            if line.strip():
                log.records.append(StepRecord(**json.loads(line)))
        return log
