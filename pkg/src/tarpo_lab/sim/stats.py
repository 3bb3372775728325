"""Per-step training statistics and EMA smoothing."""

from __future__ import annotations

from dataclasses import dataclass, field

STREAMS = ("mean_reward", "mean_region_reward", "train_acc", "mean_len")


def ema(series, decay: float) -> list[float]:
    """y[0] = x[0]; y[t] = (1 - decay) * y[t-1] + decay * x[t]."""
    if not 0.0 < decay <= 1.0:
        raise ValueError("decay must be in (0, 1]")
    out: list[float] = []
    for x in series:
        out.append(float(x) if not out else (1.0 - decay) * out[-1] + decay * float(x))
    return out


@dataclass
class TrainStats:
    mean_reward: list[float] = field(default_factory=list)
    mean_region_reward: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    mean_len: list[float] = field(default_factory=list)
    alpha: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    val_acc: dict[int, float] = field(default_factory=dict)
    ema_decay: float = 0.05
    summary: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.alpha)

    def smoothed(self, stream: str) -> list[float]:
        return ema(getattr(self, stream), self.ema_decay)

    def step_records(self) -> list[dict]:
        smooth = {name: self.smoothed(name) for name in STREAMS}
        records = []
        for t in range(self.steps):
            rec = {
                "step": t,
                "mean_reward": self.mean_reward[t],
                "mean_region_reward": self.mean_region_reward[t],
                "train_acc": self.train_acc[t],
                "mean_len": self.mean_len[t],
                "alpha": self.alpha[t],
                "objective": self.objective[t],
            }
            for name in STREAMS:
                rec[f"ema_{name}"] = smooth[name][t]
            if t in self.val_acc:
                rec["val_acc"] = self.val_acc[t]
            records.append(rec)
        return records
