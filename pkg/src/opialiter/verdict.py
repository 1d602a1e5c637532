"""Check outcomes and their canonical JSON rendering."""

import enum
import json
import math
from dataclasses import dataclass, field


class Status(str, enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    NOT_TRIGGERED = "not_triggered"
    INCONCLUSIVE = "inconclusive"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TailWindow:
    """Finite stand-in for n -> infinity: the last ``window`` entries, after ``burn_in``."""

    burn_in: int
    window: int

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.window < 2:
            raise ValueError("window must be >= 2")

    @classmethod
    def default(cls, length):
        # burn-in: half the sequence; window: a quarter of it, capped at 100
        burn_in = length // 2
        window = max(2, min(100, length // 4))
        if burn_in + window > length:
            burn_in = max(0, length - window)
        return cls(burn_in, window)

    def to_json(self):
        return {"burn_in": self.burn_in, "window": self.window}


@dataclass
class Verdict:
    check: str
    status: Status
    threshold: float = None
    window: TailWindow = None
    witnesses: list = field(default_factory=list)

    def __post_init__(self):
        self.status = Status(self.status)
        for name, value in self.witnesses:
            if not math.isfinite(value):
                raise ValueError(f"witness {name} is not finite: {value}")
        if self.status is Status.FAILS and not self.witnesses:
            raise ValueError("a failing verdict needs at least one witness")

    @property
    def holds(self):
        return self.status is Status.HOLDS

    def witness(self, name):
        for key, value in self.witnesses:
            if key == name:
                return value
        raise KeyError(name)

    def to_json(self):
        return {
            "check": self.check,
            "status": self.status.value,
            "threshold": self.threshold,
            "window": self.window.to_json() if self.window is not None else None,
            "witnesses": [{"name": n, "value": v} for n, v in self.witnesses],
        }


def format_float(x):
    """17 significant digits; always round-trips and always reads back as a float."""
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    s = format(x, ".17g")
    if all(c in "-0123456789" for c in s):
        s += ".0"
    return s


def dumps(obj, indent=2):
    """Deterministic JSON: insertion-ordered keys, fixed float formatting."""
    out = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def _emit(obj, out, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, enum.Enum):
        _emit(obj.value, out, indent, level)
    elif isinstance(obj, int):
        out.append(str(int(obj)))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(str(k), ensure_ascii=False) + ": ")
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        # numpy scalars
        if hasattr(obj, "item"):
            _emit(obj.item(), out, indent, level)
        else:
            raise TypeError(f"cannot serialise {type(obj).__name__}")
