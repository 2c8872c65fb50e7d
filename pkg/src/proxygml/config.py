"""Flat ``key = value`` run configuration with two named hyperparameter presets."""
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ParameterError, ParseError

PRESETS = {
    "cub-like": {"proxies_per_class": 12, "ratio": 0.05, "lam": 0.3, "use_proxy_reg": True,
                 "lr_proxies": 3e-2},
    "sop-like": {"proxies_per_class": 1, "lam": 0.0, "use_proxy_reg": False, "lr_proxies": 3e-1},
}

# config-file spelling -> field name, where they differ
ALIASES = {"lambda": "lam"}
FIELD_TO_KEY = {v: k for k, v in ALIASES.items()}


@dataclass(frozen=True)
class RunConfig:
    preset: str = "cub-like"
    data: str = "synthetic"
    test_classes: tuple = ()
    classes: int = 10
    per_class: int = 60
    noise: float = 0.15
    d_in: int = 32
    d_embed: int = 32
    head: str = "linear"
    proxies_per_class: int = 12
    ratio: float = 0.05
    lam: float = 0.3
    batch_size: int = 32
    epochs: int = 50
    lr_head: float = 1e-4
    lr_proxies: float = 3e-2
    decay_every: int = 20
    decay_factor: float = 0.1
    seed: int = 0
    use_pos_mask: bool = True
    use_mask_softmax: bool = True
    use_proxy_reg: bool = True
    drop_last: bool = True
    eval_ns: tuple = (1, 2, 4, 8)
    kmeans_seed: int = 0
    out_dir: str = "runs/default"

    def validate(self):
        problems = []
        if self.preset not in PRESETS and self.preset != "none":
            problems.append(f"preset must be one of {sorted(PRESETS)} or none")
        if not 0 < self.ratio <= 1:
            problems.append("ratio must lie in (0, 1]")
        if self.proxies_per_class < 1:
            problems.append("proxies_per_class must be >= 1")
        if self.lam < 0:
            problems.append("lambda must be >= 0")
        if self.batch_size < 2:
            problems.append("batch_size must be >= 2")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        if self.lr_head <= 0 or self.lr_proxies <= 0:
            problems.append("learning rates must be > 0")
        if self.decay_every < 1:
            problems.append("decay_every must be >= 1")
        if self.decay_factor <= 0:
            problems.append("decay_factor must be > 0")
        if self.head not in ("identity", "linear"):
            problems.append("head must be identity or linear")
        if self.d_in < 1 or self.d_embed < 1:
            problems.append("d_in and d_embed must be >= 1")
        if self.head == "identity" and self.d_in != self.d_embed:
            problems.append("identity head requires d_in == d_embed")
        if not self.eval_ns or min(self.eval_ns) < 1:
            problems.append("eval_ns must be a non-empty list of positive integers")
        if self.data == "synthetic":
            if self.classes < 2 or self.per_class < 4 or self.noise < 0:
                problems.append("synthetic data needs classes >= 2, per_class >= 4, noise >= 0")
        if self.seed < 0 or self.kmeans_seed < 0:
            problems.append("seeds must be non-negative")
        if problems:
            raise ParameterError("invalid config: " + "; ".join(problems))
        return self

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{FIELD_TO_KEY.get(f.name, f.name)} = {v}")
        return "\n".join(lines) + "\n"

    def with_toggles(self, pos, mask, reg):
        return replace(self, use_pos_mask=pos, use_mask_softmax=mask, use_proxy_reg=reg)

    as_dict = asdict


_TYPES = {f.name: getattr(f.type, "__name__", f.type) for f in fields(RunConfig)}


def _coerce(name, raw, where):
    kind = _TYPES[name]
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "on", "yes"):
                return True
            if low in ("0", "false", "off", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple":
            items = [x.strip() for x in raw.split(",") if x.strip()]
            return tuple(int(x) for x in items) if name == "eval_ns" else tuple(items)
        return raw
    except ValueError as exc:
        raise ParseError(f"{where}: bad value for {name}: {exc}") from None


def parse_config(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        name = ALIASES.get(key, key)
        if name not in _TYPES or key in FIELD_TO_KEY:
            raise ParseError(f"{source}:{lineno}: unknown key {key!r}")
        values[name] = _coerce(name, raw, f"{source}:{lineno}")
    return build_config(**values)


def build_config(**values):
    """Defaults, then the preset, then explicit values; validated."""
    preset = values.get("preset", RunConfig.preset)
    merged = dict(PRESETS.get(preset, {}))
    merged.update(values)
    return RunConfig(**merged).validate()


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(), str(path))
