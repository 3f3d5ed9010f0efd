"""Run configuration: flat ``key = value`` files with ``#`` comments."""
import dataclasses
import hashlib
import os
from dataclasses import dataclass, fields
from typing import Optional


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass
class RunConfig:
    train: Optional[str] = None
    dev: Optional[str] = None
    embeddings: Optional[str] = None
    stopwords: Optional[str] = None
    out_dir: str = "run"

    word_dim: int = 300  # only used when no embeddings file is given
    char_dim: int = 16
    char_filters: int = 100
    filter_width: int = 5
    hidden: int = 100
    tag_dim: int = 20
    dropout: float = 0.2
    hops: int = 2
    beam_k: int = 12
    candidates: int = 6
    max_len: int = 20
    max_span_len: int = 15
    top_k_spans: int = 5
    skip_window: int = 2
    tag_epochs: int = 5
    min_tag_sentence: int = 9
    gen_vocab_size: int = 20000
    rho: float = 0.95
    epsilon: float = 1e-6
    lr: float = 1.0
    dom_epochs: int = 20
    e2e_epochs: int = 20
    batch: int = 1
    seed: int = 0

    def validate(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("dropout", "seed"):
                continue
            if isinstance(v, (int, float)) and not isinstance(v, bool) and v <= 0:
                raise ConfigError(f"{f.name} must be positive, got {v}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0,1), got {self.dropout}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")
        if self.beam_k < self.candidates:
            raise ConfigError(f"beam_k ({self.beam_k}) must be >= candidates ({self.candidates})")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must be in (0,1), got {self.rho}")
        return self

    def set(self, key, raw, line=None):
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise ConfigError(f"unknown key {key!r}", line)
        kind = types[key]
        try:
            if kind in (int, "int"):
                value = int(raw)
            elif kind in (float, "float"):
                value = float(raw)
            else:
                value = None if raw.lower() in ("", "none") else raw
        except ValueError:
            raise ConfigError(f"bad value {raw!r} for {key}", line) from None
        setattr(self, key, value)

    def canonical(self):
        return "\n".join(f"{f.name} = {getattr(self, f.name)}" for f in fields(self)) + "\n"

    def digest(self):
        """Hash of hyperparameters and data paths (``out_dir`` excluded)."""
        lines = [ln for ln in self.canonical().splitlines() if not ln.startswith("out_dir")]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


def parse_config(text, base=None):
    cfg = dataclasses.replace(base) if base is not None else RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        cfg.set(key, value, lineno)
    return cfg


def load_config(path=None, overrides=(), seed=None):
    """``$KEYREADER_SEED``, then file values, then ``KEY=VALUE`` overrides, then ``seed``."""
    cfg = RunConfig()
    if os.environ.get("KEYREADER_SEED"):
        cfg.set("seed", os.environ["KEYREADER_SEED"])
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cfg = parse_config(fh.read(), base=cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfg.set(k.strip(), v.strip())
    if seed is not None:
        cfg.seed = int(seed)
    return cfg.validate()
