"""Run configuration: one flat record of every tunable, with file loading.

Config files use one `key = value` line per setting, `#` comments, and the
same key names as the RunConfig fields. Command-line flags override file
values, which override the defaults.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import SplitProtocol
from .supra import FusionConfig, SupraMapping


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int_tuple(text) -> tuple[int, ...]:
    if isinstance(text, tuple):
        return tuple(int(v) for v in text)
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of integers")
    return tuple(int(p) for p in parts)


@dataclass(frozen=True)
class RunConfig:
    """Every knob of the pipeline, defaulting to the standard setup:
    9-state/10-mixture acoustic models, 3 supra states of 3 mixtures over
    state groups of 3, sentences 1-4 for training and 5-8 for testing, and
    an even score blend (alpha 0.5)."""

    alpha: float = 0.5
    num_states: int = 9
    num_mixtures: int = 10
    num_supra_mixtures: int = 3
    supra_groups: tuple[int, ...] = (3, 3, 3)
    train_sentences: tuple[int, ...] = (1, 2, 3, 4)
    test_sentences: tuple[int, ...] = (5, 6, 7, 8)
    variance_floor: float = 1e-4
    em_tol: float = 1e-5
    em_max_iters: int = 40
    seed: int = 0
    length_normalize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "supra_groups",
                           _parse_int_tuple(self.supra_groups))
        object.__setattr__(self, "train_sentences",
                           _parse_int_tuple(self.train_sentences))
        object.__setattr__(self, "test_sentences",
                           _parse_int_tuple(self.test_sentences))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.num_states < 1 or self.num_mixtures < 1:
            raise ValueError("num_states and num_mixtures must be >= 1")
        if self.num_supra_mixtures < 1:
            raise ValueError("num_supra_mixtures must be >= 1")
        if sum(self.supra_groups) != self.num_states:
            raise ValueError(
                f"supra_groups {self.supra_groups} must sum to num_states "
                f"{self.num_states}")
        if self.variance_floor <= 0.0 or self.em_tol <= 0.0:
            raise ValueError("variance_floor and em_tol must be positive")
        if self.em_max_iters < 1:
            raise ValueError("em_max_iters must be >= 1")
        self.protocol  # validates sentence-set disjointness

    @property
    def protocol(self) -> SplitProtocol:
        return SplitProtocol(train_sentences=self.train_sentences,
                             test_sentences=self.test_sentences)

    @property
    def fusion(self) -> FusionConfig:
        return FusionConfig(alpha=self.alpha,
                            length_normalize=self.length_normalize)

    @property
    def mapping(self) -> SupraMapping:
        return SupraMapping(group_sizes=self.supra_groups)


# One parser per RunConfig field; tests assert the two stay in sync.
_FIELD_PARSERS = {
    "alpha": float,
    "num_states": int,
    "num_mixtures": int,
    "num_supra_mixtures": int,
    "supra_groups": _parse_int_tuple,
    "train_sentences": _parse_int_tuple,
    "test_sentences": _parse_int_tuple,
    "variance_floor": float,
    "em_tol": float,
    "em_max_iters": int,
    "seed": int,
    "length_normalize": _parse_bool,
}


def parse_config_file(path) -> dict:
    """Read `key = value` settings; returns a field-name -> value dict."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _FIELD_PARSERS:
                raise ValueError(f"{path}:{lineno}: unknown setting {key!r}")
            try:
                values[key] = _FIELD_PARSERS[key](value.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: "
                                 f"{exc}") from exc
    return values


def make_config(config_path=None, **overrides) -> RunConfig:
    """Layer defaults, an optional config file, and explicit overrides.

    Overrides with value None are ignored, so optional command-line flags
    can be passed through unconditionally.
    """
    values = parse_config_file(config_path) if config_path else {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_PARSERS:
            raise ValueError(f"unknown setting {key!r}")
        values[key] = _FIELD_PARSERS[key](value) if isinstance(value, str) \
            else value
    return RunConfig(**values)
