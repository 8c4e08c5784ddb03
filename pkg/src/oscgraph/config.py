"""Run configuration: flat ``key = value`` files with ``#`` comments.

Complex numbers are written ``re,im``. Couplings and frequencies accept
integers, fractions such as ``3/2`` and sympy expressions such as
``sqrt(2)``; these stay exact so regime boundaries are detected exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .boundary import TruncationBox
from .free_resolvent import GaussianSource, cubic_bump

DEFAULT_TOLERANCES = {
    "ode_residual": 1e-6,
    "matching_residual": 1e-7,
    "dirichlet_value": 1e-10,
    "solver_residual": 1e-10,
    "convergence": 1e-6,
}
DEFAULT_SOURCE = "gaussian:0,0,1,0,0.5,0.3"
DEFAULT_TAUS = (10.0, 40.0, 160.0, 640.0)


class ConfigError(ValueError):
    pass


def parse_number(text: str):
    """int, Fraction or float when possible, else a sympy number (kept exact)."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    if "/" in text:
        try:
            return Fraction(text)
        except ValueError:
            pass
    try:
        return float(text)
    except ValueError:
        pass
    import sympy

    try:
        val = sympy.sympify(text, evaluate=True)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc
    if not (val.is_number and val.is_real):
        raise ConfigError(f"not a real number: {text!r}")
    return val


def parse_complex(text: str) -> complex:
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"bad complex number {text!r}") from exc
    raise ConfigError(f"complex numbers are written re,im; got {text!r}")


@dataclass(frozen=True)
class SourceSpec:
    """One channel source; ``kind`` is ``gaussian`` (width) or ``bump`` (half width)."""

    kind: str
    m: int
    n: int
    amp: complex
    center: float
    width: float

    def build(self):
        if self.kind == "gaussian":
            return GaussianSource(self.amp, self.center, self.width)
        return cubic_bump(self.center, self.width, self.amp)

    def text(self) -> str:
        return f"{self.kind}:{self.m},{self.n},{_g(self.amp.real)},{_g(self.amp.imag)},{_g(self.center)},{_g(self.width)}"


def parse_sources(text: str) -> list[SourceSpec]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        kind, _, body = item.rpartition(":")
        kind = kind.strip().lower() or "gaussian"
        if kind not in ("gaussian", "bump"):
            raise ConfigError(f"unknown source kind {kind!r}")
        f = [x.strip() for x in body.split(",")]
        if len(f) != 6:
            raise ConfigError(f"source needs m,n,amp_re,amp_im,center,width; got {item!r}")
        try:
            spec = SourceSpec(kind, int(f[0]), int(f[1]), complex(float(f[2]), float(f[3])), float(f[4]), float(f[5]))
        except ValueError as exc:
            raise ConfigError(f"bad source {item!r}") from exc
        if spec.m < 0 or spec.n < 0 or not spec.width > 0:
            raise ConfigError(f"bad source {item!r}: indices must be >= 0 and width > 0")
        out.append(spec)
    keys = [(s.m, s.n) for s in out]
    if len(set(keys)) != len(keys):
        raise ConfigError("at most one source per channel")
    return out


def _g(x) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class RunConfig:
    alpha_plus: object = 1
    alpha_minus: object = 1
    nu_plus: object = 1
    nu_minus: object = 1
    Lambda: complex = 1j
    box: TruncationBox = TruncationBox(24, 24)
    h: float = 0.02
    lambda_start: float = 0.0
    lambda_stop: float = 4.0
    lambda_step: float = 0.25
    output: str | None = None
    format: str = "csv"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    sources: tuple = ()
    circ: bool = False
    force_regime: str | None = None
    taus: tuple = DEFAULT_TAUS
    box_sequence: tuple = ()
    suite: str = "all"

    def __post_init__(self):
        if not self.lambda_step > 0:
            raise ConfigError("lambda_step must be positive")
        if self.lambda_stop < self.lambda_start:
            raise ConfigError("lambda_stop must not be below lambda_start")
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ConfigError(f"tolerance {k} must be positive")
        try:
            self.params
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def params(self):
        from .params import ModelParams

        return ModelParams(self.alpha_plus, self.alpha_minus, self.nu_plus, self.nu_minus)

    def lambda_grid(self) -> list[float]:
        """start, start + step, ... strictly below stop plus stop itself when it lies on the grid; empty if start = stop."""
        if self.lambda_stop == self.lambda_start:
            return []
        n = int(math.floor((self.lambda_stop - self.lambda_start) / self.lambda_step + 1e-9))
        return [self.lambda_start + k * self.lambda_step for k in range(n + 1)]

    def source_functions(self) -> dict:
        specs = self.sources or tuple(parse_sources(DEFAULT_SOURCE))
        return {(s.m, s.n): s.build() for s in specs}

    def boxes(self) -> list[TruncationBox]:
        if self.box_sequence:
            return list(self.box_sequence)
        b = self.box
        return [TruncationBox(max(1, b.m_max // 4), max(1, b.n_max // 4)),
                TruncationBox(max(1, b.m_max // 2), max(1, b.n_max // 2)), b]

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def resolved(self) -> dict:
        """Every setting as text, in a fixed order, for embedding in reports."""
        d = {
            "alpha_plus": str(self.alpha_plus), "alpha_minus": str(self.alpha_minus),
            "nu_plus": str(self.nu_plus), "nu_minus": str(self.nu_minus),
            "Lambda": f"{_g(self.Lambda.real)},{_g(self.Lambda.imag)}",
            "box": f"{self.box.m_max}x{self.box.n_max}", "h": _g(self.h),
            "lambda_start": _g(self.lambda_start), "lambda_stop": _g(self.lambda_stop),
            "lambda_step": _g(self.lambda_step), "format": self.format,
            "source": "; ".join(s.text() for s in self.sources) or DEFAULT_SOURCE,
            "circ": str(self.circ).lower(), "force_regime": self.force_regime or "",
            "taus": ",".join(_g(t) for t in self.taus),
            "box_sequence": ",".join(f"{b.m_max}x{b.n_max}" for b in self.boxes()),
            "suite": self.suite,
        }
        for k in sorted(self.tolerances):
            d[f"tol.{k}"] = _g(self.tolerances[k])
        return d


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse_config(text: str) -> RunConfig:
    kw = {}
    tol = dict(DEFAULT_TOLERANCES)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key = value")
        try:
            if key in ("alpha_plus", "alpha_minus", "nu_plus", "nu_minus"):
                kw[key] = parse_number(value)
            elif key == "Lambda":
                kw[key] = parse_complex(value)
            elif key == "box":
                kw[key] = TruncationBox.parse(value)
            elif key in ("h", "lambda_start", "lambda_stop", "lambda_step"):
                kw[key] = float(value)
            elif key in ("output", "format", "suite"):
                kw[key] = value
            elif key == "force_regime":
                kw[key] = value or None
            elif key == "circ":
                kw[key] = _BOOL[value.lower()]
            elif key == "source":
                kw["sources"] = tuple(parse_sources(value))
            elif key == "taus":
                kw[key] = tuple(float(t) for t in value.split(","))
            elif key == "box_sequence":
                kw[key] = tuple(TruncationBox.parse(b) for b in value.split(","))
            elif key.startswith("tol."):
                tol[key[4:]] = float(value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    kw["tolerances"] = tol
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    """Read and parse a config file; OSError propagates for the caller to map to an I/O failure."""
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


__all__ = ["ConfigError", "RunConfig", "SourceSpec", "DEFAULT_TOLERANCES", "parse_config", "load_config",
           "parse_number", "parse_complex", "parse_sources"]
