"""Model data: interaction potential, periodic external fields, and the
validation checks on them.

Field Fourier coefficients are sparse maps over integer modes n (the
momentum is 2*pi*n); real fields require hat(-n) = conj(hat(n)).
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, ResolutionError
from .grids import TorusGrid

LP_EXPONENT = {1: 1.0, 2: 2.0, 3: 1.5}  # d=2 admits any p>1; we fix p=2


# ---------------------------------------------------------------------------
# interaction potential

@dataclass
class InteractionPotential:
    """Two-body potential V on R^d; sampler maps points (..., d) to values."""
    kind: str
    params: dict
    sampler: callable

    @classmethod
    def gaussian_well(cls, v: float = 2.0, s: float = 1.0):
        """V(x) = -v exp(-|x|^2/(2 s^2)); strictly negative, so the gap
        kernel 2V*alpha is invertible everywhere on the grid."""
        if v <= 0 or s <= 0:
            raise DomainError("gaussian_well needs v > 0 and s > 0")

        def fn(x):
            x = np.asarray(x, dtype=float)
            r2 = np.sum(x * x, axis=-1)
            return -v * np.exp(-r2 / (2.0 * s * s))

        return cls("gaussian_well", {"v": float(v), "s": float(s)}, fn)

    @classmethod
    def from_callable(cls, fn, params=None, kind="sampled_radial"):
        return cls(kind, dict(params or {}), fn)

    @classmethod
    def tabulated(cls, r: np.ndarray, values: np.ndarray):
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)

        def fn(x):
            x = np.asarray(x, dtype=float)
            rr = np.sqrt(np.sum(x * x, axis=-1))
            return np.interp(rr, r, values, right=0.0)

        return cls("tabulated", {"r": r, "values": values}, fn)

    def __call__(self, x):
        return self.sampler(x)

    def width(self) -> float | None:
        return self.params.get("s")


# ---------------------------------------------------------------------------
# external fields

def _as_mode(key, d):
    m = tuple(int(k) for k in (key if isinstance(key, (tuple, list)) else (key,)))
    if len(m) != d:
        raise ConfigError(f"mode {m} has wrong dimension (expected {d})")
    return m


@dataclass
class ExternalFields:
    """Sparse Fourier maps: W_hat[n] complex, A_hat[n] complex vector (d,)."""
    d: int
    W_hat: dict = field(default_factory=dict)
    A_hat: dict = field(default_factory=dict)

    def __post_init__(self):
        self.W_hat = {_as_mode(k, self.d): complex(v) for k, v in self.W_hat.items()}
        self.A_hat = {_as_mode(k, self.d): np.asarray(v, dtype=complex).reshape(self.d)
                      for k, v in self.A_hat.items()}

    @classmethod
    def none(cls, d):
        return cls(d)

    def conjugate_defect(self) -> float:
        """max |hat(-n) - conj(hat(n))| over both fields."""
        worst = 0.0
        for n, val in self.W_hat.items():
            neg = self.W_hat.get(tuple(-k for k in n), 0.0)
            worst = max(worst, abs(neg - np.conj(val)))
        for n, vec in self.A_hat.items():
            neg = self.A_hat.get(tuple(-k for k in n), np.zeros(self.d, complex))
            worst = max(worst, float(np.max(np.abs(neg - np.conj(vec)))))
        return worst

    def summability_partial_sums(self, shells=None) -> np.ndarray:
        """Partial sums of sum(|W(p)| + (1+|p|)|A(p)|) over |n|_inf <= k."""
        def shell(n):
            return max(abs(k) for k in n) if any(n) else 0

        kmax = 0
        for n in list(self.W_hat) + list(self.A_hat):
            kmax = max(kmax, shell(n))
        shells = shells if shells is not None else range(kmax + 1)
        sums = []
        for k in shells:
            total = 0.0
            for n, val in self.W_hat.items():
                if shell(n) <= k:
                    total += abs(val)
            for n, vec in self.A_hat.items():
                if shell(n) <= k:
                    p = 2 * np.pi * np.sqrt(sum(float(c) ** 2 for c in n))
                    total += (1.0 + p) * float(np.sum(np.abs(vec)))
            sums.append(total)
        return np.array(sums)

    def max_mode(self) -> int:
        m = 0
        for n in list(self.W_hat) + list(self.A_hat):
            m = max(m, max(abs(k) for k in n))
        return m

    def is_zero(self) -> bool:
        return not self.W_hat and not self.A_hat


def field_samples(fields: ExternalFields, grid: TorusGrid):
    """Real-space samples of W and A on the torus grid by inverse DFT.

    Requires the grid to hold at least twice the largest retained mode;
    coarser grids alias and are rejected.
    """
    if grid.N <= 2 * fields.max_mode():
        raise ResolutionError(
            f"grid N={grid.N} cannot carry field modes up to {fields.max_mode()}")
    shape = (grid.N,) * grid.d
    W_hat = np.zeros(shape, dtype=complex)
    for n, val in fields.W_hat.items():
        W_hat[tuple(k % grid.N for k in n)] = val
    W = np.fft.ifftn(W_hat) * grid.N ** grid.d
    A_hat = np.zeros(shape + (grid.d,), dtype=complex)
    for n, vec in fields.A_hat.items():
        A_hat[tuple(k % grid.N for k in n)] = vec
    A = np.fft.ifftn(A_hat, axes=tuple(range(grid.d))) * grid.N ** grid.d
    return W, A


def analyze_field(samples: np.ndarray, grid: TorusGrid) -> dict:
    """Forward DFT back to a sparse coefficient map (inverse of synthesis)."""
    hat = np.fft.fftn(samples, axes=tuple(range(grid.d))) / grid.N ** grid.d
    out = {}
    it = np.nditer(np.zeros((grid.N,) * grid.d), flags=["multi_index"])
    n1 = np.rint(np.fft.fftfreq(grid.N) * grid.N).astype(int)
    for _ in it:
        idx = it.multi_index
        val = hat[idx]
        if np.max(np.abs(val)) > 1e-14:
            out[tuple(int(n1[i]) for i in idx)] = val
    return out


# ---------------------------------------------------------------------------
# model config

@dataclass
class ModelConfig:
    d: int
    mu: float
    V: InteractionPotential
    fields: ExternalFields
    h: float
    seed: int = 0
    numerics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise DomainError("d must be 1, 2 or 3")
        if not (0 < self.h < 1):
            raise DomainError("h must lie in (0,1)")


# ---------------------------------------------------------------------------
# validation

@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {c.name: {"passed": c.passed, "measured": c.measured,
                         "detail": c.detail} for c in self.checks}


def validate(config: ModelConfig, n_test_points: int = 256,
             box_half_width: float = 12.0) -> ValidationReport:
    """Check reflection symmetry of V, its discretized L^p norm, and the
    Fourier summability / conjugate symmetry of the fields. Failures are
    reported, not raised."""
    rng = np.random.default_rng(config.seed + 20140331)
    checks = []

    # reflection symmetry on random test points
    pts = rng.uniform(-box_half_width / 2, box_half_width / 2,
                      size=(n_test_points, config.d))
    defect = float(np.max(np.abs(config.V(pts) - config.V(-pts))))
    scale = float(np.max(np.abs(config.V(pts))) + 1e-300)
    checks.append(CheckResult("reflection_symmetry", defect <= 1e-12 * scale,
                              defect, "max |V(x)-V(-x)| over test points"))

    # discretized L^p norm on a box (p set by the dimension)
    p = LP_EXPONENT[config.d]
    n1 = 256 if config.d == 1 else (64 if config.d == 2 else 32)
    ax = np.linspace(-box_half_width, box_half_width, n1, endpoint=False)
    dx = ax[1] - ax[0]
    mesh = np.meshgrid(*([ax] * config.d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = np.abs(config.V(pts)) ** p
    lp = float(np.sum(vals) * dx ** config.d) ** (1.0 / p)
    checks.append(CheckResult("lp_norm_finite", np.isfinite(lp), lp,
                              f"discretized L^{p} norm on [-{box_half_width},{box_half_width}]^d"))

    defect = config.fields.conjugate_defect()
    checks.append(CheckResult("field_conjugate_symmetry", defect <= 1e-12,
                              defect, "max |hat(-n) - conj(hat(n))|"))

    sums = config.fields.summability_partial_sums()
    if len(sums) >= 4:
        tail = float(sums[-1] - sums[len(sums) // 2])
        frac = tail / (abs(sums[-1]) + 1e-300)
        plateau = frac < 0.05
        checks.append(CheckResult("fourier_summability", plateau, frac,
                                  "tail fraction of partial sums (plateau < 0.05)"))
    else:
        total = float(sums[-1]) if len(sums) else 0.0
        checks.append(CheckResult("fourier_summability", np.isfinite(total),
                                  total, "retained-mode sum (exact on finite set)"))
    return ValidationReport(checks)


# ---------------------------------------------------------------------------
# config file ingestion

_SCHEMA_PATH = Path(__file__).parent / "schema" / "config.schema.json"


def _potential_from_spec(spec: dict) -> InteractionPotential:
    kind = spec["kind"]
    params = spec.get("params", {})
    if kind == "gaussian_well":
        return InteractionPotential.gaussian_well(
            v=params.get("v", 2.0), s=params.get("s", 1.0))
    if kind == "tabulated":
        return InteractionPotential.tabulated(params["r"], params["values"])
    raise ConfigError(f"unknown potential kind {kind!r} in config file")


def config_from_dict(raw: dict) -> ModelConfig:
    try:
        import jsonschema
        with open(_SCHEMA_PATH) as fh:
            schema = json.load(fh)
        jsonschema.validate(raw, schema)
    except ImportError:  # pragma: no cover
        pass
    except Exception as exc:
        raise ConfigError(f"config does not match schema: {exc}") from exc

    missing = [k for k in ("dimension", "mu", "h", "potential") if k not in raw]
    if missing:
        raise ConfigError(f"config missing keys: {missing}")
    d = int(raw["dimension"])
    fields_spec = raw.get("fields", {})
    W_hat = {tuple(e["mode"]): complex(e.get("re", 0.0), e.get("im", 0.0))
             for e in fields_spec.get("W", [])}
    A_hat = {tuple(e["mode"]):
             np.asarray(e.get("vec_re", [0.0] * d), float)
             + 1j * np.asarray(e.get("vec_im", [0.0] * d), float)
             for e in fields_spec.get("A", [])}
    return ModelConfig(
        d=d,
        mu=float(raw["mu"]),
        V=_potential_from_spec(raw["potential"]),
        fields=ExternalFields(d, W_hat, A_hat),
        h=float(raw["h"]),
        seed=int(raw.get("seed", 0)),
        numerics=dict(raw.get("numerics", {})),
    )


def load_config(path) -> ModelConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)
