"""Models evaluated by a campaign: synthetic field families and external solvers"""

import itertools
import json
import math
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.config import EXCHANGE_POLL_INTERVAL, EXCHANGE_TIMEOUT
from src.errors import ConfigError, DomainError, ExchangeTimeout, MalformedSnapshot
from src.snapshot import FieldSnapshot
from src.snapshot_storage import atomic_write, read_gfld

SYNTHETIC_SMOOTH = "synthetic_smooth"
SYNTHETIC_TRANSITION = "synthetic_transition"
EXTERNAL_EXCHANGE = "external_exchange"
MODEL_KINDS = (SYNTHETIC_SMOOTH, SYNTHETIC_TRANSITION, EXTERNAL_EXCHANGE)


@dataclass(frozen=True)
class ParamMap:
    """Affine map from the unit cube to physical parameters: lo + (hi − lo)·ξ"""

    lo: Sequence[float]
    hi: Sequence[float]

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lo)
        hi = tuple(float(x) for x in self.hi)
        if len(lo) != len(hi):
            raise DomainError(f"lo has {len(lo)} entries, hi has {len(hi)}")
        if any(h <= l for l, h in zip(lo, hi)):
            raise DomainError("Every dimension needs hi > lo")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __call__(self, xi: Sequence[float]) -> List[float]:
        xi = [float(x) for x in xi]
        if len(xi) != len(self.lo):
            raise DomainError(f"Expected {len(self.lo)} coordinates, got {len(xi)}")
        return [l + (h - l) * x for l, h, x in zip(self.lo, self.hi, xi)]


def map_params(param_map: ParamMap, xi: Sequence[float]) -> List[float]:
    return param_map(xi)


def sine_modes(size: int, count: int) -> np.ndarray:
    """Orthonormal discrete sine modes sin(πq·a/size), a = 0..size-1, q = 1..count, as columns"""
    if not 1 <= count < size:
        raise DomainError(f"Cannot build {count} sine modes of length {size}")
    a = np.arange(size)[:, None]
    q = np.arange(1, count + 1)[None, :]
    modes = np.sin(np.pi * q * a / size)
    return modes / np.linalg.norm(modes, axis=0)


def _as_xi(xi: Sequence[float], n_d: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=np.float64).ravel()
    if xi.size != n_d:
        raise DomainError(f"Expected {n_d} parameter coordinates, got {xi.size}")
    if np.any(xi < 0.0) or np.any(xi > 1.0):
        raise DomainError(f"Parameter point {xi.tolist()} lies outside the unit cube")
    return xi


class SyntheticSmooth:
    """
    Low-rank field F(ξ) = Σ_q c_q(ξ)·u_q(ξ)·t_qᵀ varying smoothly in ξ.

    c_q(ξ) = 2^-q·(1 + variation·sin(π(ξ₁ + q·ξ₂ + ½Σ_{j>2} ξ_j)/2)). With
    variation < 1/3 the coefficients stay strictly ordered. A nonzero `drift`
    rotates each left mode u_q toward s_{Q+q} by drift·(ξ₁ + ½ξ₂²) radians.
    """

    def __init__(self, n_d: int, n_f: int, m_f: int, n_modes: int = 4, variation: float = 0.3, drift: float = 0.0):
        if not 0.0 <= variation < 1.0 / 3.0:
            raise DomainError(f"variation must lie in [0, 1/3), got {variation}")
        needed = 2 * n_modes if drift else n_modes
        if n_modes < 1 or n_f <= needed or m_f <= n_modes:
            raise DomainError(f"Field {n_f}x{m_f} too small for {n_modes} modes (drift={drift})")
        self.n_d, self.n_f, self.m_f = n_d, n_f, m_f
        self.n_modes, self.variation, self.drift = n_modes, variation, drift
        self.left_modes = sine_modes(n_f, needed)
        self.right_modes = sine_modes(m_f, n_modes)

    def coefficients(self, xi: np.ndarray) -> np.ndarray:
        x1 = xi[0]
        x2 = xi[1] if xi.size > 1 else 0.0
        rest = 0.5 * float(np.sum(xi[2:]))
        q = np.arange(1, self.n_modes + 1)
        return 2.0 ** (-q) * (1.0 + self.variation * np.sin(np.pi * (x1 + q * x2 + rest) / 2.0))

    def left_basis(self, xi: np.ndarray) -> np.ndarray:
        base = self.left_modes[:, : self.n_modes]
        if not self.drift:
            return base
        x2 = xi[1] if xi.size > 1 else 0.0
        angle = self.drift * (xi[0] + 0.5 * x2 ** 2)
        return math.cos(angle) * base + math.sin(angle) * self.left_modes[:, self.n_modes:]

    def field_norm_bound(self) -> float:
        q = np.arange(1, self.n_modes + 1)
        return float(np.linalg.norm(2.0 ** (-q) * (1.0 + self.variation)))

    def evaluate(self, xi: Sequence[float]) -> FieldSnapshot:
        xi = _as_xi(xi, self.n_d)
        field_matrix = (self.left_basis(xi) * self.coefficients(xi)) @ self.right_modes.T
        return FieldSnapshot(field_matrix, xi)


class SyntheticTransition:
    """
    Rank-K field whose dominant left modes switch across the curve ξ₂ = g(ξ₁).

    g(x) = offset + slope·x. The blend s = logistic((ξ₂ − g(ξ₁))/width) rotates
    each left mode s_k into s_{K+k} by (π/2)·s, so the subspace turns by an O(1)
    angle inside a thin band and barely moves elsewhere. Amplitudes are
    0.6^(k−1)·(1 + 0.3·ξ_j) with j cycling over the parameter coordinates.
    """

    def __init__(
        self,
        n_d: int,
        n_f: int,
        m_f: int,
        n_modes: int = 2,
        offset: float = 0.4,
        slope: float = 0.2,
        width: float = 0.02,
    ):
        if n_d < 2:
            raise DomainError("The transition model needs at least two parameter dimensions")
        if n_modes < 1 or n_f <= 2 * n_modes or m_f <= n_modes:
            raise DomainError(f"Field {n_f}x{m_f} too small for {n_modes} switching modes")
        if width <= 0:
            raise DomainError(f"Transition width must be positive, got {width}")
        self.n_d, self.n_f, self.m_f, self.n_modes = n_d, n_f, m_f, n_modes
        self.offset, self.slope, self.width = offset, slope, width
        self.left_modes = sine_modes(n_f, 2 * n_modes)
        self.right_modes = sine_modes(m_f, n_modes)

    def curve(self, x1: float) -> float:
        return self.offset + self.slope * x1

    def blend(self, xi: np.ndarray) -> float:
        z = (xi[1] - self.curve(xi[0])) / self.width
        # Numerically stable logistic
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)

    def amplitudes(self, xi: np.ndarray) -> np.ndarray:
        k = np.arange(self.n_modes)
        coords = xi[k % self.n_d]
        return 0.6 ** k * (1.0 + 0.3 * coords)

    def in_transition_band(self, xi: Sequence[float], half_width: float = 0.1) -> bool:
        xi = np.asarray(xi, dtype=np.float64).ravel()
        return bool(abs(xi[1] - self.curve(xi[0])) < half_width)

    def field_norm_bound(self) -> float:
        k = np.arange(self.n_modes)
        return float(np.linalg.norm(0.6 ** k * 1.3))

    def evaluate(self, xi: Sequence[float]) -> FieldSnapshot:
        xi = _as_xi(xi, self.n_d)
        angle = 0.5 * math.pi * self.blend(xi)
        left = (
            math.cos(angle) * self.left_modes[:, : self.n_modes]
            + math.sin(angle) * self.left_modes[:, self.n_modes:]
        )
        field_matrix = (left * self.amplitudes(xi)) @ self.right_modes.T
        return FieldSnapshot(field_matrix, xi)


class ExternalExchange:
    """
    Couples to an external solver through a shared directory.

    For every evaluation a request `req_<id>.json` ({"id", "xi"} plus
    "physical" when a parameter map is set) is written atomically; the solver
    answers with `resp_<id>.gfld`, which must appear in one piece (write then
    rename). Ids increase monotonically and continue after the requests already
    present in the directory, so several evaluations can be in flight at once.
    """

    def __init__(
        self,
        directory: Path,
        n_d: int,
        n_f: int,
        m_f: int,
        timeout: float = EXCHANGE_TIMEOUT,
        poll_interval: float = EXCHANGE_POLL_INTERVAL,
        param_map: Optional[ParamMap] = None,
    ):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.n_d, self.n_f, self.m_f = n_d, n_f, m_f
        self.timeout = timeout
        self.poll_interval = poll_interval
        self.param_map = param_map
        self._lock = threading.Lock()
        self._counter = itertools.count(self._first_free_id())

    def _first_free_id(self) -> int:
        ids = []
        for path in self.directory.glob("req_*.json"):
            try:
                ids.append(int(path.stem.split("_", 1)[1]))
            except ValueError:
                continue
        return max(ids) + 1 if ids else 0

    def request_path(self, request_id: int) -> Path:
        return self.directory / f"req_{request_id}.json"

    def response_path(self, request_id: int) -> Path:
        return self.directory / f"resp_{request_id}.gfld"

    def submit(self, xi: Sequence[float]) -> int:
        xi = _as_xi(xi, self.n_d)
        with self._lock:
            request_id = next(self._counter)
        request: Dict = {"id": request_id, "xi": [float(x) for x in xi]}
        if self.param_map is not None:
            request["physical"] = self.param_map(xi)
        atomic_write(self.request_path(request_id), json.dumps(request).encode("utf-8"))
        return request_id

    def collect(self, request_id: int, xi: Sequence[float]) -> FieldSnapshot:
        """Wait for the response to a submitted request and read it"""
        path = self.response_path(request_id)
        deadline = time.monotonic() + self.timeout
        while not path.exists():
            if time.monotonic() > deadline:
                raise ExchangeTimeout(
                    f"No response {path.name} after {self.timeout:.1f} s", xi=xi
                )
            time.sleep(self.poll_interval)
        snapshot = read_gfld(path)
        if snapshot.shape != (self.n_f, self.m_f):
            raise MalformedSnapshot(
                f"{path.name}: expected a {self.n_f}x{self.m_f} field, got "
                f"{snapshot.shape[0]}x{snapshot.shape[1]}"
            )
        return FieldSnapshot(snapshot.field, np.asarray(xi, dtype=np.float64))

    def evaluate(self, xi: Sequence[float]) -> FieldSnapshot:
        return self.collect(self.submit(xi), xi)


@dataclass
class ModelSpec:
    """Which model to evaluate and its parameters"""

    kind: str = SYNTHETIC_TRANSITION
    n_d: int = 2
    n_f: int = 40
    m_f: int = 30
    n_modes: Optional[int] = None
    variation: float = 0.3
    drift: float = 0.0
    offset: float = 0.4
    slope: float = 0.2
    width: float = 0.02
    exchange_dir: Optional[str] = None
    timeout: float = EXCHANGE_TIMEOUT
    poll_interval: float = EXCHANGE_POLL_INTERVAL
    param_lo: Optional[List[float]] = None
    param_hi: Optional[List[float]] = None

    def param_map(self) -> Optional[ParamMap]:
        if self.param_lo is None and self.param_hi is None:
            return None
        try:
            return ParamMap(self.param_lo or [], self.param_hi or [])
        except DomainError as e:
            raise ConfigError(str(e), key="model.param_lo")

    def validate(self) -> "ModelSpec":
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"must be one of {', '.join(MODEL_KINDS)}, got {self.kind!r}", key="model.kind")
        for key in ("n_d", "n_f", "m_f"):
            value = getattr(self, key)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"must be a positive integer, got {value!r}", key=f"model.{key}")
        if self.kind == EXTERNAL_EXCHANGE and not self.exchange_dir:
            raise ConfigError("required for the external_exchange model", key="model.exchange_dir")
        if self.timeout <= 0:
            raise ConfigError(f"must be positive, got {self.timeout!r}", key="model.timeout")
        param_map = self.param_map()
        if param_map is not None and len(param_map.lo) != self.n_d:
            raise ConfigError(f"needs {self.n_d} entries", key="model.param_lo")
        if self.kind != EXTERNAL_EXCHANGE:
            try:
                build_model(self)
            except DomainError as e:
                raise ConfigError(str(e), key=f"model.{self.kind}")
        return self

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "n_d": self.n_d,
            "n_f": self.n_f,
            "m_f": self.m_f,
            "n_modes": self.n_modes,
            "variation": self.variation,
            "drift": self.drift,
            "offset": self.offset,
            "slope": self.slope,
            "width": self.width,
            "exchange_dir": self.exchange_dir,
            "timeout": self.timeout,
            "poll_interval": self.poll_interval,
            "param_lo": self.param_lo,
            "param_hi": self.param_hi,
        }


def build_model(spec: ModelSpec):
    """Instantiate the model a ModelSpec describes"""
    if spec.kind == SYNTHETIC_SMOOTH:
        return SyntheticSmooth(
            spec.n_d, spec.n_f, spec.m_f,
            n_modes=spec.n_modes or 4, variation=spec.variation, drift=spec.drift,
        )
    if spec.kind == SYNTHETIC_TRANSITION:
        return SyntheticTransition(
            spec.n_d, spec.n_f, spec.m_f,
            n_modes=spec.n_modes or 2, offset=spec.offset, slope=spec.slope, width=spec.width,
        )
    if spec.kind == EXTERNAL_EXCHANGE:
        return ExternalExchange(
            Path(spec.exchange_dir), spec.n_d, spec.n_f, spec.m_f,
            timeout=spec.timeout, poll_interval=spec.poll_interval, param_map=spec.param_map(),
        )
    raise DomainError(f"Unknown model kind '{spec.kind}'")


def evaluate(spec: ModelSpec, xi: Sequence[float]) -> FieldSnapshot:
    return build_model(spec).evaluate(xi)
