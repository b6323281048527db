"""Ground-truth simulation and bookkeeping for the bearing-SLAM experiment."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import block_diag
from scipy.signal import detrend, find_peaks

from eqfslam import engine as eqf
from eqfslam import slam2d
from eqfslam.symmetry import DomainError

TRUTH_MIN_NORM = 1e-6
RNG_ALGORITHM = "PCG64"


class ConfigError(ValueError):
    pass


class SimulationError(RuntimeError):
    """A run aborted; carries the step index and time of the failure."""

    def __init__(self, step: int, t: float, cause: Exception):
        super().__init__(f"step {step} (t={t:.4f} s): {type(cause).__name__}: {cause}")
        self.step = step
        self.t = t
        self.cause = cause


def _block(value) -> np.ndarray:
    """Scalar gain -> scalar * I2; four numbers -> row-major 2x2 block."""
    arr = np.asarray(value, dtype=float)
    if arr.size == 1:
        return float(arr) * np.eye(2)
    return arr.reshape(2, 2)


@dataclass(frozen=True)
class VelocityProfile:
    """Robot velocity ``(amplitude * cos(frequency * t), 0)`` or a constant."""

    kind: str = "cosine"
    amplitude: float = 2.0
    frequency: float = 2.0
    constant: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("cosine", "constant"):
            raise ConfigError(f"velocity.profile must be 'cosine' or 'constant', got {self.kind!r}")

    def __call__(self, t: float) -> np.ndarray:
        if self.kind == "constant":
            return np.array(self.constant, dtype=float)
        return np.array([self.amplitude * np.cos(self.frequency * t), 0.0])


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 4
    duration: float = 20.0
    dt: float = 0.01
    velocity: VelocityProfile = field(default_factory=VelocityProfile)
    landmark_box: tuple = ((-0.5, 0.5), (1.0, 2.0))
    offset_box: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    seed: int = 0
    rng_algorithm: str = RNG_ALGORITHM
    p: object = 0.02 ** 2
    q: object = 0.01 ** 2
    sigma0: object = 4.0 ** 2
    integrator: str = "exact_hold"
    riccati: str = "sampled"
    bearing_noise: float = 0.0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ConfigError("n must be at least 1")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.duration >= self.dt:
            raise ConfigError(f"duration must be at least dt, got {self.duration}")
        for name in ("landmark_box", "offset_box"):
            box = np.asarray(getattr(self, name), dtype=float)
            if box.shape != (2, 2) or np.any(box[:, 0] > box[:, 1]):
                raise ConfigError(f"{name} must be ((xmin, xmax), (ymin, ymax)) with min <= max")
        if self.rng_algorithm != RNG_ALGORITHM:
            raise ConfigError(f"rng algorithm must be {RNG_ALGORITHM}, got {self.rng_algorithm!r}")
        if self.bearing_noise < 0:
            raise ConfigError("bearing_noise must be non-negative")
        if self.integrator not in eqf.OBSERVER_INTEGRATORS:
            raise ConfigError(f"integrator must be one of {eqf.OBSERVER_INTEGRATORS}")
        if self.riccati not in eqf.RICCATI_SCHEMES:
            raise ConfigError(f"riccati must be one of {eqf.RICCATI_SCHEMES}")
        for name in ("p", "q", "sigma0"):
            block = _block(getattr(self, name))
            if not np.allclose(block, block.T) or np.linalg.eigvalsh(block).min() <= 0:
                raise ConfigError(f"{name} must be a symmetric positive definite 2x2 block")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def filter_config(self) -> eqf.FilterConfig:
        def dense(v):
            return block_diag(*[_block(v)] * self.n)

        return eqf.FilterConfig(dense(self.p), dense(self.q), dense(self.sigma0), self.dt,
                                integrator=self.integrator, riccati=self.riccati)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["velocity"]["constant"] = list(self.velocity.constant)
        for key in ("p", "q", "sigma0"):
            d[key] = np.asarray(d[key], dtype=float).tolist()
        d["landmark_box"] = np.asarray(self.landmark_box, dtype=float).tolist()
        d["offset_box"] = np.asarray(self.offset_box, dtype=float).tolist()
        return d


def make_rng(config: ScenarioConfig) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(config.seed))


def sample_scenario(config: ScenarioConfig, rng: Optional[np.random.Generator] = None):
    """Draw initial landmarks and the filter origin (truth plus a uniform offset)."""
    rng = make_rng(config) if rng is None else rng
    lbox = np.asarray(config.landmark_box, dtype=float)
    obox = np.asarray(config.offset_box, dtype=float)
    if np.all(lbox == 0.0):
        raise ConfigError("landmark_box contains only the origin")

    def draw(box, shift):
        for _ in range(1000):
            pts = shift + rng.uniform(box[:, 0], box[:, 1], size=(config.n, 2))
            if np.all(np.linalg.norm(pts, axis=1) > TRUTH_MIN_NORM):
                return pts
        raise ConfigError("could not sample landmarks away from the origin")

    x0 = draw(lbox, 0.0)
    origin = draw(obox, x0)
    return x0, origin


def simulate_truth(x0, velocity, duration: float, dt: float) -> np.ndarray:
    """Euler integration of x_i' = -v(t); returns the ``(steps + 1, n, 2)`` trace."""
    steps = int(round(duration / dt))
    x = np.array(x0, dtype=float).reshape(-1, 2)
    trace = np.empty((steps + 1,) + x.shape)
    trace[0] = x
    for k in range(steps):
        x = x - dt * velocity(k * dt)
        if np.any(np.linalg.norm(x, axis=1) < TRUTH_MIN_NORM):
            raise SimulationError(k + 1, (k + 1) * dt, DomainError("landmark crossed the camera origin"))
        trace[k + 1] = x
    return trace


def lyapunov_values(e, origin, sigma_blocks) -> np.ndarray:
    """Per-landmark ``(e_i - o_i)^T Sigma_i^{-1} (e_i - o_i)``."""
    d = np.asarray(e, dtype=float).reshape(-1, 2) - np.asarray(origin, dtype=float).reshape(-1, 2)
    sol = np.linalg.solve(np.asarray(sigma_blocks, dtype=float), d[..., None])[..., 0]
    return np.einsum("ni,ni->n", d, sol)


@dataclass
class RunRecord:
    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    y: np.ndarray
    lyapunov: np.ndarray
    sigma: np.ndarray
    excitation: np.ndarray
    origin: Optional[np.ndarray] = None
    config: Optional[dict] = None

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def sigma_min_eig(self) -> np.ndarray:
        if len(self.t) == 0:
            return np.zeros((0, self.n))
        return np.linalg.eigvalsh(self.sigma)[..., 0]

    @classmethod
    def empty(cls, n: int) -> RunRecord:
        z = np.zeros((0, n, 2))
        return cls(np.zeros(0), z, z.copy(), z.copy(), np.zeros((0, n)), np.zeros((0, n, 2, 2)), np.zeros((0, n)))


def run_experiment(config: ScenarioConfig, rng: Optional[np.random.Generator] = None) -> RunRecord:
    """Simulate the truth and run the filter alongside it, recording every step."""
    rng = make_rng(config) if rng is None else rng
    x, origin = sample_scenario(config, rng)
    n, dt, steps = config.n, config.dt, config.steps
    model = slam2d.slam2d_model(origin)
    fcfg = config.filter_config()
    state = eqf.initial_state(fcfg)

    t = np.arange(steps + 1) * dt
    xs = np.empty((steps + 1, n, 2))
    xhats = np.empty_like(xs)
    ys = np.empty_like(xs)
    lyap = np.empty((steps + 1, n))
    sigmas = np.empty((steps + 1, n, 2, 2))
    excitation = np.empty((steps + 1, n))

    for k in range(steps + 1):
        try:
            v = config.velocity(t[k])
            y = slam2d.measure(x)
            if config.bearing_noise > 0:
                y = y + config.bearing_noise * rng.standard_normal(y.shape)
                y /= np.linalg.norm(y, axis=1, keepdims=True)
            xs[k], ys[k], sigmas[k] = x, y, state.sigma
            xhats[k] = eqf.estimate(state, origin)
            lyap[k] = lyapunov_values(eqf.state_error(state.X, x), origin, state.sigma)
            excitation[k] = slam2d.excitation_integrand(v[None], x[None])[0]
            if k == steps:
                break
            state = eqf.filter_update(model, fcfg, state, slam2d.embed_velocity(v, n), y)
            x = x - dt * v
            if np.any(np.linalg.norm(x, axis=1) < TRUTH_MIN_NORM):
                raise DomainError("truth landmark crossed the camera origin")
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise SimulationError(k, float(t[k]), exc) from exc

    return RunRecord(t, xs, xhats, ys, lyap, sigmas, excitation, origin, config.to_dict())


def csv_header(n: int) -> list:
    cols = ["t"]
    for i in range(1, n + 1):
        cols += [f"x_{i}_1", f"x_{i}_2", f"xhat_{i}_1", f"xhat_{i}_2",
                 f"y_{i}_1", f"y_{i}_2", f"l_{i}", f"sigma_{i}_min_eig"]
    return cols


def record_rows(record: RunRecord):
    eig = record.sigma_min_eig
    for k in range(len(record.t)):
        row = [record.t[k]]
        for i in range(record.n):
            row += [*record.x[k, i], *record.xhat[k, i], *record.y[k, i], record.lyapunov[k, i], eig[k, i]]
        yield [repr(float(v)) for v in row]


def export_csv(record: RunRecord, path) -> Path:
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(record.n))
    writer.writerows(record_rows(record))
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path) -> dict:
    """Parse an exported CSV back into ``{column: float array}``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def export_chart(record: RunRecord, path) -> Path:
    """Log-scale plot of each landmark's Lyapunov value, written as SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(record.n):
        ax.semilogy(record.t, np.maximum(record.lyapunov[:, i], 1e-300), label=f"landmark {i + 1}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("Lyapunov value $l_i$")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def export_snapshot(record: RunRecord, path) -> Path:
    """JSON document with the config echo and the CSV columns."""
    path = Path(path)
    cols = csv_header(record.n)
    rows = [[float(v) for v in r] for r in record_rows(record)]
    doc = {
        "config": record.config,
        "origin": None if record.origin is None else np.asarray(record.origin).tolist(),
        "columns": cols,
        "data": {c: [r[j] for r in rows] for j, c in enumerate(cols)},
    }
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return path


def dominant_period(signal, dt: float, min_freq: float = 0.1) -> float:
    """Period of the largest periodogram peak (Hann window, 8x zero padding)."""
    sig = np.asarray(signal, dtype=float)
    sig = (sig - sig.mean()) * np.hanning(sig.size)
    nfft = 8 * sig.size
    power = np.abs(np.fft.rfft(sig, n=nfft)) ** 2
    freqs = np.fft.rfftfreq(nfft, dt)
    power[freqs < min_freq] = 0.0
    return 1.0 / freqs[np.argmax(power)]


def autocorrelation_peak_lag(signal, dt: float, skip: float = 0.0, max_lag: float = 2 * np.pi) -> float:
    """Lag of the first local maximum of the autocorrelation.

    The first ``skip`` seconds are dropped and a linear trend is removed
    before correlating, so the initial transient does not dominate.
    """
    sig = np.asarray(signal, dtype=float)[int(round(skip / dt)):]
    sig = detrend(sig)
    ac = np.correlate(sig, sig, "full")[sig.size - 1:]
    ac /= ac[0]
    peaks, _ = find_peaks(ac[:int(round(max_lag / dt))])
    if peaks.size == 0:
        raise ValueError("autocorrelation has no peak within max_lag")
    return peaks[0] * dt


def decay_rate(lyapunov, dt: float, floor: float = 1e-14) -> np.ndarray:
    """d(log l)/dt on the prefix where ``l`` stays above ``floor``."""
    lyap = np.asarray(lyapunov, dtype=float)
    below = np.flatnonzero(lyap <= floor)
    end = below[0] if below.size else lyap.size
    return np.diff(np.log(lyap[:end])) / dt
