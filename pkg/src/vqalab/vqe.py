"""Energy evaluation, gradients, optimizers and adiabatically assisted sweeps."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .ansatz import AnsatzLayout
from .models import exact_ground, ground_projector_overlap
from .pauli import PauliSum
from .simulator import Circuit, Observable, adjoint_gradient, basis_state, make_rng


class OptimizationError(RuntimeError):
    pass


@dataclass
class VqeProblem:
    hamiltonian: PauliSum
    circuit: Circuit
    layout: AnsatzLayout | None = None
    initial_state: str | None = None

    def __post_init__(self):
        n = self.circuit.n
        if self.hamiltonian.n != n:
            raise ValueError("Hamiltonian and circuit sizes differ")
        if self.initial_state is None:
            self.initial_state = "0" * n
        if len(self.initial_state) != n or set(self.initial_state) - {"0", "1"}:
            raise ValueError("initial state must be a bitstring of length n")
        if self.layout is not None and self.layout.num_params != self.circuit.num_params:
            raise ValueError("layout and circuit slot counts differ")
        self._obs = Observable(self.hamiltonian)
        self._psi0 = basis_state(n, self.initial_state)

    @property
    def num_params(self) -> int:
        return self.circuit.num_params

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got {theta.shape}")
        return theta

    def state(self, theta) -> np.ndarray:
        return self.circuit.run(self._check(theta), self._psi0)

    def energy(self, theta) -> float:
        return self._obs.expectation(self.state(theta))

    def value_and_grad(self, theta) -> tuple[float, np.ndarray]:
        theta = self._check(theta)
        e, g = adjoint_gradient(_with_input(self.circuit, self._psi0), self._obs, theta)
        return e, g

    def grad_adjoint(self, theta) -> np.ndarray:
        return self.value_and_grad(theta)[1]

    def grad_param_shift(self, theta, slots: Sequence[int] | None = None) -> np.ndarray:
        """``(E(t + pi/2 e_i) - E(t - pi/2 e_i)) / 2`` per slot."""
        theta = self._check(theta)
        if not self.circuit.pauli_only:
            raise ValueError("parameter shift needs Pauli-generated gates only")
        slots = range(self.num_params) if slots is None else slots
        out = np.zeros(len(slots))
        for k, i in enumerate(slots):
            shift = np.zeros_like(theta)
            shift[i] = np.pi / 2
            out[k] = (self.energy(theta + shift) - self.energy(theta - shift)) / 2
        return out

    def grad_finite_diff(self, theta, delta: float = 1e-6) -> np.ndarray:
        theta = self._check(theta)
        out = np.zeros(self.num_params)
        for i in range(self.num_params):
            shift = np.zeros_like(theta)
            shift[i] = delta
            out[i] = (self.energy(theta + shift) - self.energy(theta - shift)) / (2 * delta)
        return out

    def gradient(self, theta, method: str = "adjoint") -> np.ndarray:
        if method == "adjoint":
            return self.grad_adjoint(theta)
        if method == "param_shift":
            return self.grad_param_shift(theta)
        if method == "finite_diff":
            return self.grad_finite_diff(theta)
        raise ValueError(f"unknown gradient method {method!r}")


class _InputCircuit(Circuit):
    """Circuit view whose ``run`` starts from a fixed input vector."""

    def __init__(self, base: Circuit, psi0: np.ndarray):
        super().__init__(base.n, base.gates, base.num_params)
        self._psi0 = psi0

    def run(self, params=None, state=None):
        return super().run(params, self._psi0 if state is None else state)


def _with_input(c: Circuit, psi0: np.ndarray) -> Circuit:
    return _InputCircuit(c, psi0)


_ALIASES = {
    "spsa": ("spsa", None),
    "gd": ("gd", None),
    "gradientdescent": ("gd", None),
    "lbfgs": ("lbfgs", None),
    "finitediffbfgs": ("lbfgs", "finite_diff"),
}


@dataclass
class OptimizerConfig:
    """Optimizer settings; ``gradient`` selects the derivative source for gd/lbfgs."""

    method: str = "lbfgs"
    max_iters: int = 2000
    tolerance: float = 1e-8
    seed: int = 0
    gradient: str = "adjoint"
    a: float = 0.2
    c: float = 0.1
    A: float = 10.0
    alpha: float = 0.602
    gamma: float = 0.101
    lr: float = 0.1

    def __post_init__(self):
        key = self.method.lower().replace("_", "").replace("-", "")
        if key not in _ALIASES:
            raise ValueError(f"unknown optimizer {self.method!r}")
        self.method, forced = _ALIASES[key]
        if forced:
            self.gradient = forced
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if min(self.a, self.c, self.lr) <= 0 or self.max_iters < 1:
            raise ValueError("schedule parameters must be positive")


@dataclass
class TraceRow:
    iteration: int
    energy: float
    grad_norm: float
    wall_ms: float


@dataclass
class OptimizeResult:
    theta: np.ndarray
    energy: float
    trace: list[TraceRow] = field(default_factory=list)
    converged: bool = False


def random_parameters(n_params: int, seed: int) -> np.ndarray:
    return make_rng(seed).uniform(-np.pi, np.pi, n_params)


def _guard(e: float) -> float:
    if not np.isfinite(e):
        raise OptimizationError("energy became NaN or infinite; aborting optimization")
    return e


def optimize(p: VqeProblem, config: OptimizerConfig, theta0=None) -> OptimizeResult:
    """Minimize the energy starting from ``theta0`` (uniform random if omitted)."""
    theta = random_parameters(p.num_params, config.seed) if theta0 is None else np.array(theta0, float)
    start = time.perf_counter()
    trace: list[TraceRow] = []

    def record(e, g):
        trace.append(TraceRow(len(trace), float(e), float(g), (time.perf_counter() - start) * 1e3))

    if config.method == "lbfgs":
        def fun(t):
            if config.gradient == "adjoint":
                e, g = p.value_and_grad(t)
            else:
                e, g = p.energy(t), p.gradient(t, config.gradient)
            fun.last = (_guard(e), g)
            return fun.last

        fun.last = None

        def callback(t):
            e, g = fun.last
            record(e, np.linalg.norm(g))

        res = minimize(
            fun, theta, jac=True, method="L-BFGS-B", callback=callback,
            options={"maxiter": config.max_iters, "maxcor": 10, "gtol": config.tolerance,
                     "ftol": 1e-15, "maxfun": 4 * config.max_iters},
        )
        theta = res.x
        energy = _guard(p.energy(theta))
        return OptimizeResult(theta, energy, trace, bool(res.success))

    rng = make_rng(config.seed + 1)
    converged = False
    for k in range(config.max_iters):
        if config.method == "spsa":
            ak = config.a / (k + 1 + config.A) ** config.alpha
            ck = config.c / (k + 1) ** config.gamma
            delta = rng.choice([-1.0, 1.0], size=p.num_params)
            diff = p.energy(theta + ck * delta) - p.energy(theta - ck * delta)
            g = _guard(diff) / (2 * ck) * delta
            step = ak * g
        else:
            g = p.gradient(theta, config.gradient)
            step = config.lr * g
        theta = theta - step
        if not np.all(np.isfinite(theta)):
            raise OptimizationError("parameters became NaN; aborting optimization")
        record(_guard(p.energy(theta)), np.linalg.norm(g))
        if np.max(np.abs(step)) < config.tolerance:
            converged = True
            break
    return OptimizeResult(theta, p.energy(theta), trace, converged)


def trace_csv(trace: Sequence[TraceRow], with_time: bool = False) -> str:
    rows = ["iter,energy,grad_norm,wall_ms"]
    for r in trace:
        wall = f"{r.wall_ms:.3f}" if with_time else ""
        rows.append(f"{r.iteration},{r.energy:.12g},{r.grad_norm:.12g},{wall}")
    return "\n".join(rows) + "\n"


@dataclass
class SweepPoint:
    value: float
    direction: str
    energy: float
    theta: np.ndarray
    exact: float | None = None
    overlap: float | None = None

    @property
    def error(self) -> float | None:
        return None if self.exact is None else self.energy - self.exact


def aavqe_sweep(
    grid: Sequence[float],
    hamiltonian_at: Callable[[float], PauliSum],
    circuit: Circuit,
    config: OptimizerConfig,
    direction: str = "up",
    theta0=None,
    initial_state: str | None = None,
    restarts: int = 1,
    with_exact: bool = True,
) -> list[SweepPoint]:
    """Solve each grid point warm-started from the previous solution.

    ``direction="down"`` walks the grid from its last value to its first.
    ``restarts`` random starts are tried at the first point only.
    """
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    values = list(grid)
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError("grid must be ordered")
    if direction == "down":
        values = values[::-1]
    out = []
    theta = theta0
    for i, v in enumerate(values):
        h = hamiltonian_at(v)
        p = VqeProblem(h, circuit, None, initial_state)
        if i == 0 and theta is None:
            best = None
            for r in range(restarts):
                res = optimize(p, replace(config, seed=config.seed + r))
                if best is None or res.energy < best.energy:
                    best = res
            res = best
        else:
            res = optimize(p, config, theta)
        theta = res.theta
        exact = overlap = None
        if with_exact and h.n <= 10:
            exact = exact_ground(h).energy
            overlap = ground_projector_overlap(h, p.state(theta))
        out.append(SweepPoint(float(v), direction, res.energy, theta.copy(), exact, overlap))
    if direction == "down":
        out.reverse()
    return out


def best_of_two(a: Sequence[SweepPoint], b: Sequence[SweepPoint]) -> list[SweepPoint]:
    """Per grid value keep the lower-energy solution."""
    if [p.value for p in a] != [p.value for p in b]:
        raise ValueError("sweeps cover different grids")
    return [pa if pa.energy <= pb.energy else pb for pa, pb in zip(a, b)]


def sweep_csv(points: Sequence[SweepPoint]) -> str:
    rows = ["grid_value,direction,energy,overlap"]
    for p in points:
        ov = "" if p.overlap is None else f"{p.overlap:.12g}"
        rows.append(f"{p.value:.12g},{p.direction},{p.energy:.12g},{ov}")
    return "\n".join(rows) + "\n"
