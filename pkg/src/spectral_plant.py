#!/usr/bin/env python3
"""
Spectral Plant
Diagonal LTI plant, per-node measurements, source nodes and local observers
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from src.errors import ContractViolation, InputError
from src.settings import setting

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SystemModel:
    """
    x[k+1] = diag(eigenvalues) x[k], y_i[k] = C_i x[k].

    Nodes absent from `measurements` measure nothing (C_i has zero rows).
    """
    eigenvalues: Tuple[float, ...]
    measurements: Mapping[int, np.ndarray] = field(default_factory=dict)
    initial_state: Optional[np.ndarray] = None

    def __post_init__(self):
        lams = tuple(float(v) for v in self.eigenvalues)
        if not lams:
            raise InputError("model needs at least one eigenvalue")
        if len(set(lams)) != len(lams):
            raise InputError(f"eigenvalues must be pairwise distinct, got {list(lams)}")
        n = len(lams)

        mats: Dict[int, np.ndarray] = {}
        for node, rows in self.measurements.items():
            node = int(node)
            if node < 0:
                raise InputError(f"negative node id {node} in measurements")
            mat = np.asarray(rows, dtype=float)
            if mat.size == 0:
                mat = np.zeros((0, n))
            if mat.ndim == 1:
                mat = mat.reshape(1, -1)
            if mat.ndim != 2 or mat.shape[1] != n:
                raise InputError(f"C_{node} has shape {mat.shape}, expected (r_i, {n})")
            mat.setflags(write=False)
            mats[node] = mat

        x0 = np.zeros(n) if self.initial_state is None else np.asarray(self.initial_state, dtype=float)
        if x0.shape != (n,):
            raise InputError(f"initial_state has shape {x0.shape}, expected ({n},)")
        x0.setflags(write=False)

        object.__setattr__(self, 'eigenvalues', lams)
        object.__setattr__(self, 'measurements', mats)
        object.__setattr__(self, 'initial_state', x0)

        for j in self.unstable_modes:
            if not source_nodes(self, j):
                raise InputError(f"unstable mode {j} (lambda={lams[j]}) is measured by no node; "
                                 "the pair (A, C) is not detectable")

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def A(self) -> np.ndarray:
        return np.diag(self.eigenvalues)

    @property
    def unstable_modes(self) -> List[int]:
        return [j for j, lam in enumerate(self.eigenvalues) if abs(lam) >= 1.0]

    def measurement(self, node: int) -> np.ndarray:
        mat = self.measurements.get(int(node))
        return mat if mat is not None else np.zeros((0, self.n))

    def measure(self, node: int, x: np.ndarray) -> np.ndarray:
        return self.measurement(node) @ np.asarray(x, dtype=float)

    def max_node(self) -> int:
        return max(self.measurements, default=-1)


@dataclass(frozen=True)
class ModeIndexSets:
    """
    detectable[i] = O_i, undetectable[i] its complement, sources[j] = S_j,
    omega_u: unstable modes with V\\S_j non-empty, lambda_u: all unstable modes
    """
    detectable: Dict[int, FrozenSet[int]]
    undetectable: Dict[int, FrozenSet[int]]
    sources: Dict[int, FrozenSet[int]]
    omega_u: List[int]
    lambda_u: List[int]


# ============================================================================
# PLANT
# ============================================================================

def _check_mode(model: SystemModel, j: int) -> int:
    if not 0 <= int(j) < model.n:
        raise InputError(f"mode index {j} out of range [0, {model.n})")
    return int(j)


def step_plant(model: SystemModel, x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise InputError(f"state has shape {x.shape}, expected ({model.n},)")
    return np.asarray(model.eigenvalues) * x


def simulate_plant(model: SystemModel, steps: int) -> np.ndarray:
    """Rows x[0..steps] starting from the model's initial state"""
    traj = np.empty((steps + 1, model.n))
    traj[0] = model.initial_state
    for k in range(steps):
        traj[k + 1] = step_plant(model, traj[k])
    return traj


# ============================================================================
# SOURCE NODES
# ============================================================================

def source_nodes(model: SystemModel, j: int) -> FrozenSet[int]:
    """
    S_j: nodes that detect mode j. With diagonal A and distinct eigenvalues
    the PBH rank condition holds exactly when column j of C_i is nonzero.
    """
    j = _check_mode(model, j)
    return frozenset(node for node, mat in model.measurements.items()
                     if mat.shape[0] and np.any(mat[:, j] != 0.0))


def generic_source_nodes(model: SystemModel, j: int) -> FrozenSet[int]:
    """S_j from the full rank test rank([A - lambda_j I; C_i]) = n"""
    j = _check_mode(model, j)
    shifted = model.A - model.eigenvalues[j] * np.eye(model.n)
    found = set()
    for node, mat in model.measurements.items():
        if np.linalg.matrix_rank(np.vstack([shifted, mat])) == model.n:
            found.add(node)
    return frozenset(found)


def measured_modes(model: SystemModel, node: int) -> List[int]:
    mat = model.measurement(node)
    if mat.shape[0] == 0:
        return []
    return [j for j in range(model.n) if np.any(mat[:, j] != 0.0)]


def mode_index_sets(model: SystemModel, node_count: int) -> ModeIndexSets:
    if model.max_node() >= node_count:
        raise InputError(f"model measures node {model.max_node()} but the network has {node_count} nodes")

    sources = {j: source_nodes(model, j) for j in range(model.n)}
    stable = {j for j, lam in enumerate(model.eigenvalues) if abs(lam) < 1.0}
    all_modes = frozenset(range(model.n))

    detectable = {}
    undetectable = {}
    for i in range(node_count):
        o_i = frozenset(stable | set(measured_modes(model, i)))
        detectable[i] = o_i
        undetectable[i] = all_modes - o_i

    lambda_u = model.unstable_modes
    omega_u = [j for j in lambda_u if len(sources[j]) < node_count]
    return ModeIndexSets(detectable, undetectable, sources, omega_u, lambda_u)


# ============================================================================
# LOCAL OBSERVERS
# ============================================================================

def _output_combination(C: np.ndarray) -> np.ndarray:
    """Row weights w such that every column of w^T C is nonzero"""
    rows = C.shape[0]
    for k in range(rows):
        w = np.zeros(rows)
        w[k] = 1.0
        if np.all(w @ C != 0.0):
            return w
    # each column is a nonzero polynomial in t, so some small integer t works
    for t in range(2, 64):
        w = float(t) ** np.arange(rows)
        if np.all(np.abs(w @ C) > 1e-9 * np.abs(C).max()):
            return w
    raise ContractViolation("no output combination observes every measured mode")


class LocalObserver:
    """
    Luenberger observer of one node over the modes its measurements touch.

    The gain comes from Ackermann's formula on the single output w^T C_i so
    that every error pole sits at `pole` (0 gives a deadbeat observer).
    Stable modes the node does not measure are rolled forward open-loop.
    """

    def __init__(self, model: SystemModel, node: int, pole: Optional[float] = None):
        self.model = model
        self.node = int(node)
        self.pole = float(setting('simulation', 'observer_pole') if pole is None else pole)
        self.modes = measured_modes(model, node)
        stable = [j for j, lam in enumerate(model.eigenvalues) if abs(lam) < 1.0]
        self.open_loop_modes = [j for j in stable if j not in self.modes]
        self.detectable = sorted(set(self.modes) | set(self.open_loop_modes))

        self._lams = np.array([model.eigenvalues[j] for j in self.modes])
        self._lams_open = np.array([model.eigenvalues[j] for j in self.open_loop_modes])
        if self.modes:
            C_m = model.measurement(node)[:, self.modes]
            self._w = _output_combination(C_m)
            self._c = self._w @ C_m
            self._gain = self._ackermann_gain()
        else:
            self._w = self._c = self._gain = np.zeros(0)

    def _ackermann_gain(self) -> np.ndarray:
        m = len(self.modes)
        A = np.diag(self._lams)
        obs = np.vstack([self._c * self._lams ** k for k in range(m)])
        e_last = np.zeros(m)
        e_last[-1] = 1.0
        p_of_A = np.linalg.matrix_power(A - self.pole * np.eye(m), m)
        return p_of_A @ np.linalg.solve(obs, e_last)

    def error_matrix(self) -> np.ndarray:
        """A_m - L c, whose spectrum is {pole}"""
        return np.diag(self._lams) - np.outer(self._gain, self._c)

    def step(self, estimate: Mapping[int, float], y: Sequence[float]) -> Dict[int, float]:
        if set(estimate) != set(self.detectable):
            raise ContractViolation(f"node {self.node} observes modes {self.detectable}, "
                                    f"got estimate over {sorted(estimate)}")
        updated: Dict[int, float] = {}
        if self.modes:
            xm = np.array([estimate[j] for j in self.modes])
            y = np.asarray(y, dtype=float)
            innovation = float(self._w @ y) - float(self._c @ xm)
            nxt = self._lams * xm + self._gain * innovation
            updated.update(zip(self.modes, nxt.tolist()))
        for j, lam in zip(self.open_loop_modes, self._lams_open.tolist()):
            updated[j] = lam * estimate[j]
        return updated


def local_observer_step(model: SystemModel, i: int, estimate: Mapping[int, float],
                        y_i: Sequence[float], pole: Optional[float] = None) -> Dict[int, float]:
    """One observer update of node i over O_i"""
    return LocalObserver(model, i, pole).step(estimate, y_i)


# ============================================================================
# MODEL FILES
# ============================================================================

def model_from_dict(data: Mapping) -> SystemModel:
    if not isinstance(data, Mapping) or 'eigenvalues' not in data:
        raise InputError("model file needs an 'eigenvalues' list")
    measurements = {}
    for node, rows in (data.get('measurements') or {}).items():
        try:
            measurements[int(node)] = rows
        except (TypeError, ValueError):
            raise InputError(f"measurement key '{node}' is not a node id")
    return SystemModel(tuple(data['eigenvalues']), measurements, data.get('initial_state'))


def model_to_dict(model: SystemModel) -> Dict:
    return {
        'eigenvalues': list(model.eigenvalues),
        'measurements': {node: mat.tolist() for node, mat in sorted(model.measurements.items())},
        'initial_state': model.initial_state.tolist(),
    }


def load_model_file(path: Union[str, Path]) -> SystemModel:
    """YAML or JSON model file"""
    path = Path(path)
    with open(path, 'r') as f:
        try:
            data = json.load(f) if path.suffix == '.json' else yaml.safe_load(f)
        except (ValueError, yaml.YAMLError) as e:
            raise InputError(f"{path}: cannot parse model file: {e}")
    return model_from_dict(data)


def write_model_file(model: SystemModel, path: Union[str, Path]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        if path.suffix == '.json':
            json.dump(model_to_dict(model), f, indent=2)
        else:
            yaml.safe_dump(model_to_dict(model), f, default_flow_style=None, sort_keys=False)
    return str(path)


# ============================================================================
# GENERATORS
# ============================================================================

def model_from_sources(eigenvalues: Sequence[float], sources: Mapping[int, Iterable[int]],
                       initial_state: Optional[Sequence[float]] = None) -> SystemModel:
    """Each source node of mode j gets a unit row measuring x^(j) directly"""
    n = len(eigenvalues)
    rows: Dict[int, List[List[float]]] = {}
    for j, nodes in sources.items():
        for node in nodes:
            row = [0.0] * n
            row[j] = 1.0
            rows.setdefault(int(node), []).append(row)
    return SystemModel(tuple(eigenvalues), rows, initial_state)


def random_system_model(node_count: int, n_modes: int, rng: np.random.Generator,
                        unstable_range: Tuple[float, float] = (1.05, 1.5),
                        stable_max: float = 0.8, unstable_fraction: float = 0.5,
                        max_rows: int = 3, density: float = 0.4) -> SystemModel:
    """Random detectable model with sparse integer measurement matrices"""
    n_unstable = max(1, int(round(unstable_fraction * n_modes)))
    lams = list(rng.uniform(*unstable_range, size=n_unstable))
    lams += list(rng.uniform(-stable_max, stable_max, size=n_modes - n_unstable))
    lams = [float(v) for v in lams]

    measurements: Dict[int, np.ndarray] = {}
    for node in range(node_count):
        r_i = int(rng.integers(0, max_rows + 1))
        if r_i == 0:
            continue
        mask = rng.random((r_i, n_modes)) < density
        measurements[node] = np.where(mask, rng.integers(-3, 4, size=(r_i, n_modes)), 0).astype(float)

    # every unstable mode needs a source
    for j in range(n_unstable):
        if not any(np.any(mat[:, j] != 0.0) for mat in measurements.values()):
            node = int(rng.integers(node_count))
            row = np.zeros((1, n_modes))
            row[0, j] = 1.0
            prev = measurements.get(node, np.zeros((0, n_modes)))
            measurements[node] = np.vstack([prev, row])

    x0 = rng.uniform(-1.0, 1.0, size=n_modes)
    return SystemModel(tuple(lams), measurements, x0)


if __name__ == "__main__":
    model = SystemModel((2.0, 0.5), {0: [[1, 0]], 1: [[0, 1]]}, [1.0, 1.0])
    print("S_0 =", sorted(source_nodes(model, 0)), " S_1 =", sorted(source_nodes(model, 1)))
    obs = LocalObserver(model, 0)
    est = {j: 0.0 for j in obs.detectable}
    x = model.initial_state
    for k in range(4):
        est = obs.step(est, model.measure(0, x))
        x = step_plant(model, x)
        print(f"k={k + 1} error={max(abs(est[j] - x[j]) for j in est):.3e}")
