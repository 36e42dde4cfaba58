"""
Solver-agnostic conic programs.

Programs are a linear objective over real variables plus affine maps into
zero, nonnegative, second-order, exponential and PSD cones. The
beamforming and phase-shift subproblems are both emitted in this form and
solved through cvxpy.
"""
"""
Copyright (C) 2025 Yogesh Wadadekar

This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program. If not, see <https://www.gnu.org/licenses/>.
"""


import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import cvxpy as cp

from utils.error_handling import SolverError, ValidationError


logger = logging.getLogger(__name__)

STATUS_OPTIMAL = "optimal"
STATUS_INACCURATE = "inaccurate"
STATUS_INFEASIBLE = "infeasible"
STATUS_FAILED = "failed"

USABLE_STATUSES = (STATUS_OPTIMAL, STATUS_INACCURATE)


class ConeKind(Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    SOC = "soc"
    EXP = "exp"
    PSD = "psd"


@dataclass(frozen=True, eq=False)
class ConeConstraint:
    """Membership A x + b in a cone.

    SOC rows are (t, x) with |x| <= t. EXP rows come in (x, y, z) triples
    with y exp(x / y) <= z. PSD rows are a column-major order x order matrix.
    """
    kind: ConeKind
    A: sp.csr_matrix
    b: np.ndarray
    order: int = 0
    label: str = ""

    def __post_init__(self):
        A = sp.csr_matrix(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        m = A.shape[0]
        if b.size != m:
            raise ValidationError(f"Constraint '{self.label}': {m} rows but {b.size} offsets")
        if self.kind is ConeKind.SOC and m < 1:
            raise ValidationError(f"Constraint '{self.label}': empty second-order cone")
        if self.kind is ConeKind.EXP and m % 3:
            raise ValidationError(f"Constraint '{self.label}': exponential rows must come in triples")
        if self.kind is ConeKind.PSD and (self.order < 1 or m != self.order ** 2):
            raise ValidationError(
                f"Constraint '{self.label}': PSD order {self.order} needs {self.order ** 2} rows, got {m}")
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'b', b)

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x + self.b

    def violation(self, x: np.ndarray) -> float:
        """Distance-like measure of how far A x + b is from the cone (0 if inside)."""
        e = self.evaluate(x)
        if self.kind is ConeKind.ZERO:
            return float(np.max(np.abs(e), initial=0.0))
        if self.kind is ConeKind.NONNEG:
            return float(max(0.0, -np.min(e, initial=0.0)))
        if self.kind is ConeKind.SOC:
            return float(max(0.0, np.linalg.norm(e[1:]) - e[0]))
        if self.kind is ConeKind.EXP:
            worst = 0.0
            for xe, ye, ze in e.reshape(-1, 3):
                if ye > 0:
                    worst = max(worst, ye * math.exp(min(xe / ye, 700.0)) - ze)
                else:
                    worst = max(worst, -ye, xe, -ze)
            return float(worst)
        matrix = e.reshape(self.order, self.order, order='F')
        eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
        return float(max(0.0, -eigenvalues[0]))


@dataclass(frozen=True, eq=False)
class ConicProgram:
    """Linear objective c^T x + constant over cone memberships."""
    n_vars: int
    c: np.ndarray
    constant: float
    sense: str
    constraints: Tuple[ConeConstraint, ...]
    blocks: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if c.size != self.n_vars:
            raise ValidationError(f"Objective has {c.size} entries for {self.n_vars} variables")
        if self.sense not in ("minimize", "maximize"):
            raise ValidationError(f"Unknown objective sense: {self.sense}")
        for con in self.constraints:
            if con.A.shape[1] != self.n_vars:
                raise ValidationError(
                    f"Constraint '{con.label}' has {con.A.shape[1]} columns for {self.n_vars} variables")
        object.__setattr__(self, 'c', c)
        object.__setattr__(self, 'constraints', tuple(self.constraints))

    def block(self, name: str) -> slice:
        start, stop = self.blocks[name]
        return slice(start, stop)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.constant)

    def max_violation(self, x: np.ndarray) -> float:
        return max((con.violation(x) for con in self.constraints), default=0.0)

    def cone_counts(self) -> Dict[ConeKind, int]:
        counts = {kind: 0 for kind in ConeKind}
        for con in self.constraints:
            counts[con.kind] += 1
        return counts


@dataclass(frozen=True, eq=False)
class ConicSolution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    solver: str = ""

    @property
    def usable(self) -> bool:
        return self.status in USABLE_STATUSES and self.x is not None


class ProgramBuilder:
    """Incrementally assembles a ConicProgram.

    All variable blocks must be declared before constraints are added.
    """

    def __init__(self):
        self._blocks: Dict[str, Tuple[int, int]] = {}
        self._n = 0
        self._frozen = False
        self._constraints: List[ConeConstraint] = []
        self._c: Optional[np.ndarray] = None
        self._constant = 0.0

    @property
    def n_vars(self) -> int:
        return self._n

    def add_block(self, name: str, size: int) -> np.ndarray:
        """Declare a block of variables; returns its indices."""
        if self._frozen:
            raise ValidationError("Variables must be declared before constraints")
        if name in self._blocks:
            raise ValidationError(f"Duplicate variable block '{name}'")
        start = self._n
        self._n += int(size)
        self._blocks[name] = (start, self._n)
        return np.arange(start, self._n)

    def rows(self, m: int) -> sp.lil_matrix:
        """Blank coefficient rows sized for the declared variables."""
        self._frozen = True
        return sp.lil_matrix((m, self._n))

    def add(self, kind: ConeKind, A, b, order: int = 0, label: str = ""):
        self._frozen = True
        self._constraints.append(ConeConstraint(kind, A, b, order, label))

    def fix(self, indices: Sequence[int], values=None, label: str = "fixed"):
        """Pin variables to values (default 0) through the zero cone."""
        indices = np.asarray(indices, dtype=int)
        if indices.size == 0:
            return
        A = sp.csr_matrix((np.ones(indices.size), (np.arange(indices.size), indices)),
                          shape=(indices.size, self._n))
        values = np.zeros(indices.size) if values is None else np.asarray(values, dtype=float)
        self.add(ConeKind.ZERO, A, -values, label=label)

    def nonneg(self, indices: Sequence[int], label: str = "nonneg"):
        indices = np.asarray(indices, dtype=int)
        if indices.size == 0:
            return
        A = sp.csr_matrix((np.ones(indices.size), (np.arange(indices.size), indices)),
                          shape=(indices.size, self._n))
        self.add(ConeKind.NONNEG, A, np.zeros(indices.size), label=label)

    def set_objective(self, c: np.ndarray, constant: float = 0.0):
        self._c = np.asarray(c, dtype=float)
        self._constant = float(constant)

    def objective_vector(self) -> np.ndarray:
        """Zero objective vector sized for the declared variables."""
        return np.zeros(self._n)

    def build(self, sense: str = "minimize", meta: Optional[Dict[str, Any]] = None) -> ConicProgram:
        c = self._c if self._c is not None else np.zeros(self._n)
        return ConicProgram(self._n, c, self._constant, sense, tuple(self._constraints),
                            dict(self._blocks), dict(meta or {}))


def _solver_candidates(tol: float) -> List[Tuple[str, Dict[str, Any]]]:
    installed = cp.installed_solvers()
    solvers = []
    if 'CLARABEL' in installed:
        solvers.append((cp.CLARABEL, {'tol_gap_abs': tol, 'tol_gap_rel': tol,
                                      'tol_feas': tol, 'max_iter': 500}))
    if 'SCS' in installed:
        solvers.append((cp.SCS, {'eps_abs': max(tol, 1e-9), 'eps_rel': max(tol, 1e-9),
                                 'max_iters': 100000}))
    return solvers


def _cvx_constraint(con: ConeConstraint, x: cp.Variable):
    expr = con.A @ x + con.b
    if con.kind is ConeKind.ZERO:
        return expr == 0
    if con.kind is ConeKind.NONNEG:
        return expr >= 0
    if con.kind is ConeKind.SOC:
        if con.size == 1:
            return expr >= 0
        return cp.SOC(expr[0], expr[1:])
    if con.kind is ConeKind.EXP:
        return cp.constraints.ExpCone(expr[0::3], expr[1::3], expr[2::3])
    matrix = cp.reshape(expr, (con.order, con.order), order='F')
    return 0.5 * (matrix + matrix.T) >> 0


_STATUS_MAP = {
    cp.OPTIMAL: STATUS_OPTIMAL,
    cp.OPTIMAL_INACCURATE: STATUS_INACCURATE,
    cp.INFEASIBLE: STATUS_INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: STATUS_INFEASIBLE,
}


def solve(program: ConicProgram, tol: float = 1e-8, strict: bool = False) -> ConicSolution:
    """Solve a conic program.

    Tries CLARABEL first and falls back to SCS when the first backend
    breaks down or only reaches an inaccurate solution.

    Args:
        program: Program to solve
        tol: Feasibility and duality-gap tolerance
        strict: Raise instead of returning a failed solution

    Returns:
        ConicSolution; status "failed" means the caller should keep its previous iterate

    Raises:
        SolverError: If strict and no backend produced a usable answer
    """
    x = cp.Variable(program.n_vars)
    constraints = [_cvx_constraint(con, x) for con in program.constraints]
    objective = program.c @ x
    problem = cp.Problem(cp.Minimize(objective) if program.sense == "minimize"
                         else cp.Maximize(objective), constraints)

    best = ConicSolution(STATUS_FAILED, None, math.nan)
    for solver, options in _solver_candidates(tol):
        try:
            problem.solve(solver=solver, verbose=False, **options)
        except (cp.SolverError, ValueError, ArithmeticError) as e:
            logger.debug("Solver %s failed: %s", solver, e)
            continue

        status = _STATUS_MAP.get(problem.status, STATUS_FAILED)
        logger.debug("Solver %s returned %s", solver, problem.status)
        if status == STATUS_INFEASIBLE:
            return ConicSolution(status, None, math.nan, solver)
        if status in USABLE_STATUSES and x.value is not None:
            values = np.asarray(x.value, dtype=float).copy()
            candidate = ConicSolution(status, values, program.objective_value(values), solver)
            if status == STATUS_OPTIMAL:
                return candidate
            if best.status == STATUS_FAILED:
                best = candidate

    if best.status == STATUS_FAILED:
        logger.warning("All conic backends failed on a program with %d variables", program.n_vars)
        if strict:
            raise SolverError(f"No conic backend solved the {program.n_vars}-variable program")
    return best


class HermitianEmbedding:
    """Real parametrization of order-n Hermitian matrices.

    The parameter vector holds the n real diagonal entries, then the real
    parts of the strict upper triangle (row-major), then their imaginary
    parts. The embedding of X is the real symmetric [[Re X, -Im X], [Im X, Re X]].
    """

    def __init__(self, order: int):
        if order < 1:
            raise ValidationError(f"Embedding order must be at least 1, got {order}")
        self.order = int(order)
        self.upper = [(r, s) for r in range(self.order) for s in range(r + 1, self.order)]
        self.n_params = self.order ** 2

    @property
    def embedded_order(self) -> int:
        return 2 * self.order

    def diag_index(self, r: int) -> int:
        return r

    def re_index(self, pair: int) -> int:
        return self.order + pair

    def im_index(self, pair: int) -> int:
        return self.order + len(self.upper) + pair

    def embed(self, matrix: np.ndarray) -> np.ndarray:
        """Real symmetric embedding of a Hermitian matrix."""
        matrix = np.asarray(matrix, dtype=complex)
        re, im = matrix.real, matrix.imag
        return np.block([[re, -im], [im, re]])

    def recover(self, embedded: np.ndarray) -> np.ndarray:
        """Hermitian matrix from its embedding."""
        n = self.order
        return embedded[:n, :n] + 1j * embedded[n:, :n]

    def to_params(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=complex)
        theta = np.empty(self.n_params)
        theta[:self.order] = np.real(np.diag(matrix))
        for p, (r, s) in enumerate(self.upper):
            theta[self.re_index(p)] = matrix[r, s].real
            theta[self.im_index(p)] = matrix[r, s].imag
        return theta

    def from_params(self, theta: np.ndarray) -> np.ndarray:
        n = self.order
        matrix = np.diag(np.asarray(theta[:n], dtype=complex))
        for p, (r, s) in enumerate(self.upper):
            value = theta[self.re_index(p)] + 1j * theta[self.im_index(p)]
            matrix[r, s] = value
            matrix[s, r] = np.conj(value)
        return matrix

    def param_matrix(self) -> sp.csr_matrix:
        """Sparse map from parameters to the column-major embedded matrix."""
        n, m = self.order, 2 * self.order
        rows, cols, vals = [], [], []

        def put(i, j, param, value):
            rows.append(i + j * m)
            cols.append(param)
            vals.append(value)

        for r in range(n):
            put(r, r, r, 1.0)
            put(r + n, r + n, r, 1.0)
        for p, (r, s) in enumerate(self.upper):
            x_idx, y_idx = self.re_index(p), self.im_index(p)
            for i, j in ((r, s), (s, r), (r + n, s + n), (s + n, r + n)):
                put(i, j, x_idx, 1.0)
            put(r + n, s, y_idx, 1.0)
            put(s + n, r, y_idx, -1.0)
            put(r, s + n, y_idx, -1.0)
            put(s, r + n, y_idx, 1.0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(m * m, self.n_params))

    def trace_product_coeffs(self, matrix: np.ndarray) -> np.ndarray:
        """Coefficients g with Re Tr(M X) = g^T theta(X) for Hermitian M."""
        matrix = np.asarray(matrix, dtype=complex)
        coeffs = np.empty(self.n_params)
        coeffs[:self.order] = np.real(np.diag(matrix))
        for p, (r, s) in enumerate(self.upper):
            coeffs[self.re_index(p)] = 2.0 * matrix[r, s].real
            coeffs[self.im_index(p)] = 2.0 * matrix[r, s].imag
        return coeffs


def embed_hermitian(order: int) -> HermitianEmbedding:
    """Embedding descriptor for order-n Hermitian matrices."""
    return HermitianEmbedding(order)


def rate_log_constraint(n_vars: int, rate_index: int, t_index: int,
                        bandwidth: float) -> List[ConeConstraint]:
    """Cone rows equivalent to R <= B log2(1 + t) and t >= 0.

    The exponential row is (R ln2 / B, 1, 1 + t).

    Raises:
        ValidationError: If the bandwidth is not positive
    """
    if not bandwidth > 0:
        raise ValidationError(f"Bandwidth must be positive, got {bandwidth}")
    A = sp.lil_matrix((3, n_vars))
    A[0, rate_index] = math.log(2.0) / bandwidth
    A[2, t_index] = 1.0
    exp_row = ConeConstraint(ConeKind.EXP, A, np.array([0.0, 1.0, 1.0]), label="rate_log")
    t_row = sp.lil_matrix((1, n_vars))
    t_row[0, t_index] = 1.0
    return [exp_row, ConeConstraint(ConeKind.NONNEG, t_row, np.zeros(1), label="t_nonneg")]
