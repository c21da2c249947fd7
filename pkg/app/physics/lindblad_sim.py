"""
Lindblad evolution of a code entangled with a reference qudit, in a truncated
orthonormalized singlet sector, and the memory-time scaling built on it.

Weight that the catalogued errors carry out of the sector is not dropped: it
accumulates in a dump state together with the reference marginal it was
entangled with, so the reference entropy stays ln d.

Jump operators are split into Bohr components of the sector Hamiltonian, which
for model B carries the trace-mode penalty J (B1 + B2 - 1)^2, so each component
is weighted by the thermal rate of its own energy change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse, stats

from app.config import settings
from app.exceptions import (
    DegenerateGramError,
    NegativityError,
    PreconditionError,
    SectorClosureError,
    StepSizeError,
)
from app.models.amplitude import ExactAmplitude
from app.models.trace import TraceMonomial
from app.physics.code_akl import (
    CASE2,
    CASE3_NONSINGLET,
    MODEL_A,
    MODEL_B,
    MODEL_C,
    MODEL_SPECIES,
    CodeSpec,
    ErrorOperator,
    ErrorSet,
    TraceCombination,
    build_code,
    generate_errors,
)
from app.physics.singlet_basis import (
    CASE1 as BASIS_CASE1,
    CASE2 as BASIS_CASE2,
    ONE_MATRIX,
    SingletState,
    enumerate_basis,
)
from app.physics.trace_algebra import vev
from app.utils.logger import get_logger

logger = get_logger(__name__)

SECTOR_BASIS = {MODEL_A: BASIS_CASE2, MODEL_B: BASIS_CASE1, MODEL_C: ONE_MATRIX}
TRACE_TOLERANCE = 1e-8
NEGATIVITY_TOLERANCE = 1e-10
STEP_LIMIT = 0.1
TAIL_WARNING = 0.05
BOHR_TOLERANCE = 1e-9
COMPONENT_FLOOR = 1e-13


def thermal_rate(nu: float, beta: float) -> float:
    """
    gamma(nu) = |nu / (1 - e^{beta nu})| with gamma(0) = 1/beta.

    A jump that raises the system energy by nu > 0 is Boltzmann suppressed;
    gamma(-nu) / gamma(nu) = e^{beta nu}.
    """
    if beta <= 0:
        raise PreconditionError(f"Inverse temperature must be positive (got {beta})")
    if nu == 0:
        return 1.0 / beta
    x = beta * nu
    if x > 700:
        return abs(nu) * math.exp(-x)
    return abs(nu / math.expm1(x))


def nonsinglet_multiplier(n: int, penalty: float, temperature: float) -> float:
    """N^2 e^{-J/T}: total weight of the N^2 adjoint-charged channels."""
    return n * n * math.exp(-penalty / temperature)


def trace_mode_penalty(n: int, omega: float = 1.0) -> float:
    """Default model B coupling J = 2 omega ln N."""
    return 2 * omega * math.log(n)


_amplitudes: dict[tuple[TraceMonomial, ...], ExactAmplitude] = {}


def _amplitude(product: tuple[TraceMonomial, ...]) -> ExactAmplitude:
    cached = _amplitudes.get(product)
    if cached is None:
        if len(_amplitudes) > settings.CONTRACTION_CACHE_SIZE:
            _amplitudes.clear()
        cached = vev(product)
        _amplitudes[product] = cached
    return cached


def _float(amplitude: ExactAmplitude, n: int) -> float:
    return float(amplitude.evaluate(n))


@dataclass
class SectorFrame:
    """Orthonormal frame of a sector at a fixed N: u_k = sum_i S_ki raw_i."""

    n: int
    gram: np.ndarray
    inverse_sqrt: np.ndarray
    condition_number: float
    energies: np.ndarray


@dataclass
class TruncatedSector:
    """Singlet states with energy <= level_max, reused across N."""

    model: str
    states: list[SingletState]
    level_max: int

    @classmethod
    def for_code(
        cls, code: CodeSpec, level_max: int, case: str | None = None
    ) -> "TruncatedSector":
        """
        Model B under mixed single-trace errors needs the mixed-trace singlets;
        every other pairing uses the model's own basis.
        """
        code_level = max(c.letter_count for c in code.raw_states)
        if level_max < code_level:
            raise PreconditionError(
                f"Sector level {level_max} lies below the code level {code_level}"
            )
        basis = SECTOR_BASIS[code.model]
        if code.model == MODEL_B and case == CASE2:
            basis = BASIS_CASE2
        states = enumerate_basis(basis, level_max)
        logger.info(f"Sector for model {code.model}: {len(states)} states up to level {level_max}")
        return cls(code.model, states, level_max)

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.states], dtype=float)

    def _pairs(self, shift: int) -> Iterable[tuple[int, int]]:
        for k, bra in enumerate(self.states):
            for l, ket in enumerate(self.states):
                if bra.energy == ket.energy + shift:
                    yield k, l

    def frame(self, n: int) -> SectorFrame:
        size = self.size
        gram = np.zeros((size, size))
        for k, l in self._pairs(0):
            gram[k, l] = _float(
                _amplitude((self.states[k].defining.conj(), self.states[l].defining)), n
            )
        values, vectors = np.linalg.eigh(gram)
        if values[0] < settings.GRAM_FLOOR:
            raise DegenerateGramError(
                f"Sector Gram matrix is singular at N={n} (smallest eigenvalue "
                f"{values[0]:.3g}); raise N or lower the sector level"
            )
        inverse_sqrt = (vectors / np.sqrt(values)) @ vectors.T
        return SectorFrame(
            n=n,
            gram=gram,
            inverse_sqrt=inverse_sqrt,
            condition_number=float(values[-1] / values[0]),
            energies=self.energies,
        )

    def operator(self, op: TraceCombination, frame: SectorFrame) -> np.ndarray:
        """<u_k| op |u_l> in the orthonormal frame."""
        raw = np.zeros((self.size, self.size))
        for monomial, scale in op.terms:
            weight = float(scale)
            for k, l in self._pairs(monomial.energy):
                product = (self.states[k].defining.conj(), monomial, self.states[l].defining)
                raw[k, l] += weight * _float(_amplitude(product), frame.n)
        s = frame.inverse_sqrt
        return s @ raw @ s

    def product_operator(
        self, left: TraceCombination, right: TraceCombination, frame: SectorFrame
    ) -> np.ndarray:
        """<u_k| left right |u_l>, including paths through states outside the sector."""
        raw = np.zeros((self.size, self.size))
        for m1, s1 in left.terms:
            for m2, s2 in right.terms:
                weight = float(s1) * float(s2)
                for k, l in self._pairs(m1.energy + m2.energy):
                    product = (self.states[k].defining.conj(), m1, m2, self.states[l].defining)
                    raw[k, l] += weight * _float(_amplitude(product), frame.n)
        s = frame.inverse_sqrt
        return s @ raw @ s

    def penalty_operator(self, frame: SectorFrame) -> np.ndarray:
        """(B1 + B2 - 1)^2 with B_s = Tr(a_s+) Tr(a_s) / N; integer spectrum."""
        total = -np.eye(self.size)
        for species in MODEL_SPECIES[MODEL_B]:
            creation = TraceCombination.of(TraceMonomial.from_words([[f"{species}+"]]))
            total += self.product_operator(creation, creation.conj(), frame)
        return total @ total

    def code_vectors(self, code: CodeSpec, frame: SectorFrame) -> np.ndarray:
        """Orthonormal logical vectors (rows) in the sector frame."""
        raw_vectors = []
        for combo in code.raw_states:
            overlaps = np.zeros(self.size)
            for monomial, scale in combo.terms:
                for k, state in enumerate(self.states):
                    if state.energy == monomial.letter_count:
                        overlaps[k] += float(scale) * _float(
                            _amplitude((state.defining.conj(), monomial)), frame.n
                        )
            raw_vectors.append(frame.inverse_sqrt @ overlaps)
        vectors = np.array(raw_vectors)
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms < 1 - 1e-6):
            raise SectorClosureError(
                f"Code states of model {code.model} are not contained in the sector"
            )
        vectors = vectors / norms[:, None]
        if code.orthonormalization == "symmetric":
            plus = vectors[0] + vectors[1]
            minus = vectors[0] - vectors[1]
            return np.array([plus / np.linalg.norm(plus), minus / np.linalg.norm(minus)])
        q, r = np.linalg.qr(vectors.T)
        return (q * np.sign(np.diag(r))).T


@dataclass
class Superoperator:
    """
    Generator L(rho) = -i(H_eff rho - rho H_eff^+) + sum_a r_a J_a rho J_a^+,
    with H_eff = H - (i/2) sum_a r_a K_a, on sector (x) reference.

    `leak` is sum_a r_a (K_a - J_a^+ J_a): the rate operator of weight leaving
    the sector.
    """

    hamiltonian: np.ndarray
    jumps: list[np.ndarray]
    rates: np.ndarray
    anticommutators: list[np.ndarray]
    d: int
    effective: np.ndarray = field(init=False)
    leak: np.ndarray = field(init=False)

    def __post_init__(self):
        size = self.hamiltonian.shape[0]
        decay = np.zeros((size, size), dtype=complex)
        leak = np.zeros((size, size), dtype=complex)
        for rate, jump, anti in zip(self.rates, self.jumps, self.anticommutators):
            decay += rate * anti
            leak += rate * (anti - jump.conj().T @ jump)
        self.effective = self.hamiltonian.astype(complex) - 0.5j * decay
        self.leak = leak

    @classmethod
    def from_sector_matrices(
        cls,
        hamiltonian: np.ndarray,
        jumps: Sequence[np.ndarray],
        rates: Sequence[float],
        anticommutators: Sequence[np.ndarray] | None = None,
        d: int = 2,
    ) -> "Superoperator":
        """Lift sector operators to sector (x) reference."""
        identity = np.eye(d)
        if anticommutators is None:
            anticommutators = [j.conj().T @ j for j in jumps]
        return cls(
            hamiltonian=np.kron(hamiltonian, identity),
            jumps=[np.kron(j, identity) for j in jumps],
            rates=np.asarray(rates, dtype=float),
            anticommutators=[np.kron(k, identity) for k in anticommutators],
            d=d,
        )

    @property
    def dimension(self) -> int:
        return self.hamiltonian.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.effective @ rho - rho @ self.effective.conj().T)
        for rate, jump in zip(self.rates, self.jumps):
            if rate:
                out += rate * (jump @ rho @ jump.conj().T)
        return out

    def leak_rate(self, rho: np.ndarray) -> np.ndarray:
        """d/dt of the leaked reference marginal: tr_S(leak rho)."""
        size = self.dimension // self.d
        flow = (self.leak @ rho).reshape(size, self.d, size, self.d)
        return np.einsum("kikj->ij", flow)

    def spectral_bound(self) -> float:
        bound = 2 * np.linalg.norm(self.effective, 2)
        for rate, jump in zip(self.rates, self.jumps):
            bound += rate * np.linalg.norm(jump, 2) ** 2
        return float(bound)

    def to_sparse(self) -> sparse.csr_matrix:
        """Matrix of L on column-stacked vec(rho)."""
        identity = sparse.identity(self.dimension, format="csr")
        eff = sparse.csr_matrix(self.effective)
        generator = -1j * (sparse.kron(identity, eff) - sparse.kron(eff.conj(), identity))
        for rate, jump in zip(self.rates, self.jumps):
            if rate:
                j = sparse.csr_matrix(jump)
                generator = generator + rate * sparse.kron(j.conj(), j)
        return generator.tocsr()


@dataclass
class DensityOperator:
    matrix: np.ndarray
    leaked: np.ndarray
    d: int

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @property
    def leakage(self) -> float:
        return float(np.real(np.trace(self.leaked)))

    def copy(self) -> "DensityOperator":
        return DensityOperator(self.matrix.copy(), self.leaked.copy(), self.d)


def initial_state(vectors: np.ndarray) -> DensityOperator:
    """(1/d) sum_ij |i~><j~| (x) |i><j| from orthonormal logical vectors (rows)."""
    d, size = vectors.shape
    phi = np.zeros(size * d, dtype=complex)
    for i in range(d):
        reference = np.zeros(d)
        reference[i] = 1.0
        phi += np.kron(vectors[i], reference)
    phi /= math.sqrt(d)
    return DensityOperator(np.outer(phi, phi.conj()), np.zeros((d, d), dtype=complex), d)


@dataclass
class LindbladModel:
    """Generator together with the initial state it acts on."""

    superoperator: Superoperator
    rho0: DensityOperator
    frame: SectorFrame
    labels: list[str]
    rates: list[float]
    tail_fraction: float = 0.0
    frequencies: list[float] = field(default_factory=list)
    penalty: float = 0.0


def _conjugate(error: ErrorOperator) -> ErrorOperator:
    return ErrorOperator(
        f"({error.label})+", error.operator.conj(), -error.energy, error.letters, error.coupling
    )


def bohr_components(
    jump: np.ndarray, levels: np.ndarray, tolerance: float | None = None
) -> list[tuple[float, np.ndarray]]:
    """
    Split <k|A|l> in the energy eigenbasis by the gap levels[k] - levels[l].

    Gaps closer than the tolerance share a component.
    """
    if tolerance is None:
        tolerance = BOHR_TOLERANCE * max(1.0, float(np.max(np.abs(levels), initial=0.0)))
    gaps = levels[:, None] - levels[None, :]
    remaining = np.abs(jump) > COMPONENT_FLOOR
    components = []
    while remaining.any():
        nu = gaps[remaining][0]
        mask = remaining & (np.abs(gaps - nu) <= tolerance)
        components.append((float(np.mean(gaps[mask])), np.where(mask, jump, 0.0)))
        remaining &= ~mask
    return components


def build_lindbladian(
    code: CodeSpec,
    errors: ErrorSet,
    sector: TruncatedSector,
    n: int,
    beta: float,
    omega: float = 1.0,
    penalty: float | None = None,
) -> LindbladModel:
    """
    Jump operators P E P and P E+ P for every catalogued error, split into
    Bohr components of H = omega N (+ J (B1 + B2 - 1)^2 for model B), each with
    rate lambda gamma(nu). The part of P E+ E P reached through states outside
    the sector is booked as leakage at the bare rate lambda gamma(energy omega).

    For model B `penalty` is J and defaults to 2 omega ln N; zero switches the
    penalty off. For the non-singlet aggregate it is the Casimir penalty.
    """
    frame = sector.frame(n)
    size = sector.size
    hamiltonian = omega * np.diag(frame.energies)
    strength = 0.0
    if code.model == MODEL_B:
        strength = trace_mode_penalty(n, omega) if penalty is None else penalty
        if strength:
            hamiltonian = hamiltonian + strength * sector.penalty_operator(frame)
    levels, basis = np.linalg.eigh(hamiltonian)

    def rotate(matrix: np.ndarray) -> np.ndarray:
        return basis.T @ matrix @ basis

    jumps, anti, rates, labels, frequencies = [], [], [], [], []
    seen: set[frozenset] = set()
    for error in errors.entries:
        key = frozenset(error.operator.terms)
        if key in seen:
            continue
        seen.add(key)
        pair = [error]
        conjugate = _conjugate(error)
        conjugate_key = frozenset(conjugate.operator.terms)
        if conjugate_key not in seen:
            seen.add(conjugate_key)
            pair.append(conjugate)
        for op in pair:
            jump = rotate(sector.operator(op.operator, frame))
            full = rotate(sector.product_operator(_conjugate(op).operator, op.operator, frame))
            for nu, component in bohr_components(jump, levels):
                jumps.append(component)
                anti.append(component.T @ component)
                rates.append(op.coupling * thermal_rate(nu, beta))
                labels.append(op.label)
                frequencies.append(nu)
            outside = full - jump.T @ jump
            if np.max(np.abs(outside), initial=0.0) > COMPONENT_FLOOR:
                jumps.append(np.zeros((size, size)))
                anti.append(outside)
                rates.append(op.coupling * thermal_rate(op.energy * omega, beta))
                labels.append(op.label)
                frequencies.append(op.energy * omega)

    if errors.case == CASE3_NONSINGLET:
        if penalty is None:
            raise PreconditionError("The non-singlet aggregate channel needs a penalty J")
        jumps.append(np.zeros((size, size)))
        anti.append(np.eye(size) / n**2)
        rates.append(nonsinglet_multiplier(n, penalty, 1.0 / beta))
        labels.append("non-singlet aggregate")
        frequencies.append(penalty)

    top = [r for r, l in zip(rates, labels) if _letters_of(l, errors) == errors.cutoff]
    total = sum(rates)
    tail_fraction = sum(top) / total if total else 0.0
    if tail_fraction > TAIL_WARNING:
        logger.warning(
            f"Cutoff level carries {tail_fraction:.1%} of the total rate; the truncated "
            f"sector may be outside its validity range"
        )

    superoperator = Superoperator.from_sector_matrices(
        np.diag(levels), jumps, rates, anti, d=code.d
    )
    rho0 = initial_state(sector.code_vectors(code, frame) @ basis)
    logger.info(
        f"Lindbladian for model {code.model} at N={n}: {len(jumps)} channels, "
        f"sector {size}, penalty {strength:.4g}, Gram condition {frame.condition_number:.3g}"
    )
    return LindbladModel(
        superoperator, rho0, frame, labels, rates, tail_fraction, frequencies, strength
    )


def _letters_of(label: str, errors: ErrorSet) -> int | None:
    for error in errors.entries:
        if label in (error.label, f"({error.label})+"):
            return error.letters
    return None


def _rk4(generator: Superoperator, state: DensityOperator, step: float) -> DensityOperator:
    def derivative(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return generator.apply(rho), generator.leak_rate(rho)

    rho = state.matrix
    k1, l1 = derivative(rho)
    k2, l2 = derivative(rho + 0.5 * step * k1)
    k3, l3 = derivative(rho + 0.5 * step * k2)
    k4, l4 = derivative(rho + step * k3)
    matrix = rho + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    leaked = state.leaked + step / 6 * (l1 + 2 * l2 + 2 * l3 + l4)
    matrix = (matrix + matrix.conj().T) / 2
    leaked = (leaked + leaked.conj().T) / 2
    return DensityOperator(matrix, leaked, state.d)


def _check(state: DensityOperator, t: float) -> None:
    total = state.trace + state.leakage
    if abs(total - 1) > TRACE_TOLERANCE:
        raise SectorClosureError(f"Trace plus leakage is {total:.12f} at t={t}")
    smallest = float(np.min(np.linalg.eigvalsh(state.matrix)))
    if smallest < -NEGATIVITY_TOLERANCE:
        raise NegativityError(f"Density operator eigenvalue {smallest:.3g} at t={t}")


def evolve(
    generator: Superoperator,
    rho0: DensityOperator,
    times: Sequence[float],
    step: float | None = None,
) -> list[DensityOperator]:
    """
    Fixed-step RK4 trajectory sampled at `times` (nondecreasing, from >= 0).

    Without an explicit step the largest step keeping step * bound below the
    limit is used.
    """
    grid = np.asarray(times, dtype=float)
    if grid.size == 0:
        return []
    if np.any(np.diff(grid) < 0) or grid[0] < 0:
        raise PreconditionError("Time grid must be nondecreasing and start at t >= 0")
    bound = generator.spectral_bound()
    if step is None:
        step = 0.5 * STEP_LIMIT / bound if bound > 0 else float(max(grid[-1], 1.0))
    if step * bound >= STEP_LIMIT:
        raise StepSizeError(
            f"Step {step} times generator bound {bound:.4g} exceeds {STEP_LIMIT}"
        )
    trajectory: list[DensityOperator] = []
    state = rho0.copy()
    current = 0.0
    for target in grid:
        remaining = target - current
        if remaining > 0:
            count = max(1, int(math.ceil(remaining / step - 1e-12)))
            h = remaining / count
            for _ in range(count):
                state = _rk4(generator, state, h)
            current = float(target)
        _check(state, current)
        trajectory.append(state.copy())
    logger.debug(f"Evolved {len(grid)} samples with step {step:.4g}")
    return trajectory


def von_neumann(matrix: np.ndarray) -> float:
    values = np.linalg.eigvalsh((matrix + matrix.conj().T) / 2)
    values = values[values > settings.EIGENVALUE_FLOOR]
    return float(-np.sum(values * np.log(values)))


def _binary_weight(p: float) -> float:
    return -p * math.log(p) if p > settings.EIGENVALUE_FLOOR else 0.0


def reduced_states(state: DensityOperator) -> tuple[np.ndarray, np.ndarray]:
    """(rho_S without the dump, rho_R including the leaked marginal)."""
    d = state.d
    size = state.matrix.shape[0] // d
    blocks = state.matrix.reshape(size, d, size, d)
    rho_s = np.einsum("kili->kl", blocks)
    rho_r = np.einsum("kikj->ij", blocks) + state.leaked
    return rho_s, rho_r


def mutual_information(state: DensityOperator) -> float:
    """
    I(S:R) = S(rho_S) + S(rho_R) - S(rho_SR), with leaked weight on an
    orthogonal dump state carrying its reference marginal.
    """
    rho_s, rho_r = reduced_states(state)
    s_system = von_neumann(rho_s) + _binary_weight(state.leakage)
    s_reference = von_neumann(rho_r)
    s_joint = von_neumann(state.matrix) + von_neumann(state.leaked)
    return s_system + s_reference - s_joint


def reference_entropy(state: DensityOperator) -> float:
    return von_neumann(reduced_states(state)[1])


@dataclass(frozen=True)
class MemoryTime:
    time: float
    extrapolated: bool


def memory_time(
    times: Sequence[float], information: Sequence[float], delta: float, d: int = 2
) -> MemoryTime:
    """First time I(S:R) < 2 ln d - delta, linearly interpolated."""
    t = np.asarray(times, dtype=float)
    info = np.asarray(information, dtype=float)
    if t.size != info.size or t.size == 0:
        raise PreconditionError("Times and information values must align and be nonempty")
    threshold = 2 * math.log(d) - delta
    below = np.nonzero(info < threshold)[0]
    if below.size:
        k = int(below[0])
        if k == 0:
            return MemoryTime(float(t[0]), False)
        t0, t1, i0, i1 = t[k - 1], t[k], info[k - 1], info[k]
        return MemoryTime(float(t0 + (i0 - threshold) * (t1 - t0) / (i0 - i1)), False)
    if t.size < 2 or info[-1] >= info[0]:
        return MemoryTime(math.inf, True)
    slope = (info[-1] - info[0]) / (t[-1] - t[0])
    return MemoryTime(float(t[0] + (info[0] - threshold) / -slope), True)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    stderr: float
    intercept: float

    @property
    def band(self) -> tuple[float, float]:
        return (self.exponent - 2 * self.stderr, self.exponent + 2 * self.stderr)


def fit_power_law(ns: Sequence[float], values: Sequence[float]) -> PowerLawFit:
    """Fit values ~ C N^alpha on a log-log scale."""
    if len(ns) < 3:
        raise PreconditionError("A power-law fit needs at least three N values")
    result = stats.linregress(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)))
    return PowerLawFit(float(result.slope), float(result.stderr), float(result.intercept))


@dataclass
class ScalingPoint:
    n: int
    memory_time: float
    extrapolated: bool
    early_slope: float
    tail_fraction: float
    times: list[float]
    information: list[float]
    trace: list[float]
    leakage: list[float]


@dataclass
class ScalingReport:
    model: str
    case: str
    beta: float
    delta: float
    points: list[ScalingPoint]
    memory_fit: PowerLawFit | None
    slope_fit: PowerLawFit | None
    ground_multiplier: float | None


def simulate(
    model: str,
    case: str,
    n: int,
    beta: float,
    cutoff: int,
    times: Sequence[float],
    length: int | None = None,
    level_max: int | None = None,
    omega: float = 1.0,
    penalty: float | None = None,
    delta: float | None = None,
    code: CodeSpec | None = None,
    errors: ErrorSet | None = None,
    sector: TruncatedSector | None = None,
) -> ScalingPoint:
    """One trajectory: build code, errors, sector and generator, then evolve."""
    code = code or build_code(model, length=length)
    errors = errors or generate_errors(model, case, cutoff, length=length)
    code_level = max(c.letter_count for c in code.raw_states)
    sector = sector or TruncatedSector.for_code(
        code, level_max or code_level + cutoff, errors.case
    )
    lindblad = build_lindbladian(code, errors, sector, n, beta, omega, penalty)
    trajectory = evolve(lindblad.superoperator, lindblad.rho0, times)
    info = [mutual_information(s) for s in trajectory]
    delta = settings.DEFAULT_DELTA if delta is None else delta
    mem = memory_time(times, info, delta, code.d)
    slope = (info[0] - info[1]) / (times[1] - times[0]) if len(times) > 1 else 0.0
    return ScalingPoint(
        n=n,
        memory_time=mem.time,
        extrapolated=mem.extrapolated,
        early_slope=float(slope),
        tail_fraction=lindblad.tail_fraction,
        times=[float(t) for t in times],
        information=info,
        trace=[s.trace for s in trajectory],
        leakage=[s.leakage for s in trajectory],
    )


def scaling_report(
    model: str,
    case: str,
    ns: Sequence[int],
    beta: float,
    cutoff: int,
    times: Sequence[float],
    delta: float | None = None,
    length: int | None = None,
    level_max: int | None = None,
    omega: float = 1.0,
    penalty: float | None = None,
) -> ScalingReport:
    """Fit t_mem ~ N^alpha and early slope ~ N^-alpha over the N values."""
    if len(ns) < 3:
        raise PreconditionError("Scaling needs at least three values of N")
    delta = settings.DEFAULT_DELTA if delta is None else delta
    code = build_code(model, length=length)
    errors = generate_errors(model, case, cutoff, length=length)
    code_level = max(c.letter_count for c in code.raw_states)
    sector = TruncatedSector.for_code(code, level_max or code_level + cutoff, case)
    points = []
    for n in ns:
        logger.info(f"Scaling run for model {model} at N={n}")
        points.append(
            simulate(
                model, case, n, beta, cutoff, times, length, level_max, omega,
                penalty, delta, code=code, errors=errors, sector=sector,
            )
        )
    finite = [p for p in points if math.isfinite(p.memory_time) and p.memory_time > 0]
    memory_fit = (
        fit_power_law([p.n for p in finite], [p.memory_time for p in finite])
        if len(finite) >= 3
        else None
    )
    sloped = [p for p in points if p.early_slope > 0]
    slope_fit = (
        fit_power_law([p.n for p in sloped], [p.early_slope for p in sloped])
        if len(sloped) >= 3
        else None
    )
    ground = math.exp(omega * beta) if model in (MODEL_B, MODEL_C) else None
    return ScalingReport(model, case, beta, delta, points, memory_fit, slope_fit, ground)
