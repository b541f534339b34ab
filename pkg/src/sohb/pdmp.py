"""Event-driven simulation of the body-attitude jump process on a periodic box.

Particles fly in straight lines along ``A_k e_1`` at speed ``c0``. Each
carries an exponential clock of rate ``nu``; when it rings, the particle's
frame is redrawn from a von Mises law centred on the projection of its
neighbourhood average ``J_k``. Because rates are constant and flights are
analytic the simulation is exact: positions are stored only at each
particle's last event and advected on read, so no state changes between
events.
"""

import dataclasses
import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from . import son
from ._checks import check_dimension
from .exceptions import ProjectionError
from .von_mises import sample_identity

KERNELS = ("indicator", "custom")
INIT_FRAMES = ("haar", "aligned")
NEIGHBOR_SEARCH = ("brute", "cell")
JUMP_RULES = ("normalized", "unnormalized")
#: samples drawn from M_Id per refill of the jump stream
SAMPLE_BUFFER = 4096
#: homogeneous mode rebuilds the running frame sum this often (events)
RESUM_EVERY = 1000
EVENTS_SCHEMA = "sohb-events/1"


class ConfigError(ValueError):
    """Invalid simulation parameters or configuration file."""


@dataclass(frozen=True)
class SimParams:
    """Simulation parameters; TOML keys mirror these field names.

    ``R`` must satisfy ``R <= L/2`` (minimum-image search) unless
    ``R >= sqrt(n) L``, which switches to homogeneous all-to-all coupling.
    ``kernel_table`` lists ``(s, K~(s))`` pairs interpolated linearly and
    zero past the last abscissa; it is required when ``kernel = "custom"``.
    """

    N: int
    n: int = 3
    c0: float = 1.0
    nu: float = 1.0
    kappa: float = 1.0
    R: float = 0.5
    L: float = 1.0
    T_end: float = 1.0
    seed: int = 0
    kernel: str = "indicator"
    kernel_table: tuple = ()
    init_frames: str = "haar"
    snapshot_every: float = 0.0
    neighbor_search: str = "brute"
    jump_rule: str = "normalized"

    def __post_init__(self):
        try:
            check_dimension(self.n)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        for name in ("c0", "kappa", "R", "L", "T_end"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {v!r}")
        if not (isinstance(self.nu, (int, float)) and math.isfinite(self.nu) and self.nu >= 0):
            raise ConfigError(f"nu must be >= 0, got {self.nu!r}")
        if not isinstance(self.N, int) or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N!r}")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        for name, allowed in (("kernel", KERNELS), ("init_frames", INIT_FRAMES),
                              ("neighbor_search", NEIGHBOR_SEARCH), ("jump_rule", JUMP_RULES)):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.jump_rule != "normalized":
            raise ConfigError("jump_rule 'unnormalized' is reserved and not implemented")
        table = tuple(tuple(float(v) for v in row) for row in self.kernel_table)
        object.__setattr__(self, "kernel_table", table)
        if self.kernel == "custom":
            if len(table) < 2 or any(len(r) != 2 for r in table):
                raise ConfigError("custom kernel needs kernel_table with at least two (s, value) pairs")
            s = [r[0] for r in table]
            if s[0] != 0.0 or any(b <= a for a, b in zip(s, s[1:])) or any(r[1] < 0 for r in table):
                raise ConfigError("kernel_table abscissae must start at 0 and increase; values must be >= 0")
        if not self.homogeneous and self.support > self.L / 2:
            raise ConfigError(
                f"interaction range {self.support:g} exceeds L/2 = {self.L / 2:g}; "
                f"use R >= sqrt(n) L = {math.sqrt(self.n) * self.L:g} for all-to-all coupling"
            )

    @property
    def homogeneous(self):
        return self.R >= math.sqrt(self.n) * self.L

    @property
    def support(self):
        """Largest distance at which the kernel can be nonzero."""
        if self.kernel == "indicator":
            return self.R
        return self.R * self.kernel_table[-1][0]

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["kernel_table"] = [list(r) for r in self.kernel_table]
        return d

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "N" not in data:
            raise ConfigError("configuration must set N")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path, **overrides):
    """Read a TOML file into :class:`SimParams`; non-``None`` overrides win."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from None
    data.update({k: v for k, v in overrides.items() if v is not None})
    return SimParams.from_dict(data)


def kernel_weights(params, dist):
    """``K(x) = K~(|x| / R) / R^n`` at the given distances."""
    s = np.asarray(dist, dtype=float) / params.R
    if params.kernel == "indicator":
        kt = (s <= 1.0).astype(float)
    else:
        xs, ys = zip(*params.kernel_table)
        kt = np.interp(s, xs, ys, right=0.0)
    return kt / params.R**params.n


@dataclass
class ParticleEnsemble:
    """Per-particle state at each particle's last event.

    ``X`` (N, n) positions folded into ``[0, L)``; ``A`` (N, n, n) frames;
    ``t_mark`` time of last event; ``next_jump`` scheduled clock time.
    """

    X: np.ndarray
    A: np.ndarray
    t_mark: np.ndarray
    next_jump: np.ndarray
    sim_time: float
    L: float
    c0: float

    @property
    def N(self):
        return self.X.shape[0]

    def positions(self, t):
        """All positions at time ``t``, advected analytically."""
        if np.any(t < self.t_mark - 1e-12):
            raise ValueError("cannot evaluate positions before a particle's last event")
        return np.mod(self.X + (self.c0 * (t - self.t_mark))[:, None] * self.A[:, :, 0], self.L)

    def copy(self):
        return dataclasses.replace(self, X=self.X.copy(), A=self.A.copy(),
                                   t_mark=self.t_mark.copy(), next_jump=self.next_jump.copy())


def position_at(ensemble, k, t):
    """``X_k + c0 (t - t_mark) A_k e_1``, folded into the box."""
    dt = t - ensemble.t_mark[k]
    if dt < 0:
        raise ValueError(f"time {t} precedes the last event of particle {k} at {ensemble.t_mark[k]}")
    return np.mod(ensemble.X[k] + ensemble.c0 * dt * ensemble.A[k, :, 0], ensemble.L)


def periodic_distance(x, Y, L):
    """Minimum-image distances from point ``x`` to rows of ``Y``."""
    d = np.abs(Y - x)
    d = np.minimum(d, L - d)
    return np.sqrt(np.sum(d * d, axis=-1))


class CellList:
    """Verlet-style cell list with cell edge ``range + skin``.

    Built from positions at ``t_build``; valid while no particle can have
    moved more than ``skin / 2``, that is for ``c0 (t - t_build) < skin / 2``.
    Scans the ``3^n`` surrounding cells, so it only pays off for small ``n``.
    """

    def __init__(self, ensemble, t, rng_range, skin):
        L = ensemble.L
        self.n = ensemble.X.shape[1]
        self.m = int(L // (rng_range + skin))
        if self.m < 3:
            raise ValueError("box too small for a cell list at this range")
        self.t_build = t
        self.skin = skin
        self.c0 = ensemble.c0
        pos = ensemble.positions(t)
        idx = np.minimum((pos / (L / self.m)).astype(int), self.m - 1)
        self.cell_of = idx
        keys = np.ravel_multi_index(idx.T, (self.m,) * self.n)
        order = np.argsort(keys, kind="stable")
        sk = keys[order]
        self.order = order
        self.starts = np.searchsorted(sk, np.arange(self.m**self.n))
        self.ends = np.searchsorted(sk, np.arange(self.m**self.n), side="right")
        offs = np.array(np.meshgrid(*([[-1, 0, 1]] * self.n), indexing="ij")).reshape(self.n, -1).T
        self.offsets = offs

    def valid(self, t):
        return self.c0 * (t - self.t_build) < 0.5 * self.skin

    def candidates(self, k):
        cells = np.mod(self.cell_of[k] + self.offsets, self.m)
        keys = np.unique(np.ravel_multi_index(cells.T, (self.m,) * self.n))
        return np.concatenate([self.order[self.starts[c]:self.ends[c]] for c in keys])


def neighbor_average(k, ensemble, t, params, cells=None):
    """``J_k = (1/N) sum_l K(X_k - X_l) A_l`` at time ``t`` (``l = k`` included)."""
    N = ensemble.N
    if params.homogeneous and params.kernel == "indicator":
        return ensemble.A.sum(axis=0) / (N * params.R**params.n)
    xk = position_at(ensemble, k, t)
    if cells is not None:
        idx = cells.candidates(k)
        ell = idx
        pos = np.mod(ensemble.X[idx] + (ensemble.c0 * (t - ensemble.t_mark[idx]))[:, None]
                     * ensemble.A[idx, :, 0], ensemble.L)
    else:
        ell = slice(None)
        pos = ensemble.positions(t)
    w = kernel_weights(params, periodic_distance(xk, pos, ensemble.L))
    return np.einsum("l,lij->ij", w, ensemble.A[ell]) / N


def order_parameter(frames):
    """``(J . Theta) / n`` with ``J`` the mean frame and ``Theta`` its projection.

    Accepts a :class:`ParticleEnsemble` or an ``(N, n, n)`` stack.
    """
    A = frames.A if isinstance(frames, ParticleEnsemble) else np.asarray(frames, dtype=float)
    J = A.mean(axis=0)
    theta = son.project_to_rotation(J)
    return float(son.matrix_inner(J, theta) / A.shape[-1]), J


class _SampleStream:
    """Buffered ``M_Id`` draws from a dedicated generator."""

    def __init__(self, n, kappa, rng):
        self.n, self.kappa, self.rng = n, kappa, rng
        self.buf = np.empty((0, n, n))
        self.i = 0

    def next(self):
        if self.i >= len(self.buf):
            self.buf = sample_identity(self.n, self.kappa, SAMPLE_BUFFER, self.rng)
            self.i = 0
        self.i += 1
        return self.buf[self.i - 1]


def initial_ensemble(params, rng):
    N, n = params.N, params.n
    X = rng.uniform(0.0, params.L, (N, n))
    if params.init_frames == "haar":
        A = son.haar_sample(rng, n, N)
    else:
        A = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    return X, A


@dataclass
class RunResult:
    ensemble: ParticleEnsemble
    jump_counts: np.ndarray
    n_events: int
    n_warnings: int
    snapshots: list


def _flat(M):
    return [float(v) for v in np.asarray(M).ravel()]


def snapshot_record(t, ensemble):
    op, J = order_parameter(ensemble)
    return {"type": "snapshot", "t": float(t), "order_parameter": op, "J_glob": _flat(J)}


def run(params, emit=None, emit_events=True):
    """Simulate up to ``T_end``.

    ``emit`` receives one dict per record: ``event`` records
    ``{t, k, theta_k, a_new}``, ``warning`` records for skipped projections,
    and ``snapshot`` records ``{t, order_parameter, J_glob}`` every
    ``snapshot_every`` and at ``T_end``. Event records are skipped when
    ``emit_events`` is false.

    Determinism: the initial state, the jump clocks and the von Mises draws
    use three generators spawned from ``seed``, and the loop is sequential.
    """
    root = np.random.default_rng(params.seed)
    rng_init, rng_clock, rng_vm = root.spawn(3)
    N, n, T = params.N, params.n, params.T_end
    X, A = initial_ensemble(params, rng_init)
    nu = params.nu
    if nu > 0:
        next_jump = rng_clock.exponential(1.0 / nu, N)
    else:
        next_jump = np.full(N, math.inf)
    ens = ParticleEnsemble(X, A, np.zeros(N), next_jump, 0.0, params.L, params.c0)
    heap = [(float(tj), k) for k, tj in enumerate(next_jump) if tj <= T]
    heapq.heapify(heap)
    stream = _SampleStream(n, params.kappa, rng_vm)
    counts = np.zeros(N, dtype=np.int64)
    snaps = []
    out = emit or (lambda rec: None)

    homog = params.homogeneous and params.kernel == "indicator"
    S = A.sum(axis=0) if homog else None
    use_cells = params.neighbor_search == "cell" and not params.homogeneous
    cells = None
    skin = 0.5 * params.support

    dt_snap = params.snapshot_every
    next_snap = dt_snap if dt_snap > 0 else math.inf
    n_events = n_warn = 0

    def snap(t):
        ens.sim_time = t
        rec = snapshot_record(t, ens)
        snaps.append(rec)
        out(rec)

    while heap:
        t, k = heapq.heappop(heap)
        while next_snap <= t:
            snap(next_snap)
            next_snap += dt_snap
        ens.sim_time = t
        if homog:
            if n_events % RESUM_EVERY == 0:
                S = ens.A.sum(axis=0)
            J = S / (N * params.R**n)
        else:
            if use_cells and (cells is None or not cells.valid(t)):
                try:
                    cells = CellList(ens, t, params.support, skin)
                except ValueError:
                    use_cells = False
                    cells = None
            J = neighbor_average(k, ens, t, params, cells if use_cells else None)
        xk = position_at(ens, k, t)
        try:
            theta = son.project_to_rotation(J)
        except ProjectionError as exc:
            n_warn += 1
            out({"type": "warning", "t": t, "k": k, "message": f"{type(exc).__name__}: {exc}"})
            a_new = ens.A[k]
            theta = None
        else:
            a_new = theta @ stream.next()
            if homog:
                S = S + a_new - ens.A[k]
        ens.X[k] = xk
        ens.A[k] = a_new
        ens.t_mark[k] = t
        counts[k] += 1
        n_events += 1
        if theta is not None and emit_events:
            out({"type": "event", "t": t, "k": k, "theta_k": _flat(theta), "a_new": _flat(a_new)})
        tn = t + rng_clock.exponential(1.0 / nu)
        ens.next_jump[k] = tn
        if tn <= T:
            heapq.heappush(heap, (tn, k))

    while next_snap <= T:
        snap(next_snap)
        next_snap += dt_snap
    # bring every particle to T_end so the final state is a consistent snapshot
    ens.X = ens.positions(T)
    ens.t_mark[:] = T
    ens.sim_time = T
    if not snaps or snaps[-1]["t"] != T:
        snap(T)
    return RunResult(ens, counts, n_events, n_warn, snaps)


simulate = run


def write_ndjson(records, fh):
    for rec in records:
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def poisson_check(counts, nu, T, k=3.0):
    """Mean jump count against ``nu T``: ``(mean, stderr, pass)`` with stderr ``sqrt(nu T / N)``."""
    counts = np.asarray(counts, dtype=float)
    mean = float(counts.mean())
    se = math.sqrt(nu * T / len(counts)) if nu > 0 else 0.0
    return mean, se, abs(mean - nu * T) <= k * se + 1e-12
