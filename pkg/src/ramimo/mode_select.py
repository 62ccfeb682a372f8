"""Antenna mode selection for data transmission.

Two metrics are supported: ``"sum_rate"`` (precoder recomputed for every
candidate) and ``"eig_sum"`` (sum of eigenvalues of the Gram matrix of the
composed channel). Two searches: exhaustive enumeration of all ``L**N_T``
mode vectors and per-antenna coordinate ascent.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import numerics
from ._validation import check_modes, check_pool, check_positive_int
from .channel import compose_channel, compose_channels
from .exceptions import BudgetExceededError, ConfigError, InfeasibleError
from .precoding import bd_precoder, fixed_rf_precoder, rbd_precoder, sum_rate

METRICS = ("sum_rate", "eig_sum")
PRECODERS = ("rbd", "bd")


@dataclass(eq=False)
class ModeMetric:
    """Scoring function for mode vectors, bound to one candidate pool.

    ``n_calls`` counts the mode vectors scored so far.
    """

    kind: str
    pool: np.ndarray
    cfg: object
    noise_power: float = None
    f_rf: np.ndarray = None
    precoder: str = "rbd"
    n_calls: int = field(default=0, init=False)

    def __post_init__(self):
        if self.kind not in METRICS:
            raise ConfigError(f"unknown metric {self.kind!r}; expected one of {METRICS}")
        if self.precoder not in PRECODERS:
            raise ConfigError(f"unknown precoder {self.precoder!r}")
        self.pool = check_pool(self.pool, self.cfg)
        if self.noise_power is None:
            self.noise_power = self.cfg.noise_power
        if self.f_rf is None:
            self.f_rf = fixed_rf_precoder(self.cfg)

    def scores(self, modes_batch):
        """Scores of a batch ``(B, N_T)`` of mode vectors."""
        modes_batch = np.atleast_2d(modes_batch)
        self.n_calls += modes_batch.shape[0]
        h = compose_channels(self.pool, modes_batch)
        if self.kind == "eig_sum":
            gram = h @ np.conj(np.swapaxes(h, -1, -2))
            w, _ = numerics.hermitian_eig(gram)
            return w.sum(axis=-1)
        if self.precoder == "rbd":
            pre = rbd_precoder(h, self.f_rf, self.noise_power, self.cfg)
            return sum_rate(h, pre, self.noise_power, self.cfg)
        out = np.empty(h.shape[0])
        for b in range(h.shape[0]):
            try:
                pre = bd_precoder(h[b], self.f_rf, self.cfg)
            except InfeasibleError:
                out[b] = -np.inf
                continue
            out[b] = sum_rate(h[b], pre, self.noise_power, self.cfg)
        return out

    def __call__(self, modes):
        return float(self.scores(np.asarray(modes)[None, :])[0])


def evaluate_metric(metric, modes):
    """Score a single mode vector (0-based modes, length ``N_T``)."""
    check_modes(modes, metric.cfg.n_modes, metric.cfg.n_tx)
    return metric(modes)


@dataclass(eq=False)
class SearchResult:
    modes: np.ndarray
    score: float
    n_evaluations: int
    n_sweeps: int = 0
    trace: list = field(default_factory=list)


def exhaustive_mode_search(metric, budget=10**6, chunk=4096):
    """Globally best mode vector by enumeration.

    Ties go to the lexicographically smallest mode vector.

    Raises
    ------
    BudgetExceededError
        When ``L**N_T`` exceeds ``budget``.
    """
    n_modes, n_tx = metric.cfg.n_modes, metric.cfg.n_tx
    total = n_modes**n_tx
    if total > budget:
        raise BudgetExceededError(
            f"exhaustive search needs {n_modes}^{n_tx} = {total} evaluations (> budget {budget}); "
            "use heuristic_mode_search instead"
        )
    shape = (n_modes,) * n_tx
    best_score, best_index = -np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        batch = np.stack(np.unravel_index(idx, shape), axis=1)
        scores = metric.scores(batch)
        j = int(np.argmax(scores))
        if scores[j] > best_score:
            best_score, best_index = float(scores[j]), int(idx[j])
    modes = np.array(np.unravel_index(best_index, shape), dtype=np.intp)
    return SearchResult(modes=modes, score=best_score, n_evaluations=total)


def heuristic_mode_search(metric, max_sweeps=5, init=None):
    """Coordinate ascent over antennas, one antenna's mode at a time.

    Starts from all antennas in mode 0 unless ``init`` is given. Within a
    sweep each antenna takes the best of its ``L`` modes with all other
    antennas fixed at their latest values; the incumbent is kept on ties.
    Stops after a sweep with no change or after ``max_sweeps`` sweeps.
    """
    max_sweeps = check_positive_int(max_sweeps, "max_sweeps")
    n_modes, n_tx = metric.cfg.n_modes, metric.cfg.n_tx
    modes = np.zeros(n_tx, dtype=np.intp) if init is None else check_modes(init, n_modes, n_tx).copy()
    score = None
    trace = []
    sweeps = 0
    for sweep in range(1, max_sweeps + 1):
        sweeps = sweep
        changed = False
        for t in range(n_tx):
            cand = np.repeat(modes[None, :], n_modes, axis=0)
            cand[:, t] = np.arange(n_modes)
            scores = metric.scores(cand)
            best = int(np.argmax(scores))
            if scores[best] > scores[modes[t]]:
                modes[t] = best
                changed = True
            score = float(scores[modes[t]])
            trace.append((sweep, t, int(modes[t]), score))
        if not changed:
            break
    return SearchResult(modes=modes, score=score, n_evaluations=sweeps * n_tx * n_modes,
                        n_sweeps=sweeps, trace=trace)


def random_restart_search(metric, max_sweeps=5, n_restarts=0, seed=None):
    """Heuristic search from the all-zero start plus ``n_restarts`` random starts."""
    best = heuristic_mode_search(metric, max_sweeps)
    rng = np.random.default_rng(seed)
    evaluations = best.n_evaluations
    for _ in range(n_restarts):
        init = rng.integers(metric.cfg.n_modes, size=metric.cfg.n_tx)
        res = heuristic_mode_search(metric, max_sweeps, init=init)
        evaluations += res.n_evaluations
        if res.score > best.score:
            best = res
    best.n_evaluations = evaluations
    return best


def complexity_counters(result):
    """Number of metric evaluations spent by a completed search."""
    return result.n_evaluations


def write_trace_csv(result, fh):
    """Export a heuristic search trace as ``iteration, antenna, mode, score`` rows."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["iteration", "antenna", "mode", "score"])
    for sweep, antenna, mode, score in result.trace:
        writer.writerow([sweep, antenna, mode, repr(score)])


class ModeSelector(TransformerMixin, BaseEstimator):
    """Select per-antenna operating modes from a candidate pool.

    Parameters
    ----------
    config : SystemConfig
        System dimensions; ``config.snr_db`` sets the noise power used by the
        ``"sum_rate"`` metric.
    metric : {"sum_rate", "eig_sum"}
    search : {"heuristic", "exhaustive"}
    max_sweeps : int
        Sweep limit of the heuristic.
    budget : int
        Largest ``L**N_T`` the exhaustive search accepts.
    precoder : {"rbd", "bd"}
        Precoder used inside the ``"sum_rate"`` metric.
    n_restarts : int
        Extra random starting points for the heuristic.
    random_state : int or None

    Attributes
    ----------
    modes_ : ndarray of shape (N_T,)
    score_ : float
    n_evaluations_ : int
    n_sweeps_ : int
    trace_ : list of (sweep, antenna, mode, score)
    """

    def __init__(self, config=None, metric="sum_rate", search="heuristic", max_sweeps=5,
                 budget=10**6, precoder="rbd", n_restarts=0, random_state=None):
        self.config = config
        self.metric = metric
        self.search = search
        self.max_sweeps = max_sweeps
        self.budget = budget
        self.precoder = precoder
        self.n_restarts = n_restarts
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.config is None:
            raise ConfigError("ModeSelector needs a SystemConfig")
        metric = ModeMetric(self.metric, X, self.config, precoder=self.precoder)
        if self.search == "exhaustive":
            result = exhaustive_mode_search(metric, self.budget)
        elif self.search == "heuristic":
            result = random_restart_search(metric, self.max_sweeps, self.n_restarts,
                                           self.random_state)
        else:
            raise ConfigError(f"unknown search {self.search!r}")
        self.modes_ = result.modes
        self.score_ = result.score
        self.n_evaluations_ = result.n_evaluations
        self.n_sweeps_ = result.n_sweeps
        self.trace_ = result.trace
        return self

    def transform(self, X):
        """Compose the network channel of the selected modes from pool ``X``."""
        check_is_fitted(self, "modes_")
        return compose_channel(check_pool(X, self.config), self.modes_)
