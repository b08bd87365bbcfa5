"""
Monte-Carlo harness for decentralized covariance adaptation.

Users take turns updating their transmit covariance (and rate) as a best
response to the current state of everyone else, with either a single-user
decoder or opportunistic multiuser detection at their receiver, until no
rate moves by more than ``rate_tol``. Channel draws use a counter-based
generator keyed on ``(seed, realization, j, k)`` so any realization can be
reproduced in isolation and parallel runs are bit-identical to serial ones.
"""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .linalg import logdet, quad
from .multi_user import find_optimal_decodable_set, solve_p4
from .rates import TwoUserContext, omd_rate, subsets
from .two_user import solve_p1
from .waterfilling import sud_best_response

__all__ = [
    "Sweep",
    "ScenarioConfig",
    "RunRecord",
    "ScenarioRow",
    "PRESETS",
    "preset",
    "draw_channels",
    "run_protocol",
    "run_scenario",
    "simulate",
]

DECODERS = ("SUD", "OMD")
SWEEP_PARAMETERS = ("rho", "P")


@dataclass(frozen=True)
class Sweep:
    """A one-parameter grid.

    ``rho`` sets every cross-link variance to the grid value; ``P`` scales
    the configured per-user powers by it.
    """

    parameter: str
    values: Tuple[float, ...]

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"unknown sweep parameter {self.parameter!r}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ConfigError("sweep needs at least one value")
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise ConfigError("sweep values must be finite and non-negative")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ScenarioConfig:
    """Inputs of a simulation.

    ``channel_variances[j][k]`` is the per-entry variance of ``H_jk``, the
    channel from transmitter ``j`` to receiver ``k`` (0-based here, users
    are reported 1-based). ``antennas[k]`` is ``(N_k, M_k)``.
    """

    K: int
    antennas: Tuple[Tuple[int, int], ...]
    powers: Tuple[float, ...]
    channel_variances: Tuple[Tuple[float, ...], ...]
    decoders: Tuple[str, ...]
    realizations: int = 500
    seed: int = 0
    sweep: Optional[Sweep] = None
    max_rounds: int = 100
    rate_tol: float = 1e-6
    name: str = "custom"

    def __post_init__(self):
        K = self.K
        if not isinstance(K, int) or K < 1:
            raise ConfigError("K must be a positive integer")
        antennas = tuple(tuple(int(x) for x in a) for a in self.antennas)
        powers = tuple(float(p) for p in self.powers)
        var = tuple(tuple(float(v) for v in row) for row in self.channel_variances)
        decoders = tuple(str(d).upper() for d in self.decoders)
        if len(antennas) != K or any(len(a) != 2 or min(a) < 1 for a in antennas):
            raise ConfigError("antennas must list (N_k, M_k) >= 1 for every user")
        if len(powers) != K or any(p < 0 or not math.isfinite(p) for p in powers):
            raise ConfigError("powers must be K finite non-negative values")
        if len(var) != K or any(len(row) != K for row in var):
            raise ConfigError("channel_variances must be K x K")
        if any(v < 0 or not math.isfinite(v) for row in var for v in row):
            raise ConfigError("channel variances must be finite and non-negative")
        if len(decoders) != K or any(d not in DECODERS for d in decoders):
            raise ConfigError(f"decoders must be K entries from {DECODERS}")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be an unsigned integer")
        if self.max_rounds < 1 or self.rate_tol <= 0:
            raise ConfigError("max_rounds must be >= 1 and rate_tol > 0")
        sweep = self.sweep
        if isinstance(sweep, dict):
            sweep = Sweep(sweep["parameter"], tuple(sweep["values"]))
        object.__setattr__(self, "antennas", antennas)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "channel_variances", var)
        object.__setattr__(self, "decoders", decoders)
        object.__setattr__(self, "sweep", sweep)

    @property
    def sweep_values(self):
        return self.sweep.values if self.sweep else (float("nan"),)

    def at(self, value):
        """``(variances, powers)`` at one sweep point."""
        var = np.array(self.channel_variances)
        powers = np.array(self.powers)
        if self.sweep is not None and self.sweep.parameter == "rho":
            off = ~np.eye(self.K, dtype=bool)
            var[off] = value
        elif self.sweep is not None and self.sweep.parameter == "P":
            powers = powers * value
        return var, powers

    def replace(self, **changes):
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return ScenarioConfig(**data)

    def to_dict(self):
        data = asdict(self)
        if self.sweep is not None:
            data["sweep"] = {"parameter": self.sweep.parameter, "values": list(self.sweep.values)}
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            data = dict(data)
            if data.get("sweep") is not None:
                data["sweep"] = Sweep(data["sweep"]["parameter"], tuple(data["sweep"]["values"]))
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"invalid scenario config: {exc}") from exc


@dataclass
class RunRecord:
    sweep_value: float
    rates: Tuple[float, ...]
    sum_rate: float
    rounds_to_converge: int
    converged: bool
    covariances: Tuple[np.ndarray, ...] = field(default=(), repr=False)
    trace: List[tuple] = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class ScenarioRow:
    sweep_value: float
    mean_rates: Tuple[float, ...]
    rate_se: Tuple[float, ...]
    mean_sum_rate: float
    sum_rate_se: float
    converged_frac: float
    n: int


def _fig2():
    return ScenarioConfig(
        K=2,
        antennas=((2, 2), (2, 2)),
        powers=(100.0, 100.0),
        channel_variances=((1.0, 1.0), (1.0, 1.0)),
        decoders=("OMD", "OMD"),
        sweep=Sweep("rho", tuple(round(0.1 * i, 1) for i in range(1, 31))),
        name="fig2",
    )


def _fig3(case):
    # user 1 is the primary (PU, P_1 = 10P), user 2 the secondary (SU, P_2 = P)
    return ScenarioConfig(
        K=2,
        antennas=((2, 2), (2, 2)),
        powers=(10.0, 1.0),
        channel_variances=((1.0, 10.0), (1.0, 10.0)),
        decoders=("SUD", "SUD") if case == 1 else ("SUD", "OMD"),
        sweep=Sweep("P", (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)),
        name=f"fig3-case{case}",
    )


PRESETS = {
    "fig2": _fig2,
    "fig3-case1": lambda: _fig3(1),
    "fig3-case2": lambda: _fig3(2),
}


def preset(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _unit_draw(seed, realization, j, k, shape):
    key = np.random.SeedSequence([seed, realization, j, k])
    rng = np.random.Generator(np.random.Philox(key))
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)


def draw_channels(cfg, realization, variances=None):
    """All channel matrices of one realization.

    Returns a dict ``(j, k) -> H_jk`` (1-based users), each ``M_k x N_j``
    with i.i.d. CSCG entries of variance ``variances[j-1][k-1]``. The
    underlying unit-variance draws depend only on
    ``(seed, realization, j, k)``, so sweeping the variances reuses them.
    """
    var = np.asarray(cfg.channel_variances if variances is None else variances, dtype=float)
    channels = {}
    for j in range(1, cfg.K + 1):
        N_j = cfg.antennas[j - 1][0]
        for k in range(1, cfg.K + 1):
            M_k = cfg.antennas[k - 1][1]
            Z = _unit_draw(cfg.seed, realization, j, k, (M_k, N_j))
            channels[(j, k)] = math.sqrt(var[j - 1, k - 1]) * Z
    return channels


class _Network:
    """Mutable protocol state: covariances and rates of all users."""

    def __init__(self, cfg, channels, powers):
        self.K = cfg.K
        self.decoders = cfg.decoders
        self.H = channels
        self.P = [float(p) for p in powers]
        self.S = {
            k: np.eye(cfg.antennas[k - 1][0], dtype=complex) * (self.P[k - 1] / cfg.antennas[k - 1][0])
            for k in range(1, self.K + 1)
        }
        self.r = {}
        self.last = {}

    def others(self, k):
        return [j for j in range(1, self.K + 1) if j != k]

    def interference(self, k, among=None):
        M = self.H[(k, k)].shape[0]
        Q = np.zeros((M, M), dtype=complex)
        for j in self.others(k) if among is None else among:
            Q = Q + quad(self.H[(j, k)], self.S[j])
        return Q

    def sud_rate(self, k):
        A = quad(self.H[(k, k)], self.S[k])
        Q = self.interference(k)
        return logdet(A + Q) - logdet(Q)

    def omd_rate(self, k):
        """Rate of user k at its current covariance, decoding what it can."""
        rates = {j: self.r.get(j, math.inf) for j in self.others(k)}
        if self.K == 2:
            (j,) = self.others(k)
            if math.isinf(rates[j]):
                return self.sud_rate(k)
            ctx = TwoUserContext(self.H[(k, k)], self.H[(j, k)], self.S[j], rates[j], self.P[k - 1])
            return omd_rate(ctx, self.S[k])[0]
        links = {j: self.H[(j, k)] for j in self.others(k)}
        ds = find_optimal_decodable_set(k, links, {j: self.S[j] for j in links}, rates)
        Phi = np.eye(self.H[(k, k)].shape[0]) + self.interference(k, ds.complement)
        A = quad(self.H[(k, k)], self.S[k])
        ld_phi = logdet(Phi, shifted=False)
        best = math.inf
        for J in [()] + list(subsets(ds.members)):
            B = Phi + self.interference(k, J)
            best = min(best, logdet(B + A, shifted=False) - ld_phi - sum(rates[i] for i in J))
        return best

    def current_rate(self, k):
        return self.omd_rate(k) if self.decoders[k - 1] == "OMD" else self.sud_rate(k)

    def best_response(self, k):
        """Update user k in place; returns (new rate, SUD best-response rate)."""
        P = self.P[k - 1]
        H_kk = self.H[(k, k)]
        if self.decoders[k - 1] == "OMD" and self.K == 2:
            (j,) = self.others(k)
            ctx = TwoUserContext(H_kk, self.H[(j, k)], self.S[j], self.r[j], P)
            sol = solve_p1(ctx, warm_start=self.last.get(k))
            self.last[k] = sol
            self.S[k], self.r[k] = sol.covariance, sol.rate
            return sol.rate, sol.sud_rate
        sud = sud_best_response(H_kk, self.interference(k), P)
        if self.decoders[k - 1] == "SUD":
            S, rate = sud.covariance, sud.rate
        else:
            links = {j: self.H[(j, k)] for j in self.others(k)}
            links[k] = H_kk
            others = self.others(k)
            sol = solve_p4(
                k, links, {j: self.S[j] for j in others}, {j: self.r[j] for j in others},
                P, with_order=False,
            )
            S, rate = sol.covariance, sol.rate
        self.S[k] = S
        self.r[k] = rate
        return rate, sud.rate


def run_protocol(cfg, channels, powers=None, sweep_value=float("nan"), trace=False):
    """Round-robin best-response adaptation until the rates settle.

    Users start isotropic at full power, ``S_k = (P_k / N_k) I``; initial
    rates are evaluated in index order, users whose rate is not yet known
    being treated as undecodable. Each round updates users 1..K in turn.

    Parameters
    ----------
    cfg : ScenarioConfig
    channels : dict
        Output of :func:`draw_channels`.
    powers : sequence of float, optional
        Per-user power budgets; ``cfg.powers`` by default.
    sweep_value : float
        Recorded in the returned :class:`RunRecord`.
    trace : bool
        Record ``(round, user, rate, sud_best_response_rate)`` for every
        update.
    """
    net = _Network(cfg, channels, cfg.powers if powers is None else powers)
    for k in range(1, cfg.K + 1):
        net.r[k] = net.current_rate(k)

    log = []
    converged = False
    rounds = 0
    for rounds in range(1, cfg.max_rounds + 1):
        before = dict(net.r)
        for k in range(1, cfg.K + 1):
            rate, sud_rate = net.best_response(k)
            if trace:
                log.append((rounds, k, rate, sud_rate))
        if max(abs(net.r[k] - before[k]) for k in net.r) <= cfg.rate_tol:
            converged = True
            break

    rates = tuple(float(net.r[k]) for k in range(1, cfg.K + 1))
    return RunRecord(
        sweep_value=float(sweep_value),
        rates=rates,
        sum_rate=float(sum(rates)),
        rounds_to_converge=rounds,
        converged=converged,
        covariances=tuple(net.S[k] for k in range(1, cfg.K + 1)),
        trace=log,
    )


def _run_item(item):
    cfg, value, realization = item
    variances, powers = cfg.at(value)
    channels = draw_channels(cfg, realization, variances)
    rec = run_protocol(cfg, channels, powers, sweep_value=value)
    rec.covariances = ()
    return rec


def _aggregate(value, records):
    n = len(records)
    rates = np.array([r.rates for r in records])
    sums = np.array([r.sum_rate for r in records])
    ddof = 1 if n > 1 else 0
    return ScenarioRow(
        sweep_value=value,
        mean_rates=tuple(rates.mean(axis=0).tolist()),
        rate_se=tuple((rates.std(axis=0, ddof=ddof) / math.sqrt(n)).tolist()),
        mean_sum_rate=float(sums.mean()),
        sum_rate_se=float(sums.std(ddof=ddof) / math.sqrt(n)),
        converged_frac=float(np.mean([r.converged for r in records])),
        n=n,
    )


def run_scenario(cfg, workers=1, return_records=False):
    """Average converged rates over realizations at every sweep point.

    Realizations are independent work items; with ``workers > 1`` they run
    in a process pool. Results are reduced in (sweep value, realization)
    order, so the output does not depend on ``workers``.

    Returns
    -------
    list of ScenarioRow
        One per sweep value (a single row when there is no sweep). With
        ``return_records`` a ``(rows, records)`` pair is returned, records
        grouped per sweep value.
    """
    items = [(cfg, v, r) for v in cfg.sweep_values for r in range(cfg.realizations)]
    if workers > 1:
        chunk = max(1, len(items) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_item, items, chunksize=chunk))
    else:
        records = [_run_item(it) for it in items]
    n = cfg.realizations
    grouped = [records[i * n:(i + 1) * n] for i in range(len(cfg.sweep_values))]
    rows = [_aggregate(v, recs) for v, recs in zip(cfg.sweep_values, grouped)]
    return (rows, grouped) if return_records else rows


def _fmt(x):
    return format(float(x), ".12g")


def _csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    return buf.getvalue()


def fig2_csv(cfg, workers=1, bits=False):
    """Sum rate with both users on SUD versus both on OMD, per rho."""
    scale = 1.0 / math.log(2.0) if bits else 1.0
    sud = run_scenario(cfg.replace(decoders=("SUD",) * cfg.K), workers)
    omd = run_scenario(cfg.replace(decoders=("OMD",) * cfg.K), workers)
    rows = [
        (a.sweep_value, a.mean_sum_rate * scale, b.mean_sum_rate * scale,
         a.converged_frac, b.converged_frac)
        for a, b in zip(sud, omd)
    ]
    return _csv(["rho", "sum_rate_sud", "sum_rate_omd", "converged_frac_sud", "converged_frac_omd"], rows)


def fig3_csv(cfgs, workers=1, bits=False):
    """Primary (user 1) and secondary (user 2) rates per P for each case."""
    scale = 1.0 / math.log(2.0) if bits else 1.0
    rows = []
    for cfg in cfgs:
        label = cfg.name.rsplit("case", 1)[-1] if "case" in cfg.name else cfg.name
        for row in run_scenario(cfg, workers):
            rows.append((row.sweep_value, row.mean_rates[0] * scale, row.mean_rates[1] * scale, label))
    return _csv(["P", "rate_pu", "rate_su", "case"], rows)


def generic_csv(cfg, workers=1, bits=False):
    scale = 1.0 / math.log(2.0) if bits else 1.0
    name = cfg.sweep.parameter if cfg.sweep else "sweep"
    header = [name] + [f"rate_{k}" for k in range(1, cfg.K + 1)] + ["sum_rate", "converged_frac"]
    rows = [
        (r.sweep_value, *[x * scale for x in r.mean_rates], r.mean_sum_rate * scale, r.converged_frac)
        for r in run_scenario(cfg, workers)
    ]
    return _csv(header, rows)


def simulate(scenario, realizations=None, seed=None, workers=1, bits=False, sweep_values=None):
    """Run a preset name or a :class:`ScenarioConfig` and return CSV text.

    ``fig2`` compares all-SUD with all-OMD; ``fig3`` runs both cognitive
    radio cases; ``fig3-case1`` / ``fig3-case2`` run one case; any other
    config produces per-user mean rates.
    """
    overrides = {}
    if realizations is not None:
        overrides["realizations"] = int(realizations)
    if seed is not None:
        overrides["seed"] = int(seed)

    def prepare(cfg):
        if sweep_values is not None:
            param = cfg.sweep.parameter if cfg.sweep else "rho"
            overrides["sweep"] = Sweep(param, tuple(sweep_values))
        return cfg.replace(**overrides) if overrides else cfg

    if isinstance(scenario, str):
        if scenario == "fig2":
            return fig2_csv(prepare(preset("fig2")), workers, bits)
        if scenario == "fig3":
            return fig3_csv([prepare(preset("fig3-case1")), prepare(preset("fig3-case2"))], workers, bits)
        cfg = prepare(preset(scenario))
        if scenario.startswith("fig3"):
            return fig3_csv([cfg], workers, bits)
        return generic_csv(cfg, workers, bits)
    return generic_csv(prepare(scenario), workers, bits)
