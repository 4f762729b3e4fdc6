"""Monte Carlo experiment harness with plot-ready CSV/JSON output.

A run sweeps one grid (receive SNR or aggressor count), draws independent
victim-centric network drops at every grid point, replays the entry protocol
to obtain the learned FO assignment, and aggregates one metric per
(grid value, filter, overlap mode) series. Geometry and channel draws are
keyed by (seed, grid index, drop index) alone, so every filter and overlap
mode sees identical drops and reruns are byte-identical.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .channel import ChannelModel, realize_channel
from .errors import ConfigError, MissingArtifactError, ParameterError
from .interference import (InterferenceProfile, ScenarioEnergies, capacity,
                           multiuser_efficiency, outage, victim_energy_tables)
from .network import (Link, NetworkScenario, entry_sequence, sample_point_near)
from .qlearning import Hyperparams, QTable, train
from .waveform import (CrossAmbiguity, FILTER_FAMILIES, LatticeConfig,
                       filter_factory)

AMBIGUITY_SURFACE = "ambiguity_surface"
CAPACITY_VS_SNR = "capacity_vs_snr"
CAPACITY_VS_AGGRESSORS = "capacity_vs_aggressors"
ME_VS_AGGRESSORS = "me_vs_aggressors"
OUTAGE_VS_AGGRESSORS = "outage_vs_aggressors"
EXPERIMENTS = (AMBIGUITY_SURFACE, CAPACITY_VS_SNR, CAPACITY_VS_AGGRESSORS,
               ME_VS_AGGRESSORS, OUTAGE_VS_AGGRESSORS)

POT = "pot"
FULL_OVERLAP = "full_overlap"
OVERLAP_MODES = (POT, FULL_OVERLAP)

#: Metric emitted by each sweep experiment.
EXPERIMENT_METRICS = {
    CAPACITY_VS_SNR: "capacity",
    CAPACITY_VS_AGGRESSORS: "capacity",
    ME_VS_AGGRESSORS: "me",
    OUTAGE_VS_AGGRESSORS: "outage",
}

CSV_HEADER = "grid_value,filter,mode,metric,mean,ci95,drops"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run depends on, hashable into the outputs."""

    experiment: str
    filters: tuple = ("gaussian", "rrc", "iota")
    filter_param: float = 0.2
    channel: str = "awgn"
    num_drops: int = 200
    snr_grid: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    aggressor_grid: tuple = (1, 2, 5, 10, 20, 50)
    num_aggressors: int = 10
    snr_db: float = 10.0
    num_subcarriers: int = 12
    num_symbols: int = 12
    bandwidth: float = 200e3
    carrier_freq: float = 800e6
    lattice_density: float = 1.0
    sample_rate: int = 16
    outage_threshold_db: float = -6.0
    seed: int = 0
    overlap_mode: str = "both"
    area_side: float = 1000.0
    max_link_range: float = 100.0
    interference_radius: float = 300.0
    fo_quantum: int = 8
    qtable_path: str = ""
    train_if_missing: bool = False
    train_overrides: dict = field(default_factory=dict)
    surface_extent: float = 3.0
    surface_resolution: int = 61

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        object.__setattr__(self, "filters",
                           tuple(str(f).lower() for f in self.filters))
        if not self.filters:
            raise ConfigError("at least one filter family is required")
        for family in self.filters:
            if family not in FILTER_FAMILIES:
                raise ConfigError(f"unknown filter family {family!r}")
        object.__setattr__(self, "channel", str(self.channel).lower())
        if self.channel not in ("awgn", "epa"):
            raise ConfigError(f"unknown channel kind {self.channel!r}")
        if self.overlap_mode not in OVERLAP_MODES + ("both",):
            raise ConfigError(f"unknown overlap mode {self.overlap_mode!r}")
        if self.num_drops < 1:
            raise ConfigError("num_drops must be at least 1")
        object.__setattr__(self, "snr_grid",
                           tuple(float(v) for v in self.snr_grid))
        object.__setattr__(self, "aggressor_grid",
                           tuple(int(v) for v in self.aggressor_grid))
        for grid, name in ((self.snr_grid, "snr_grid"),
                           (self.aggressor_grid, "aggressor_grid")):
            if not grid:
                raise ConfigError(f"{name} must be non-empty")
            if list(grid) != sorted(grid):
                raise ConfigError(f"{name} must be sorted ascending")
        if min(self.aggressor_grid) < 1:
            raise ConfigError("aggressor counts must be at least 1")
        if self.filter_param <= 0:
            raise ConfigError("filter_param must be positive")
        if self.num_aggressors < 1:
            raise ConfigError("num_aggressors must be at least 1")
        if min(self.area_side, self.max_link_range,
               self.interference_radius) <= 0:
            raise ConfigError("geometry lengths must be positive")
        if self.fo_quantum < 2:
            raise ConfigError("fo_quantum must be at least 2")
        if self.surface_resolution < 3 or self.surface_extent <= 0:
            raise ConfigError("surface grid must have extent > 0, >= 3 points")

    @property
    def modes(self) -> tuple:
        if self.overlap_mode == "both":
            return OVERLAP_MODES
        return (self.overlap_mode,)

    @property
    def lattice(self) -> LatticeConfig:
        return LatticeConfig.for_bandwidth(self.bandwidth, self.num_subcarriers,
                                           self.num_symbols,
                                           density=self.lattice_density)

    @property
    def channel_model(self) -> ChannelModel:
        return ChannelModel.of_kind(self.channel, self.carrier_freq)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["filters"] = list(self.filters)
        data["snr_grid"] = list(self.snr_grid)
        data["aggressor_grid"] = list(self.aggressor_grid)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise ConfigError("config must name an experiment")
        coerced = dict(data)
        if "snr_grid" in coerced:
            coerced["snr_grid"] = tuple(float(v) for v in coerced["snr_grid"])
        for key in ("filters", "aggressor_grid"):
            if key in coerced:
                coerced[key] = tuple(coerced[key])
        try:
            return cls(**coerced)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def generate_drop(config: ExperimentConfig, num_aggressors: int,
                  rng: np.random.Generator) -> NetworkScenario:
    """One victim-centric drop: the victim enters first, aggressors follow.

    The victim transmit point is uniform on the area and its receive point
    within link range; every aggressor transmit point lands inside the
    interference radius around the victim receive point, so the aggressor
    count is controlled rather than an accident of density.
    """
    lattice = config.lattice
    tau0 = lattice.tau0
    victim_tp = tuple(rng.uniform(0.0, config.area_side, size=2))
    victim_rp = sample_point_near(victim_tp, config.max_link_range,
                                  config.area_side, rng)
    links = [Link(link_id=0, tp_position=victim_tp, rp_position=victim_rp,
                  entry_rank=1, timing_offset=float(rng.uniform(0.0, tau0)))]
    for j in range(num_aggressors):
        tp = sample_point_near(victim_rp, config.interference_radius,
                               config.area_side, rng)
        rp = sample_point_near(tp, config.max_link_range, config.area_side, rng)
        links.append(Link(link_id=j + 1, tp_position=tp, rp_position=rp,
                          entry_rank=j + 2,
                          timing_offset=float(rng.uniform(0.0, tau0))))
    return NetworkScenario(links=links, area_side=config.area_side,
                           max_link_range=config.max_link_range,
                           lattice=lattice, fo_quantum=config.fo_quantum)


def realize_victim_channels(scenario: NetworkScenario, model: ChannelModel,
                            rng: np.random.Generator) -> dict:
    """Channel realizations into the victim receiver, keyed (tx id, victim id).

    Tap draws are ordered by link id so the realization set is a pure
    function of the stream, independent of filter or overlap mode.
    """
    victim = scenario.links[0]
    realizations = {}
    for link in scenario.links:
        if link.link_id == victim.link_id:
            distance = victim.length
        else:
            distance = math.dist(link.tp_position, victim.rp_position)
        key = (link.link_id, victim.link_id)
        realizations[key] = realize_channel(model, distance, rng, link_id=key)
    return realizations


def realize_all_channels(scenario: NetworkScenario, model: ChannelModel,
                         rng: np.random.Generator) -> dict:
    """Realizations for every ordered link pair, for sum-capacity training."""
    realizations = {}
    for rx in scenario.links:
        for tx in scenario.links:
            if tx.link_id == rx.link_id:
                distance = rx.length
            else:
                distance = math.dist(tx.tp_position, rx.rp_position)
            key = (tx.link_id, rx.link_id)
            realizations[key] = realize_channel(model, distance, rng,
                                                link_id=key)
    return realizations


def scenario_family(config: ExperimentConfig, cross_amb: CrossAmbiguity):
    """Drop generator handed to the policy trainer.

    Training drops reuse the experiment geometry and channel statistics and
    score assignments by network sum capacity at the configured receive SNR.
    """
    model = config.channel_model

    def build(num_links: int, rng: np.random.Generator) -> ScenarioEnergies:
        scenario = generate_drop(config, num_links - 1, rng)
        realizations = realize_all_channels(scenario, model, rng)
        return ScenarioEnergies(scenario, realizations, cross_amb,
                                snr_db=config.snr_db)

    return build


def _pot_assignment(scenario: NetworkScenario, policy) -> dict:
    """FO index per link id after replaying the entry protocol."""
    entry_sequence(scenario, policy)
    return {link.link_id: link.fo_index for link in scenario.links}


def _metric_value(metric: str, profile: InterferenceProfile,
                  threshold_db: float) -> float:
    if metric == "capacity":
        return capacity(profile)
    if metric == "me":
        return multiuser_efficiency(profile, 1.0, math.sqrt(profile.e_signal))
    if metric == "outage":
        return float(outage(profile, threshold_db))
    raise ConfigError(f"unknown metric {metric!r}")


def _mean_ci(values) -> tuple:
    data = np.asarray(values, dtype=float)
    mean = float(data.mean())
    if data.size < 2:
        return mean, 0.0
    half = 1.96 * float(data.std(ddof=1)) / math.sqrt(data.size)
    return mean, half


def _policy_path(config: ExperimentConfig, out_dir: Path) -> Path:
    path = Path(config.qtable_path) if config.qtable_path else out_dir / "qtable.npz"
    if path.suffix != ".npz":
        path = path.with_name(path.name + ".npz")
    return path


def _train_hyperparams(config: ExperimentConfig) -> Hyperparams:
    try:
        return Hyperparams(**config.train_overrides)
    except TypeError as exc:
        raise ConfigError(f"invalid train_overrides: {exc}") from exc


def required_s_max(config: ExperimentConfig) -> int:
    if config.experiment == CAPACITY_VS_SNR:
        return config.num_aggressors
    return max(config.aggressor_grid)


def load_or_train_policy(config: ExperimentConfig, out_dir: Path):
    """Fetch the FO policy, training and persisting it when allowed.

    Returns (table, path, trained_now). Raises MissingArtifactError when the
    artifact is absent and training on demand is disabled.
    """
    path = _policy_path(config, out_dir)
    if path.exists():
        table = QTable.load(path)
        if table.fo_quantum != config.fo_quantum:
            raise ConfigError("Q-table artifact uses a different FO quantum")
        return table, path, False
    if not config.train_if_missing:
        raise MissingArtifactError(f"no Q-table artifact at {path}")
    tx = filter_factory(config.filters[0], config.filter_param,
                        sample_rate=config.sample_rate,
                        density=config.lattice_density)
    cross_amb = CrossAmbiguity(tx, tx, config.lattice,
                               fo_quantum=config.fo_quantum)
    table = train(scenario_family(config, cross_amb), required_s_max(config),
                  _train_hyperparams(config), rng_seed=config.seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.save(path)
    return table, path, True


def _sweep(config: ExperimentConfig, policy) -> list:
    """All CSV rows for a sweep experiment, in deterministic order."""
    metric = EXPERIMENT_METRICS[config.experiment]
    if config.experiment == CAPACITY_VS_SNR:
        grid = config.snr_grid
    else:
        grid = tuple(float(v) for v in config.aggressor_grid)
    model = config.channel_model
    lattice = config.lattice
    pulses = {family: filter_factory(family, config.filter_param,
                                     sample_rate=config.sample_rate,
                                     density=config.lattice_density)
              for family in config.filters}
    evaluators = {family: CrossAmbiguity(pulse, pulse, lattice,
                                         fo_quantum=config.fo_quantum)
                  for family, pulse in pulses.items()}
    samples = {}
    for g_idx, grid_value in enumerate(grid):
        if config.experiment == CAPACITY_VS_SNR:
            num_aggressors, snr_db = config.num_aggressors, grid_value
        else:
            num_aggressors, snr_db = int(grid_value), config.snr_db
        snr_lin = math.inf if math.isinf(snr_db) else 10.0 ** (snr_db / 10.0)
        for drop in range(config.num_drops):
            geometry_rng = np.random.default_rng([config.seed, g_idx, drop, 0])
            scenario = generate_drop(config, num_aggressors, geometry_rng)
            channel_rng = np.random.default_rng([config.seed, g_idx, drop, 1])
            realizations = realize_victim_channels(scenario, model, channel_rng)
            assignments = {FULL_OVERLAP: {link.link_id: 0
                                          for link in scenario.links}}
            if POT in config.modes:
                assignments[POT] = _pot_assignment(scenario, policy)
            victim, aggressors = scenario.links[0], scenario.links[1:]
            for family in config.filters:
                e_signal, e_self, profiles = victim_energy_tables(
                    victim, aggressors, realizations, evaluators[family])
                noise_var = 0.0 if math.isinf(snr_lin) else e_signal / snr_lin
                for mode in config.modes:
                    fo = assignments[mode]
                    per_aggressor = {
                        link.link_id: float(profiles[link.link_id][
                            fo[link.link_id] - fo[victim.link_id]
                            + config.fo_quantum - 1])
                        for link in aggressors}
                    profile = InterferenceProfile(
                        e_signal=e_signal, e_self=e_self, noise_var=noise_var,
                        per_aggressor=per_aggressor)
                    value = _metric_value(metric, profile,
                                          config.outage_threshold_db)
                    samples.setdefault((grid_value, family, mode),
                                       []).append(value)
    rows = []
    for grid_value in grid:
        for family in config.filters:
            for mode in config.modes:
                mean, ci95 = _mean_ci(samples[(grid_value, family, mode)])
                rows.append((grid_value, family, mode, metric, mean, ci95,
                             config.num_drops))
    return rows


def _fmt(value) -> str:
    return format(float(value), ".10g")


def write_results_csv(path: Path, rows, config_hash: str) -> bytes:
    lines = [f"# config_hash={config_hash}", CSV_HEADER]
    for grid_value, family, mode, metric, mean, ci95, drops in rows:
        lines.append(",".join([_fmt(grid_value), family, mode, metric,
                               _fmt(mean), _fmt(ci95), str(int(drops))]))
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    path.write_bytes(payload)
    return payload


def export_ambiguity_surface(pulse, grid_resolution: int = 61,
                             extent: float = 3.0, density: float = 1.0):
    """|A| of a filter against itself on a centered (tau, nu) grid.

    Offsets are in lattice units: tau in tau0, nu in nu0. Returns
    (tau_grid, nu_grid, magnitude[len(tau), len(nu)]).
    """
    if grid_resolution < 3 or extent <= 0:
        raise ParameterError("surface grid must have extent > 0, >= 3 points")
    tau_grid = np.linspace(-extent, extent, grid_resolution)
    nu_grid = np.linspace(-extent, extent, grid_resolution)
    rate = pulse.sample_rate
    shifted = pulse.resample_shifted(tau_grid)
    phases = np.exp(2j * np.pi * np.outer(pulse.time_grid, nu_grid * density))
    magnitude = np.abs((shifted * pulse.samples[None, :] / rate) @ phases)
    return tau_grid, nu_grid, magnitude


def write_surface_csv(path: Path, tau_grid, nu_grid, magnitude,
                      note: str) -> bytes:
    lines = [f"# {note}",
             ",".join(["tau_over_tau0\\nu_over_nu0"]
                      + [_fmt(nu) for nu in nu_grid])]
    for tau, row in zip(tau_grid, magnitude):
        lines.append(",".join([_fmt(tau)] + [_fmt(v) for v in row]))
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    path.write_bytes(payload)
    return payload


def _surface_outputs(config: ExperimentConfig, out_dir: Path) -> dict:
    outputs = {}
    for family in config.filters:
        pulse = filter_factory(family, config.filter_param,
                               sample_rate=config.sample_rate,
                               density=config.lattice_density)
        tau_grid, nu_grid, magnitude = export_ambiguity_surface(
            pulse, config.surface_resolution, config.surface_extent,
            density=config.lattice_density)
        name = f"surface_{family}.csv"
        note = (f"config_hash={config.config_hash()} filter={family} "
                f"param={_fmt(config.filter_param)}")
        payload = write_surface_csv(out_dir / name, tau_grid, nu_grid,
                                    magnitude, note)
        outputs[name] = hashlib.sha256(payload).hexdigest()
    return outputs


def run(config: ExperimentConfig, out_dir) -> dict:
    """Execute one experiment and persist results.csv plus summary.json.

    Returns the summary dict; the summary's ``trained_now`` and
    ``qtable_converged`` fields let callers distinguish a clean run from one
    that had to train a policy that did not converge.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_hash = config.config_hash()
    summary = {
        "config": config.to_dict(),
        "config_hash": config_hash,
        "seed": config.seed,
        "outputs": {},
        "qtable": None,
        "warnings": [],
    }
    if config.experiment == AMBIGUITY_SURFACE:
        summary["outputs"] = _surface_outputs(config, out_dir)
    else:
        policy = None
        if POT in config.modes:
            table, path, trained_now = load_or_train_policy(config, out_dir)
            not_converged = sorted(count for count in table.per_count
                                   if not table.converged.get(count, False))
            summary["qtable"] = {
                "path": str(path),
                "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
                "trained_now": trained_now,
                "not_converged_counts": not_converged,
                "fallback_events": table.fallback_events,
            }
            if not_converged:
                summary["warnings"].append(
                    f"q-table not converged for counts {not_converged}")
            policy = table
        rows = _sweep(config, policy)
        payload = write_results_csv(out_dir / "results.csv", rows, config_hash)
        summary["outputs"]["results.csv"] = hashlib.sha256(payload).hexdigest()
        if summary["qtable"] is not None:
            summary["qtable"]["fallback_events_during_run"] = (
                policy.fallback_events - summary["qtable"]["fallback_events"])
    summary_text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    (out_dir / "summary.json").write_text(summary_text, encoding="utf-8")
    return summary
