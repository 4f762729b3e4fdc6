"""Received-energy decomposition and the link metrics built on it.

Every received burst at a victim splits into the desired symbol energy, the
self-interference of the victim's own lattice, and cross-link interference
from each aggressor at its frequency-offset difference, all through the
channel-convolved ambiguity coefficients. Symbols are unit-energy and
independent across positions and links, so energies add without cross terms.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParameterError
from .waveform import CrossAmbiguity, LatticeConfig


@dataclass(frozen=True)
class InterferenceProfile:
    """Energy split of one victim's received burst."""

    e_signal: float
    e_self: float
    noise_var: float
    per_aggressor: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.e_signal, self.e_self, self.noise_var) < 0:
            raise ParameterError("energies must be non-negative")
        if any(value < 0 for value in self.per_aggressor.values()):
            raise ParameterError("aggressor energies must be non-negative")

    @property
    def e_cci(self) -> float:
        return sum(self.per_aggressor.values())


def _relative_fo_index(aggressor, victim, fo_step: float) -> int:
    """Quantized FO difference between two links, validated against the grid."""
    qdiff = (aggressor.fo - victim.fo) / fo_step
    if abs(qdiff - round(qdiff)) > 1e-6:
        raise ConfigError("link FO difference is off the quantized grid")
    return int(round(qdiff))


def _relative_delay(aggressor, victim, tau0: float) -> float:
    return (aggressor.timing_offset - victim.timing_offset) % tau0


def decompose(victim, aggressors, realizations, cross_amb: CrossAmbiguity,
              noise_var: float) -> InterferenceProfile:
    """Split the victim's received energy into signal, self, and cross terms.

    realizations maps (transmitter_link_id, receiver_link_id) to a
    ChannelRealization; the victim's own channel sits under (victim, victim).
    Aggressor terms are evaluated at the pairwise FO difference and relative
    timing offset, summed over every lattice offset of the ambiguity block.
    """
    if noise_var < 0:
        raise ParameterError("noise variance must be non-negative")
    lattice = cross_amb.lattice
    own_key = (victim.link_id, victim.link_id)
    if own_key not in realizations:
        raise ConfigError(f"missing channel realization for {own_key}")
    own_power = np.abs(cross_amb.convolved_block(realizations[own_key], 0.0, 0)) ** 2
    center = lattice.num_symbols - 1
    e_signal = float(own_power[center, 0])
    e_self = float(own_power.sum() - e_signal)
    fo_step = lattice.nu0 / cross_amb.fo_quantum
    per_aggressor = {}
    for aggressor in aggressors:
        key = (aggressor.link_id, victim.link_id)
        if key not in realizations:
            raise ConfigError(f"missing channel realization for {key}")
        qdiff = _relative_fo_index(aggressor, victim, fo_step)
        rel_delay = _relative_delay(aggressor, victim, lattice.tau0)
        energy = cross_amb.cci_energy(realizations[key], rel_delay, qdiff)
        per_aggressor[aggressor.link_id] = energy
    return InterferenceProfile(e_signal=e_signal, e_self=max(e_self, 0.0),
                               noise_var=noise_var, per_aggressor=per_aggressor)


def victim_energy_tables(victim, aggressors, realizations,
                         cross_amb: CrossAmbiguity):
    """Signal and self energies plus per-aggressor CCI profiles for one victim.

    Returns (e_signal, e_self, profiles) where profiles maps each aggressor's
    link id to its energy at every signed FO difference, indexed qdiff + Q - 1.
    Slicing a profile at the realized FO difference reproduces ``decompose``
    for any assignment without touching the channel convolution again, which
    is what lets one drop serve several overlap modes.
    """
    lattice = cross_amb.lattice
    own_key = (victim.link_id, victim.link_id)
    if own_key not in realizations:
        raise ConfigError(f"missing channel realization for {own_key}")
    own_power = np.abs(cross_amb.convolved_block(realizations[own_key], 0.0, 0)) ** 2
    center = lattice.num_symbols - 1
    e_signal = float(own_power[center, 0])
    e_self = float(max(own_power.sum() - e_signal, 0.0))
    profiles = {}
    for aggressor in aggressors:
        key = (aggressor.link_id, victim.link_id)
        if key not in realizations:
            raise ConfigError(f"missing channel realization for {key}")
        rel_delay = _relative_delay(aggressor, victim, lattice.tau0)
        profiles[aggressor.link_id] = cross_amb.cci_energy_profile(
            realizations[key], rel_delay)
    return e_signal, e_self, profiles


def sinr(profile: InterferenceProfile) -> float:
    """Post-demodulation SINR in dB, with infinite sentinels at the edges."""
    denom = profile.e_self + profile.e_cci + profile.noise_var
    if profile.e_signal == 0:
        return -math.inf
    if denom == 0:
        return math.inf
    return 10.0 * math.log10(profile.e_signal / denom)


def sinr_linear(profile: InterferenceProfile) -> float:
    denom = profile.e_self + profile.e_cci + profile.noise_var
    if denom == 0:
        return math.inf if profile.e_signal > 0 else 0.0
    return profile.e_signal / denom


def capacity(profile: InterferenceProfile, lattice: LatticeConfig = None) -> float:
    """Spectral efficiency log2(1 + SINR) in bits/s/Hz.

    The lattice argument is accepted for callers that later want absolute
    rates; it does not change the per-symbol efficiency.
    """
    return math.log2(1.0 + sinr_linear(profile))


def sum_capacity(profiles) -> float:
    """Network sum capacity: the per-link capacities added over all links."""
    return sum(capacity(profile) for profile in profiles)


def multiuser_efficiency(profile: InterferenceProfile, a_peak: float,
                         g_u: float) -> float:
    """Asymptotic multiuser efficiency of the matched-filter receiver.

    eta = max(0, 1 - sqrt(E_SI + E_OI) / (G_u * A_peak)) squared, clamped to
    [0, 1]. Noise does not enter; only interference degrades the efficiency.
    """
    if a_peak < 0 or g_u < 0:
        raise ParameterError("gains must be non-negative")
    reference = g_u * a_peak
    if reference == 0:
        return 0.0
    ratio = math.sqrt(profile.e_self + profile.e_cci) / reference
    return max(0.0, 1.0 - ratio) ** 2


def outage(profile: InterferenceProfile, threshold_db: float = -6.0) -> bool:
    """True when the SINR falls strictly below the threshold."""
    return sinr(profile) < threshold_db


class ScenarioEnergies:
    """Precomputed energy tables for one scenario drop.

    Holds, for every ordered link pair, the cross-link interference energy at
    each quantized FO difference, plus per-link signal and self energies.
    Capacity then becomes a table lookup for any FO assignment, which is what
    policy training iterates on.
    """

    def __init__(self, scenario, realizations, cross_amb: CrossAmbiguity,
                 snr_db: float = None, noise_var: float = None):
        if (snr_db is None) == (noise_var is None):
            raise ConfigError("specify exactly one of snr_db or noise_var")
        self.cross_amb = cross_amb
        self.fo_quantum = cross_amb.fo_quantum
        links = list(scenario.links)
        self.link_ids = [link.link_id for link in links]
        count = len(links)
        lattice = cross_amb.lattice
        center = lattice.num_symbols - 1
        self.e_signal = np.zeros(count)
        self.e_self = np.zeros(count)
        window = 2 * self.fo_quantum - 1
        self.cci = np.zeros((count, count, window))
        for u, victim in enumerate(links):
            own = realizations[(victim.link_id, victim.link_id)]
            power = np.abs(cross_amb.convolved_block(own, 0.0, 0)) ** 2
            self.e_signal[u] = power[center, 0]
            self.e_self[u] = max(power.sum() - power[center, 0], 0.0)
            for i, source in enumerate(links):
                if i == u:
                    continue
                pair = realizations[(source.link_id, victim.link_id)]
                rel_delay = _relative_delay(source, victim, lattice.tau0)
                self.cci[i, u] = cross_amb.cci_energy_profile(pair, rel_delay)
        if snr_db is None:
            self.noise = np.full(count, float(noise_var))
        elif math.isinf(snr_db):
            self.noise = np.zeros(count)
        else:
            self.noise = self.e_signal / (10.0 ** (snr_db / 10.0))

    def _qdiff_index(self, fo_indices) -> np.ndarray:
        fo = np.asarray(fo_indices, dtype=int)
        if len(fo) != len(self.link_ids):
            raise ConfigError("one FO index per link is required")
        return fo[:, None] - fo[None, :] + self.fo_quantum - 1

    def interference_at(self, fo_indices) -> np.ndarray:
        """Total cross-link interference energy seen by each link."""
        idx = self._qdiff_index(fo_indices)
        gathered = np.take_along_axis(self.cci, idx[:, :, None], axis=2)[:, :, 0]
        return gathered.sum(axis=0)

    def capacities(self, fo_indices) -> np.ndarray:
        e_oi = self.interference_at(fo_indices)
        with np.errstate(divide="ignore"):
            ratio = self.e_signal / (self.e_self + e_oi + self.noise)
        return np.log2(1.0 + ratio)

    def sum_capacity(self, fo_indices) -> float:
        return float(self.capacities(fo_indices).sum())

    def profile_for(self, index: int, fo_indices) -> InterferenceProfile:
        """InterferenceProfile of one link, identical to ``decompose``."""
        idx = self._qdiff_index(fo_indices)
        per_aggressor = {self.link_ids[i]: float(self.cci[i, index, idx[i, index]])
                         for i in range(len(self.link_ids)) if i != index}
        return InterferenceProfile(e_signal=float(self.e_signal[index]),
                                   e_self=float(self.e_self[index]),
                                   noise_var=float(self.noise[index]),
                                   per_aggressor=per_aggressor)


class EnsembleEvaluator:
    """Mean sum-capacity over an ensemble of drops, as one callable table.

    Training treats the first link of every drop as the zero-FO victim and
    controls the remaining links, so states carry one FO index per aggressor.
    """

    def __init__(self, drops):
        if not drops:
            raise ConfigError("at least one drop is required")
        sizes = {len(d.link_ids) for d in drops}
        if len(sizes) != 1:
            raise ConfigError("all drops must have the same link count")
        if len({d.fo_quantum for d in drops}) != 1:
            raise ConfigError("all drops must share the FO quantum")
        self.drops = list(drops)
        self.num_aggressors = len(self.drops[0].link_ids) - 1
        self.fo_quantum = self.drops[0].fo_quantum
        # Stacked views over the ensemble keep one capacity query a single
        # vectorized gather, which is what makes training affordable.
        self._cci = np.stack([d.cci for d in drops])
        self._e_signal = np.stack([d.e_signal for d in drops])
        self._e_self = np.stack([d.e_self for d in drops])
        self._noise = np.stack([d.noise for d in drops])

    def mean_sum_capacity(self, state) -> float:
        if len(state) != self.num_aggressors:
            raise ConfigError("state length must equal the aggressor count")
        assignment = np.concatenate(([0], np.asarray(state, dtype=int)))
        idx = assignment[:, None] - assignment[None, :] + self.fo_quantum - 1
        gathered = np.take_along_axis(
            self._cci, idx[None, :, :, None], axis=3)[..., 0]
        e_oi = gathered.sum(axis=1)
        with np.errstate(divide="ignore"):
            ratio = self._e_signal / (self._e_self + e_oi + self._noise)
        return float(np.log2(1.0 + ratio).sum(axis=1).mean())
