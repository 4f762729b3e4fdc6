"""Link-level simulator for interference mitigation in uncoordinated
multi-carrier networks through partially overlapping tones.

The package splits into waveform-level machinery (prototype filters and
their cross-ambiguity), channel and network models, received-energy
decomposition, an offline Q-learning policy over quantized frequency
offsets, and a Monte Carlo experiment harness with a ``potsim`` CLI.
"""

from .errors import (PotsimError, ParameterError, ConfigError,
                     DegenerateFilterError, PolicyUnavailableError,
                     MissingArtifactError)
from .waveform import (GAUSSIAN, RRC, IOTA, FILTER_FAMILIES, LatticeConfig,
                       PrototypeFilter, make_gaussian, make_rrc, make_iota,
                       filter_factory, ambiguity, AmbiguityTable,
                       build_ambiguity_table, CrossAmbiguity)
from .channel import (ChannelModel, ChannelRealization, free_space_path_loss,
                      realize_channel, effective_gain)
from .network import (Link, NetworkScenario, generate_scenario, sample_point_near,
                      update_aggressor_count, entry_sequence, FoAssignment,
                      FixedAssignmentPolicy, COUNT_THRESHOLD_DB)
from .interference import (InterferenceProfile, decompose, sinr, sinr_linear,
                           capacity, sum_capacity, multiuser_efficiency,
                           outage, victim_energy_tables, ScenarioEnergies,
                           EnsembleEvaluator)
from .qlearning import (Hyperparams, QTable, q_update, reward, train,
                        greedy_policy)
from .experiments import (ExperimentConfig, run, export_ambiguity_surface,
                          generate_drop)

__version__ = "0.1.0"

__all__ = [
    "PotsimError", "ParameterError", "ConfigError", "DegenerateFilterError",
    "PolicyUnavailableError", "MissingArtifactError",
    "GAUSSIAN", "RRC", "IOTA", "FILTER_FAMILIES", "LatticeConfig",
    "PrototypeFilter", "make_gaussian", "make_rrc", "make_iota",
    "filter_factory", "ambiguity", "AmbiguityTable", "build_ambiguity_table",
    "CrossAmbiguity",
    "ChannelModel", "ChannelRealization", "free_space_path_loss",
    "realize_channel", "effective_gain",
    "Link", "NetworkScenario", "generate_scenario", "sample_point_near",
    "update_aggressor_count",
    "entry_sequence", "FoAssignment", "FixedAssignmentPolicy",
    "COUNT_THRESHOLD_DB",
    "InterferenceProfile", "decompose", "sinr", "sinr_linear", "capacity",
    "sum_capacity", "multiuser_efficiency", "outage", "victim_energy_tables",
    "ScenarioEnergies", "EnsembleEvaluator",
    "Hyperparams", "QTable", "q_update", "reward", "train", "greedy_policy",
    "ExperimentConfig", "run", "export_ambiguity_surface", "generate_drop",
    "__version__",
]
