"""Full-duplex MIMO SWIPT link simulator.

One device powers the other over the air while simultaneously receiving
its information signal on the same band.  The package provides the channel
model, antenna allocation, relaxation-based precoding, a hybrid
actor-critic / double-Q solver and a reproducible Monte-Carlo harness.
"""

from .allocation import (
    SubsystemConfig,
    allocate_antennas,
    config_from_eh_sets,
    enumerate_configs,
    exhaustive_search,
    parse_config,
    serialize_config,
)
from .channel import (
    ChannelParams,
    ChannelRealization,
    SubsystemChannels,
    export_channel,
    import_channel,
    noise_covariance,
    noise_power,
    partition,
    sample_channel,
)
from .metrics import (
    CovariancePair,
    PowerBudget,
    clamp_harvest,
    effective_sinr,
    harvested_power,
    info_rate,
    time_switching_rate,
    weighted_objective,
)
from .numerics import (
    ContractError,
    DomainError,
    NumericalFailureError,
    cholesky_lower,
    hermitian_logdet,
    psd_project,
)
from .precoding import (
    ScaSettings,
    ScaTrace,
    equal_power,
    linearized_rate,
    sca_precoding,
    solve_inner,
)

__version__ = "0.1.0"
