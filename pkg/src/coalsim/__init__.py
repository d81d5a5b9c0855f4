"""coalsim: a desk-scale laboratory for GPU memory-coalescing timing leakage.

Encrypts with table-based AES-128 while tracing every table access, turns
the traces into kernel timings through an abstract coalescing/MSHR cost
model, mounts the correlation key-recovery attack, and evaluates the
hardware (randomised coalescing widths, hierarchical MSHRs) and software
(table rotation) countermeasures with regression/SNR and sample-count
statistics.
"""

from . import aes, attack, campaign, coalescer, memsim, rotation, stats
from .attack import AttackConfig, AttackReport, CorrelationReport, SampleSet
from .campaign import CampaignConfig
from .coalescer import (
    DynamicPerLine,
    DynamicRandom,
    Fixed,
    FixedRandom,
    Transaction,
    WidthDistribution,
)
from .memsim import (
    HIERARCHICAL,
    PER_SM,
    MshrTopology,
    SimConfig,
    TimingParams,
    TimingSample,
)
from .rotation import RotationSchedule, RotationState

__version__ = "0.1.0"

__all__ = [
    "aes",
    "attack",
    "campaign",
    "coalescer",
    "memsim",
    "rotation",
    "stats",
    "AttackConfig",
    "AttackReport",
    "CorrelationReport",
    "SampleSet",
    "CampaignConfig",
    "Fixed",
    "FixedRandom",
    "DynamicPerLine",
    "DynamicRandom",
    "Transaction",
    "WidthDistribution",
    "MshrTopology",
    "PER_SM",
    "HIERARCHICAL",
    "SimConfig",
    "TimingParams",
    "TimingSample",
    "RotationSchedule",
    "RotationState",
    "__version__",
]
