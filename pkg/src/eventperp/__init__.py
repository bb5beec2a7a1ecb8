"""Deterministic engine and replay simulator for event-linked perpetual
variants: contract-level underlyings from per-leg probability series, full
lifecycle replay (funding, margin, halts, rolls, settlement), and risk
reports."""

from .constructors import (
    IndexSeries,
    basket_index,
    conditional_index,
    entropy_index,
    entropy_value,
    funding_target,
    liquidity_index,
    negrisk_conditional,
    rebalance_weights,
    spread_index,
    variance_index,
)
from .indexing import ContractIndex, build_contract_index
from .model import (
    Basket,
    Conditional,
    ContractState,
    Entropy,
    FundingOnly,
    LegSeries,
    Liquidity,
    NegRiskGroup,
    Position,
    ProbabilityPoint,
    ResolutionRecord,
    Rolling,
    Side,
    Spread,
    TraderOrder,
    Variance,
    VariantSpec,
    align_series,
    validate_spec,
)
from .replay import MarkOverlay, ReplayConfig, ReplayReport, replay
from .risk import (
    FundingParams,
    LeverageSchedule,
    MarginSchedule,
    RiskConfig,
    accrue_funding,
    check_liquidation,
    funding_rate,
    maintenance_margin,
    max_leverage,
)
from .scheduling import HaltWindow, RollPlan, halt_windows, schedule_roll
from .settlement import SettlementKind, SettlementRecord, twap
from .synth import generate_bridge_path, generate_negrisk_group
from .taxonomy import print_taxonomy, taxonomy_data

__version__ = "0.1.0"

__all__ = [
    "Basket",
    "Conditional",
    "ContractIndex",
    "ContractState",
    "Entropy",
    "FundingOnly",
    "FundingParams",
    "HaltWindow",
    "IndexSeries",
    "LegSeries",
    "LeverageSchedule",
    "Liquidity",
    "MarginSchedule",
    "MarkOverlay",
    "NegRiskGroup",
    "Position",
    "ProbabilityPoint",
    "ReplayConfig",
    "ReplayReport",
    "ResolutionRecord",
    "RiskConfig",
    "RollPlan",
    "Rolling",
    "SettlementKind",
    "SettlementRecord",
    "Side",
    "Spread",
    "TraderOrder",
    "Variance",
    "VariantSpec",
    "accrue_funding",
    "align_series",
    "basket_index",
    "build_contract_index",
    "check_liquidation",
    "conditional_index",
    "entropy_index",
    "entropy_value",
    "funding_rate",
    "funding_target",
    "generate_bridge_path",
    "generate_negrisk_group",
    "halt_windows",
    "liquidity_index",
    "maintenance_margin",
    "max_leverage",
    "negrisk_conditional",
    "print_taxonomy",
    "rebalance_weights",
    "replay",
    "schedule_roll",
    "spread_index",
    "taxonomy_data",
    "twap",
    "validate_spec",
    "variance_index",
]
