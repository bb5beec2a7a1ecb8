"""Run configuration: a strict key-value mapping covering the variant spec,
risk schedules, and replay options.

Unknown keys are a hard error at every level: the rule surface is wide
enough that silent misconfiguration is the main operational risk. Every key
is documented in the README with its type, unit, and default.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

from .errors import ConfigError
from .model import (
    Basket,
    BasketHaltPolicy,
    Conditional,
    Entropy,
    FloorAction,
    FundingOnly,
    FundingTarget,
    Liquidity,
    LiquidityMeasure,
    OrderingRule,
    RebalanceRule,
    RollBasisRule,
    RollMechanism,
    Rolling,
    SettlementCadence,
    Side,
    Spread,
    TerminationRule,
    TraderOrder,
    VarianceEstimator,
    VarianceNormalization,
    Variance,
    VariantSpec,
    WeightRule,
)
from .replay import MarkOverlay, ReplayConfig, ReportGranularity, SyntheticTraders
from .risk import (
    FundingCorrection,
    FundingParams,
    LeverageSchedule,
    MarginAggregation,
    MarginSchedule,
    RiskConfig,
)


def _check_keys(section: Mapping[str, Any], allowed: set[str], path: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key(s) at {path}: {', '.join(unknown)}")


def _require(section: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in section:
        raise ConfigError(f"missing required config key {path}.{key}")
    return section[key]


# ---------------------------------------------------------------------------
# Variant section
# ---------------------------------------------------------------------------


def _parse_termination_rule(raw: Mapping[str, Any], path: str) -> TerminationRule:
    _check_keys(raw, {"kind", "value", "window_ms"}, path)
    kind = _require(raw, "kind", path)
    if kind == "fixed":
        return TerminationRule.fixed(float(_require(raw, "value", path)))
    if kind == "twap":
        return TerminationRule.twap(int(_require(raw, "window_ms", path)))
    if kind == "last-tick":
        return TerminationRule.last_tick()
    raise ConfigError(f"{path}.kind: unknown termination rule {kind!r}")


def _parse_mechanism(raw: Mapping[str, Any], path: str) -> RollMechanism:
    _check_keys(raw, {"kind", "at_ms", "start_ms", "end_ms", "volume_target"}, path)
    kind = _require(raw, "kind", path)
    if kind == "cliff":
        return RollMechanism("cliff", at_ms=int(_require(raw, "at_ms", path)))
    if kind == "linear":
        return RollMechanism(
            "linear",
            start_ms=int(_require(raw, "start_ms", path)),
            end_ms=int(_require(raw, "end_ms", path)),
        )
    if kind == "volume-weighted":
        return RollMechanism(
            "volume-weighted",
            start_ms=int(_require(raw, "start_ms", path)),
            volume_target=float(_require(raw, "volume_target", path)),
        )
    raise ConfigError(f"{path}.kind: unknown roll mechanism {kind!r}")


def parse_variant(raw: Mapping[str, Any], path: str = "variant") -> VariantSpec:
    kind = _require(raw, "kind", path)
    try:
        if kind == "conditional":
            _check_keys(
                raw,
                {"kind", "leg_a", "leg_b", "joint_leg", "denom_floor", "floor_action",
                 "termination_rule", "ordering_rule"},
                path,
            )
            term = raw.get("termination_rule")
            return Conditional(
                leg_a=str(_require(raw, "leg_a", path)),
                leg_b=str(_require(raw, "leg_b", path)),
                joint_leg=raw.get("joint_leg"),
                denom_floor=float(raw.get("denom_floor", 0.01)),
                floor_action=FloorAction(raw.get("floor_action", "clip-to-last")),
                termination_rule=(
                    _parse_termination_rule(term, f"{path}.termination_rule")
                    if term is not None
                    else TerminationRule.twap()
                ),
                ordering_rule=OrderingRule(raw.get("ordering_rule", "joint-at-B")),
            )
        if kind == "spread":
            _check_keys(raw, {"kind", "leg_a", "leg_b"}, path)
            return Spread(
                leg_a=str(_require(raw, "leg_a", path)),
                leg_b=str(_require(raw, "leg_b", path)),
            )
        if kind == "basket":
            _check_keys(
                raw,
                {"kind", "legs", "weight_rule", "weights", "snapshot_ms",
                 "rebalance_rule", "halt_policy"},
                path,
            )
            weights = raw.get("weights")
            return Basket(
                legs=tuple(str(x) for x in _require(raw, "legs", path)),
                weight_rule=WeightRule(raw.get("weight_rule", "equal")),
                weights=tuple(float(w) for w in weights) if weights is not None else None,
                snapshot_ms=raw.get("snapshot_ms"),
                rebalance_rule=RebalanceRule(raw.get("rebalance_rule", "none")),
                halt_policy=BasketHaltPolicy(raw.get("halt_policy", "closest-leg")),
            )
        if kind == "variance":
            _check_keys(
                raw, {"kind", "leg", "estimator", "window_ms", "tick_ms", "normalization"}, path
            )
            return Variance(
                leg=str(_require(raw, "leg", path)),
                estimator=VarianceEstimator(raw.get("estimator", "level")),
                window_ms=int(raw.get("window_ms", 6 * 3_600_000)),
                tick_ms=int(raw.get("tick_ms", 60_000)),
                normalization=VarianceNormalization(raw.get("normalization", "per-window")),
            )
        if kind == "entropy":
            _check_keys(raw, {"kind", "leg"}, path)
            return Entropy(leg=str(_require(raw, "leg", path)))
        if kind == "liquidity":
            _check_keys(raw, {"kind", "measure", "member_legs", "aggregate"}, path)
            return Liquidity(
                measure=LiquidityMeasure(_require(raw, "measure", path)),
                member_legs=tuple(str(x) for x in _require(raw, "member_legs", path)),
                aggregate=raw.get("aggregate", "mean"),
            )
        if kind == "rolling":
            _check_keys(raw, {"kind", "constituents", "mechanisms", "basis_rule"}, path)
            mechanisms = _require(raw, "mechanisms", path)
            return Rolling(
                constituents=tuple(str(x) for x in _require(raw, "constituents", path)),
                mechanisms=tuple(
                    _parse_mechanism(m, f"{path}.mechanisms[{i}]")
                    for i, m in enumerate(mechanisms)
                ),
                basis_rule=RollBasisRule(raw.get("basis_rule", "re-anchor")),
            )
        if kind == "funding-only":
            _check_keys(
                raw,
                {"kind", "target", "leg_a", "leg_b", "clip_lo", "clip_hi",
                 "cadence", "cadence_interval_ms"},
                path,
            )
            return FundingOnly(
                target=FundingTarget(_require(raw, "target", path)),
                leg_a=str(_require(raw, "leg_a", path)),
                leg_b=raw.get("leg_b"),
                clip=(float(raw.get("clip_lo", -0.05)), float(raw.get("clip_hi", 0.05))),
                cadence=SettlementCadence(raw.get("cadence", "continuous")),
                cadence_interval_ms=raw.get("cadence_interval_ms"),
            )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: unknown variant {kind!r}")


def variant_to_dict(spec: VariantSpec) -> dict[str, Any]:
    if isinstance(spec, Conditional):
        term: dict[str, Any] = {"kind": spec.termination_rule.kind}
        if spec.termination_rule.value is not None:
            term["value"] = spec.termination_rule.value
        if spec.termination_rule.window_ms is not None:
            term["window_ms"] = spec.termination_rule.window_ms
        return {
            "kind": "conditional",
            "leg_a": spec.leg_a,
            "leg_b": spec.leg_b,
            "joint_leg": spec.joint_leg,
            "denom_floor": spec.denom_floor,
            "floor_action": spec.floor_action.value,
            "termination_rule": term,
            "ordering_rule": spec.ordering_rule.value,
        }
    if isinstance(spec, Spread):
        return {"kind": "spread", "leg_a": spec.leg_a, "leg_b": spec.leg_b}
    if isinstance(spec, Basket):
        return {
            "kind": "basket",
            "legs": list(spec.legs),
            "weight_rule": spec.weight_rule.value,
            "weights": list(spec.weights) if spec.weights is not None else None,
            "snapshot_ms": spec.snapshot_ms,
            "rebalance_rule": spec.rebalance_rule.value,
            "halt_policy": spec.halt_policy.value,
        }
    if isinstance(spec, Variance):
        return {
            "kind": "variance",
            "leg": spec.leg,
            "estimator": spec.estimator.value,
            "window_ms": spec.window_ms,
            "tick_ms": spec.tick_ms,
            "normalization": spec.normalization.value,
        }
    if isinstance(spec, Entropy):
        return {"kind": "entropy", "leg": spec.leg}
    if isinstance(spec, Liquidity):
        return {
            "kind": "liquidity",
            "measure": spec.measure.value,
            "member_legs": list(spec.member_legs),
            "aggregate": spec.aggregate,
        }
    if isinstance(spec, Rolling):
        mechs = []
        for m in spec.mechanisms:
            d: dict[str, Any] = {"kind": m.kind}
            if m.at_ms is not None:
                d["at_ms"] = m.at_ms
            if m.start_ms is not None:
                d["start_ms"] = m.start_ms
            if m.end_ms is not None:
                d["end_ms"] = m.end_ms
            if m.volume_target is not None:
                d["volume_target"] = m.volume_target
            mechs.append(d)
        return {
            "kind": "rolling",
            "constituents": list(spec.constituents),
            "mechanisms": mechs,
            "basis_rule": spec.basis_rule.value,
        }
    if isinstance(spec, FundingOnly):
        return {
            "kind": "funding-only",
            "target": spec.target.value,
            "leg_a": spec.leg_a,
            "leg_b": spec.leg_b,
            "clip_lo": spec.clip[0],
            "clip_hi": spec.clip[1],
            "cadence": spec.cadence.value,
            "cadence_interval_ms": spec.cadence_interval_ms,
        }
    raise ConfigError(f"cannot serialize spec {type(spec)}")


# ---------------------------------------------------------------------------
# Risk section
# ---------------------------------------------------------------------------


def parse_risk(raw: Mapping[str, Any], path: str = "risk") -> RiskConfig:
    _check_keys(
        raw, {"margin", "funding", "leverage", "liquidation_slippage", "spread_simultaneous"}, path
    )
    margin_raw = raw.get("margin", {})
    _check_keys(
        margin_raw,
        {"base_rate", "jump_coeff", "proximity_horizon_ms", "aggregation"},
        f"{path}.margin",
    )
    funding_raw = raw.get("funding", {})
    _check_keys(
        funding_raw,
        {"sensitivity", "correction", "variance_floor_eps", "clip_lo", "clip_hi", "interval_ms"},
        f"{path}.funding",
    )
    leverage_raw = raw.get("leverage", {})
    _check_keys(leverage_raw, {"base", "floor", "ramp_ms"}, f"{path}.leverage")
    try:
        margin = MarginSchedule(
            base_rate=float(margin_raw.get("base_rate", 0.05)),
            jump_coeff=float(margin_raw.get("jump_coeff", 1.0)),
            proximity_horizon_ms=int(margin_raw.get("proximity_horizon_ms", 86_400_000)),
            aggregation=MarginAggregation(margin_raw.get("aggregation", "sum")),
        )
        funding = FundingParams(
            sensitivity=float(funding_raw.get("sensitivity", 1.0)),
            correction=FundingCorrection(funding_raw.get("correction", "none")),
            variance_floor_eps=float(funding_raw.get("variance_floor_eps", 1e-4)),
            clip=(float(funding_raw.get("clip_lo", -0.05)), float(funding_raw.get("clip_hi", 0.05))),
            interval_ms=int(funding_raw.get("interval_ms", 3_600_000)),
        )
        leverage = LeverageSchedule(
            base=float(leverage_raw.get("base", 10.0)),
            floor=float(leverage_raw.get("floor", 2.0)),
            ramp_ms=int(leverage_raw.get("ramp_ms", 7 * 86_400_000)),
        )
        return RiskConfig(
            margin=margin,
            funding=funding,
            leverage=leverage,
            liquidation_slippage=float(raw.get("liquidation_slippage", 0.0)),
            spread_simultaneous=raw.get("spread_simultaneous"),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def risk_to_dict(risk: RiskConfig) -> dict[str, Any]:
    return {
        "margin": {
            "base_rate": risk.margin.base_rate,
            "jump_coeff": risk.margin.jump_coeff,
            "proximity_horizon_ms": risk.margin.proximity_horizon_ms,
            "aggregation": risk.margin.aggregation.value,
        },
        "funding": {
            "sensitivity": risk.funding.sensitivity,
            "correction": risk.funding.correction.value,
            "variance_floor_eps": risk.funding.variance_floor_eps,
            "clip_lo": risk.funding.clip[0],
            "clip_hi": risk.funding.clip[1],
            "interval_ms": risk.funding.interval_ms,
        },
        "leverage": {
            "base": risk.leverage.base,
            "floor": risk.leverage.floor,
            "ramp_ms": risk.leverage.ramp_ms,
        },
        "liquidation_slippage": risk.liquidation_slippage,
        "spread_simultaneous": risk.spread_simultaneous,
    }


# ---------------------------------------------------------------------------
# Replay section
# ---------------------------------------------------------------------------


def _parse_order(raw: Mapping[str, Any], path: str) -> TraderOrder:
    _check_keys(raw, {"time_ms", "trader_id", "side", "notional", "leverage"}, path)
    try:
        return TraderOrder(
            time_ms=int(_require(raw, "time_ms", path)),
            trader_id=str(_require(raw, "trader_id", path)),
            side=Side(_require(raw, "side", path)),
            notional=float(_require(raw, "notional", path)),
            leverage=float(_require(raw, "leverage", path)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_replay(
    raw: Mapping[str, Any], risk: RiskConfig, path: str = "replay"
) -> ReplayConfig:
    _check_keys(
        raw,
        {"grid_ms", "seed", "halt_enabled", "zone_ms", "settle_lag_ms",
         "report_granularity", "mark_overlay", "traders", "synthetic_traders"},
        path,
    )
    overlay_raw = raw.get("mark_overlay", {})
    _check_keys(overlay_raw, {"kind", "scale", "mean_reversion"}, f"{path}.mark_overlay")
    synth_raw = raw.get("synthetic_traders")
    if synth_raw is not None:
        _check_keys(
            synth_raw,
            {"count", "notional", "leverage", "long_fraction", "start_ms", "end_ms"},
            f"{path}.synthetic_traders",
        )
    try:
        overlay = MarkOverlay(
            kind=overlay_raw.get("kind", "zero"),
            scale=float(overlay_raw.get("scale", 0.01)),
            mean_reversion=float(overlay_raw.get("mean_reversion", 0.05)),
        )
        synthetic = None
        if synth_raw is not None:
            synthetic = SyntheticTraders(
                count=int(_require(synth_raw, "count", f"{path}.synthetic_traders")),
                notional=float(synth_raw.get("notional", 100.0)),
                leverage=float(synth_raw.get("leverage", 2.0)),
                long_fraction=float(synth_raw.get("long_fraction", 0.5)),
                start_ms=int(synth_raw.get("start_ms", 0)),
                end_ms=int(synth_raw.get("end_ms", 0)),
            )
        return ReplayConfig(
            grid_ms=int(raw.get("grid_ms", 1000)),
            seed=int(raw.get("seed", 0)),
            trader_script=tuple(
                _parse_order(o, f"{path}.traders[{i}]")
                for i, o in enumerate(raw.get("traders", []))
            ),
            synthetic_traders=synthetic,
            risk=risk,
            halt_enabled=bool(raw.get("halt_enabled", True)),
            zone_ms=int(raw.get("zone_ms", 86_400_000)),
            settle_lag_ms=int(raw.get("settle_lag_ms", 0)),
            report_granularity=ReportGranularity(raw.get("report_granularity", "tick")),
            mark_overlay=overlay,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def replay_to_dict(config: ReplayConfig) -> dict[str, Any]:
    out: dict[str, Any] = {
        "grid_ms": config.grid_ms,
        "seed": config.seed,
        "halt_enabled": config.halt_enabled,
        "zone_ms": config.zone_ms,
        "settle_lag_ms": config.settle_lag_ms,
        "report_granularity": config.report_granularity.value,
        "mark_overlay": {
            "kind": config.mark_overlay.kind,
            "scale": config.mark_overlay.scale,
            "mean_reversion": config.mark_overlay.mean_reversion,
        },
        "traders": [
            {
                "time_ms": o.time_ms,
                "trader_id": o.trader_id,
                "side": o.side.value,
                "notional": o.notional,
                "leverage": o.leverage,
            }
            for o in config.trader_script
        ],
    }
    if config.synthetic_traders is not None:
        s = config.synthetic_traders
        out["synthetic_traders"] = {
            "count": s.count,
            "notional": s.notional,
            "leverage": s.leverage,
            "long_fraction": s.long_fraction,
            "start_ms": s.start_ms,
            "end_ms": s.end_ms,
        }
    return out


# ---------------------------------------------------------------------------
# Whole files
# ---------------------------------------------------------------------------


def parse_run_config(raw: Mapping[str, Any]) -> tuple[VariantSpec, RiskConfig, ReplayConfig]:
    """Parse a full run configuration mapping; unknown keys are fatal."""
    _check_keys(raw, {"variant", "risk", "replay"}, "<root>")
    if "variant" not in raw:
        raise ConfigError("missing required config section 'variant'")
    spec = parse_variant(raw["variant"])
    risk = parse_risk(raw.get("risk", {}))
    rep = parse_replay(raw.get("replay", {}), risk)
    return spec, risk, rep


def run_config_to_dict(
    spec: VariantSpec, risk: RiskConfig, rep: ReplayConfig
) -> dict[str, Any]:
    return {
        "variant": variant_to_dict(spec),
        "risk": risk_to_dict(risk),
        "replay": replay_to_dict(rep),
    }


def dumps_config(spec: VariantSpec, risk: RiskConfig, rep: ReplayConfig) -> str:
    return json.dumps(run_config_to_dict(spec, risk, rep), indent=2, sort_keys=True) + "\n"


def loads_config(text: str) -> tuple[VariantSpec, RiskConfig, ReplayConfig]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return parse_run_config(raw)
