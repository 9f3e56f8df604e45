//! Lower bounds on (fused) Gromov–Wasserstein distances, their sliced
//! approximations, and small reference solvers.

mod classic;
mod gw;
mod pairwise;
mod slicing;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::{OuterSolver, TransportPlan};
use crate::quantile::{midpoint_rule, nonequispaced_midpoint_rule, QuadratureRule};
use crate::sliced::DirectionRule;
use crate::spaces::{MmSpace, StructuredSpace};

pub use classic::{
    eccentricities, flb, ftlb, ftlb_embedding, fused_cost_matrix, local_distance_matrix, slb, tlb,
};
pub use gw::{
    fgw_bruteforce, fgw_entropic, fgw_objective, gw_bruteforce, gw_objective, FgwInit, FgwOptions,
    BRUTEFORCE_MAX_N,
};
pub use pairwise::{pairwise_matrix, PairwiseMatrix};
pub use slicing::{sftlb, sftlb_with, stlb, stlb_with};

/// Quadrature used by the sliced bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuadratureSpec {
    /// Equispaced midpoint rule with `r` knots.
    Midpoint { r: usize },
    /// Midpoint rule with `r = n` for uniform equal-size pairs, otherwise the
    /// merged-breakpoint rule of the two weight vectors.
    MatchSize,
    Custom(QuadratureRule),
}

impl QuadratureSpec {
    /// The rule for a pair of spaces with weights `wa` and `wb`.
    pub fn resolve(&self, wa: &[f64], wb: &[f64]) -> Result<QuadratureRule> {
        match self {
            QuadratureSpec::Midpoint { r } => midpoint_rule(*r),
            QuadratureSpec::Custom(rule) => Ok(rule.clone()),
            QuadratureSpec::MatchSize => {
                let n = wa.len();
                let u = 1.0 / n as f64;
                let uniform =
                    n == wb.len() && wa.iter().chain(wb).all(|&w| (w - u).abs() <= 1e-14);
                if uniform {
                    midpoint_rule(n)
                } else {
                    nonequispaced_midpoint_rule(wa, wb)
                }
            }
        }
    }

    /// True when the rule does not depend on the pair.
    pub fn is_fixed(&self) -> bool {
        !matches!(self, QuadratureSpec::MatchSize)
    }
}

/// Parameters shared by all bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub p: f64,
    pub alpha: f64,
    pub rule: QuadratureSpec,
    pub num_projections: usize,
    pub seed: u64,
    pub direction_rule: DirectionRule,
    pub outer_solver: OuterSolver,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            p: 2.0,
            alpha: 0.5,
            rule: QuadratureSpec::Midpoint { r: 10 },
            num_projections: 50,
            seed: 0,
            direction_rule: DirectionRule::MonteCarlo,
            outer_solver: OuterSolver::Exact,
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        check_order(self.p)?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }

    fn validate_sliced(&self) -> Result<()> {
        self.validate()?;
        if self.p != 2.0 {
            return Err(Error::UnsupportedOrder(self.p));
        }
        if self.num_projections == 0 {
            return Err(Error::Domain("need at least one projection".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_order(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("order p = {p} must be >= 1")));
    }
    Ok(())
}

/// Provenance attached to every computed distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultMeta {
    pub bound: &'static str,
    pub solver: &'static str,
    pub seed: Option<u64>,
    pub rng: Option<&'static str>,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
}

/// A distance value with its `p`-th power and, where one exists, the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub value: f64,
    pub value_power_p: f64,
    pub p: f64,
    pub plan: Option<TransportPlan>,
    /// Monte Carlo standard error of `value_power_p` for sliced bounds.
    pub std_error: Option<f64>,
    pub meta: ResultMeta,
}

impl DistanceResult {
    pub(crate) fn from_power(power: f64, p: f64, meta: ResultMeta) -> Self {
        // rounding in solvers can leave tiny negative residues
        let power = power.max(0.0);
        DistanceResult {
            value: if p == 2.0 { power.sqrt() } else { power.powf(1.0 / p) },
            value_power_p: power,
            p,
            plan: None,
            std_error: None,
            meta,
        }
    }

    pub(crate) fn with_plan(mut self, plan: TransportPlan) -> Self {
        self.meta.solver = plan.solver;
        self.meta.iterations = plan.iterations;
        self.meta.converged = plan.converged;
        self.plan = Some(plan);
        self
    }
}

pub(crate) fn meta(bound: &'static str, solver: &'static str, start: Instant) -> ResultMeta {
    ResultMeta {
        bound,
        solver,
        seed: None,
        rng: None,
        iterations: 0,
        converged: true,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Every distance the crate can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    Flb,
    Slb,
    Tlb,
    Ftlb,
    Stlb,
    Sftlb,
    GwBrute,
    FgwEntropic,
}

impl Bound {
    pub const ALL: [Bound; 8] = [
        Bound::Flb,
        Bound::Slb,
        Bound::Tlb,
        Bound::Ftlb,
        Bound::Stlb,
        Bound::Sftlb,
        Bound::GwBrute,
        Bound::FgwEntropic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Bound::Flb => "flb",
            Bound::Slb => "slb",
            Bound::Tlb => "tlb",
            Bound::Ftlb => "ftlb",
            Bound::Stlb => "stlb",
            Bound::Sftlb => "sftlb",
            Bound::GwBrute => "gw-brute",
            Bound::FgwEntropic => "fgw-entropic",
        }
    }

    /// Whether node features enter the value.
    pub fn uses_features(self) -> bool {
        matches!(self, Bound::Ftlb | Bound::Sftlb | Bound::FgwEntropic)
    }

    pub fn is_sliced(self) -> bool {
        matches!(self, Bound::Stlb | Bound::Sftlb)
    }

    /// Evaluates the bound; structure-only bounds ignore the features.
    pub fn evaluate(
        self,
        x: &StructuredSpace,
        y: &StructuredSpace,
        cfg: &BoundConfig,
    ) -> Result<DistanceResult> {
        match self {
            Bound::Flb => flb(x.base(), y.base(), cfg.p),
            Bound::Slb => slb(x.base(), y.base(), cfg.p),
            Bound::Tlb => tlb(x.base(), y.base(), cfg),
            Bound::Ftlb => ftlb(x, y, cfg),
            Bound::Stlb => stlb(x.base(), y.base(), cfg),
            Bound::Sftlb => sftlb(x, y, cfg),
            Bound::GwBrute => gw_bruteforce(x.base(), y.base(), cfg.p),
            Bound::FgwEntropic => fgw_entropic(x, y, cfg, &FgwOptions::default()),
        }
    }

    /// Structure-only evaluation on plain metric measure spaces.
    pub fn evaluate_mm(self, x: &MmSpace, y: &MmSpace, cfg: &BoundConfig) -> Result<DistanceResult> {
        self.evaluate(
            &StructuredSpace::unlabeled(x.clone()),
            &StructuredSpace::unlabeled(y.clone()),
            cfg,
        )
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Bound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Bound::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Domain(format!("unknown bound `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_names_round_trip() {
        for b in Bound::ALL {
            assert_eq!(b.name().parse::<Bound>().unwrap(), b);
        }
        assert!("wl".parse::<Bound>().is_err());
    }

    #[test]
    fn match_size_rule() {
        let u = [0.25; 4];
        let r = QuadratureSpec::MatchSize.resolve(&u, &u).unwrap();
        assert_eq!(r.knots(), &[0.125, 0.375, 0.625, 0.875]);
        let r = QuadratureSpec::MatchSize
            .resolve(&[0.5, 0.5], &[1.0 / 3.0; 3])
            .unwrap();
        assert_eq!(r.len(), 4);
    }

    #[test]
    fn sliced_config_rejects_other_orders() {
        let cfg = BoundConfig {
            p: 1.0,
            ..BoundConfig::default()
        };
        assert_eq!(cfg.validate_sliced(), Err(Error::UnsupportedOrder(1.0)));
    }
}
