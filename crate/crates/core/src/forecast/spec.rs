//! Serializable model descriptions used by configuration files.

use serde::{Deserialize, Serialize};

use crate::automl::{AutoEts, AutoEtsConfig, AutoSarima, AutoSarimaConfig};
use crate::ensemble::{Combiner, ForecasterEnsemble};
use crate::error::{Error, Result};
use crate::forecast::ets::{Ets, EtsSpec};
use crate::forecast::sarima::{Sarima, SarimaOrders};
use crate::forecast::tree::{EnsembleKind, TreeConfig, TreeForecaster};
use crate::forecast::var::Var;
use crate::forecast::{Forecaster, Transformed};
use crate::transform::{TransformChain, TransformKind};

fn default_order() -> [usize; 3] {
    [1, 0, 0]
}

fn yes() -> bool {
    true
}

fn default_max_order() -> usize {
    5
}

/// Model kind and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForecasterSpec {
    /// Fixed-order model; `seasonal_order` is `[P, D, Q, m]`.
    Arima {
        #[serde(default = "default_order")]
        order: [usize; 3],
        #[serde(default)]
        seasonal_order: Option<[usize; 4]>,
        #[serde(default = "yes")]
        intercept: bool,
    },
    AutoSarima(AutoSarimaConfig),
    Ets(EtsSpec),
    AutoEts(AutoEtsConfig),
    Var {
        #[serde(default = "default_max_order")]
        max_order: usize,
    },
    Gb(TreeConfig),
    Rf(TreeConfig),
    Ensemble {
        members: Vec<ForecasterConfig>,
        #[serde(default)]
        combiner: Combiner,
    },
}

/// A model plus the target it predicts and the transforms applied first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterConfig {
    #[serde(flatten)]
    pub model: ForecasterSpec,
    #[serde(default)]
    pub target_index: usize,
    #[serde(default)]
    pub transform: Vec<TransformKind>,
    /// Display name; defaults to the model kind.
    #[serde(default)]
    pub name: Option<String>,
}

impl ForecasterConfig {
    pub fn new(model: ForecasterSpec) -> Self {
        Self {
            model,
            target_index: 0,
            transform: Vec::new(),
            name: None,
        }
    }

    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.model {
            ForecasterSpec::Arima { .. } => "arima",
            ForecasterSpec::AutoSarima(_) => "auto-sarima",
            ForecasterSpec::Ets(_) => "ets",
            ForecasterSpec::AutoEts(_) => "auto-ets",
            ForecasterSpec::Var { .. } => "var",
            ForecasterSpec::Gb(_) => "gb",
            ForecasterSpec::Rf(_) => "rf",
            ForecasterSpec::Ensemble { .. } => "ensemble",
        }
        .to_string()
    }

    /// Builds an untrained forecaster. `seed` is mixed into the seeds of
    /// randomised models.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Forecaster>> {
        let k = self.target_index;
        let model: Box<dyn Forecaster> = match &self.model {
            ForecasterSpec::Arima {
                order,
                seasonal_order,
                intercept,
            } => {
                let mut o = SarimaOrders::arima(order[0], order[1], order[2]).with_intercept(*intercept);
                if let Some([p, d, q, m]) = seasonal_order {
                    o = o.seasonal(*p, *d, *q, *m);
                }
                o.validate()?;
                Box::new(Sarima::new(o, k))
            }
            ForecasterSpec::AutoSarima(cfg) => Box::new(AutoSarima::new(cfg.clone(), k)),
            ForecasterSpec::Ets(spec) => Box::new(Ets::new(*spec, k)),
            ForecasterSpec::AutoEts(cfg) => Box::new(AutoEts::new(cfg.clone(), k)),
            ForecasterSpec::Var { max_order } => Box::new(Var::new(*max_order, k)),
            ForecasterSpec::Gb(cfg) | ForecasterSpec::Rf(cfg) => {
                let kind = if matches!(self.model, ForecasterSpec::Gb(_)) {
                    EnsembleKind::GradientBoosting
                } else {
                    EnsembleKind::RandomForest
                };
                let cfg = TreeConfig {
                    seed: cfg.seed.wrapping_add(seed),
                    ..*cfg
                };
                Box::new(TreeForecaster::new(kind, cfg, k))
            }
            ForecasterSpec::Ensemble { members, combiner } => {
                if members.is_empty() {
                    return Err(Error::Spec("ensemble needs at least one member".into()));
                }
                if let Some(m) = members.iter().find(|m| m.target_index != k) {
                    return Err(Error::Spec(format!(
                        "ensemble member '{}' predicts index {} but the ensemble predicts {k}",
                        m.label(),
                        m.target_index
                    )));
                }
                let built = members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| Ok((m.label(), m.build(seed.wrapping_add(i as u64))?)))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(ForecasterEnsemble::new(built, combiner.clone(), k)?)
            }
        };
        if self.transform.is_empty() {
            Ok(model)
        } else {
            Ok(Box::new(Transformed::new(model, TransformChain::new(self.transform.clone()))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_json() {
        let c: ForecasterConfig = serde_json::from_str(
            r#"{"kind":"arima","order":[2,1,1],"transform":[{"kind":"normalize"}],"target_index":0}"#,
        )
        .unwrap();
        assert_eq!(c.label(), "arima");
        assert_eq!(c.transform, vec![TransformKind::Normalize]);
        assert!(matches!(c.model, ForecasterSpec::Arima { order: [2, 1, 1], intercept: true, .. }));

        let g: ForecasterConfig = serde_json::from_str(r#"{"kind":"gb","n_trees":5}"#).unwrap();
        assert!(matches!(g.model, ForecasterSpec::Gb(TreeConfig { n_trees: 5, max_lags: 21, .. })));

        let e: ForecasterConfig = serde_json::from_str(
            r#"{"kind":"ensemble","members":[{"kind":"ets"},{"kind":"auto-ets"}],"combiner":{"mode":"median"}}"#,
        )
        .unwrap();
        assert_eq!(e.build(0).unwrap().name(), "ensemble");
    }

    #[test]
    fn round_trips() {
        for text in [
            r#"{"kind":"var","max_order":3}"#,
            r#"{"kind":"auto-sarima"}"#,
            r#"{"kind":"rf","seed":4}"#,
            r#"{"kind":"ets","trend":"additive","season":{"additive":4}}"#,
        ] {
            let c: ForecasterConfig = serde_json::from_str(text).unwrap();
            let back: ForecasterConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(c, back);
            assert!(c.build(1).is_ok());
        }
    }

    #[test]
    fn mismatched_member_target_is_rejected() {
        let mut member = ForecasterConfig::new(ForecasterSpec::Var { max_order: 1 });
        member.target_index = 1;
        let ens = ForecasterConfig::new(ForecasterSpec::Ensemble {
            members: vec![member],
            combiner: Combiner::Mean,
        });
        assert!(ens.build(0).is_err());
    }
}
