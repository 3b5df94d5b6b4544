//! Adam and Rprop update rules for the full-batch overfit loop.
//!
//! The Rprop variant is iRprop-: on a gradient sign flip the step size
//! shrinks and the update is skipped (gradient zeroed), with no weight
//! revert. Both optimizers keep per-parameter state buffers shaped exactly
//! like the parameter blocks they drive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ActivationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Rprop,
}

impl OptimizerKind {
    pub fn tag(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Rprop => "rprop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpropConfig {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_init: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Adam(AdamConfig),
    Rprop(RpropConfig),
}

impl OptimizerConfig {
    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerConfig::Adam(_) => OptimizerKind::Adam,
            OptimizerConfig::Rprop(_) => OptimizerKind::Rprop,
        }
    }

    /// Learning rate for report columns; Rprop reports its initial step size.
    pub fn learning_rate(&self) -> f64 {
        match self {
            OptimizerConfig::Adam(c) => c.learning_rate,
            OptimizerConfig::Rprop(c) => c.delta_init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::Adam(c) => {
                if !(c.learning_rate > 0.0) {
                    return Err(Error::Config("adam learning rate must be positive".into()));
                }
                if !(0.0 < c.beta1 && c.beta1 < c.beta2 && c.beta2 < 1.0) {
                    return Err(Error::Config(format!(
                        "adam betas must satisfy 0 < b1 < b2 < 1, got ({}, {})",
                        c.beta1, c.beta2
                    )));
                }
                if !(c.epsilon > 0.0) {
                    return Err(Error::Config("adam epsilon must be positive".into()));
                }
                Ok(())
            }
            OptimizerConfig::Rprop(c) => {
                if !(c.eta_minus < 1.0 && 1.0 < c.eta_plus) {
                    return Err(Error::Config(format!(
                        "rprop needs eta_minus < 1 < eta_plus, got ({}, {})",
                        c.eta_minus, c.eta_plus
                    )));
                }
                if !(c.eta_minus > 0.0) {
                    return Err(Error::Config("rprop eta_minus must be positive".into()));
                }
                if !(c.delta_min <= c.delta_init && c.delta_init <= c.delta_max) {
                    return Err(Error::Config(format!(
                        "rprop needs delta_min <= delta_init <= delta_max, got ({}, {}, {})",
                        c.delta_min, c.delta_init, c.delta_max
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Per-architecture defaults: Adam 1e-3, dropped to 1e-4 for sine networks,
/// which are noticeably learning-rate sensitive.
pub fn default_config(arch: ActivationKind, kind: OptimizerKind) -> OptimizerConfig {
    match kind {
        OptimizerKind::Adam => OptimizerConfig::Adam(AdamConfig {
            learning_rate: match arch {
                ActivationKind::Sine => 1e-4,
                _ => 1e-3,
            },
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }),
        OptimizerKind::Rprop => OptimizerConfig::Rprop(RpropConfig {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_init: 1e-3,
            delta_min: 1e-8,
            delta_max: 1.0,
        }),
    }
}

/// One named slice of parameters paired with its gradient.
pub struct ParamBlock<'a> {
    pub name: &'a str,
    pub params: &'a mut [f64],
    pub grads: &'a [f64],
}

enum BlockState {
    Adam { m: Vec<f64>, v: Vec<f64> },
    Rprop { prev_grad: Vec<f64>, step: Vec<f64> },
}

/// Stateful optimizer owned by a single training loop.
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    blocks: Vec<BlockState>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer {
            config,
            steps: 0,
            blocks: Vec::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Applies one update across all blocks. Blocks must be passed in the
    /// same order (and with the same shapes) every step.
    pub fn step(&mut self, blocks: &mut [ParamBlock<'_>]) -> Result<()> {
        for block in blocks.iter() {
            if block.grads.len() != block.params.len() {
                return Err(Error::shape(
                    "optimizer step",
                    format!("{} params {}", block.name, block.params.len()),
                    format!("grads {}", block.grads.len()),
                ));
            }
            if !block.grads.iter().all(|g| g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of block {}", block.name)));
            }
        }
        if self.blocks.is_empty() {
            for block in blocks.iter() {
                let n = block.params.len();
                self.blocks.push(match self.config {
                    OptimizerConfig::Adam(_) => BlockState::Adam {
                        m: vec![0.0; n],
                        v: vec![0.0; n],
                    },
                    OptimizerConfig::Rprop(c) => BlockState::Rprop {
                        prev_grad: vec![0.0; n],
                        step: vec![c.delta_init; n],
                    },
                });
            }
        }
        if self.blocks.len() != blocks.len() {
            return Err(Error::shape(
                "optimizer step",
                format!("state blocks {}", self.blocks.len()),
                format!("param blocks {}", blocks.len()),
            ));
        }
        self.steps += 1;

        match self.config {
            OptimizerConfig::Adam(cfg) => {
                let t = self.steps as i32;
                let bias1 = 1.0 - cfg.beta1.powi(t);
                let bias2 = 1.0 - cfg.beta2.powi(t);
                for (state, block) in self.blocks.iter_mut().zip(blocks.iter_mut()) {
                    let BlockState::Adam { m, v } = state else {
                        unreachable!("state kind fixed at construction")
                    };
                    for i in 0..block.params.len() {
                        let g = block.grads[i];
                        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                        let m_hat = m[i] / bias1;
                        let v_hat = v[i] / bias2;
                        block.params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
                    }
                }
            }
            OptimizerConfig::Rprop(cfg) => {
                for (state, block) in self.blocks.iter_mut().zip(blocks.iter_mut()) {
                    let BlockState::Rprop { prev_grad, step } = state else {
                        unreachable!("state kind fixed at construction")
                    };
                    for i in 0..block.params.len() {
                        let mut g = block.grads[i];
                        let sign_product = prev_grad[i] * g;
                        if sign_product > 0.0 {
                            step[i] = (step[i] * cfg.eta_plus).min(cfg.delta_max);
                        } else if sign_product < 0.0 {
                            step[i] = (step[i] * cfg.eta_minus).max(cfg.delta_min);
                            g = 0.0; // skip the update after a sign flip
                        }
                        if g > 0.0 {
                            block.params[i] -= step[i];
                        } else if g < 0.0 {
                            block.params[i] += step[i];
                        }
                        prev_grad[i] = g;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adam_default() -> OptimizerConfig {
        default_config(ActivationKind::Relu, OptimizerKind::Adam)
    }

    fn rprop_default() -> OptimizerConfig {
        default_config(ActivationKind::Relu, OptimizerKind::Rprop)
    }

    #[test]
    fn default_configs_match_architecture() {
        match default_config(ActivationKind::Sine, OptimizerKind::Adam) {
            OptimizerConfig::Adam(c) => assert_eq!(c.learning_rate, 1e-4),
            _ => panic!("expected adam"),
        }
        match adam_default() {
            OptimizerConfig::Adam(c) => {
                assert_eq!(c.learning_rate, 1e-3);
                assert_eq!((c.beta1, c.beta2, c.epsilon), (0.9, 0.999, 1e-8));
            }
            _ => panic!("expected adam"),
        }
        match rprop_default() {
            OptimizerConfig::Rprop(c) => {
                assert_eq!((c.eta_plus, c.eta_minus), (1.2, 0.5));
                assert_eq!((c.delta_init, c.delta_min, c.delta_max), (1e-3, 1e-8, 1.0));
            }
            _ => panic!("expected rprop"),
        }
    }

    #[test]
    fn adam_first_step_is_approximately_learning_rate() {
        let mut opt = Optimizer::new(OptimizerConfig::Adam(AdamConfig {
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }))
        .unwrap();
        let mut theta = [1.0];
        opt.step(&mut [ParamBlock {
            name: "theta",
            params: &mut theta,
            grads: &[1.0],
        }])
        .unwrap();
        // bias correction makes the first step ~ -lr * g/|g|
        assert!((theta[0] - 0.9).abs() < 1e-8, "theta = {}", theta[0]);
    }

    #[test]
    fn rprop_step_size_grows_on_repeated_sign() {
        let cfg = RpropConfig {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_init: 0.1,
            delta_min: 1e-8,
            delta_max: 1.0,
        };
        let mut opt = Optimizer::new(OptimizerConfig::Rprop(cfg)).unwrap();
        let mut theta = [0.0];
        opt.step(&mut [ParamBlock {
            name: "theta",
            params: &mut theta,
            grads: &[1.0],
        }])
        .unwrap();
        assert_eq!(theta[0], -0.1);
        opt.step(&mut [ParamBlock {
            name: "theta",
            params: &mut theta,
            grads: &[1.0],
        }])
        .unwrap();
        // same sign: step grew by eta_plus
        assert!((theta[0] - (-0.1 - 0.12)).abs() < 1e-12);
    }

    #[test]
    fn rprop_sign_flip_shrinks_and_skips() {
        let cfg = RpropConfig {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_init: 0.1,
            delta_min: 1e-8,
            delta_max: 1.0,
        };
        let mut opt = Optimizer::new(OptimizerConfig::Rprop(cfg)).unwrap();
        let mut theta = [0.0];
        let run = |opt: &mut Optimizer, theta: &mut [f64], g: f64| {
            opt.step(&mut [ParamBlock {
                name: "theta",
                params: theta,
                grads: &[g],
            }])
            .unwrap();
        };
        run(&mut opt, &mut theta, 1.0);
        let after_first = theta[0];
        run(&mut opt, &mut theta, -1.0);
        // flip: no movement this step
        assert_eq!(theta[0], after_first);
        // next step uses the shrunk size (prev grad was zeroed, so no growth)
        run(&mut opt, &mut theta, -1.0);
        assert!((theta[0] - (after_first + 0.05)).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        for config in [adam_default(), rprop_default()] {
            let mut opt = Optimizer::new(config).unwrap();
            let mut theta = [0.7, -0.3];
            opt.step(&mut [ParamBlock {
                name: "theta",
                params: &mut theta,
                grads: &[0.0, 0.0],
            }])
            .unwrap();
            assert_eq!(theta, [0.7, -0.3]);
        }
    }

    #[test]
    fn both_optimizers_converge_on_quadratic() {
        // f(theta) = theta^2 / 2, gradient = theta
        for config in [adam_default(), rprop_default()] {
            let mut opt = Optimizer::new(config).unwrap();
            let mut theta = [1.0];
            for _ in 0..1000 {
                let g = [theta[0]];
                opt.step(&mut [ParamBlock {
                    name: "theta",
                    params: &mut theta,
                    grads: &g,
                }])
                .unwrap();
            }
            assert!(
                theta[0].abs() < 1e-3,
                "{:?} did not converge: {}",
                config.kind(),
                theta[0]
            );
        }
    }

    #[test]
    fn rprop_moves_stay_within_step_bounds() {
        let cfg = RpropConfig {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_init: 1e-3,
            delta_min: 1e-4,
            delta_max: 1e-2,
        };
        let mut opt = Optimizer::new(OptimizerConfig::Rprop(cfg)).unwrap();
        let mut theta = [0.4];
        let mut prev = theta[0];
        // oscillating gradients exercise both growth and backtracking
        for k in 0..200 {
            let g = [if k % 3 == 2 { -theta[0] } else { theta[0] }];
            opt.step(&mut [ParamBlock {
                name: "theta",
                params: &mut theta,
                grads: &g,
            }])
            .unwrap();
            let moved = (theta[0] - prev).abs();
            assert!(
                moved == 0.0 || (cfg.delta_min..=cfg.delta_max).contains(&moved),
                "step {k} moved {moved}"
            );
            prev = theta[0];
        }
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut opt = Optimizer::new(adam_default()).unwrap();
            let mut theta = [0.5, -0.25, 0.125];
            for k in 0..50 {
                let g: Vec<f64> = theta.iter().map(|t| t * (k as f64 * 0.1).sin()).collect();
                opt.step(&mut [ParamBlock {
                    name: "theta",
                    params: &mut theta,
                    grads: &g,
                }])
                .unwrap();
            }
            theta
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_names_the_block() {
        let mut opt = Optimizer::new(adam_default()).unwrap();
        let mut theta = [1.0];
        let err = opt
            .step(&mut [ParamBlock {
                name: "layer0.weight",
                params: &mut theta,
                grads: &[f64::NAN],
            }])
            .unwrap_err();
        assert!(err.to_string().contains("layer0.weight"), "{err}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(Optimizer::new(OptimizerConfig::Adam(AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.999,
            beta2: 0.9,
            epsilon: 1e-8,
        }))
        .is_err());
        assert!(Optimizer::new(OptimizerConfig::Rprop(RpropConfig {
            eta_plus: 0.9,
            eta_minus: 0.5,
            delta_init: 1e-3,
            delta_min: 1e-8,
            delta_max: 1.0,
        }))
        .is_err());
        assert!(Optimizer::new(OptimizerConfig::Rprop(RpropConfig {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_init: 2.0,
            delta_min: 1e-8,
            delta_max: 1.0,
        }))
        .is_err());
    }
}
