use super::{Gradients, Mlp};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    first: Gradients,
    second: Gradients,
    step_count: u64,
}

impl Adam {
    pub fn new(net: &Mlp) -> Self {
        Adam {
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if !grads.congruent_with(net) || !self.first.congruent_with(net) {
            return Err(Error::Config("gradient shapes do not match the network".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFiniteGradient {
                component: "combined".into(),
                detail: "optimizer received a non-finite gradient".into(),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let g = &grads.layers[li];
            let m = &mut self.first.layers[li];
            let v = &mut self.second.layers[li];
            update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights, lr, c1, c2);
            update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias, lr, c1, c2);
        }
        net.touch();
        if !net.is_finite() {
            return Err(Error::Divergence {
                step: self.step_count as usize,
                detail: "parameters became non-finite after the optimizer step".into(),
            });
        }
        Ok(())
    }
}

fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    let step = lr / c1;
    let inv_c2 = 1.0 / c2;
    for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= step * *m / ((*v * inv_c2).sqrt() + EPSILON);
    }
}
