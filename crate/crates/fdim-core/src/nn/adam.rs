//! Adam optimizer with L2 weight decay folded into the gradient.

use ndarray::ArrayD;

use crate::tensor::Scalar;

use super::store::{GradVec, ParamStore};

pub struct Adam<T: Scalar> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: usize,
    m: Vec<Option<ArrayD<T>>>,
    v: Vec<Option<ArrayD<T>>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, betas: (f64, f64), weight_decay: f64, store: &ParamStore<T>) -> Self {
        Adam {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: (0..store.len()).map(|_| None).collect(),
            v: (0..store.len()).map(|_| None).collect(),
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Apply one update. Parameters without a gradient are left untouched.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &GradVec<T>) {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let one_m_b1 = T::from_f64(1.0 - self.beta1);
        let one_m_b2 = T::from_f64(1.0 - self.beta2);
        let wd = T::from_f64(self.weight_decay);
        let step_size = T::from_f64(self.lr / bc1);
        let denom_scale = T::from_f64(1.0 / bc2.sqrt());
        let eps = T::from_f64(self.eps);

        let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
        for id in ids {
            let Some(g) = grads.get(id) else { continue };
            if !store.is_trainable(id) {
                continue;
            }
            let mut value = store.value(id).to_owned();
            // L2 weight decay contributes wd*w to the gradient
            let g_eff: ArrayD<T> = if self.weight_decay != 0.0 {
                g + &value.mapv(|w| w * wd)
            } else {
                g.clone()
            };

            let m = self.m[id.0].get_or_insert_with(|| ArrayD::zeros(g_eff.raw_dim()));
            let v = self.v[id.0].get_or_insert_with(|| ArrayD::zeros(g_eff.raw_dim()));
            ndarray::Zip::from(&mut *m).and(&g_eff).for_each(|m, &g| {
                *m = *m * b1 + g * one_m_b1;
            });
            ndarray::Zip::from(&mut *v).and(&g_eff).for_each(|v, &g| {
                *v = *v * b2 + g * g * one_m_b2;
            });
            ndarray::Zip::from(&mut value)
                .and(&*m)
                .and(&*v)
                .for_each(|w, &m, &v| {
                    let denom = (v.sqrt() * denom_scale) + eps;
                    *w = *w - step_size * m / denom;
                });
            store.set_value(id, value);
        }
    }
}
