#![allow(dead_code)]

use rand::Rng;
use swi_core::model::Dims;
use swi_core::{ModelKind, SwiModel};

/// Factor row read directly from the `[bias | linear | factors | pairs]`
/// layout, without going through the model's accessors.
fn row(model: &SwiModel, word: u32, distance: usize) -> Vec<f64> {
    let Dims { n, k, t, .. } = *model.dims();
    let slots = if model.kind() == ModelKind::Pfm { t } else { 1 };
    let slot = if model.kind() == ModelKind::Pfm {
        distance - 1
    } else {
        0
    };
    let start = 1 + n + (word as usize * slots + slot) * k;
    model.params()[start..start + k].to_vec()
}

/// Double-loop logit: every ordered position pair i < j, filtered by the
/// kind's window, with the dot product spelled out.
pub fn brute_force_logit(model: &SwiModel, tokens: &[u32]) -> f64 {
    let params = model.params();
    let mut total = params[0];
    for &w in tokens {
        total += params[1 + w as usize];
    }
    let t = model.dims().t;
    for i in 0..tokens.len() {
        for j in (i + 1)..tokens.len() {
            let d = j - i;
            let counted = match model.kind() {
                ModelKind::Fm => true,
                ModelKind::Cfm | ModelKind::Pfm => d <= t,
                _ => false,
            };
            if counted {
                let (a, b) = (row(model, tokens[i], d), row(model, tokens[j], d));
                let mut dot = 0.0;
                for l in 0..a.len() {
                    dot += a[l] * b[l];
                }
                total += dot;
            }
        }
    }
    total
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random model with every parameter drawn uniformly from [-1, 1].
pub fn random_model(kind: ModelKind, n: usize, k: usize, t: usize, rng: &mut impl Rng) -> SwiModel {
    let dims = Dims::for_kind(kind, n, k, t, 64).unwrap();
    let mut m = SwiModel::zeros(kind, dims);
    for p in m.params_mut() {
        *p = rng.random_range(-1.0..1.0);
    }
    m
}

pub fn random_doc(n: usize, max_len: usize, rng: &mut impl Rng) -> Vec<u32> {
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| rng.random_range(0..n as u32)).collect()
}

/// PFM whose distance slices are all copies of `cfm`'s factor table.
pub fn tied_pfm(cfm: &SwiModel) -> SwiModel {
    let Dims { n, k, t, .. } = *cfm.dims();
    let mut pfm = SwiModel::zeros(
        ModelKind::Pfm,
        Dims::for_kind(ModelKind::Pfm, n, k, t, 0).unwrap(),
    );
    pfm.set_bias(cfm.bias());
    for w in 0..n as u32 {
        pfm.set_linear(w, cfm.linear(w));
        let v = cfm.factor(w, None).unwrap().to_vec();
        for d in 1..=t {
            pfm.set_factor(w, Some(d), &v).unwrap();
        }
    }
    pfm
}
