//! Independent numerical oracles for tests.
//!
//! Only compiled for test builds (the crate enables its own `testutil`
//! feature through a dev-dependency on itself). Everything here is written
//! against the public parameter accessors and deliberately avoids the
//! production forward/backward code paths it is used to check.

use crate::nn::{Activation, Gradients, Mlp};
use rand::Rng;

/// Relative error with an absolute floor: tiny gradients are compared
/// absolutely at 1e-7 rather than amplifying float noise.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(analytic.abs() + numeric.abs(), 1e-3)
}

/// Forward pass recomputed with explicit nested loops and direct indexing.
pub fn loop_forward_oracle(net: &Mlp, input: &[f64]) -> Vec<f64> {
    let dims = net.layer_dims();
    let mut cur = input.to_vec();
    for l in 0..dims.len() - 1 {
        let (w, b) = net.layer(l);
        let (in_dim, out_dim) = (dims[l], dims[l + 1]);
        let mut next = vec![0.0; out_dim];
        for j in 0..out_dim {
            let mut z = b[j];
            for i in 0..in_dim {
                z += w[j * in_dim + i] * cur[i];
            }
            let act = if l + 1 == dims.len() - 1 {
                net.output_activation()
            } else {
                net.hidden_activation()
            };
            next[j] = match act {
                Activation::Relu => z.max(0.0),
                Activation::Tanh => z.tanh(),
                Activation::Identity => z,
            };
        }
        cur = next;
    }
    cur
}

/// Random layer dims with 1–2 hidden layers, every width ≤ 8.
pub fn random_small_dims(rng: &mut impl Rng) -> Vec<usize> {
    let n_hidden = rng.random_range(1..=2);
    let mut dims = vec![rng.random_range(1..=8usize)];
    for _ in 0..n_hidden {
        dims.push(rng.random_range(1..=8usize));
    }
    dims.push(rng.random_range(1..=8usize));
    dims
}

/// Central finite differences of an arbitrary scalar function of the
/// model parameters, evaluated over every parameter.
pub fn finite_diff_params<F>(net: &Mlp, mut f: F, h: f64) -> Vec<f64>
where
    F: FnMut(&Mlp) -> f64,
{
    let base = net.flat_params();
    let mut grad = vec![0.0; base.len()];
    let mut probe = net.clone();
    for k in 0..base.len() {
        let mut plus = base.clone();
        plus[k] += h;
        probe.set_flat_params(&plus).unwrap();
        let fp = f(&probe);
        let mut minus = base.clone();
        minus[k] -= h;
        probe.set_flat_params(&minus).unwrap();
        let fm = f(&probe);
        grad[k] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Worst relative error between analytic parameter gradients and the
/// central-difference gradient of `loss_fn`.
pub fn max_param_grad_err<F>(net: &Mlp, analytic: &Gradients, loss_fn: F) -> f64
where
    F: FnMut(&Mlp) -> f64,
{
    let numeric = finite_diff_params(net, loss_fn, 1e-5);
    let flat = flatten_gradients(net, analytic);
    flat.iter()
        .zip(numeric.iter())
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0_f64, f64::max)
}

/// Flatten gradients in the same order as [`Mlp::flat_params`].
pub fn flatten_gradients(net: &Mlp, grads: &Gradients) -> Vec<f64> {
    let mut out = Vec::with_capacity(net.param_count());
    for l in 0..net.num_layers() {
        out.extend_from_slice(&grads.weights[l]);
        out.extend_from_slice(&grads.biases[l]);
    }
    out
}

/// Check `backward` for the linear loss L = sum_j out_grad_j * y_j against
/// finite differences over parameters and input. Returns the worst
/// relative error.
pub fn finite_diff_check(net: &Mlp, input: &[f64], out_grad: &[f64]) -> f64 {
    let loss = |m: &Mlp| -> f64 {
        let y = loop_forward_oracle(m, input);
        y.iter().zip(out_grad.iter()).map(|(yi, gi)| yi * gi).sum()
    };
    let (grads, input_grad) = net.backward(input, out_grad).unwrap();
    let mut worst = max_param_grad_err(net, &grads, loss);

    // input gradient
    let h = 1e-5;
    for i in 0..input.len() {
        let mut xp = input.to_vec();
        xp[i] += h;
        let mut xm = input.to_vec();
        xm[i] -= h;
        let fp: f64 = loop_forward_oracle(net, &xp)
            .iter()
            .zip(out_grad.iter())
            .map(|(y, g)| y * g)
            .sum();
        let fm: f64 = loop_forward_oracle(net, &xm)
            .iter()
            .zip(out_grad.iter())
            .map(|(y, g)| y * g)
            .sum();
        let numeric = (fp - fm) / (2.0 * h);
        worst = worst.max(rel_err(input_grad[i], numeric));
    }
    worst
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma).powi(2);
        vb += (rb[i] - mb).powi(2);
    }
    cov / (va.sqrt() * vb.sqrt())
}
