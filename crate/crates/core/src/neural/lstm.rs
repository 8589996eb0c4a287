//! A single-direction LSTM over a short sequence, with the exact backward
//! pass. Gate preactivations are laid out [input; forget; cell; output] in
//! blocks of the hidden size. Initial hidden and cell states are zero.

use super::math::{add_assign, matvec_acc, matvec_t_acc, outer_acc, sigmoid};

/// Borrowed weight views into the flat parameter vector.
#[derive(Clone, Copy)]
pub struct LstmWeights<'a> {
    pub wx: &'a [f64], // 4H×I
    pub wh: &'a [f64], // 4H×H
    pub b: &'a [f64],  // 4H
    pub in_dim: usize,
    pub hidden: usize,
}

/// Mutable gradient views, same shapes as the weights.
pub struct LstmGrads<'a> {
    pub wx: &'a mut [f64],
    pub wh: &'a mut [f64],
    pub b: &'a mut [f64],
}

/// Per-step activations cached for the backward pass.
#[derive(Debug, Default, Clone)]
pub struct LstmTrace {
    pub i: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub o: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub tanh_c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn final_h(&self) -> &[f64] {
        self.h.last().expect("empty LSTM trace")
    }
}

pub fn lstm_forward(w: &LstmWeights, inputs: &[Vec<f64>]) -> LstmTrace {
    let hid = w.hidden;
    let mut trace = LstmTrace::default();
    let zeros = vec![0.0; hid];
    for (t, x) in inputs.iter().enumerate() {
        debug_assert_eq!(x.len(), w.in_dim);
        let h_prev = if t == 0 { &zeros } else { &trace.h[t - 1] };
        let c_prev = if t == 0 { &zeros } else { &trace.c[t - 1] };
        let mut z = w.b.to_vec();
        matvec_acc(w.wx, 4 * hid, w.in_dim, x, &mut z);
        matvec_acc(w.wh, 4 * hid, hid, h_prev, &mut z);
        let mut gi = vec![0.0; hid];
        let mut gf = vec![0.0; hid];
        let mut gg = vec![0.0; hid];
        let mut go = vec![0.0; hid];
        let mut c = vec![0.0; hid];
        let mut tanh_c = vec![0.0; hid];
        let mut h = vec![0.0; hid];
        for k in 0..hid {
            gi[k] = sigmoid(z[k]);
            gf[k] = sigmoid(z[hid + k]);
            gg[k] = z[2 * hid + k].tanh();
            go[k] = sigmoid(z[3 * hid + k]);
            c[k] = gf[k] * c_prev[k] + gi[k] * gg[k];
            tanh_c[k] = c[k].tanh();
            h[k] = go[k] * tanh_c[k];
        }
        trace.i.push(gi);
        trace.f.push(gf);
        trace.g.push(gg);
        trace.o.push(go);
        trace.c.push(c);
        trace.tanh_c.push(tanh_c);
        trace.h.push(h);
    }
    trace
}

/// Backpropagate through the sequence. `dh_out[t]` is the gradient flowing
/// into `h[t]` from outside the recurrence; `dx[t]` accumulates the gradient
/// with respect to `inputs[t]`.
pub fn lstm_backward(
    w: &LstmWeights,
    inputs: &[Vec<f64>],
    trace: &LstmTrace,
    dh_out: &[Vec<f64>],
    grads: &mut LstmGrads,
    dx: &mut [Vec<f64>],
) {
    let hid = w.hidden;
    let n = inputs.len();
    debug_assert_eq!(trace.len(), n);
    debug_assert_eq!(dh_out.len(), n);
    let zeros = vec![0.0; hid];
    let mut dh_next = vec![0.0; hid];
    let mut dc_next = vec![0.0; hid];
    let mut dz = vec![0.0; 4 * hid];
    for t in (0..n).rev() {
        let h_prev = if t == 0 { &zeros } else { &trace.h[t - 1] };
        let c_prev = if t == 0 { &zeros } else { &trace.c[t - 1] };
        let mut dc = dc_next.clone();
        for k in 0..hid {
            let dh = dh_out[t][k] + dh_next[k];
            let o = trace.o[t][k];
            let tc = trace.tanh_c[t][k];
            let do_ = dh * tc;
            dc[k] += dh * o * (1.0 - tc * tc);
            let i = trace.i[t][k];
            let f = trace.f[t][k];
            let g = trace.g[t][k];
            let di = dc[k] * g;
            let dg = dc[k] * i;
            let df = dc[k] * c_prev[k];
            dz[k] = di * i * (1.0 - i);
            dz[hid + k] = df * f * (1.0 - f);
            dz[2 * hid + k] = dg * (1.0 - g * g);
            dz[3 * hid + k] = do_ * o * (1.0 - o);
            dc_next[k] = dc[k] * f;
        }
        outer_acc(grads.wx, &dz, &inputs[t]);
        outer_acc(grads.wh, &dz, h_prev);
        add_assign(grads.b, &dz);
        matvec_t_acc(w.wx, 4 * hid, w.in_dim, &dz, &mut dx[t]);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_acc(w.wh, 4 * hid, hid, &dz, &mut dh_next);
    }
}
